//! Ordinary least squares fitting of structural equations.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::graph::{CausalGraph, VariableRole};
use super::model::{FitStats, FittedScm, StructuralEquation};
use super::world::Individual;
use super::ScmError;
use crate::value::Value;

/// Condition numbers above this are treated as a singular design.
const MAX_CONDITION: f64 = 1e12;

/// Resolves one expanded regressor column for a row.
///
/// `name=level` keys are one-hot indicators on a categorical protected
/// variable; plain keys read the continuous value from the protected profile
/// or the snapshot, whichever holds the variable.
pub(crate) fn regressor_value(
    graph: &CausalGraph,
    key: &str,
    protected: &BTreeMap<String, Value>,
    observables: &BTreeMap<String, f64>,
) -> Result<f64, ScmError> {
    if let Some((name, level)) = key.split_once('=') {
        let value = protected.get(name).ok_or_else(|| ScmError::MissingValue {
            variable: name.to_string(),
        })?;
        let spec = graph.variable(name).ok_or_else(|| ScmError::DanglingEdge {
            name: name.to_string(),
        })?;
        spec.check_value(value)?;
        let got = value.as_level().expect("checked categorical");
        return Ok(if got == level { 1.0 } else { 0.0 });
    }
    let spec = graph.variable(key).ok_or_else(|| ScmError::DanglingEdge {
        name: key.to_string(),
    })?;
    match spec.role {
        VariableRole::Protected => protected
            .get(key)
            .and_then(Value::as_continuous)
            .ok_or_else(|| ScmError::MissingValue {
                variable: key.to_string(),
            }),
        _ => observables
            .get(key)
            .copied()
            .ok_or_else(|| ScmError::MissingValue {
                variable: key.to_string(),
            }),
    }
}

struct OlsFit {
    intercept: f64,
    weights: Vec<f64>,
    residual_variance: f64,
    samples: usize,
}

/// Solves the normal equations for one child over prepared rows.
///
/// Rows carry the expanded regressor values (no intercept column); `targets`
/// the observed child values. Rejects under-determined systems and designs
/// whose condition number exceeds 1e12.
fn ols(child: &str, rows: &[Vec<f64>], targets: &[f64]) -> Result<OlsFit, ScmError> {
    let n = rows.len();
    let p = rows.first().map(|r| r.len()).unwrap_or(0) + 1;
    if n < p {
        return Err(ScmError::InsufficientData {
            child: child.to_string(),
            n,
            p,
        });
    }
    let x = DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { rows[i][j - 1] });
    let y = DVector::from_column_slice(targets);
    let xtx = x.transpose() * &x;
    let xty = x.transpose() * &y;

    let eigen = xtx.clone().symmetric_eigen();
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for &ev in eigen.eigenvalues.iter() {
        lo = lo.min(ev);
        hi = hi.max(ev);
    }
    // cond(X) = sqrt(λmax/λmin) of XᵀX.
    if lo <= 0.0 || (hi / lo).sqrt() > MAX_CONDITION {
        return Err(ScmError::SingularDesign {
            child: child.to_string(),
        });
    }

    let chol = xtx.cholesky().ok_or_else(|| ScmError::SingularDesign {
        child: child.to_string(),
    })?;
    let beta = chol.solve(&xty);

    let fitted = &x * &beta;
    let resid = &y - fitted;
    let residual_variance = resid.iter().map(|r| r * r).sum::<f64>() / n as f64;

    Ok(OlsFit {
        intercept: beta[0],
        weights: beta.iter().skip(1).copied().collect(),
        residual_variance,
        samples: n,
    })
}

impl FittedScm {
    /// Fits every structural equation by ordinary least squares.
    ///
    /// Each observable child gets one equation over its expanded parent
    /// columns; every snapshot of every individual contributes a row. When
    /// the graph declares an outcome variable and at least one individual
    /// records an outcome, the outcome equation is fitted too, one row per
    /// such individual taken at their latest snapshot. The noise scale of
    /// each equation is the root mean squared residual.
    pub fn fit(graph: CausalGraph, individuals: &[Individual]) -> Result<Self, ScmError> {
        graph.validate()?;
        let mut equations = Vec::new();
        let mut stats = BTreeMap::new();

        for spec in graph.observable_variables() {
            let keys = graph.equation_keys(&spec.name);
            let mut rows = Vec::new();
            let mut targets = Vec::new();
            for ind in individuals {
                for snap in &ind.snapshots {
                    let target = snap.observables.get(&spec.name).copied().ok_or_else(|| {
                        ScmError::MissingValue {
                            variable: spec.name.clone(),
                        }
                    })?;
                    let row = keys
                        .iter()
                        .map(|k| regressor_value(&graph, k, &ind.protected, &snap.observables))
                        .collect::<Result<Vec<f64>, _>>()?;
                    rows.push(row);
                    targets.push(target);
                }
            }
            let fit = ols(&spec.name, &rows, &targets)?;
            equations.push(StructuralEquation {
                child: spec.name.clone(),
                intercept: fit.intercept,
                weights: keys.iter().cloned().zip(fit.weights).collect(),
                noise_std: fit.residual_variance.sqrt(),
            });
            stats.insert(
                spec.name.clone(),
                FitStats {
                    residual_variance: fit.residual_variance,
                    samples: fit.samples,
                },
            );
        }

        for spec in graph.outcome_variables() {
            let keys = graph.equation_keys(&spec.name);
            let mut rows = Vec::new();
            let mut targets = Vec::new();
            for ind in individuals {
                let (Some(outcome), Some(snap)) = (ind.outcome, ind.latest()) else {
                    continue;
                };
                let row = keys
                    .iter()
                    .map(|k| regressor_value(&graph, k, &ind.protected, &snap.observables))
                    .collect::<Result<Vec<f64>, _>>()?;
                rows.push(row);
                targets.push(outcome);
            }
            if rows.is_empty() {
                continue;
            }
            let fit = ols(&spec.name, &rows, &targets)?;
            equations.push(StructuralEquation {
                child: spec.name.clone(),
                intercept: fit.intercept,
                weights: keys.iter().cloned().zip(fit.weights).collect(),
                noise_std: fit.residual_variance.sqrt(),
            });
            stats.insert(
                spec.name.clone(),
                FitStats {
                    residual_variance: fit.residual_variance,
                    samples: fit.samples,
                },
            );
        }

        Self::with_stats(graph, equations, stats)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scm::{Snapshot, VariableSpec};

    fn proxy_graph() -> CausalGraph {
        CausalGraph::new(
            vec![
                VariableSpec::categorical("a", VariableRole::Protected, &["0", "1"]),
                VariableSpec::continuous("x", VariableRole::Observable),
                VariableSpec::continuous("y", VariableRole::Outcome),
            ],
            vec![("a", "x"), ("x", "y")],
        )
    }

    fn row(id: &str, a: &str, x: f64, y: f64) -> Individual {
        let mut individual = Individual::new(
            id,
            &[("a", Value::from(a))],
            vec![Snapshot::new(0, &[("x", x)])],
        );
        individual.outcome = Some(y);
        individual
    }

    #[test]
    fn noise_free_data_is_recovered_exactly() {
        // x = 1 + 2·[a=1], y = 3x, no noise anywhere.
        let data = vec![
            row("p1", "0", 1.0, 3.0),
            row("p2", "1", 3.0, 9.0),
            row("p3", "0", 1.0, 3.0),
            row("p4", "1", 3.0, 9.0),
        ];
        let scm = FittedScm::fit(proxy_graph(), &data).expect("fits");
        let eq = scm.equation("x").expect("fitted");
        assert!((eq.intercept - 1.0).abs() < 1e-9);
        assert!((eq.weights["a=1"] - 2.0).abs() < 1e-9);
        assert!(eq.noise_std < 1e-9);
        let outcome = scm.equation("y").expect("fitted");
        assert!((outcome.weights["x"] - 3.0).abs() < 1e-9);
        assert_eq!(scm.fit_stats()["x"].samples, 4);
    }

    #[test]
    fn every_snapshot_contributes_a_row() {
        let data = vec![
            Individual::new(
                "p1",
                &[("a", Value::from("0"))],
                vec![Snapshot::new(0, &[("x", 1.0)]), Snapshot::new(1, &[("x", 1.0)])],
            ),
            Individual::new(
                "p2",
                &[("a", Value::from("1"))],
                vec![Snapshot::new(0, &[("x", 3.0)])],
            ),
        ];
        let scm = FittedScm::fit(proxy_graph(), &data).expect("fits");
        assert_eq!(scm.fit_stats()["x"].samples, 3);
        // No individual records an outcome, so no outcome equation is fitted.
        assert!(scm.equation("y").is_none());
    }

    #[test]
    fn too_few_rows_for_the_design_is_an_error() {
        let graph = CausalGraph::new(
            vec![
                VariableSpec::categorical("a", VariableRole::Protected, &["0", "1", "2"]),
                VariableSpec::continuous("x", VariableRole::Observable),
                VariableSpec::continuous("y", VariableRole::Outcome),
            ],
            vec![("a", "x"), ("x", "y")],
        );
        // a expands to two indicator columns plus the intercept: p = 3, n = 2.
        let data = vec![row("p1", "0", 1.0, 1.0), row("p2", "1", 3.0, 3.0)];
        let err = FittedScm::fit(graph, &data).unwrap_err();
        assert!(matches!(
            err,
            ScmError::InsufficientData { n: 2, p: 3, ref child } if child == "x"
        ));
    }

    #[test]
    fn collinear_parents_are_a_singular_design() {
        let graph = CausalGraph::new(
            vec![
                VariableSpec::continuous("a", VariableRole::Protected),
                VariableSpec::continuous("x1", VariableRole::Observable),
                VariableSpec::continuous("x2", VariableRole::Observable),
                VariableSpec::continuous("y", VariableRole::Outcome),
            ],
            vec![("a", "x1"), ("a", "x2"), ("x1", "y"), ("x2", "y")],
        );
        // x2 duplicates x1 everywhere, so y's design matrix loses rank.
        let data: Vec<Individual> = (0..6)
            .map(|i| {
                let v = i as f64;
                let mut ind = Individual::new(
                    &format!("p{i}"),
                    &[("a", Value::from(v))],
                    vec![Snapshot::new(0, &[("x1", v), ("x2", v)])],
                );
                ind.outcome = Some(2.0 * v);
                ind
            })
            .collect();
        let err = FittedScm::fit(graph, &data).unwrap_err();
        assert!(matches!(err, ScmError::SingularDesign { ref child } if child == "y"));
    }

    #[test]
    fn fitting_is_deterministic() {
        let data = vec![
            row("p1", "0", 0.9, 2.8),
            row("p2", "1", 3.2, 9.1),
            row("p3", "0", 1.1, 3.0),
            row("p4", "1", 2.8, 8.8),
        ];
        let first = FittedScm::fit(proxy_graph(), &data).expect("fits");
        let second = FittedScm::fit(proxy_graph(), &data).expect("fits");
        assert_eq!(
            first.to_json(),
            second.to_json()
        );
    }

    #[test]
    fn regressor_value_resolves_indicators_and_continuous_parents() {
        let graph = proxy_graph();
        let mut protected = BTreeMap::new();
        protected.insert("a".to_string(), Value::from("1"));
        let mut observables = BTreeMap::new();
        observables.insert("x".to_string(), 2.5);
        assert_eq!(
            regressor_value(&graph, "a=1", &protected, &observables).unwrap(),
            1.0
        );
        assert_eq!(
            regressor_value(&graph, "a=0", &protected, &observables).unwrap(),
            0.0
        );
        assert_eq!(
            regressor_value(&graph, "x", &protected, &observables).unwrap(),
            2.5
        );
        assert!(regressor_value(&graph, "ghost", &protected, &observables).is_err());
    }
}
