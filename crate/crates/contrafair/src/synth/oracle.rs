//! Brute-force oracles.
//!
//! These re-derive counterfactual worlds by naive recursive substitution over
//! the raw equation list and evaluate the fairness criteria by literal
//! enumeration of every (decision, intervention) comparison. They share no
//! traversal machinery with the main engine — no causal graph, no cached
//! topological order — so agreement between the two in tests is evidence,
//! not tautology. Desk-scale only: the recursion assumes acyclic equations
//! and the criteria oracle refuses domains beyond 16 combinations.

use std::collections::BTreeMap;

use super::SynthError;
use crate::fairness::Tolerance;
use crate::predict::{PredictError, Predictor};
use crate::predict::Feature;
use crate::scm::{Individual, Intervention, ScmError, Snapshot, StructuralEquation};
use crate::value::Value;

const MAX_ORACLE_COMBOS: usize = 16;

/// Resolves one regressor key against a profile and a value lookup for plain
/// names: `name=level` keys become indicators, continuous protected names
/// read the profile, anything else goes through `lookup`.
fn key_value(
    key: &str,
    profile: &BTreeMap<String, Value>,
    lookup: &mut dyn FnMut(&str) -> Result<f64, SynthError>,
) -> Result<f64, SynthError> {
    if let Some((name, level)) = key.split_once('=') {
        let value = profile.get(name).ok_or(ScmError::MissingValue {
            variable: name.to_string(),
        })?;
        return Ok(f64::from(u8::from(value.as_level() == Some(level))));
    }
    if let Some(value) = profile.get(key) {
        return value.as_continuous().ok_or_else(|| {
            ScmError::DomainViolation {
                variable: key.to_string(),
                value: value.to_string(),
            }
            .into()
        });
    }
    lookup(key)
}

/// Noise terms by direct subtraction against the observed snapshot.
fn oracle_abduct(
    equations: &[StructuralEquation],
    individual: &Individual,
    snapshot: &Snapshot,
) -> Result<BTreeMap<String, f64>, SynthError> {
    let mut residuals = BTreeMap::new();
    for eq in equations {
        let observed = snapshot
            .observables
            .get(&eq.child)
            .copied()
            .ok_or(ScmError::MissingValue {
                variable: eq.child.clone(),
            })?;
        let mut predicted = eq.intercept;
        for (key, w) in &eq.weights {
            predicted += w * key_value(key, &individual.protected, &mut |name| {
                snapshot
                    .observables
                    .get(name)
                    .copied()
                    .ok_or_else(|| {
                        ScmError::MissingValue {
                            variable: name.to_string(),
                        }
                        .into()
                    })
            })?;
        }
        residuals.insert(eq.child.clone(), observed - predicted);
    }
    Ok(residuals)
}

/// Evaluates one variable in the intervened world by memoized recursive
/// substitution through the equation list.
fn resolve(
    name: &str,
    equations: &[StructuralEquation],
    profile: &BTreeMap<String, Value>,
    residuals: &BTreeMap<String, f64>,
    memo: &mut BTreeMap<String, f64>,
) -> Result<f64, SynthError> {
    if let Some(v) = memo.get(name) {
        return Ok(*v);
    }
    let eq = equations
        .iter()
        .find(|e| e.child == name)
        .ok_or(ScmError::MissingValue {
            variable: name.to_string(),
        })?;
    let mut sum = eq.intercept;
    for (key, w) in &eq.weights {
        sum += w * key_value(key, profile, &mut |parent| {
            resolve(parent, equations, profile, residuals, memo)
        })?;
    }
    let value = sum + residuals.get(name).copied().unwrap_or(0.0);
    memo.insert(name.to_string(), value);
    Ok(value)
}

/// Ground-truth counterfactual: abduct by subtraction, apply the
/// intervention, recompute every equation child by recursive substitution
/// with the recovered noise held fixed.
///
/// `equations` must be the observable (feature) equations only — outcome
/// equations are never propagated into counterfactual feature worlds.
pub fn oracle_counterfactual(
    equations: &[StructuralEquation],
    individual: &Individual,
    snapshot_index: usize,
    intervention: &Intervention,
) -> Result<Snapshot, SynthError> {
    let snapshot =
        individual
            .snapshots
            .get(snapshot_index)
            .ok_or(ScmError::UnknownSnapshot {
                index: snapshot_index,
                len: individual.snapshots.len(),
            })?;
    let residuals = oracle_abduct(equations, individual, snapshot)?;
    let profile = intervention.merged(&individual.protected);
    let mut memo = BTreeMap::new();
    for eq in equations {
        resolve(&eq.child, equations, &profile, &residuals, &mut memo)?;
    }
    Ok(Snapshot {
        time: snapshot.time,
        observables: memo,
    })
}

/// Which criterion the enumeration oracle should decide.
#[derive(Clone, Debug, PartialEq)]
pub enum OracleCriterion {
    CounterfactualFairness,
    DContrast { d: String, d_prime: String },
    IContrast { d: String, d_prime: String },
    TContrast { t: i64, t_prime: i64, d: String, d_prime: String },
    ContrastMargin { d: String, d_prime: String },
}

/// Cartesian product of candidate protected values by odometer counting —
/// a second, independent enumeration of the protected domain.
fn enumerate_domain(
    domain: &BTreeMap<String, Vec<Value>>,
) -> Result<Vec<BTreeMap<String, Value>>, SynthError> {
    let names: Vec<&String> = domain.keys().collect();
    let sizes: Vec<usize> = names.iter().map(|n| domain[*n].len()).collect();
    let total: usize = sizes.iter().product();
    if total > MAX_ORACLE_COMBOS {
        return Err(SynthError::DomainTooLarge {
            combos: total,
            max: MAX_ORACLE_COMBOS,
        });
    }
    let mut out = Vec::with_capacity(total);
    let mut counter = vec![0usize; names.len()];
    loop {
        out.push(
            names
                .iter()
                .zip(&counter)
                .map(|(name, &idx)| ((*name).clone(), domain[*name][idx].clone()))
                .collect(),
        );
        let mut pos = names.len();
        loop {
            if pos == 0 {
                return Ok(out);
            }
            pos -= 1;
            counter[pos] += 1;
            if counter[pos] < sizes[pos] {
                break;
            }
            counter[pos] = 0;
        }
    }
}

/// Scores one world through the predictor's schema without touching the
/// engine's extraction path.
fn oracle_score(
    predictor: &Predictor,
    profile: &BTreeMap<String, Value>,
    observables: &BTreeMap<String, f64>,
    residuals: &BTreeMap<String, f64>,
) -> Result<Vec<f64>, SynthError> {
    let row: Vec<f64> = predictor
        .input_schema()
        .features()
        .iter()
        .map(|feature| match feature {
            Feature::Observable { name } => {
                observables
                    .get(name)
                    .copied()
                    .ok_or_else(|| -> SynthError {
                        ScmError::MissingValue {
                            variable: name.clone(),
                        }
                        .into()
                    })
            }
            Feature::Protected { key } => key_value(key, profile, &mut |name| {
                Err(ScmError::MissingValue {
                    variable: name.to_string(),
                }
                .into())
            }),
            Feature::Residual { name } => {
                residuals
                    .get(name)
                    .copied()
                    .ok_or_else(|| -> SynthError {
                        ScmError::MissingValue {
                            variable: name.clone(),
                        }
                        .into()
                    })
            }
        })
        .collect::<Result<_, _>>()?;
    Ok(predictor.score_row(&row))
}

struct OracleWorlds<'a> {
    equations: &'a [StructuralEquation],
    predictor: &'a Predictor,
}

impl OracleWorlds<'_> {
    fn factual(&self, individual: &Individual, index: usize) -> Result<Vec<f64>, SynthError> {
        let snapshot = &individual.snapshots[index];
        let residuals = oracle_abduct(self.equations, individual, snapshot)?;
        oracle_score(
            self.predictor,
            &individual.protected,
            &snapshot.observables,
            &residuals,
        )
    }

    fn flipped(
        &self,
        individual: &Individual,
        index: usize,
        assignment: &BTreeMap<String, Value>,
    ) -> Result<Vec<f64>, SynthError> {
        let intervention = Intervention {
            assignments: assignment.clone(),
        };
        let world = oracle_counterfactual(self.equations, individual, index, &intervention)?;
        // Residual inputs stay factual: they are world-invariant.
        let residuals =
            oracle_abduct(self.equations, individual, &individual.snapshots[index])?;
        let profile = intervention.merged(&individual.protected);
        oracle_score(self.predictor, &profile, &world.observables, &residuals)
    }

    /// Score invariance across every snapshot, assignment, and decision.
    fn invariant(
        &self,
        individual: &Individual,
        assignments: &[BTreeMap<String, Value>],
        decisions: Option<&[usize]>,
        eps: f64,
    ) -> Result<bool, SynthError> {
        for index in 0..individual.snapshots.len() {
            let factual = self.factual(individual, index)?;
            for assignment in assignments {
                let flipped = self.flipped(individual, index, assignment)?;
                for (k, (p, q)) in factual.iter().zip(&flipped).enumerate() {
                    if let Some(only) = decisions {
                        if !only.contains(&k) {
                            continue;
                        }
                    }
                    if (p - q).abs() > eps {
                        return Ok(false);
                    }
                }
            }
        }
        Ok(true)
    }
}

fn decision_index(predictor: &Predictor, label: &str) -> Result<usize, SynthError> {
    predictor
        .decision_space()
        .index_of(label)
        .ok_or_else(|| {
            PredictError::SchemaMismatch {
                detail: format!("decision {label} not in the predictor's space"),
            }
            .into()
        })
}

fn tick_index(individual: &Individual, time: i64) -> Result<usize, SynthError> {
    individual
        .snapshots
        .iter()
        .position(|s| s.time == time)
        .ok_or_else(|| {
            ScmError::UnknownSnapshot {
                index: individual.snapshots.len(),
                len: individual.snapshots.len(),
            }
            .into()
        })
}

/// Decides one criterion for the given subjects by exhaustive enumeration —
/// same boolean the corresponding fairness check must return.
///
/// `domain` lists the candidate values per protected variable (at most 16
/// combinations). Subjects: one individual for counterfactual fairness,
/// D-contrast, and T-contrast; the pair (i, j) for I-contrast and the
/// contrast margin.
pub fn oracle_check(
    equations: &[StructuralEquation],
    predictor: &Predictor,
    subjects: &[&Individual],
    criterion: &OracleCriterion,
    domain: &BTreeMap<String, Vec<Value>>,
    tol: &Tolerance,
) -> Result<bool, SynthError> {
    let assignments = enumerate_domain(domain)?;
    let worlds = OracleWorlds {
        equations,
        predictor,
    };
    let last = |ind: &Individual| ind.snapshots.len() - 1;

    match criterion {
        OracleCriterion::CounterfactualFairness => {
            worlds.invariant(subjects[0], &assignments, None, tol.eps_fair)
        }
        OracleCriterion::DContrast { d, d_prime } => {
            let i = subjects[0];
            let (kd, kdp) = (
                decision_index(predictor, d)?,
                decision_index(predictor, d_prime)?,
            );
            let process =
                worlds.invariant(i, &assignments, Some(&[kd, kdp]), tol.eps_fair)?;
            let scores = worlds.factual(i, last(i))?;
            Ok(process && scores[kd] - scores[kdp] > tol.delta_order)
        }
        OracleCriterion::IContrast { d, d_prime } => {
            let (i, j) = (subjects[0], subjects[1]);
            let (kd, kdp) = (
                decision_index(predictor, d)?,
                decision_index(predictor, d_prime)?,
            );
            let fair_i = worlds.invariant(i, &assignments, None, tol.eps_fair)?;
            let fair_j = worlds.invariant(j, &assignments, None, tol.eps_fair)?;
            let own_i = worlds.factual(i, last(i))?;
            let own_j = worlds.factual(j, last(j))?;
            let swapped_i = worlds.flipped(i, last(i), &j.protected)?;
            let swapped_j = worlds.flipped(j, last(j), &i.protected)?;
            Ok(fair_i
                && fair_j
                && own_i[kd] - own_i[kdp] > tol.delta_order
                && own_j[kdp] - own_j[kd] > tol.delta_order
                && swapped_i[kd] - swapped_i[kdp] > tol.delta_order
                && swapped_j[kdp] - swapped_j[kd] > tol.delta_order)
        }
        OracleCriterion::TContrast {
            t,
            t_prime,
            d,
            d_prime,
        } => {
            let i = subjects[0];
            let (kd, kdp) = (
                decision_index(predictor, d)?,
                decision_index(predictor, d_prime)?,
            );
            let (at_t, at_t_prime) = (tick_index(i, *t)?, tick_index(i, *t_prime)?);
            let process = worlds.invariant(i, &assignments, None, tol.eps_fair)?;
            let then = worlds.factual(i, at_t)?;
            let now = worlds.factual(i, at_t_prime)?;
            Ok(process
                && then[kd] - then[kdp] > tol.delta_order
                && now[kdp] - now[kd] > tol.delta_order)
        }
        OracleCriterion::ContrastMargin { d, d_prime } => {
            let (i, j) = (subjects[0], subjects[1]);
            let (kd, kdp) = (
                decision_index(predictor, d)?,
                decision_index(predictor, d_prime)?,
            );
            let mut mandatory = true;
            let mut advisory = true;
            for shared in [&i.protected, &j.protected] {
                let score_i = worlds.flipped(i, last(i), shared)?;
                let score_j = worlds.flipped(j, last(j), shared)?;
                mandatory &= score_i[kd] - score_j[kd] > tol.lambda_margin;
                advisory &= score_j[kdp] - score_i[kdp] > tol.lambda_margin;
            }
            Ok(mandatory && (!tol.strict_margin || advisory))
        }
    }
}
