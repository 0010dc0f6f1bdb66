//! Observed worlds and counterfactual reconstruction.
//!
//! An [`Individual`] is a sequence of timestamped [`Snapshot`]s sharing one
//! protected profile. Counterfactual questions are answered in three steps:
//! recover the noise terms that explain a snapshot ([`FittedScm::abduct`]),
//! override the protected profile with an [`Intervention`], and re-propagate
//! the equations with the recovered noise held fixed
//! ([`FittedScm::counterfactual`]).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::model::FittedScm;
use super::ScmError;
use crate::value::Value;

/// One timestamped observation of every observable variable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub time: i64,
    pub observables: BTreeMap<String, f64>,
}

impl Snapshot {
    pub fn new(time: i64, observables: &[(&str, f64)]) -> Self {
        Self {
            time,
            observables: observables
                .iter()
                .map(|(k, v)| (k.to_string(), *v))
                .collect(),
        }
    }
}

/// A decision subject: immutable protected profile plus a time-ordered
/// trajectory of snapshots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub id: String,
    pub protected: BTreeMap<String, Value>,
    pub snapshots: Vec<Snapshot>,
    /// Observed outcome, when the dataset records one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<f64>,
}

impl Individual {
    pub fn new(id: &str, protected: &[(&str, Value)], snapshots: Vec<Snapshot>) -> Self {
        Self {
            id: id.to_string(),
            protected: protected
                .iter()
                .map(|(k, v)| (k.to_string(), v.clone()))
                .collect(),
            snapshots,
            outcome: None,
        }
    }

    pub fn latest(&self) -> Option<&Snapshot> {
        self.snapshots.last()
    }
}

/// Noise terms recovered for one snapshot, keyed by observable name.
///
/// Under a linear additive-noise model the residual is point-identified:
/// ε = observed − predicted. The same assignment explains the snapshot in
/// every intervened world, which is what makes residual-based prediction
/// intervention-invariant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentAssignment {
    pub residuals: BTreeMap<String, f64>,
}

/// An override of part (or all) of the protected profile.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Intervention {
    pub assignments: BTreeMap<String, Value>,
}

impl Intervention {
    pub fn new(assignments: &[(&str, Value)]) -> Self {
        Self {
            assignments: assignments
                .iter()
                .map(|(k, v)| (k.to_string(), v.clone()))
                .collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    /// Compact rendering for verdicts and reports, e.g. `race=black,sex=female`.
    /// Unambiguous because variable names may contain neither `=` nor `,`.
    pub fn describe(&self) -> String {
        self.assignments
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(",")
    }

    /// The subject's profile with this intervention's assignments applied.
    pub fn merged(&self, baseline: &BTreeMap<String, Value>) -> BTreeMap<String, Value> {
        let mut out = baseline.clone();
        for (k, v) in &self.assignments {
            out.insert(k.clone(), v.clone());
        }
        out
    }
}

/// Every combination of protected values, one [`Intervention`] each, in
/// declaration order (outer variables vary slowest).
///
/// Categorical variables contribute their declared levels. Continuous
/// protected variables have no finite domain, so they must appear in `grid`
/// with the representative values to try; returns `None` when one is missing
/// or empty.
pub fn protected_combinations(
    graph: &super::graph::CausalGraph,
    grid: &BTreeMap<String, Vec<f64>>,
) -> Option<Vec<Intervention>> {
    let mut axes: Vec<(String, Vec<Value>)> = Vec::new();
    for spec in graph.protected_variables() {
        let values = if spec.is_categorical() {
            spec.level_labels()
                .iter()
                .map(|l| Value::Categorical(l.clone()))
                .collect()
        } else {
            let points = grid.get(&spec.name)?;
            if points.is_empty() {
                return None;
            }
            points.iter().map(|v| Value::Continuous(*v)).collect()
        };
        axes.push((spec.name.clone(), values));
    }
    let mut combos: Vec<BTreeMap<String, Value>> = vec![BTreeMap::new()];
    for (name, values) in &axes {
        let mut next = Vec::with_capacity(combos.len() * values.len());
        for combo in &combos {
            for v in values {
                let mut assignment = combo.clone();
                assignment.insert(name.clone(), v.clone());
                next.push(assignment);
            }
        }
        combos = next;
    }
    Some(
        combos
            .into_iter()
            .map(|assignments| Intervention { assignments })
            .collect(),
    )
}

impl FittedScm {
    /// Recovers the noise term of every observable equation for one snapshot.
    ///
    /// Returns `UnknownSnapshot` when the index is out of range and
    /// `MissingValue`/`DomainViolation` when the snapshot or profile is
    /// incomplete for some equation.
    pub fn abduct(
        &self,
        individual: &Individual,
        snapshot_index: usize,
    ) -> Result<LatentAssignment, ScmError> {
        let snapshot = individual.snapshots.get(snapshot_index).ok_or(
            ScmError::UnknownSnapshot {
                index: snapshot_index,
                len: individual.snapshots.len(),
            },
        )?;
        self.check_protected(&individual.protected)?;
        let mut residuals = BTreeMap::new();
        for child in self.feature_order() {
            let eq = self.equation(child).expect("observable has equation");
            let observed =
                snapshot
                    .observables
                    .get(child)
                    .copied()
                    .ok_or_else(|| ScmError::MissingValue {
                        variable: child.clone(),
                    })?;
            let predicted = eq.predict(self.graph(), &individual.protected, &snapshot.observables)?;
            residuals.insert(child.clone(), observed - predicted);
        }
        Ok(LatentAssignment { residuals })
    }

    /// Rebuilds one snapshot under an intervened protected profile, holding
    /// the snapshot's recovered noise terms fixed.
    ///
    /// Equations are re-evaluated in topological order, so a change to the
    /// protected profile flows through every downstream observable. An empty
    /// intervention reproduces the observed snapshot exactly (up to floating
    /// point). The outcome equation, if any, is not propagated: the result
    /// describes the features a predictor would have seen, not a relabelled
    /// world.
    pub fn counterfactual(
        &self,
        individual: &Individual,
        snapshot_index: usize,
        intervention: &Intervention,
    ) -> Result<Snapshot, ScmError> {
        let latents = self.abduct(individual, snapshot_index)?;
        let time = individual.snapshots[snapshot_index].time;
        let profile = intervention.merged(&individual.protected);
        self.check_protected(&profile)?;
        let mut observables = BTreeMap::new();
        for child in self.feature_order() {
            let eq = self.equation(child).expect("observable has equation");
            let predicted = eq.predict(self.graph(), &profile, &observables)?;
            let residual = latents.residuals[child];
            observables.insert(child.clone(), predicted + residual);
        }
        Ok(Snapshot { time, observables })
    }

    /// Noise-free outcome prediction for a (possibly counterfactual) world,
    /// using the fitted outcome equation. Available only when the model
    /// carries one.
    pub fn predict_outcome(
        &self,
        protected: &BTreeMap<String, Value>,
        observables: &BTreeMap<String, f64>,
    ) -> Result<f64, ScmError> {
        let eq = self
            .outcome_equation()
            .ok_or_else(|| ScmError::EquationMismatch {
                detail: "model has no outcome equation".to_string(),
            })?;
        eq.predict(self.graph(), protected, observables)
    }

    fn check_protected(&self, profile: &BTreeMap<String, Value>) -> Result<(), ScmError> {
        for spec in self.graph().protected_variables() {
            let value = profile
                .get(&spec.name)
                .ok_or_else(|| ScmError::MissingValue {
                    variable: spec.name.clone(),
                })?;
            spec.check_value(value)?;
        }
        for name in profile.keys() {
            match self.graph().variable(name) {
                Some(spec) if spec.role == super::graph::VariableRole::Protected => {}
                _ => {
                    return Err(ScmError::UnknownProtected {
                        name: name.clone(),
                    })
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scm::{CausalGraph, StructuralEquation, VariableRole, VariableSpec};

    /// X = 1 + 2·[a=1] + ε, plus an outcome equation y = x.
    fn one_feature_scm() -> FittedScm {
        let graph = CausalGraph::new(
            vec![
                VariableSpec::categorical("a", VariableRole::Protected, &["0", "1"]),
                VariableSpec::continuous("x", VariableRole::Observable),
                VariableSpec::continuous("y", VariableRole::Outcome),
            ],
            vec![("a", "x"), ("x", "y")],
        );
        FittedScm::from_parts(
            graph,
            vec![
                StructuralEquation::new("x", 1.0, &[("a=1", 2.0)], 0.5),
                StructuralEquation::new("y", 0.0, &[("x", 1.0)], 0.0),
            ],
        )
        .expect("valid model")
    }

    fn person(a: &str, x: f64) -> Individual {
        Individual::new(
            "p",
            &[("a", Value::from(a))],
            vec![Snapshot::new(0, &[("x", x)])],
        )
    }

    #[test]
    fn abduction_subtracts_the_structural_prediction() {
        let scm = one_feature_scm();
        let latents = scm.abduct(&person("1", 4.0), 0).expect("abducts");
        assert!((latents.residuals["x"] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noise_free_observation_abducts_to_zero() {
        let scm = one_feature_scm();
        let latents = scm.abduct(&person("1", 3.0), 0).expect("abducts");
        assert_eq!(latents.residuals["x"], 0.0);
    }

    #[test]
    fn abduction_matches_hand_arithmetic_on_two_protected_roots() {
        // gpa = 3.1 - 0.4·[race=minority] + 0.1·[sex=male] + ε
        let graph = CausalGraph::new(
            vec![
                VariableSpec::categorical("race", VariableRole::Protected, &["majority", "minority"]),
                VariableSpec::categorical("sex", VariableRole::Protected, &["female", "male"]),
                VariableSpec::continuous("gpa", VariableRole::Observable),
                VariableSpec::continuous("fya", VariableRole::Outcome),
            ],
            vec![("race", "gpa"), ("sex", "gpa"), ("gpa", "fya")],
        );
        let scm = FittedScm::from_parts(
            graph,
            vec![
                StructuralEquation::new(
                    "gpa",
                    3.1,
                    &[("race=minority", -0.4), ("sex=male", 0.1)],
                    0.3,
                ),
                StructuralEquation::new("fya", 0.0, &[("gpa", 1.0)], 0.0),
            ],
        )
        .expect("valid model");
        let individual = Individual::new(
            "s",
            &[
                ("race", Value::from("minority")),
                ("sex", Value::from("female")),
            ],
            vec![Snapshot::new(0, &[("gpa", 3.0)])],
        );
        let latents = scm.abduct(&individual, 0).expect("abducts");
        // 3.0 - (3.1 - 0.4 + 0.0) = 0.3
        assert!((latents.residuals["gpa"] - 0.3).abs() < 1e-9);
    }

    #[test]
    fn counterfactual_holds_the_residual_and_replays_the_equation() {
        let scm = one_feature_scm();
        let flipped = Intervention::new(&[("a", Value::from("0"))]);
        let world = scm
            .counterfactual(&person("1", 4.0), 0, &flipped)
            .expect("counterfactual");
        // residual 1 carried into 1 + 0 + 1 = 2
        assert!((world.observables["x"] - 2.0).abs() < 1e-12);
        assert_eq!(world.time, 0);
    }

    #[test]
    fn factual_intervention_reproduces_the_snapshot() {
        let scm = one_feature_scm();
        let individual = person("1", 4.0);
        let same = Intervention::new(&[("a", Value::from("1"))]);
        let world = scm.counterfactual(&individual, 0, &same).expect("counterfactual");
        assert_eq!(world, individual.snapshots[0]);
    }

    /// Chain X1 = A + ε1, X2 = 2·X1 + ε2 over a continuous protected A.
    fn chain_scm() -> FittedScm {
        let graph = CausalGraph::new(
            vec![
                VariableSpec::continuous("a", VariableRole::Protected),
                VariableSpec::continuous("x1", VariableRole::Observable),
                VariableSpec::continuous("x2", VariableRole::Observable),
                VariableSpec::continuous("y", VariableRole::Outcome),
            ],
            vec![("a", "x1"), ("x1", "x2"), ("x2", "y")],
        );
        FittedScm::from_parts(
            graph,
            vec![
                StructuralEquation::new("x1", 0.0, &[("a", 1.0)], 1.0),
                StructuralEquation::new("x2", 0.0, &[("x1", 2.0)], 1.0),
                StructuralEquation::new("y", 0.0, &[("x2", 1.0)], 0.0),
            ],
        )
        .expect("valid model")
    }

    #[test]
    fn counterfactual_propagates_down_a_chain() {
        let scm = chain_scm();
        let individual = Individual::new(
            "c",
            &[("a", Value::from(0.0))],
            vec![Snapshot::new(0, &[("x1", 1.0), ("x2", 3.0)])],
        );
        // ε1 = 1, ε2 = 3 - 2·1 = 1
        let latents = scm.abduct(&individual, 0).expect("abducts");
        assert!((latents.residuals["x1"] - 1.0).abs() < 1e-12);
        assert!((latents.residuals["x2"] - 1.0).abs() < 1e-12);

        let world = scm
            .counterfactual(&individual, 0, &Intervention::new(&[("a", Value::from(1.0))]))
            .expect("counterfactual");
        assert!((world.observables["x1"] - 2.0).abs() < 1e-12);
        assert!((world.observables["x2"] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn residuals_are_world_invariant_so_interventions_compose() {
        let scm = chain_scm();
        let individual = Individual::new(
            "c",
            &[("a", Value::from(0.0))],
            vec![Snapshot::new(0, &[("x1", 1.0), ("x2", 3.0)])],
        );
        let via_half = scm
            .counterfactual(&individual, 0, &Intervention::new(&[("a", Value::from(0.5))]))
            .expect("counterfactual");
        // Re-abduct in the intervened world, then intervene again.
        let halfway = Individual::new("c", &[("a", Value::from(0.5))], vec![via_half]);
        let composed = scm
            .counterfactual(&halfway, 0, &Intervention::new(&[("a", Value::from(2.0))]))
            .expect("counterfactual");
        let direct = scm
            .counterfactual(&individual, 0, &Intervention::new(&[("a", Value::from(2.0))]))
            .expect("counterfactual");
        for key in ["x1", "x2"] {
            assert!((composed.observables[key] - direct.observables[key]).abs() < 1e-12);
        }
    }

    #[test]
    fn intervention_validation_is_loud() {
        let scm = one_feature_scm();
        let individual = person("1", 4.0);

        let unknown = Intervention::new(&[("ghost", Value::from("0"))]);
        assert!(matches!(
            scm.counterfactual(&individual, 0, &unknown),
            Err(ScmError::UnknownProtected { .. })
        ));

        let not_protected = Intervention::new(&[("x", Value::from(1.0))]);
        assert!(matches!(
            scm.counterfactual(&individual, 0, &not_protected),
            Err(ScmError::UnknownProtected { .. })
        ));

        let bad_level = Intervention::new(&[("a", Value::from("2"))]);
        assert!(matches!(
            scm.counterfactual(&individual, 0, &bad_level),
            Err(ScmError::DomainViolation { .. })
        ));

        assert!(matches!(
            scm.abduct(&individual, 3),
            Err(ScmError::UnknownSnapshot { index: 3, len: 1 })
        ));

        let hollow = Individual::new("p", &[("a", Value::from("1"))], vec![Snapshot::new(0, &[])]);
        assert!(matches!(
            scm.abduct(&hollow, 0),
            Err(ScmError::MissingValue { .. })
        ));
    }

    #[test]
    fn protected_combinations_enumerate_the_cartesian_product() {
        let scm = one_feature_scm();
        let combos = protected_combinations(scm.graph(), &BTreeMap::new()).expect("discrete");
        let described: Vec<String> = combos.iter().map(Intervention::describe).collect();
        assert_eq!(described, vec!["a=0".to_string(), "a=1".to_string()]);
    }

    #[test]
    fn continuous_protected_needs_a_grid() {
        let scm = chain_scm();
        assert!(protected_combinations(scm.graph(), &BTreeMap::new()).is_none());

        let mut grid = BTreeMap::new();
        grid.insert("a".to_string(), vec![0.0, 1.0, 2.0]);
        let combos = protected_combinations(scm.graph(), &grid).expect("grid supplied");
        assert_eq!(combos.len(), 3);
        assert_eq!(combos[2].describe(), "a=2");
    }

    #[test]
    fn predict_outcome_reads_the_outcome_equation() {
        let scm = one_feature_scm();
        let mut observables = BTreeMap::new();
        observables.insert("x".to_string(), 4.0);
        let mut protected = BTreeMap::new();
        protected.insert("a".to_string(), Value::from("1"));
        let y = scm.predict_outcome(&protected, &observables).expect("outcome");
        assert!((y - 4.0).abs() < 1e-12);
    }
}
