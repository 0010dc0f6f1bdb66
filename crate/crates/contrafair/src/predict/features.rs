//! What each predictor family is allowed to read.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{PredictError, PredictorFamily};
use crate::scm::{regressor_value, FittedScm, Individual};
use crate::value::Value;

/// One input column of a predictor.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Feature {
    /// An observable variable read from the (possibly counterfactual)
    /// snapshot.
    Observable { name: String },
    /// An expanded protected regressor: the variable name for continuous
    /// protected attributes, `name=level` indicators for categorical ones.
    Protected { key: String },
    /// The recovered noise term of one structural equation. World-invariant:
    /// the same value feeds the predictor in every intervened world.
    Residual { name: String },
}

/// The ordered input columns a predictor reads.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InputSchema {
    features: Vec<Feature>,
}

impl InputSchema {
    pub fn new(features: Vec<Feature>) -> Self {
        Self { features }
    }

    /// The canonical schema of a family over a fitted model:
    /// full and contrastive read observables plus protected indicators,
    /// unaware reads observables only, counterfactual reads residuals only.
    pub fn for_family(family: PredictorFamily, scm: &FittedScm) -> Self {
        let observables = scm
            .feature_order()
            .iter()
            .map(|name| Feature::Observable { name: name.clone() });
        let protected = scm
            .graph()
            .protected_variables()
            .into_iter()
            .flat_map(|spec| spec.regressor_keys())
            .map(|key| Feature::Protected { key });
        let residuals = scm
            .feature_order()
            .iter()
            .map(|name| Feature::Residual { name: name.clone() });
        let features = match family {
            PredictorFamily::Full | PredictorFamily::Contrastive => {
                observables.chain(protected).collect()
            }
            PredictorFamily::Unaware => observables.collect(),
            PredictorFamily::Counterfactual => residuals.collect(),
        };
        Self { features }
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub(crate) fn needs_residuals(&self) -> bool {
        self.features
            .iter()
            .any(|f| matches!(f, Feature::Residual { .. }))
    }

    /// Checks that the feature kinds are the ones the family may read.
    pub(crate) fn check_family(&self, family: PredictorFamily) -> Result<(), PredictError> {
        let ok = self.features.iter().all(|f| match family {
            PredictorFamily::Full | PredictorFamily::Contrastive => {
                matches!(f, Feature::Observable { .. } | Feature::Protected { .. })
            }
            PredictorFamily::Unaware => matches!(f, Feature::Observable { .. }),
            PredictorFamily::Counterfactual => matches!(f, Feature::Residual { .. }),
        });
        if ok {
            Ok(())
        } else {
            Err(PredictError::SchemaMismatch {
                detail: format!("input schema contains features the {family} family may not read"),
            })
        }
    }

    /// Resolves the schema against one world: a protected profile, a
    /// snapshot's observables, and (for residual features) a recovered
    /// latent assignment.
    pub(crate) fn build_row(
        &self,
        scm: &FittedScm,
        protected: &BTreeMap<String, Value>,
        observables: &BTreeMap<String, f64>,
        residuals: Option<&BTreeMap<String, f64>>,
    ) -> Result<Vec<f64>, PredictError> {
        self.features
            .iter()
            .map(|feature| match feature {
                Feature::Observable { name } => observables.get(name).copied().ok_or_else(|| {
                    PredictError::MissingValue {
                        variable: name.clone(),
                    }
                }),
                Feature::Protected { key } => {
                    regressor_value(scm.graph(), key, protected, observables)
                        .map_err(PredictError::from)
                }
                Feature::Residual { name } => residuals
                    .ok_or_else(|| PredictError::SchemaMismatch {
                        detail: "residual feature requested without a latent assignment"
                            .to_string(),
                    })?
                    .get(name)
                    .copied()
                    .ok_or_else(|| PredictError::MissingValue {
                        variable: name.clone(),
                    }),
            })
            .collect()
    }

    /// Resolves the schema for an observed individual at one snapshot,
    /// abducting noise terms when the schema reads residuals.
    pub fn extract(
        &self,
        scm: &FittedScm,
        individual: &Individual,
        snapshot_index: usize,
    ) -> Result<Vec<f64>, PredictError> {
        let snapshot = individual.snapshots.get(snapshot_index).ok_or(
            crate::scm::ScmError::UnknownSnapshot {
                index: snapshot_index,
                len: individual.snapshots.len(),
            },
        )?;
        let residuals = if self.needs_residuals() {
            Some(scm.abduct(individual, snapshot_index)?.residuals)
        } else {
            None
        };
        self.build_row(
            scm,
            &individual.protected,
            &snapshot.observables,
            residuals.as_ref(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scm::{CausalGraph, Snapshot, StructuralEquation, VariableRole, VariableSpec};

    /// Two protected roots (one with three levels) and a two-step chain.
    fn scm() -> FittedScm {
        let graph = CausalGraph::new(
            vec![
                VariableSpec::categorical("race", VariableRole::Protected, &["p", "q", "r"]),
                VariableSpec::continuous("age", VariableRole::Protected),
                VariableSpec::continuous("x1", VariableRole::Observable),
                VariableSpec::continuous("x2", VariableRole::Observable),
                VariableSpec::continuous("y", VariableRole::Outcome),
            ],
            vec![
                ("race", "x1"),
                ("age", "x1"),
                ("x1", "x2"),
                ("x2", "y"),
            ],
        );
        FittedScm::from_parts(
            graph,
            vec![
                StructuralEquation::new(
                    "x1",
                    0.0,
                    &[("race=q", 1.0), ("race=r", 2.0), ("age", 0.5)],
                    1.0,
                ),
                StructuralEquation::new("x2", 0.0, &[("x1", 2.0)], 1.0),
            ],
        )
        .expect("valid model")
    }

    fn observable(name: &str) -> Feature {
        Feature::Observable { name: name.into() }
    }

    fn protected(key: &str) -> Feature {
        Feature::Protected { key: key.into() }
    }

    fn residual(name: &str) -> Feature {
        Feature::Residual { name: name.into() }
    }

    #[test]
    fn family_schemas_read_exactly_their_permitted_inputs() {
        let scm = scm();
        let full = InputSchema::for_family(PredictorFamily::Full, &scm);
        assert_eq!(
            full.features(),
            &[
                observable("x1"),
                observable("x2"),
                protected("race=q"),
                protected("race=r"),
                protected("age"),
            ]
        );
        assert_eq!(
            InputSchema::for_family(PredictorFamily::Contrastive, &scm).features(),
            full.features()
        );
        assert_eq!(
            InputSchema::for_family(PredictorFamily::Unaware, &scm).features(),
            &[observable("x1"), observable("x2")]
        );
        assert_eq!(
            InputSchema::for_family(PredictorFamily::Counterfactual, &scm).features(),
            &[residual("x1"), residual("x2")]
        );
    }

    #[test]
    fn extract_resolves_each_feature_kind() {
        let scm = scm();
        let individual = Individual::new(
            "p",
            &[("race", Value::from("q")), ("age", Value::from(30.0))],
            vec![Snapshot::new(0, &[("x1", 17.0), ("x2", 35.0)])],
        );

        let full = InputSchema::for_family(PredictorFamily::Full, &scm)
            .extract(&scm, &individual, 0)
            .expect("row");
        assert_eq!(full, vec![17.0, 35.0, 1.0, 0.0, 30.0]);

        // ε1 = 17 − (1 + 15) = 1; ε2 = 35 − 34 = 1.
        let residuals = InputSchema::for_family(PredictorFamily::Counterfactual, &scm)
            .extract(&scm, &individual, 0)
            .expect("row");
        assert!((residuals[0] - 1.0).abs() < 1e-12);
        assert!((residuals[1] - 1.0).abs() < 1e-12);

        let missing_snapshot = InputSchema::for_family(PredictorFamily::Unaware, &scm)
            .extract(&scm, &individual, 5);
        assert!(missing_snapshot.is_err());
    }

    #[test]
    fn residual_rows_need_a_latent_assignment() {
        let scm = scm();
        let schema = InputSchema::for_family(PredictorFamily::Counterfactual, &scm);
        let err = schema
            .build_row(&scm, &BTreeMap::new(), &BTreeMap::new(), None)
            .unwrap_err();
        assert!(matches!(err, PredictError::SchemaMismatch { .. }));
    }

    #[test]
    fn family_checks_reject_forbidden_feature_kinds() {
        let mixed = InputSchema::new(vec![observable("x1"), residual("x1")]);
        assert!(mixed.check_family(PredictorFamily::Full).is_err());
        assert!(mixed.check_family(PredictorFamily::Counterfactual).is_err());
        let observables_only = InputSchema::new(vec![observable("x1")]);
        assert!(observables_only.check_family(PredictorFamily::Unaware).is_ok());
        assert!(observables_only.check_family(PredictorFamily::Full).is_ok());
        let with_protected = InputSchema::new(vec![observable("x1"), protected("age")]);
        assert!(with_protected.check_family(PredictorFamily::Unaware).is_err());
        assert!(with_protected.check_family(PredictorFamily::Contrastive).is_ok());
    }
}
