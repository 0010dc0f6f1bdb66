//! Predictor families, parameters, and scoring.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::features::InputSchema;
use super::space::{DecisionSpace, ScoreVector};
use super::train::TrainConfig;
use super::PredictError;
use crate::scm::{FittedScm, Individual, Intervention};

/// The four predictor families under audit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorFamily {
    /// Reads observables and protected attributes.
    Full,
    /// Reads observables only; protected attributes may still leak in by
    /// proxy.
    Unaware,
    /// Reads recovered noise terms only, making its scores invariant under
    /// protected-attribute interventions by construction.
    Counterfactual,
    /// Reads the same inputs as `Full` but is trained against a
    /// counterfactual contrast penalty.
    Contrastive,
}

impl fmt::Display for PredictorFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Full => "full",
            Self::Unaware => "unaware",
            Self::Counterfactual => "counterfactual",
            Self::Contrastive => "contrastive",
        };
        f.write_str(s)
    }
}

/// Model coefficients.
///
/// With K decisions the model carries K−1 logit rows against an implicit
/// zero logit for the first decision, so a binary predictor is a plain
/// logistic regression with one weight row. `OneHidden` adds a tanh layer
/// and is only valid for the contrastive family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "layout", rename_all = "snake_case")]
pub enum ModelParams {
    Linear {
        /// `weights[k][f]`: logit row k+1, feature f.
        weights: Vec<Vec<f64>>,
        bias: Vec<f64>,
    },
    OneHidden {
        /// `w1[h][f]`: hidden unit h, feature f.
        w1: Vec<Vec<f64>>,
        b1: Vec<f64>,
        /// `w2[k][h]`: logit row k+1, hidden unit h.
        w2: Vec<Vec<f64>>,
        b2: Vec<f64>,
    },
}

impl ModelParams {
    pub fn hidden_width(&self) -> usize {
        match self {
            Self::Linear { .. } => 0,
            Self::OneHidden { b1, .. } => b1.len(),
        }
    }

    fn check_shapes(&self, n_features: usize, n_decisions: usize) -> Result<(), PredictError> {
        let rows = n_decisions - 1;
        let ok = match self {
            Self::Linear { weights, bias } => {
                weights.len() == rows
                    && bias.len() == rows
                    && weights.iter().all(|row| row.len() == n_features)
            }
            Self::OneHidden { w1, b1, w2, b2 } => {
                let h = b1.len();
                h > 0
                    && w1.len() == h
                    && w1.iter().all(|row| row.len() == n_features)
                    && w2.len() == rows
                    && w2.iter().all(|row| row.len() == h)
                    && b2.len() == rows
            }
        };
        if ok {
            Ok(())
        } else {
            Err(PredictError::SchemaMismatch {
                detail: format!(
                    "parameter shapes do not fit {n_features} features and {n_decisions} decisions"
                ),
            })
        }
    }

    /// Flattens all coefficients in a fixed order (weight rows, then biases;
    /// for the hidden layout: w1, b1, w2, b2). Gradients reported by
    /// [`training_objective`](super::training_objective) use the same order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        match self {
            Self::Linear { weights, bias } => {
                for row in weights {
                    out.extend_from_slice(row);
                }
                out.extend_from_slice(bias);
            }
            Self::OneHidden { w1, b1, w2, b2 } => {
                for row in w1 {
                    out.extend_from_slice(row);
                }
                out.extend_from_slice(b1);
                for row in w2 {
                    out.extend_from_slice(row);
                }
                out.extend_from_slice(b2);
            }
        }
        out
    }

    /// Rebuilds parameters with this value's shapes from a flat vector laid
    /// out as [`flatten`](Self::flatten) produces.
    pub fn unflatten(&self, flat: &[f64]) -> Self {
        let mut it = flat.iter().copied();
        let mut take = |n: usize| -> Vec<f64> { it.by_ref().take(n).collect() };
        match self {
            Self::Linear { weights, bias } => {
                let new_weights = weights.iter().map(|row| take(row.len())).collect();
                let new_bias = take(bias.len());
                Self::Linear {
                    weights: new_weights,
                    bias: new_bias,
                }
            }
            Self::OneHidden { w1, b1, w2, b2 } => {
                let new_w1 = w1.iter().map(|row| take(row.len())).collect();
                let new_b1 = take(b1.len());
                let new_w2 = w2.iter().map(|row| take(row.len())).collect();
                let new_b2 = take(b2.len());
                Self::OneHidden {
                    w1: new_w1,
                    b1: new_b1,
                    w2: new_w2,
                    b2: new_b2,
                }
            }
        }
    }

    /// Indices of the flattened vector that are weights (not biases); the l2
    /// term regularizes only these.
    pub(crate) fn weight_mask(&self) -> Vec<bool> {
        let mut out = Vec::new();
        match self {
            Self::Linear { weights, bias } => {
                for row in weights {
                    out.extend(std::iter::repeat(true).take(row.len()));
                }
                out.extend(std::iter::repeat(false).take(bias.len()));
            }
            Self::OneHidden { w1, b1, w2, b2 } => {
                for row in w1 {
                    out.extend(std::iter::repeat(true).take(row.len()));
                }
                out.extend(std::iter::repeat(false).take(b1.len()));
                for row in w2 {
                    out.extend(std::iter::repeat(true).take(row.len()));
                }
                out.extend(std::iter::repeat(false).take(b2.len()));
            }
        }
        out
    }
}

/// Numerically stable softmax over the implicit-zero logit and K−1 rows.
pub(crate) fn softmax_with_pivot(logit_rows: &[f64]) -> Vec<f64> {
    let mut logits = Vec::with_capacity(logit_rows.len() + 1);
    logits.push(0.0);
    logits.extend_from_slice(logit_rows);
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Forward-pass caches needed by backpropagation.
pub(crate) struct Forward {
    /// Probability per decision index, length K.
    pub probs: Vec<f64>,
    /// Hidden activations (tanh), empty for the linear layout.
    pub hidden: Vec<f64>,
}

pub(crate) fn forward(params: &ModelParams, x: &[f64]) -> Forward {
    match params {
        ModelParams::Linear { weights, bias } => {
            let rows: Vec<f64> = weights
                .iter()
                .zip(bias)
                .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
                .collect();
            Forward {
                probs: softmax_with_pivot(&rows),
                hidden: Vec::new(),
            }
        }
        ModelParams::OneHidden { w1, b1, w2, b2 } => {
            let hidden: Vec<f64> = w1
                .iter()
                .zip(b1)
                .map(|(row, b)| (row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b).tanh())
                .collect();
            let rows: Vec<f64> = w2
                .iter()
                .zip(b2)
                .map(|(row, b)| {
                    row.iter().zip(&hidden).map(|(w, h)| w * h).sum::<f64>() + b
                })
                .collect();
            Forward {
                probs: softmax_with_pivot(&rows),
                hidden,
            }
        }
    }
}

/// A trained (or hand-authored) decision predictor. Immutable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PredictorRepr", into = "PredictorRepr")]
pub struct Predictor {
    family: PredictorFamily,
    decision_space: DecisionSpace,
    input_schema: InputSchema,
    parameters: ModelParams,
    train_config: Option<TrainConfig>,
    metrics: BTreeMap<String, f64>,
}

impl Predictor {
    /// Assembles a predictor, checking that the schema is legal for the
    /// family, the parameter shapes fit, and only the contrastive family
    /// carries a hidden layer.
    pub fn from_parts(
        family: PredictorFamily,
        decision_space: DecisionSpace,
        input_schema: InputSchema,
        parameters: ModelParams,
    ) -> Result<Self, PredictError> {
        decision_space.validate()?;
        input_schema.check_family(family)?;
        parameters.check_shapes(input_schema.len(), decision_space.len())?;
        if parameters.hidden_width() > 0 && family != PredictorFamily::Contrastive {
            return Err(PredictError::SchemaMismatch {
                detail: format!("{family} family predictors are linear"),
            });
        }
        Ok(Self {
            family,
            decision_space,
            input_schema,
            parameters,
            train_config: None,
            metrics: BTreeMap::new(),
        })
    }

    pub(crate) fn with_training_record(
        mut self,
        config: TrainConfig,
        metrics: BTreeMap<String, f64>,
    ) -> Self {
        self.train_config = Some(config);
        self.metrics = metrics;
        self
    }

    pub fn family(&self) -> PredictorFamily {
        self.family
    }

    pub fn decision_space(&self) -> &DecisionSpace {
        &self.decision_space
    }

    pub fn input_schema(&self) -> &InputSchema {
        &self.input_schema
    }

    pub fn parameters(&self) -> &ModelParams {
        &self.parameters
    }

    pub fn train_config(&self) -> Option<&TrainConfig> {
        self.train_config.as_ref()
    }

    pub fn metrics(&self) -> &BTreeMap<String, f64> {
        &self.metrics
    }

    /// Scores one individual at one snapshot in the observed world.
    ///
    /// The SCM supplies residual inputs for the counterfactual family (and
    /// the protected-variable encoding); full and unaware families read the
    /// snapshot directly.
    pub fn predict(
        &self,
        scm: &FittedScm,
        individual: &Individual,
        snapshot_index: usize,
    ) -> Result<ScoreVector, PredictError> {
        let row = self.input_schema.extract(scm, individual, snapshot_index)?;
        let fwd = forward(&self.parameters, &row);
        Ok(ScoreVector::from_indexed(&self.decision_space, &fwd.probs))
    }

    /// Scores the individual in the world where the intervention had held:
    /// features are regenerated through the SCM with the snapshot's recovered
    /// noise terms fixed, then scored together with the intervened protected
    /// profile.
    ///
    /// For the counterfactual family the residual inputs are taken from the
    /// observed world — they are invariant across worlds, so the score equals
    /// `predict` bit for bit.
    pub fn counterfactual_score(
        &self,
        scm: &FittedScm,
        individual: &Individual,
        snapshot_index: usize,
        intervention: &Intervention,
    ) -> Result<ScoreVector, PredictError> {
        let world = scm.counterfactual(individual, snapshot_index, intervention)?;
        if self.family == PredictorFamily::Counterfactual {
            return self.predict(scm, individual, snapshot_index);
        }
        let profile = intervention.merged(&individual.protected);
        let row = self
            .input_schema
            .build_row(scm, &profile, &world.observables, None)?;
        let fwd = forward(&self.parameters, &row);
        Ok(ScoreVector::from_indexed(&self.decision_space, &fwd.probs))
    }

    /// Scores a pre-extracted feature row. Used by the trainer and the
    /// brute-force oracles.
    pub(crate) fn score_row(&self, row: &[f64]) -> Vec<f64> {
        forward(&self.parameters, row).probs
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("predictor serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, PredictError> {
        serde_json::from_str(text).map_err(|e| PredictError::Format {
            detail: e.to_string(),
        })
    }
}

/// Wire format; also revalidates shape invariants on load.
#[derive(Serialize, Deserialize)]
struct PredictorRepr {
    family: PredictorFamily,
    decision_space: DecisionSpace,
    input_schema: InputSchema,
    parameters: ModelParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    train_config: Option<TrainConfig>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    metrics: BTreeMap<String, f64>,
}

impl From<Predictor> for PredictorRepr {
    fn from(p: Predictor) -> Self {
        Self {
            family: p.family,
            decision_space: p.decision_space,
            input_schema: p.input_schema,
            parameters: p.parameters,
            train_config: p.train_config,
            metrics: p.metrics,
        }
    }
}

impl TryFrom<PredictorRepr> for Predictor {
    type Error = PredictError;

    fn try_from(repr: PredictorRepr) -> Result<Self, Self::Error> {
        let mut p = Predictor::from_parts(
            repr.family,
            repr.decision_space,
            repr.input_schema,
            repr.parameters,
        )?;
        p.train_config = repr.train_config;
        p.metrics = repr.metrics;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predict::Feature;
    use crate::scm::{CausalGraph, Snapshot, StructuralEquation, VariableRole, VariableSpec};
    use crate::value::Value;

    fn proxy_scm() -> FittedScm {
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
            vec![StructuralEquation::new("x", 1.0, &[("a=1", 2.0)], 0.5)],
        )
        .expect("valid model")
    }

    fn binary_space() -> DecisionSpace {
        DecisionSpace::new(&["deny", "approve"]).expect("valid space")
    }

    #[test]
    fn pivot_softmax_matches_hand_values() {
        let probs = softmax_with_pivot(&[2.0f64.ln()]);
        assert!((probs[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((probs[1] - 2.0 / 3.0).abs() < 1e-15);

        // Stable far from zero and always normalized.
        let probs = softmax_with_pivot(&[1000.0, -1000.0]);
        assert!(probs.iter().all(|p| p.is_finite()));
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(probs[1] > 0.999);
    }

    #[test]
    fn binary_linear_model_is_a_logistic_regression() {
        let schema = InputSchema::new(vec![
            Feature::Observable { name: "x".into() },
            Feature::Observable { name: "x2".into() },
            Feature::Observable { name: "x3".into() },
        ]);
        let predictor = Predictor::from_parts(
            PredictorFamily::Unaware,
            binary_space(),
            schema,
            ModelParams::Linear {
                weights: vec![vec![0.5, -1.0, 2.0]],
                bias: vec![0.5],
            },
        )
        .expect("valid predictor");
        // z = 0.5·1 − 1·2 + 2·1 + 0.5 = 1; σ(1) to full precision.
        let probs = predictor.score_row(&[1.0, 2.0, 1.0]);
        assert!((probs[1] - 0.7310585786300049).abs() < 1e-15);
        assert!((probs[0] + probs[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn shape_and_family_violations_are_rejected() {
        let scm = proxy_scm();
        let full_schema = InputSchema::for_family(PredictorFamily::Full, &scm);

        // Parameter row too short for the two-column schema.
        let bad_shape = Predictor::from_parts(
            PredictorFamily::Full,
            binary_space(),
            full_schema.clone(),
            ModelParams::Linear {
                weights: vec![vec![1.0]],
                bias: vec![0.0],
            },
        );
        assert!(matches!(bad_shape, Err(PredictError::SchemaMismatch { .. })));

        // An unaware predictor must not read protected indicators.
        let unaware_reading_protected = Predictor::from_parts(
            PredictorFamily::Unaware,
            binary_space(),
            full_schema.clone(),
            ModelParams::Linear {
                weights: vec![vec![1.0, -0.5]],
                bias: vec![-3.0],
            },
        );
        assert!(matches!(
            unaware_reading_protected,
            Err(PredictError::SchemaMismatch { .. })
        ));

        // Hidden layers are reserved for the contrastive family.
        let hidden_full = Predictor::from_parts(
            PredictorFamily::Full,
            binary_space(),
            full_schema,
            ModelParams::OneHidden {
                w1: vec![vec![0.1, 0.1]],
                b1: vec![0.0],
                w2: vec![vec![0.2]],
                b2: vec![0.0],
            },
        );
        assert!(matches!(hidden_full, Err(PredictError::SchemaMismatch { .. })));
    }

    fn full_predictor(scm: &FittedScm) -> Predictor {
        // Schema order: observables first (x), then protected indicators (a=1).
        Predictor::from_parts(
            PredictorFamily::Full,
            binary_space(),
            InputSchema::for_family(PredictorFamily::Full, scm),
            ModelParams::Linear {
                weights: vec![vec![1.0, -0.5]],
                bias: vec![-3.0],
            },
        )
        .expect("valid predictor")
    }

    fn person() -> Individual {
        Individual::new(
            "p",
            &[("a", Value::from("1"))],
            vec![Snapshot::new(0, &[("x", 4.0)])],
        )
    }

    #[test]
    fn counterfactual_score_regenerates_features_through_the_model() {
        let scm = proxy_scm();
        let predictor = full_predictor(&scm);
        let individual = person();

        // Factual: z = 1·4 − 0.5·1 − 3 = 0.5.
        let factual = predictor.predict(&scm, &individual, 0).expect("scores");
        assert!((factual.get("approve").unwrap() - 0.6224593312018546).abs() < 1e-15);

        // Under A←0 the residual 1 gives x' = 2, so z = 2 + 0 − 3 = −1.
        let flipped = Intervention::new(&[("a", Value::from("0"))]);
        let cf = predictor
            .counterfactual_score(&scm, &individual, 0, &flipped)
            .expect("scores");
        assert!((cf.get("approve").unwrap() - 0.2689414213699951).abs() < 1e-15);

        // Intervening with the factual value reproduces the factual score.
        let same = Intervention::new(&[("a", Value::from("1"))]);
        let again = predictor
            .counterfactual_score(&scm, &individual, 0, &same)
            .expect("scores");
        assert_eq!(again, factual);
    }

    #[test]
    fn residual_inputs_make_scores_intervention_invariant() {
        let scm = proxy_scm();
        let predictor = Predictor::from_parts(
            PredictorFamily::Counterfactual,
            binary_space(),
            InputSchema::for_family(PredictorFamily::Counterfactual, &scm),
            ModelParams::Linear {
                weights: vec![vec![0.8]],
                bias: vec![-0.2],
            },
        )
        .expect("valid predictor");
        let individual = person();
        let factual = predictor.predict(&scm, &individual, 0).expect("scores");
        for level in ["0", "1"] {
            let intervention = Intervention::new(&[("a", Value::from(level))]);
            let cf = predictor
                .counterfactual_score(&scm, &individual, 0, &intervention)
                .expect("scores");
            assert_eq!(cf, factual);
        }
    }

    #[test]
    fn json_round_trip_revalidates_on_load() {
        let scm = proxy_scm();
        let predictor = full_predictor(&scm);
        let text = predictor.to_json();
        let back = Predictor::from_json(&text).expect("parses");
        assert_eq!(back, predictor);
        assert_eq!(back.to_json(), text);

        // Corrupt the weight shape; the load must fail, not mis-score.
        let broken = text.replace("[\n        1.0,\n        -0.5\n      ]", "[\n        1.0\n      ]");
        assert_ne!(broken, text, "corruption must hit the weights");
        assert!(Predictor::from_json(&broken).is_err());
        assert!(Predictor::from_json("{").is_err());
    }
}
