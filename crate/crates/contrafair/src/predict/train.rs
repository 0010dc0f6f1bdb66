//! Full-batch gradient-descent training with an optional counterfactual
//! contrast penalty.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::features::InputSchema;
use super::model::{forward, ModelParams, Predictor, PredictorFamily};
use super::space::DecisionSpace;
use super::PredictError;
use crate::scm::{protected_combinations, FittedScm, Individual, Intervention};

/// Everything that pins down one training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub family: PredictorFamily,
    pub learning_rate: f64,
    pub epochs: usize,
    /// λ: weight of the counterfactual contrast penalty. Contrastive family
    /// only; zero removes the term from the objective entirely.
    #[serde(default)]
    pub penalty_weight: f64,
    /// Hidden-layer width; 0 keeps the model linear. Contrastive family only.
    #[serde(default)]
    pub hidden_width: usize,
    pub seed: u64,
    /// L2 coefficient over weights (biases are not regularized).
    #[serde(default)]
    pub l2: f64,
    /// Maps continuous outcomes to the binary decision space: values at or
    /// above the threshold train toward the second decision label, the rest
    /// toward the first. Without a threshold, outcomes must already be
    /// decision indices (0, 1, ...).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome_threshold: Option<f64>,
}

impl TrainConfig {
    pub fn new(family: PredictorFamily, seed: u64) -> Self {
        Self {
            family,
            learning_rate: 0.5,
            epochs: 400,
            penalty_weight: 0.0,
            hidden_width: 0,
            seed,
            l2: 0.0,
            outcome_threshold: None,
        }
    }

    fn validate(&self) -> Result<(), PredictError> {
        if !(self.learning_rate > 0.0) || self.epochs == 0 || self.l2 < 0.0 {
            return Err(PredictError::SchemaMismatch {
                detail: "learning_rate and epochs must be positive, l2 nonnegative".to_string(),
            });
        }
        if self.family != PredictorFamily::Contrastive {
            if self.penalty_weight != 0.0 {
                return Err(PredictError::SchemaMismatch {
                    detail: format!("penalty_weight applies only to the contrastive family, not {}", self.family),
                });
            }
            if self.hidden_width != 0 {
                return Err(PredictError::SchemaMismatch {
                    detail: format!("{} family predictors are linear", self.family),
                });
            }
        }
        if self.penalty_weight < 0.0 {
            return Err(PredictError::SchemaMismatch {
                detail: "penalty_weight must be nonnegative".to_string(),
            });
        }
        Ok(())
    }
}

/// Mean over (individual, intervention) of the largest per-decision absolute
/// gap between the observed-world score and the counterfactual score, taken
/// at each individual's latest snapshot.
///
/// Zero exactly when the predictor's scores are intervention-invariant on
/// the batch: the counterfactual family by construction, and any predictor
/// that ignores every path from the protected attributes.
pub fn contrastive_penalty(
    predictor: &Predictor,
    scm: &FittedScm,
    batch: &[Individual],
    interventions: &[Intervention],
) -> Result<f64, PredictError> {
    if batch.is_empty() {
        return Err(PredictError::EmptyBatch {
            what: "batch".to_string(),
        });
    }
    if interventions.is_empty() {
        return Err(PredictError::EmptyBatch {
            what: "interventions".to_string(),
        });
    }
    let mut total = 0.0;
    for individual in batch {
        let last = individual.snapshots.len().saturating_sub(1);
        let factual = predictor.predict(scm, individual, last)?;
        for intervention in interventions {
            let flipped = predictor.counterfactual_score(scm, individual, last, intervention)?;
            total += factual.max_abs_diff(&flipped);
        }
    }
    Ok(total / (batch.len() * interventions.len()) as f64)
}

/// Factual rows, target classes, and (for a penalized run) the
/// counterfactual rows per individual — all resolved before the descent
/// loop, since the SCM is fixed during training.
struct PreparedBatch {
    rows: Vec<Vec<f64>>,
    classes: Vec<usize>,
    /// `cf_rows[i][j]`: features of individual i under intervention j.
    cf_rows: Vec<Vec<Vec<f64>>>,
}

pub(crate) fn class_of(
    individual: &Individual,
    space: &DecisionSpace,
    threshold: Option<f64>,
) -> Result<usize, PredictError> {
    let outcome = individual.outcome.ok_or_else(|| PredictError::MissingOutcome {
        id: individual.id.clone(),
    })?;
    match threshold {
        Some(t) => {
            if space.len() != 2 {
                return Err(PredictError::SchemaMismatch {
                    detail: "outcome_threshold needs a binary decision space".to_string(),
                });
            }
            Ok(usize::from(outcome >= t))
        }
        None => {
            let idx = outcome.round();
            if (outcome - idx).abs() > 1e-9 || idx < 0.0 || idx as usize >= space.len() {
                return Err(PredictError::InvalidOutcome {
                    id: individual.id.clone(),
                    value: outcome,
                });
            }
            Ok(idx as usize)
        }
    }
}

fn prepare(
    config: &TrainConfig,
    schema: &InputSchema,
    scm: &FittedScm,
    dataset: &[Individual],
    space: &DecisionSpace,
) -> Result<PreparedBatch, PredictError> {
    if dataset.is_empty() {
        return Err(PredictError::EmptyBatch {
            what: "dataset".to_string(),
        });
    }
    let penalized = config.family == PredictorFamily::Contrastive && config.penalty_weight > 0.0;
    let interventions = if penalized {
        protected_combinations(scm.graph(), &BTreeMap::new()).ok_or_else(|| {
            PredictError::UnenumerableProtected {
                detail: "contrastive training needs categorical protected variables".to_string(),
            }
        })?
    } else {
        Vec::new()
    };

    let mut rows = Vec::with_capacity(dataset.len());
    let mut classes = Vec::with_capacity(dataset.len());
    let mut cf_rows = Vec::new();
    for individual in dataset {
        let last = individual.snapshots.len().saturating_sub(1);
        rows.push(schema.extract(scm, individual, last)?);
        classes.push(class_of(individual, space, config.outcome_threshold)?);
        if penalized {
            let mut per_int = Vec::with_capacity(interventions.len());
            for intervention in &interventions {
                let world = scm.counterfactual(individual, last, intervention)?;
                let profile = intervention.merged(&individual.protected);
                per_int.push(schema.build_row(scm, &profile, &world.observables, None)?);
            }
            cf_rows.push(per_int);
        }
    }
    Ok(PreparedBatch {
        rows,
        classes,
        cf_rows,
    })
}

/// Seeded parameter init: weights drawn N(0, 0.1), biases zero, in flatten
/// order — so two configs with equal shapes and seed start identically.
fn init_params(config: &TrainConfig, n_features: usize, n_decisions: usize) -> ModelParams {
    let rows = n_decisions - 1;
    let template = if config.hidden_width == 0 {
        ModelParams::Linear {
            weights: vec![vec![0.0; n_features]; rows],
            bias: vec![0.0; rows],
        }
    } else {
        ModelParams::OneHidden {
            w1: vec![vec![0.0; n_features]; config.hidden_width],
            b1: vec![0.0; config.hidden_width],
            w2: vec![vec![0.0; config.hidden_width]; rows],
            b2: vec![0.0; rows],
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let normal = Normal::new(0.0, 0.1).expect("valid stddev");
    let mask = template.weight_mask();
    let flat: Vec<f64> = mask
        .iter()
        .map(|&is_weight| if is_weight { normal.sample(&mut rng) } else { 0.0 })
        .collect();
    template.unflatten(&flat)
}

/// Objective value and gradient in flatten order:
/// mean cross-entropy + l2·Σw² + λ·contrast penalty.
fn objective(
    params: &ModelParams,
    batch: &PreparedBatch,
    l2: f64,
    lambda: f64,
) -> (f64, Vec<f64>) {
    let n = batch.rows.len() as f64;
    let flat_len = params.flatten().len();
    let mut grad = vec![0.0; flat_len];
    let mut value = 0.0;

    for (row, &class) in batch.rows.iter().zip(&batch.classes) {
        let fwd = forward(params, row);
        value -= fwd.probs[class].max(f64::MIN_POSITIVE).ln() / n;
        // d(mean CE)/dz_k = (p_k − 1[class=k]) / n for the K−1 free logits.
        let logit_grad: Vec<f64> = fwd
            .probs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &p)| (p - f64::from(u8::from(k == class))) / n)
            .collect();
        backprop(params, row, &fwd.hidden, &logit_grad, &mut grad);
    }

    if lambda > 0.0 {
        let m = batch.cf_rows.first().map(|v| v.len()).unwrap_or(0);
        let scale = lambda / (n * m as f64);
        for (row, per_int) in batch.rows.iter().zip(&batch.cf_rows) {
            let fwd = forward(params, row);
            for cf_row in per_int {
                let cf_fwd = forward(params, cf_row);
                let (mut best, mut best_gap) = (0, 0.0f64);
                for (d, (&p, &q)) in fwd.probs.iter().zip(&cf_fwd.probs).enumerate() {
                    let gap = (p - q).abs();
                    if gap > best_gap {
                        best = d;
                        best_gap = gap;
                    }
                }
                value += scale * best_gap;
                if best_gap == 0.0 {
                    continue;
                }
                let sign = (fwd.probs[best] - cf_fwd.probs[best]).signum();
                // dp_d/dz_k = p_d (δ_dk − p_k); the pivot logit is constant.
                let factual_grad: Vec<f64> = (1..fwd.probs.len())
                    .map(|k| {
                        sign * scale
                            * fwd.probs[best]
                            * (f64::from(u8::from(k == best)) - fwd.probs[k])
                    })
                    .collect();
                let flipped_grad: Vec<f64> = (1..cf_fwd.probs.len())
                    .map(|k| {
                        -sign * scale
                            * cf_fwd.probs[best]
                            * (f64::from(u8::from(k == best)) - cf_fwd.probs[k])
                    })
                    .collect();
                backprop(params, row, &fwd.hidden, &factual_grad, &mut grad);
                backprop(params, cf_row, &cf_fwd.hidden, &flipped_grad, &mut grad);
            }
        }
    }

    if l2 > 0.0 {
        let flat = params.flatten();
        for (i, (&w, is_weight)) in flat.iter().zip(params.weight_mask()).enumerate() {
            if is_weight {
                value += l2 * w * w;
                grad[i] += 2.0 * l2 * w;
            }
        }
    }

    (value, grad)
}

/// Accumulates d(objective)/d(params) into `grad` (flatten order) given the
/// gradient w.r.t. the K−1 free logits for one input row.
fn backprop(
    params: &ModelParams,
    x: &[f64],
    hidden: &[f64],
    logit_grad: &[f64],
    grad: &mut [f64],
) {
    match params {
        ModelParams::Linear { weights, bias } => {
            let f = x.len();
            debug_assert_eq!(weights.len(), logit_grad.len());
            let mut idx = 0;
            for g in logit_grad {
                for &xv in x {
                    grad[idx] += g * xv;
                    idx += 1;
                }
            }
            for g in logit_grad {
                grad[idx] += g;
                idx += 1;
            }
            debug_assert_eq!(idx, weights.len() * f + bias.len());
        }
        ModelParams::OneHidden { w1, b1, w2, .. } => {
            let f = x.len();
            let h = hidden.len();
            let mut dh = vec![0.0; h];
            for (k, g) in logit_grad.iter().enumerate() {
                for (j, hv) in dh.iter_mut().enumerate() {
                    *hv += g * w2[k][j];
                }
            }
            // tanh'(a) = 1 − tanh(a)².
            let da: Vec<f64> = dh
                .iter()
                .zip(hidden)
                .map(|(d, hv)| d * (1.0 - hv * hv))
                .collect();
            let mut idx = 0;
            for d in &da {
                for &xv in x {
                    grad[idx] += d * xv;
                    idx += 1;
                }
            }
            for d in &da {
                grad[idx] += d;
                idx += 1;
            }
            for g in logit_grad {
                for hv in hidden {
                    grad[idx] += g * hv;
                    idx += 1;
                }
            }
            for g in logit_grad {
                grad[idx] += g;
                idx += 1;
            }
            debug_assert_eq!(idx, w1.len() * f + b1.len() + w2.len() * h + logit_grad.len());
        }
    }
}

/// Trains one predictor by deterministic full-batch gradient descent.
///
/// Families share the loop; they differ in their input schema and, for the
/// contrastive family, in the λ-weighted contrast penalty whose
/// counterfactual features are regenerated through the SCM (so proxy paths
/// from the protected attributes are penalized too, not just direct reads).
/// Same config, seed, and dataset give bit-identical parameters.
pub fn train(
    config: &TrainConfig,
    scm: &FittedScm,
    dataset: &[Individual],
    decision_space: &DecisionSpace,
) -> Result<Predictor, PredictError> {
    config.validate()?;
    decision_space.validate()?;
    let schema = InputSchema::for_family(config.family, scm);
    let batch = prepare(config, &schema, scm, dataset, decision_space)?;
    let lambda = if config.family == PredictorFamily::Contrastive {
        config.penalty_weight
    } else {
        0.0
    };

    let mut params = init_params(config, schema.len(), decision_space.len());
    for epoch in 0..config.epochs {
        let (value, grad) = objective(&params, &batch, config.l2, lambda);
        if !value.is_finite() {
            return Err(PredictError::NonFiniteLoss { epoch });
        }
        let flat: Vec<f64> = params
            .flatten()
            .iter()
            .zip(&grad)
            .map(|(p, g)| p - config.learning_rate * g)
            .collect();
        params = params.unflatten(&flat);
    }

    let (final_loss, _) = objective(&params, &batch, config.l2, lambda);
    if !final_loss.is_finite() {
        return Err(PredictError::NonFiniteLoss {
            epoch: config.epochs,
        });
    }

    let predictor = Predictor::from_parts(
        config.family,
        decision_space.clone(),
        schema,
        params,
    )?;

    let hits = batch
        .rows
        .iter()
        .zip(&batch.classes)
        .filter(|(row, &class)| {
            let probs = predictor.score_row(row);
            let best = probs
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
                .map(|(d, _)| d)
                .unwrap_or(0);
            best == class
        })
        .count();
    let mut metrics = BTreeMap::new();
    metrics.insert(
        "train_accuracy".to_string(),
        hits as f64 / batch.rows.len() as f64,
    );
    metrics.insert("final_loss".to_string(), final_loss);
    if config.family == PredictorFamily::Contrastive {
        let interventions = protected_combinations(scm.graph(), &BTreeMap::new())
            .unwrap_or_default();
        if !interventions.is_empty() {
            metrics.insert(
                "contrast_penalty".to_string(),
                contrastive_penalty(&predictor, scm, dataset, &interventions)?,
            );
        }
    }

    Ok(predictor.with_training_record(config.clone(), metrics))
}

/// Evaluates the training objective — mean cross-entropy plus the L2 term
/// and the λ-weighted contrast penalty — at `params`, returning its value
/// and analytic gradient in [`ModelParams::flatten`] order.
///
/// `rows` holds one factual feature row per example and `classes` the target
/// decision indices; `cf_rows[i]` holds individual `i`'s counterfactual
/// feature rows, one per intervention (pass `&[]` when λ is zero). This is
/// the exact function [`train`] descends, exposed so callers can verify the
/// gradient numerically or inspect convergence without rerunning descent.
pub fn training_objective(
    params: &ModelParams,
    rows: &[Vec<f64>],
    classes: &[usize],
    cf_rows: &[Vec<Vec<f64>>],
    l2: f64,
    lambda: f64,
) -> Result<(f64, Vec<f64>), PredictError> {
    if rows.is_empty() {
        return Err(PredictError::EmptyBatch {
            what: "rows".to_string(),
        });
    }
    if rows.len() != classes.len() || (!cf_rows.is_empty() && cf_rows.len() != rows.len()) {
        return Err(PredictError::SchemaMismatch {
            detail: "rows, classes, and cf_rows must describe the same examples".to_string(),
        });
    }
    let n_features = match params {
        ModelParams::Linear { weights, .. } => weights.first().map_or(0, Vec::len),
        ModelParams::OneHidden { w1, .. } => w1.first().map_or(0, Vec::len),
    };
    let n_decisions = match params {
        ModelParams::Linear { bias, .. } => bias.len() + 1,
        ModelParams::OneHidden { b2, .. } => b2.len() + 1,
    };
    let widths_ok = rows
        .iter()
        .chain(cf_rows.iter().flatten())
        .all(|row| row.len() == n_features);
    if !widths_ok || classes.iter().any(|&c| c >= n_decisions) {
        return Err(PredictError::SchemaMismatch {
            detail: format!(
                "every row must have {n_features} features and every class index must be below {n_decisions}"
            ),
        });
    }
    let batch = PreparedBatch {
        rows: rows.to_vec(),
        classes: classes.to_vec(),
        cf_rows: cf_rows.to_vec(),
    };
    Ok(objective(params, &batch, l2, lambda))
}
