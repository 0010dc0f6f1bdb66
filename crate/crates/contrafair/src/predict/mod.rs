//! Decision predictors: four families behind one scoring interface, plus the
//! counterfactual contrast penalty and its trainer.

mod features;
mod model;
mod space;
mod train;

pub use features::{Feature, InputSchema};
pub use model::{ModelParams, Predictor, PredictorFamily};
pub use space::{DecisionSpace, ScoreVector};
pub use train::{contrastive_penalty, train, training_objective, TrainConfig};
pub(crate) use train::class_of;

use thiserror::Error;

use crate::scm::ScmError;

/// Prediction and training failures.
#[derive(Debug, Error)]
pub enum PredictError {
    #[error("input schema mismatch: {detail}")]
    SchemaMismatch { detail: String },

    #[error("no value for variable {variable}")]
    MissingValue { variable: String },

    #[error("invalid decision space: {detail}")]
    InvalidDecisionSpace { detail: String },

    #[error("empty {what} given to a batch operation")]
    EmptyBatch { what: String },

    #[error("training diverged to a non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("individual {id} has no recorded outcome")]
    MissingOutcome { id: String },

    #[error("outcome {value} of individual {id} is not a decision index")]
    InvalidOutcome { id: String, value: f64 },

    #[error("cannot enumerate protected domain: {detail}")]
    UnenumerableProtected { detail: String },

    #[error(transparent)]
    Scm(#[from] ScmError),

    #[error("malformed predictor document: {detail}")]
    Format { detail: String },
}
