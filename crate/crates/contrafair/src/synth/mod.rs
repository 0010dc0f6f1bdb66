//! Synthetic populations from known causal models, plus deliberately
//! independent brute-force oracles that cross-check the fast paths in tests.

mod fixtures;
mod generate;
mod oracle;

pub use fixtures::{
    categorical_domain, fix_a_population, fix_a_scm, law_school_config, law_school_scm,
    random_linear_scm, random_predictor,
};
pub use generate::{sample_population, GeneratorConfig};
pub use oracle::{oracle_check, oracle_counterfactual, OracleCriterion};

use thiserror::Error;

use crate::predict::PredictError;
use crate::scm::ScmError;

/// Generation and oracle failures.
#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid protected marginal: {detail}")]
    InvalidMarginal { detail: String },

    #[error("protected domain has {combos} combinations, oracle enumerates at most {max}")]
    DomainTooLarge { combos: usize, max: usize },

    #[error(transparent)]
    Scm(#[from] ScmError),

    #[error(transparent)]
    Predict(#[from] PredictError),
}
