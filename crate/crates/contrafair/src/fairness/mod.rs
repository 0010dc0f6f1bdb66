//! The fairness-criteria ladder.
//!
//! Every check returns a [`Verdict`]: a pass/fail per criterion built from
//! [`Clause`]s that record the observed quantities and margins, so a failing
//! audit names exactly which inequality broke and by how much.
//!
//! Two tolerance regimes apply throughout. Equality-type clauses (score
//! invariance under interventions) pass when the worst observed gap is at
//! most `eps_fair`. Ordering-type clauses (this decision should beat that
//! one) pass when the gap strictly exceeds `delta_order`, so exact ties fail:
//! a tie justifies neither decision.

mod contrast;
mod population;

pub use contrast::{
    check_contrast_margin, check_counterfactual_fairness, check_d_contrast, check_i_contrast,
    check_t_contrast,
};
pub use population::{
    check_demographic_parity, check_equality_of_opportunity, check_individual_fairness,
    euclidean_distance, FavorableOutcome,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::predict::PredictError;

/// Numerical slack for the criteria ladder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerance {
    /// Maximum allowed score gap for equality-type clauses.
    pub eps_fair: f64,
    /// Minimum required score gap for strict-ordering clauses (ties fail).
    pub delta_order: f64,
    /// Required score gap between two individuals under swapped protected
    /// assignments for the contrast-margin criterion.
    pub lambda_margin: f64,
    /// When set, the advisory reversed-margin clause also gates the
    /// contrast-margin verdict.
    pub strict_margin: bool,
    /// Representative values for continuous protected variables, which have
    /// no finite domain to enumerate. Keyed by variable name.
    pub protected_grid: BTreeMap<String, Vec<f64>>,
}

impl Default for Tolerance {
    /// Individual-criteria defaults: near-exact equality, ties fail ordering.
    fn default() -> Self {
        Self {
            eps_fair: 1e-6,
            delta_order: 0.0,
            lambda_margin: 0.05,
            strict_margin: false,
            protected_grid: BTreeMap::new(),
        }
    }
}

impl Tolerance {
    /// Population-criteria defaults: equality up to sampling noise.
    pub fn population() -> Self {
        Self {
            eps_fair: 0.02,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<(), FairnessError> {
        if self.eps_fair < 0.0 || self.delta_order < 0.0 || self.lambda_margin < 0.0 {
            return Err(FairnessError::InvalidTolerance);
        }
        Ok(())
    }
}

/// One recorded inequality or equality comparison.
///
/// `margin` is the clause's distance from its boundary: for equality clauses
/// the worst absolute score gap (passes when ≤ eps), for ordering clauses
/// the signed gap lhs − rhs (passes when > the required threshold).
/// `intervention` and `decision` locate the worst-case comparison when the
/// clause quantifies over several.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Clause {
    pub equation: String,
    pub passed: bool,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub intervention: Option<String>,
    pub decision: Option<String>,
}

impl Clause {
    /// An equality clause: passes when the worst gap stays within `eps`.
    fn equality(
        equation: &str,
        lhs: f64,
        rhs: f64,
        worst_gap: f64,
        eps: f64,
        intervention: Option<String>,
        decision: Option<String>,
    ) -> Self {
        Self {
            equation: equation.to_string(),
            passed: worst_gap <= eps,
            lhs,
            rhs,
            margin: worst_gap,
            intervention,
            decision,
        }
    }

    /// An ordering clause: passes when lhs exceeds rhs by more than
    /// `threshold`. A tie fails.
    fn ordering(
        equation: &str,
        lhs: f64,
        rhs: f64,
        threshold: f64,
        intervention: Option<String>,
        decision: Option<String>,
    ) -> Self {
        Self {
            equation: equation.to_string(),
            passed: lhs - rhs > threshold,
            lhs,
            rhs,
            margin: lhs - rhs,
            intervention,
            decision,
        }
    }
}

/// Who and what a verdict examined.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Subjects {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub individuals: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub decisions: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub interventions: Vec<String>,
}

/// The outcome of one criterion check. `passed` is the conjunction of its
/// gating clauses; advisory clauses are recorded but excluded from the
/// conjunction (the contrast-margin criterion documents which).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub criterion: String,
    pub passed: bool,
    pub clauses: Vec<Clause>,
    pub subjects: Subjects,
    /// Which predictor family was judged, when the verdict came from an
    /// audit over several models. Checks called directly leave this unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predictor: Option<String>,
}

impl Verdict {
    /// Builds a verdict whose `passed` is the conjunction of all clauses.
    fn conjunction(criterion: &str, clauses: Vec<Clause>, subjects: Subjects) -> Self {
        let passed = clauses.iter().all(|c| c.passed);
        Self {
            criterion: criterion.to_string(),
            passed,
            clauses,
            subjects,
            predictor: None,
        }
    }
}

/// Criteria-check failures.
#[derive(Debug, Error)]
pub enum FairnessError {
    #[error("continuous protected variable {name} needs a protected_grid entry to enumerate")]
    ContinuousProtectedUnenumerable { name: String },

    #[error("d and d' must be different decisions, got {label} twice")]
    SameDecision { label: String },

    #[error("i-contrast needs two distinct individuals, got {id} twice")]
    SameIndividual { id: String },

    #[error("decision {label} is not in the predictor's decision space")]
    UnknownDecision { label: String },

    #[error("individual has no snapshot at time {time}")]
    UnknownSnapshot { time: i64 },

    #[error("group {level} of {attribute} has no individuals")]
    EmptyGroup { attribute: String, level: String },

    #[error("group {level} of {attribute} has no individuals with the favorable outcome")]
    EmptyConditionedGroup { attribute: String, level: String },

    #[error("cannot group by {name}: {detail}")]
    BadGroupAttribute { name: String, detail: String },

    #[error("tolerances must be nonnegative")]
    InvalidTolerance,

    #[error(transparent)]
    Predict(#[from] PredictError),
}
