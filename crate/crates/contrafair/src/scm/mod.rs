//! Structural causal models: graphs, linear additive-noise equations, and
//! counterfactual reconstruction.

mod fit;
mod graph;
mod model;
mod world;

pub use graph::{CausalGraph, DomainKind, VariableRole, VariableSpec};
pub use model::{FitStats, FittedScm, StructuralEquation};
pub use world::{protected_combinations, Individual, Intervention, LatentAssignment, Snapshot};

pub(crate) use fit::regressor_value;

use thiserror::Error;

/// Everything that can go wrong while validating, fitting, or evaluating a
/// structural causal model.
#[derive(Debug, Error)]
pub enum ScmError {
    #[error("graph has a cycle through edge {parent} -> {child}")]
    CycleDetected { parent: String, child: String },

    #[error("protected variable {child} has incoming edge from {parent}")]
    ProtectedHasParent { parent: String, child: String },

    #[error("edge references undeclared variable {name}")]
    DanglingEdge { name: String },

    #[error("graph needs at least one protected and one observable variable")]
    EmptyRoles,

    #[error("variable {name} declared more than once")]
    DuplicateVariable { name: String },

    #[error("categorical variable {name} has missing, duplicate, or too few levels")]
    BadLevels { name: String },

    #[error("invalid variable name {name:?}")]
    InvalidName { name: String },

    #[error("observable {name} must be continuous")]
    CategoricalObservable { name: String },

    #[error("outcome variable {parent} has outgoing edge to {child}")]
    OutcomeHasChild { parent: String, child: String },

    #[error("equation for {child} needs at least {p} rows, got {n}")]
    InsufficientData { child: String, n: usize, p: usize },

    #[error("design matrix for {child} is singular or ill-conditioned")]
    SingularDesign { child: String },

    #[error("no value for variable {variable}")]
    MissingValue { variable: String },

    #[error("{name} is not a protected variable of this model")]
    UnknownProtected { name: String },

    #[error("snapshot index {index} out of range for individual with {len} snapshots")]
    UnknownSnapshot { index: usize, len: usize },

    #[error("value {value} outside the domain of variable {variable}")]
    DomainViolation { variable: String, value: String },

    #[error("equations do not match the graph: {detail}")]
    EquationMismatch { detail: String },

    #[error("malformed model document: {detail}")]
    Format { detail: String },
}
