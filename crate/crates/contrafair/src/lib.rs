//! Causal-inference audit engine for decision predictors.
//!
//! `contrafair` fits linear additive-noise structural causal models from
//! tabular data, trains (or loads) decision predictors over them, and checks
//! the predictors against a ladder of fairness criteria — population-level
//! parity checks, counterfactual fairness, and the contrastive criteria that
//! compare a subject's decision against the decisions of counterfactual and
//! cross-time variants of the same subject.
//!
//! The crate is organized around five pieces:
//!
//! * [`scm`] — causal graphs, structural equations, abduction, and
//!   counterfactual reconstruction;
//! * [`predict`] — decision spaces, feature extraction for the four predictor
//!   families, and penalized training;
//! * [`fairness`] — the criteria ladder and its verdict/clause types;
//! * [`synth`] — seeded population generators, presets, and brute-force
//!   oracles used to cross-check the fast paths;
//! * [`audit`] / [`report`] — the end-to-end audit pipeline and its
//!   machine-readable report.
//!
//! ```
//! use contrafair::scm::{
//!     CausalGraph, FittedScm, Individual, Intervention, Snapshot, VariableRole, VariableSpec,
//! };
//! use contrafair::Value;
//!
//! let graph = CausalGraph::new(
//!     vec![
//!         VariableSpec::categorical("a", VariableRole::Protected, &["0", "1"]),
//!         VariableSpec::continuous("x", VariableRole::Observable),
//!         VariableSpec::continuous("y", VariableRole::Outcome),
//!     ],
//!     vec![("a", "x"), ("x", "y")],
//! );
//! let individuals = vec![
//!     Individual::new("p1", &[("a", Value::from("0"))], vec![Snapshot::new(0, &[("x", 1.0)])]),
//!     Individual::new("p2", &[("a", Value::from("0"))], vec![Snapshot::new(0, &[("x", 1.2)])]),
//!     Individual::new("p3", &[("a", Value::from("1"))], vec![Snapshot::new(0, &[("x", 3.0)])]),
//!     Individual::new("p4", &[("a", Value::from("1"))], vec![Snapshot::new(0, &[("x", 3.2)])]),
//! ];
//! let scm = FittedScm::fit(graph, &individuals)?;
//!
//! // What would p3's features have been, had a been 0?
//! let flipped = Intervention::new(&[("a", Value::from("0"))]);
//! let world = scm.counterfactual(&individuals[2], 0, &flipped)?;
//! assert!((world.observables["x"] - 1.0).abs() < 1e-9);
//! # Ok::<(), contrafair::scm::ScmError>(())
//! ```

pub mod audit;
pub mod dataset;
pub mod fairness;
pub mod predict;
pub mod report;
pub mod scm;
pub mod synth;
mod value;

pub use value::Value;
