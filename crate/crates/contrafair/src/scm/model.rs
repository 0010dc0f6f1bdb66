//! Linear additive-noise structural equations and the fitted model.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::graph::{CausalGraph, VariableRole};
use super::ScmError;
use crate::value::Value;

/// One linear additive-noise equation: child = intercept + Σ w·parent + ε.
///
/// Weight keys are the child's expanded regressor columns: continuous parents
/// by name, categorical parents as `parent=level` indicators with the first
/// declared level as the dropped reference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructuralEquation {
    pub child: String,
    pub intercept: f64,
    pub weights: BTreeMap<String, f64>,
    /// Standard deviation of the additive noise term.
    pub noise_std: f64,
}

impl StructuralEquation {
    pub fn new(child: &str, intercept: f64, weights: &[(&str, f64)], noise_std: f64) -> Self {
        Self {
            child: child.to_string(),
            intercept,
            weights: weights
                .iter()
                .map(|(k, w)| (k.to_string(), *w))
                .collect(),
            noise_std,
        }
    }

    /// Noise-free prediction of the child given parent values.
    ///
    /// Protected parents resolve against `protected`, observable parents
    /// against `observables`. Categorical parents contribute their one-hot
    /// indicators, continuous parents their raw value.
    pub fn predict(
        &self,
        graph: &CausalGraph,
        protected: &BTreeMap<String, Value>,
        observables: &BTreeMap<String, f64>,
    ) -> Result<f64, ScmError> {
        let mut sum = self.intercept;
        for parent in graph.parents(&self.child) {
            let spec = graph
                .variable(parent)
                .ok_or_else(|| ScmError::DanglingEdge {
                    name: parent.to_string(),
                })?;
            if spec.is_categorical() {
                let value = protected
                    .get(parent)
                    .ok_or_else(|| ScmError::MissingValue {
                        variable: parent.to_string(),
                    })?;
                spec.check_value(value)?;
                let level = value.as_level().expect("checked categorical");
                for key in spec.regressor_keys() {
                    let weight = self.weight(&key)?;
                    let on = key.ends_with(&format!("={level}"));
                    if on {
                        sum += weight;
                    }
                }
            } else {
                let v = match spec.role {
                    VariableRole::Protected => protected
                        .get(parent)
                        .and_then(Value::as_continuous)
                        .ok_or_else(|| ScmError::MissingValue {
                            variable: parent.to_string(),
                        })?,
                    _ => *observables
                        .get(parent)
                        .ok_or_else(|| ScmError::MissingValue {
                            variable: parent.to_string(),
                        })?,
                };
                sum += self.weight(parent)? * v;
            }
        }
        Ok(sum)
    }

    fn weight(&self, key: &str) -> Result<f64, ScmError> {
        self.weights
            .get(key)
            .copied()
            .ok_or_else(|| ScmError::EquationMismatch {
                detail: format!("equation for {} lacks weight {}", self.child, key),
            })
    }
}

/// Per-equation fit diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitStats {
    pub residual_variance: f64,
    pub samples: usize,
}

/// A causal graph together with fitted (or hand-authored) equations.
///
/// Immutable after construction; the topological evaluation order is cached.
/// Safe to share across threads for concurrent reads.
#[derive(Clone, Debug, PartialEq)]
pub struct FittedScm {
    graph: CausalGraph,
    equations: BTreeMap<String, StructuralEquation>,
    fit_stats: BTreeMap<String, FitStats>,
    /// All variables in topological order.
    topo: Vec<String>,
    /// Observable equation children in topological order.
    feature_order: Vec<String>,
}

impl FittedScm {
    /// Builds a model from a validated graph and hand-authored equations.
    ///
    /// Every observable must carry exactly one equation; outcome variables may
    /// optionally carry one (used for data generation, never for
    /// counterfactual propagation of features).
    pub fn from_parts(
        graph: CausalGraph,
        equations: Vec<StructuralEquation>,
    ) -> Result<Self, ScmError> {
        let stats = equations
            .iter()
            .map(|eq| {
                (
                    eq.child.clone(),
                    FitStats {
                        residual_variance: eq.noise_std * eq.noise_std,
                        samples: 0,
                    },
                )
            })
            .collect();
        Self::with_stats(graph, equations, stats)
    }

    pub(crate) fn with_stats(
        graph: CausalGraph,
        equations: Vec<StructuralEquation>,
        fit_stats: BTreeMap<String, FitStats>,
    ) -> Result<Self, ScmError> {
        graph.validate()?;
        let topo = graph.topological_order()?;

        let mut map = BTreeMap::new();
        for eq in equations {
            if eq.noise_std < 0.0 || !eq.noise_std.is_finite() {
                return Err(ScmError::EquationMismatch {
                    detail: format!("equation for {} has invalid noise_std", eq.child),
                });
            }
            let spec = graph
                .variable(&eq.child)
                .ok_or_else(|| ScmError::DanglingEdge {
                    name: eq.child.clone(),
                })?;
            if spec.role == VariableRole::Protected {
                return Err(ScmError::EquationMismatch {
                    detail: format!("protected variable {} cannot have an equation", eq.child),
                });
            }
            let expected: Vec<String> = graph.equation_keys(&eq.child);
            let mut got: Vec<&String> = eq.weights.keys().collect();
            let mut want: Vec<&String> = expected.iter().collect();
            got.sort();
            want.sort();
            if got != want {
                return Err(ScmError::EquationMismatch {
                    detail: format!(
                        "equation for {} has weights [{}], graph expects [{}]",
                        eq.child,
                        got.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", "),
                        want.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", "),
                    ),
                });
            }
            if map.insert(eq.child.clone(), eq).is_some() {
                return Err(ScmError::EquationMismatch {
                    detail: "duplicate equation child".to_string(),
                });
            }
        }

        for obs in graph.observable_variables() {
            if !map.contains_key(&obs.name) {
                return Err(ScmError::EquationMismatch {
                    detail: format!("observable {} has no equation", obs.name),
                });
            }
        }

        let feature_order = topo
            .iter()
            .filter(|name| {
                graph
                    .variable(name)
                    .map(|v| v.role == VariableRole::Observable)
                    .unwrap_or(false)
            })
            .cloned()
            .collect();

        Ok(Self {
            graph,
            equations: map,
            fit_stats,
            topo,
            feature_order,
        })
    }

    pub fn graph(&self) -> &CausalGraph {
        &self.graph
    }

    pub fn equation(&self, child: &str) -> Option<&StructuralEquation> {
        self.equations.get(child)
    }

    pub fn equations(&self) -> impl Iterator<Item = &StructuralEquation> {
        self.equations.values()
    }

    pub fn fit_stats(&self) -> &BTreeMap<String, FitStats> {
        &self.fit_stats
    }

    pub fn topological_order(&self) -> &[String] {
        &self.topo
    }

    /// Observable equation children in topological evaluation order; also the
    /// key set of every `LatentAssignment` this model abducts.
    pub fn feature_order(&self) -> &[String] {
        &self.feature_order
    }

    /// The outcome equation, when one was fitted or authored.
    pub fn outcome_equation(&self) -> Option<&StructuralEquation> {
        self.graph
            .outcome_variables()
            .into_iter()
            .find_map(|v| self.equations.get(&v.name))
    }

    pub fn to_json(&self) -> String {
        let repr = ScmFileRepr {
            variables: self.graph.variables.clone(),
            edges: self.graph.edges.clone(),
            equations: self
                .equations
                .iter()
                .map(|(child, eq)| {
                    (
                        child.clone(),
                        EquationRepr {
                            intercept: eq.intercept,
                            weights: eq.weights.clone(),
                            noise_std: eq.noise_std,
                        },
                    )
                })
                .collect(),
            fit_stats: self.fit_stats.clone(),
        };
        let mut s = serde_json::to_string_pretty(&repr).expect("scm serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, ScmError> {
        let repr: ScmFileRepr = serde_json::from_str(text).map_err(|e| ScmError::Format {
            detail: e.to_string(),
        })?;
        let graph = CausalGraph {
            variables: repr.variables,
            edges: repr.edges,
        };
        let equations = repr
            .equations
            .into_iter()
            .map(|(child, eq)| StructuralEquation {
                child,
                intercept: eq.intercept,
                weights: eq.weights,
                noise_std: eq.noise_std,
            })
            .collect();
        Self::with_stats(graph, equations, repr.fit_stats)
    }
}

#[derive(Serialize, Deserialize)]
struct ScmFileRepr {
    variables: Vec<super::graph::VariableSpec>,
    edges: Vec<(String, String)>,
    equations: BTreeMap<String, EquationRepr>,
    #[serde(default)]
    fit_stats: BTreeMap<String, FitStats>,
}

#[derive(Serialize, Deserialize)]
struct EquationRepr {
    intercept: f64,
    weights: BTreeMap<String, f64>,
    noise_std: f64,
}
