//! Causal graphs: role-tagged variables over a DAG.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::ScmError;
use crate::value::Value;

/// What a variable means to a fairness audit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariableRole {
    /// Exogenous attribute a fair decision must not depend on (race, sex, ...).
    Protected,
    /// Measured feature carrying a structural equation (GPA, LSAT, ...).
    Observable,
    /// The quantity decisions are about; never a cause of features.
    Outcome,
}

/// Value domain of a variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    Continuous,
    Categorical,
}

/// One node of the causal graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    pub role: VariableRole,
    pub domain: DomainKind,
    /// Ordered level labels; present iff the domain is categorical.
    /// The first level is the reference level dropped from one-hot encodings.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<String>>,
}

impl VariableSpec {
    pub fn continuous(name: &str, role: VariableRole) -> Self {
        Self {
            name: name.to_string(),
            role,
            domain: DomainKind::Continuous,
            levels: None,
        }
    }

    pub fn categorical(name: &str, role: VariableRole, levels: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            role,
            domain: DomainKind::Categorical,
            levels: Some(levels.iter().map(|l| l.to_string()).collect()),
        }
    }

    pub fn is_categorical(&self) -> bool {
        self.domain == DomainKind::Categorical
    }

    pub fn level_labels(&self) -> &[String] {
        self.levels.as_deref().unwrap_or(&[])
    }

    /// Regressor column keys this variable expands to when it appears as a
    /// parent in a linear equation. Continuous variables contribute one column
    /// named after the variable; categorical variables contribute one
    /// indicator column per non-reference level, keyed `name=level`.
    pub fn regressor_keys(&self) -> Vec<String> {
        match self.domain {
            DomainKind::Continuous => vec![self.name.clone()],
            DomainKind::Categorical => self
                .level_labels()
                .iter()
                .skip(1)
                .map(|level| format!("{}={}", self.name, level))
                .collect(),
        }
    }

    /// Checks that `value` lies in this variable's domain.
    pub fn check_value(&self, value: &Value) -> Result<(), ScmError> {
        let ok = match (self.domain, value) {
            (DomainKind::Continuous, Value::Continuous(v)) => v.is_finite(),
            (DomainKind::Categorical, Value::Categorical(level)) => {
                self.level_labels().iter().any(|l| l == level)
            }
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(ScmError::DomainViolation {
                variable: self.name.clone(),
                value: value.to_string(),
            })
        }
    }
}

/// DAG over role-tagged variables. Edges run cause -> effect.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CausalGraph {
    pub variables: Vec<VariableSpec>,
    pub edges: Vec<(String, String)>,
}

impl CausalGraph {
    pub fn new(variables: Vec<VariableSpec>, edges: Vec<(&str, &str)>) -> Self {
        Self {
            variables,
            edges: edges
                .into_iter()
                .map(|(p, c)| (p.to_string(), c.to_string()))
                .collect(),
        }
    }

    pub fn variable(&self, name: &str) -> Option<&VariableSpec> {
        self.variables.iter().find(|v| v.name == name)
    }

    /// Parents of `child` in edge-declaration order.
    pub fn parents(&self, child: &str) -> Vec<&str> {
        self.edges
            .iter()
            .filter(|(_, c)| c == child)
            .map(|(p, _)| p.as_str())
            .collect()
    }

    pub fn children(&self, parent: &str) -> Vec<&str> {
        self.edges
            .iter()
            .filter(|(p, _)| p == parent)
            .map(|(_, c)| c.as_str())
            .collect()
    }

    pub fn variables_with_role(&self, role: VariableRole) -> impl Iterator<Item = &VariableSpec> {
        self.variables.iter().filter(move |v| v.role == role)
    }

    pub fn protected_variables(&self) -> Vec<&VariableSpec> {
        self.variables_with_role(VariableRole::Protected).collect()
    }

    pub fn observable_variables(&self) -> Vec<&VariableSpec> {
        self.variables_with_role(VariableRole::Observable).collect()
    }

    pub fn outcome_variables(&self) -> Vec<&VariableSpec> {
        self.variables_with_role(VariableRole::Outcome).collect()
    }

    /// Full validation of the graph invariants.
    pub fn validate(&self) -> Result<(), ScmError> {
        let mut seen = BTreeSet::new();
        for var in &self.variables {
            if var.name.is_empty() || var.name.contains('=') || var.name.contains(',') {
                return Err(ScmError::InvalidName {
                    name: var.name.clone(),
                });
            }
            if !seen.insert(var.name.as_str()) {
                return Err(ScmError::DuplicateVariable {
                    name: var.name.clone(),
                });
            }
            match (var.domain, &var.levels) {
                (DomainKind::Categorical, Some(levels)) => {
                    if levels.len() < 2 {
                        return Err(ScmError::BadLevels {
                            name: var.name.clone(),
                        });
                    }
                    let distinct: BTreeSet<_> = levels.iter().collect();
                    if distinct.len() != levels.len() {
                        return Err(ScmError::BadLevels {
                            name: var.name.clone(),
                        });
                    }
                }
                (DomainKind::Categorical, None) | (DomainKind::Continuous, Some(_)) => {
                    return Err(ScmError::BadLevels {
                        name: var.name.clone(),
                    });
                }
                (DomainKind::Continuous, None) => {}
            }
            // Every observable carries a linear equation, so it must be numeric.
            if var.role == VariableRole::Observable && var.is_categorical() {
                return Err(ScmError::CategoricalObservable {
                    name: var.name.clone(),
                });
            }
        }

        for (parent, child) in &self.edges {
            for endpoint in [parent, child] {
                if self.variable(endpoint).is_none() {
                    return Err(ScmError::DanglingEdge {
                        name: endpoint.clone(),
                    });
                }
            }
            let child_spec = self.variable(child).expect("checked above");
            if child_spec.role == VariableRole::Protected {
                return Err(ScmError::ProtectedHasParent {
                    parent: parent.clone(),
                    child: child.clone(),
                });
            }
            let parent_spec = self.variable(parent).expect("checked above");
            if parent_spec.role == VariableRole::Outcome {
                return Err(ScmError::OutcomeHasChild {
                    parent: parent.clone(),
                    child: child.clone(),
                });
            }
        }

        if self.protected_variables().is_empty() || self.outcome_variables().is_empty() {
            return Err(ScmError::EmptyRoles);
        }

        self.topological_order()?;
        Ok(())
    }

    /// Kahn topological sort, stable under variable declaration order.
    pub fn topological_order(&self) -> Result<Vec<String>, ScmError> {
        let mut in_degree: BTreeMap<&str, usize> = self
            .variables
            .iter()
            .map(|v| (v.name.as_str(), 0))
            .collect();
        for (_, child) in &self.edges {
            if let Some(d) = in_degree.get_mut(child.as_str()) {
                *d += 1;
            }
        }

        let mut order = Vec::with_capacity(self.variables.len());
        let mut ready: Vec<&str> = self
            .variables
            .iter()
            .map(|v| v.name.as_str())
            .filter(|name| in_degree[name] == 0)
            .collect();

        while let Some(name) = ready.first().copied() {
            ready.remove(0);
            order.push(name.to_string());
            for (parent, child) in &self.edges {
                if parent == name {
                    let d = in_degree.get_mut(child.as_str()).expect("declared");
                    *d -= 1;
                    if *d == 0 {
                        // Keep declaration order among newly-ready nodes.
                        let pos = self
                            .variables
                            .iter()
                            .position(|v| &v.name == child)
                            .expect("declared");
                        let insert_at = ready
                            .iter()
                            .position(|r| {
                                self.variables.iter().position(|v| v.name == *r).unwrap() > pos
                            })
                            .unwrap_or(ready.len());
                        ready.insert(insert_at, child.as_str());
                    }
                }
            }
        }

        if order.len() != self.variables.len() {
            // Some edge inside the leftover set closes a cycle; report one.
            let leftover: BTreeSet<&str> = self
                .variables
                .iter()
                .map(|v| v.name.as_str())
                .filter(|n| !order.iter().any(|o| o == n))
                .collect();
            let (parent, child) = self
                .edges
                .iter()
                .find(|(p, c)| leftover.contains(p.as_str()) && leftover.contains(c.as_str()))
                .expect("a cycle implies such an edge");
            return Err(ScmError::CycleDetected {
                parent: parent.clone(),
                child: child.clone(),
            });
        }
        Ok(order)
    }

    /// Regressor column keys for `child`'s equation: its parents expanded in
    /// edge-declaration order.
    pub fn equation_keys(&self, child: &str) -> Vec<String> {
        self.parents(child)
            .iter()
            .flat_map(|p| {
                self.variable(p)
                    .map(|spec| spec.regressor_keys())
                    .unwrap_or_default()
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("graph serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}
