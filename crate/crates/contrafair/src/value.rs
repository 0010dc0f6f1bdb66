use std::fmt;

use serde::{Deserialize, Serialize};

/// A single observed value: either a real number or a categorical level label.
///
/// Continuous values serialize as JSON numbers, categorical levels as strings,
/// so datasets and model files stay self-describing against the graph spec.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Continuous(f64),
    Categorical(String),
}

impl Value {
    pub fn as_continuous(&self) -> Option<f64> {
        match self {
            Value::Continuous(v) => Some(*v),
            Value::Categorical(_) => None,
        }
    }

    pub fn as_level(&self) -> Option<&str> {
        match self {
            Value::Continuous(_) => None,
            Value::Categorical(level) => Some(level.as_str()),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Continuous(v) => write!(f, "{v}"),
            Value::Categorical(level) => write!(f, "{level}"),
        }
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Continuous(v)
    }
}

impl From<&str> for Value {
    fn from(level: &str) -> Self {
        Value::Categorical(level.to_string())
    }
}

impl From<String> for Value {
    fn from(level: String) -> Self {
        Value::Categorical(level)
    }
}
