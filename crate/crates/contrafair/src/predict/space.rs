//! Decision labels and normalized score vectors.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::PredictError;

/// The ordered, finite set of decisions a predictor chooses among.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DecisionSpace {
    decisions: Vec<String>,
}

impl DecisionSpace {
    /// At least two distinct labels; order is meaningful (training with an
    /// outcome threshold maps values below the threshold to the first label
    /// and the rest to the second).
    pub fn new(decisions: &[&str]) -> Result<Self, PredictError> {
        let labels: Vec<String> = decisions.iter().map(|d| d.to_string()).collect();
        let mut distinct = labels.clone();
        distinct.sort();
        distinct.dedup();
        if labels.len() < 2 || distinct.len() != labels.len() {
            return Err(PredictError::InvalidDecisionSpace {
                detail: "need at least two distinct decision labels".to_string(),
            });
        }
        Ok(Self { decisions: labels })
    }

    pub fn decisions(&self) -> &[String] {
        &self.decisions
    }

    pub fn len(&self) -> usize {
        self.decisions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decisions.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.decisions.iter().position(|d| d == label)
    }

    pub(crate) fn validate(&self) -> Result<(), PredictError> {
        Self::new(&self.decisions.iter().map(|s| s.as_str()).collect::<Vec<_>>())?;
        Ok(())
    }
}

/// A probability score per decision label; sums to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScoreVector {
    scores: BTreeMap<String, f64>,
}

impl ScoreVector {
    /// Pairs a decision space with softmax outputs indexed like its labels.
    pub(crate) fn from_indexed(space: &DecisionSpace, probs: &[f64]) -> Self {
        debug_assert_eq!(space.len(), probs.len());
        Self {
            scores: space
                .decisions()
                .iter()
                .cloned()
                .zip(probs.iter().copied())
                .collect(),
        }
    }

    pub fn get(&self, decision: &str) -> Option<f64> {
        self.scores.get(decision).copied()
    }

    pub fn scores(&self) -> &BTreeMap<String, f64> {
        &self.scores
    }

    /// The highest-scoring decision; on exact ties the lexicographically
    /// smallest label wins, so the choice is deterministic.
    pub fn argmax(&self) -> &str {
        self.scores
            .iter()
            .reduce(|best, cur| if cur.1 > best.1 { cur } else { best })
            .map(|(k, _)| k.as_str())
            .expect("score vector is never empty")
    }

    /// Largest per-decision absolute difference against another score vector.
    pub fn max_abs_diff(&self, other: &ScoreVector) -> f64 {
        self.scores
            .iter()
            .map(|(k, v)| (v - other.get(k).unwrap_or(0.0)).abs())
            .fold(0.0, f64::max)
    }
}
