//! Population-level criteria: demographic parity, equality of opportunity,
//! and metric-based individual fairness.

use serde::{Deserialize, Serialize};

use super::{Clause, FairnessError, Subjects, Tolerance, Verdict};
use crate::predict::{PredictError, Predictor, ScoreVector};
use crate::scm::{FittedScm, Individual, ScmError, VariableSpec};

/// Which recorded outcomes count as the favorable one for equality of
/// opportunity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FavorableOutcome {
    /// Outcome equals this value (discrete/decision-index outcomes).
    Equals(f64),
    /// Outcome at or above this threshold (continuous outcomes).
    AtLeast(f64),
}

impl FavorableOutcome {
    fn matches(&self, outcome: f64) -> bool {
        match self {
            Self::Equals(v) => (outcome - v).abs() < 1e-9,
            Self::AtLeast(t) => outcome >= *t,
        }
    }
}

/// Resolves a binary categorical protected attribute's two levels.
fn binary_levels<'g>(
    spec: Option<&'g VariableSpec>,
    name: &str,
) -> Result<(&'g str, &'g str), FairnessError> {
    let spec = spec.ok_or_else(|| FairnessError::BadGroupAttribute {
        name: name.to_string(),
        detail: "not a variable of the model".to_string(),
    })?;
    let levels = spec.level_labels();
    if levels.len() != 2 {
        return Err(FairnessError::BadGroupAttribute {
            name: name.to_string(),
            detail: "need a categorical protected variable with exactly two levels".to_string(),
        });
    }
    Ok((&levels[0], &levels[1]))
}

fn group_of(individual: &Individual, attribute: &str) -> Result<String, FairnessError> {
    individual
        .protected
        .get(attribute)
        .and_then(|v| v.as_level())
        .map(str::to_string)
        .ok_or_else(|| FairnessError::BadGroupAttribute {
            name: attribute.to_string(),
            detail: format!("individual {} has no level for it", individual.id),
        })
}

fn latest_scores(
    predictor: &Predictor,
    scm: &FittedScm,
    individual: &Individual,
) -> Result<ScoreVector, FairnessError> {
    if individual.snapshots.is_empty() {
        return Err(PredictError::from(ScmError::UnknownSnapshot { index: 0, len: 0 }).into());
    }
    Ok(predictor.predict(scm, individual, individual.snapshots.len() - 1)?)
}

/// Mean score per decision for the rows of one group.
fn mean_scores(
    predictor: &Predictor,
    scm: &FittedScm,
    rows: &[&Individual],
) -> Result<Vec<f64>, FairnessError> {
    let k = predictor.decision_space().len();
    let mut sums = vec![0.0; k];
    for individual in rows {
        let scores = latest_scores(predictor, scm, individual)?;
        for (d, sum) in predictor.decision_space().decisions().iter().zip(&mut sums) {
            *sum += scores.get(d).expect("space decision");
        }
    }
    Ok(sums.into_iter().map(|s| s / rows.len() as f64).collect())
}

/// Shared core of the two group-comparison criteria: worst per-decision gap
/// between the two groups' mean scores, compared against `eps_fair`.
fn group_gap_verdict(
    criterion: &str,
    equation: &str,
    predictor: &Predictor,
    scm: &FittedScm,
    group_0: &[&Individual],
    group_1: &[&Individual],
    tol: &Tolerance,
) -> Result<Verdict, FairnessError> {
    let means_0 = mean_scores(predictor, scm, group_0)?;
    let means_1 = mean_scores(predictor, scm, group_1)?;
    let decisions = predictor.decision_space().decisions();
    let (mut worst, mut at) = (-1.0f64, 0usize);
    for (d, (m0, m1)) in means_0.iter().zip(&means_1).enumerate() {
        let gap = (m0 - m1).abs();
        if gap > worst {
            worst = gap;
            at = d;
        }
    }
    let clause = Clause::equality(
        equation,
        means_0[at],
        means_1[at],
        worst,
        tol.eps_fair,
        None,
        Some(decisions[at].clone()),
    );
    Ok(Verdict::conjunction(
        criterion,
        vec![clause],
        Subjects {
            individuals: group_0
                .iter()
                .chain(group_1.iter())
                .map(|i| i.id.clone())
                .collect(),
            decisions: decisions.to_vec(),
            interventions: Vec::new(),
        },
    ))
}

/// Demographic parity over a binary protected attribute: the two groups' mean
/// scores must agree within `eps_fair` for every decision. Uses each
/// individual's latest snapshot.
pub fn check_demographic_parity(
    predictor: &Predictor,
    scm: &FittedScm,
    dataset: &[Individual],
    group_attr: &str,
    tol: &Tolerance,
) -> Result<Verdict, FairnessError> {
    tol.validate()?;
    let (level_0, level_1) = binary_levels(scm.graph().variable(group_attr), group_attr)?;
    let mut groups: (Vec<&Individual>, Vec<&Individual>) = (Vec::new(), Vec::new());
    for individual in dataset {
        let level = group_of(individual, group_attr)?;
        if level == level_0 {
            groups.0.push(individual);
        } else {
            groups.1.push(individual);
        }
    }
    for (rows, level) in [(&groups.0, level_0), (&groups.1, level_1)] {
        if rows.is_empty() {
            return Err(FairnessError::EmptyGroup {
                attribute: group_attr.to_string(),
                level: level.to_string(),
            });
        }
    }
    group_gap_verdict(
        "demographic_parity",
        "demographic_parity",
        predictor,
        scm,
        &groups.0,
        &groups.1,
        tol,
    )
}

/// Equality of opportunity: demographic parity restricted to the rows whose
/// recorded outcome is the favorable one.
pub fn check_equality_of_opportunity(
    predictor: &Predictor,
    scm: &FittedScm,
    dataset: &[Individual],
    group_attr: &str,
    favorable_outcome: FavorableOutcome,
    tol: &Tolerance,
) -> Result<Verdict, FairnessError> {
    tol.validate()?;
    let (level_0, level_1) = binary_levels(scm.graph().variable(group_attr), group_attr)?;
    let mut groups: (Vec<&Individual>, Vec<&Individual>) = (Vec::new(), Vec::new());
    for individual in dataset {
        let outcome = individual
            .outcome
            .ok_or_else(|| PredictError::MissingOutcome {
                id: individual.id.clone(),
            })?;
        if !favorable_outcome.matches(outcome) {
            continue;
        }
        let level = group_of(individual, group_attr)?;
        if level == level_0 {
            groups.0.push(individual);
        } else {
            groups.1.push(individual);
        }
    }
    for (rows, level) in [(&groups.0, level_0), (&groups.1, level_1)] {
        if rows.is_empty() {
            return Err(FairnessError::EmptyConditionedGroup {
                attribute: group_attr.to_string(),
                level: level.to_string(),
            });
        }
    }
    group_gap_verdict(
        "equality_of_opportunity",
        "equality_of_opportunity",
        predictor,
        scm,
        &groups.0,
        &groups.1,
        tol,
    )
}

/// Euclidean distance, the stock metric for [`check_individual_fairness`].
pub fn euclidean_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Similar individuals get similar scores: for every pair closer than
/// `pair_threshold` under the caller's metric over non-protected features,
/// the per-decision score gap must stay within `score_threshold`. With no
/// qualifying pairs the check passes vacuously.
///
/// The metric sees each individual's observables (latest snapshot) in the
/// model's feature order; choosing it well requires domain knowledge, which
/// is why it is a parameter and not a default.
pub fn check_individual_fairness(
    predictor: &Predictor,
    scm: &FittedScm,
    dataset: &[Individual],
    metric: &dyn Fn(&[f64], &[f64]) -> f64,
    pair_threshold: f64,
    score_threshold: f64,
) -> Result<Verdict, FairnessError> {
    let mut features = Vec::with_capacity(dataset.len());
    let mut scores = Vec::with_capacity(dataset.len());
    for individual in dataset {
        let snapshot = individual
            .latest()
            .ok_or_else(|| PredictError::from(ScmError::UnknownSnapshot { index: 0, len: 0 }))?;
        let row: Vec<f64> = scm
            .feature_order()
            .iter()
            .map(|name| {
                snapshot.observables.get(name).copied().ok_or_else(|| {
                    PredictError::MissingValue {
                        variable: name.clone(),
                    }
                })
            })
            .collect::<Result<_, _>>()?;
        features.push(row);
        scores.push(latest_scores(predictor, scm, individual)?);
    }

    let mut worst: Option<(f64, usize, usize, String)> = None;
    for i in 0..dataset.len() {
        for j in (i + 1)..dataset.len() {
            if metric(&features[i], &features[j]) >= pair_threshold {
                continue;
            }
            for d in predictor.decision_space().decisions() {
                let gap = (scores[i].get(d).expect("space decision")
                    - scores[j].get(d).expect("space decision"))
                .abs();
                if worst.as_ref().map(|w| gap > w.0).unwrap_or(true) {
                    worst = Some((gap, i, j, d.clone()));
                }
            }
        }
    }

    let (clause, subjects) = match worst {
        Some((gap, i, j, decision)) => {
            let lhs = scores[i].get(&decision).expect("space decision");
            let rhs = scores[j].get(&decision).expect("space decision");
            (
                Clause::equality(
                    "individual_fairness",
                    lhs,
                    rhs,
                    gap,
                    score_threshold,
                    None,
                    Some(decision),
                ),
                Subjects {
                    individuals: vec![dataset[i].id.clone(), dataset[j].id.clone()],
                    decisions: predictor.decision_space().decisions().to_vec(),
                    interventions: Vec::new(),
                },
            )
        }
        None => (
            // No pair fell under the threshold: vacuous pass.
            Clause::equality("individual_fairness", 0.0, 0.0, 0.0, score_threshold, None, None),
            Subjects::default(),
        ),
    };
    Ok(Verdict::conjunction(
        "individual_fairness",
        vec![clause],
        subjects,
    ))
}
