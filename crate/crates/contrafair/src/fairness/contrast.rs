//! Individual-level criteria: counterfactual fairness and the D/I/T-contrast
//! and margin checks.

use super::{Clause, FairnessError, Subjects, Tolerance, Verdict};
use crate::predict::{PredictError, Predictor, ScoreVector};
use crate::scm::{protected_combinations, FittedScm, Individual, Intervention, ScmError};

/// Enumerates the protected domain, naming the offending variable when a
/// continuous one has no grid.
fn enumerate_protected(
    scm: &FittedScm,
    tol: &Tolerance,
) -> Result<Vec<Intervention>, FairnessError> {
    protected_combinations(scm.graph(), &tol.protected_grid).ok_or_else(|| {
        let name = scm
            .graph()
            .protected_variables()
            .into_iter()
            .find(|s| {
                !s.is_categorical()
                    && tol
                        .protected_grid
                        .get(&s.name)
                        .map(|g| g.is_empty())
                        .unwrap_or(true)
            })
            .map(|s| s.name.clone())
            .unwrap_or_default();
        FairnessError::ContinuousProtectedUnenumerable { name }
    })
}

fn latest_index(individual: &Individual) -> Result<usize, FairnessError> {
    if individual.snapshots.is_empty() {
        return Err(PredictError::from(ScmError::UnknownSnapshot { index: 0, len: 0 }).into());
    }
    Ok(individual.snapshots.len() - 1)
}

fn require_decision(predictor: &Predictor, label: &str) -> Result<(), FairnessError> {
    if predictor.decision_space().index_of(label).is_none() {
        return Err(FairnessError::UnknownDecision {
            label: label.to_string(),
        });
    }
    Ok(())
}

fn require_distinct_decisions(
    predictor: &Predictor,
    d: &str,
    d_prime: &str,
) -> Result<(), FairnessError> {
    require_decision(predictor, d)?;
    require_decision(predictor, d_prime)?;
    if d == d_prime {
        return Err(FairnessError::SameDecision {
            label: d.to_string(),
        });
    }
    Ok(())
}

fn score_of(scores: &ScoreVector, decision: &str) -> f64 {
    scores.get(decision).expect("decision validated upfront")
}

/// Worst score-invariance violation over every snapshot, intervention, and
/// (optionally restricted) decision: the core of the equality-type clauses.
fn invariance_clause(
    equation: &str,
    predictor: &Predictor,
    scm: &FittedScm,
    individual: &Individual,
    decisions: Option<&[&str]>,
    interventions: &[Intervention],
    eps: f64,
) -> Result<Clause, FairnessError> {
    latest_index(individual)?;
    let space = predictor.decision_space().decisions();
    let mut worst: Option<(f64, f64, f64, String, String)> = None;
    for index in 0..individual.snapshots.len() {
        let factual = predictor.predict(scm, individual, index)?;
        for intervention in interventions {
            let flipped = predictor.counterfactual_score(scm, individual, index, intervention)?;
            for d in space {
                if let Some(only) = decisions {
                    if !only.contains(&d.as_str()) {
                        continue;
                    }
                }
                let lhs = score_of(&flipped, d);
                let rhs = score_of(&factual, d);
                let gap = (lhs - rhs).abs();
                if worst.as_ref().map(|w| gap > w.0).unwrap_or(true) {
                    worst = Some((gap, lhs, rhs, intervention.describe(), d.clone()));
                }
            }
        }
    }
    let (gap, lhs, rhs, intervention, decision) =
        worst.expect("nonempty snapshots, interventions, decisions");
    Ok(Clause::equality(
        equation,
        lhs,
        rhs,
        gap,
        eps,
        Some(intervention),
        Some(decision),
    ))
}

fn describe_all(interventions: &[Intervention]) -> Vec<String> {
    interventions.iter().map(Intervention::describe).collect()
}

/// Counterfactual fairness for one individual: every decision's score must be
/// invariant, within `eps_fair`, under every enumerated protected assignment,
/// at every snapshot. The clause records the worst offending
/// (decision, intervention) pair.
pub fn check_counterfactual_fairness(
    predictor: &Predictor,
    scm: &FittedScm,
    individual: &Individual,
    tol: &Tolerance,
) -> Result<Verdict, FairnessError> {
    tol.validate()?;
    let interventions = enumerate_protected(scm, tol)?;
    let clause = invariance_clause(
        "eq1",
        predictor,
        scm,
        individual,
        None,
        &interventions,
        tol.eps_fair,
    )?;
    Ok(Verdict::conjunction(
        "counterfactual_fairness",
        vec![clause],
        Subjects {
            individuals: vec![individual.id.clone()],
            decisions: predictor.decision_space().decisions().to_vec(),
            interventions: describe_all(&interventions),
        },
    ))
}

/// Was deciding `d` rather than `d_prime` fair for this individual?
/// The process must be counterfactually fair on the two decisions, and the
/// taken decision must actually outscore the alternative.
pub fn check_d_contrast(
    predictor: &Predictor,
    scm: &FittedScm,
    individual: &Individual,
    d: &str,
    d_prime: &str,
    tol: &Tolerance,
) -> Result<Verdict, FairnessError> {
    tol.validate()?;
    require_distinct_decisions(predictor, d, d_prime)?;
    let interventions = enumerate_protected(scm, tol)?;
    let process = invariance_clause(
        "eq2",
        predictor,
        scm,
        individual,
        Some(&[d, d_prime]),
        &interventions,
        tol.eps_fair,
    )?;
    let latest = latest_index(individual)?;
    let scores = predictor.predict(scm, individual, latest)?;
    let ordering = Clause::ordering(
        "eq3",
        score_of(&scores, d),
        score_of(&scores, d_prime),
        tol.delta_order,
        None,
        Some(format!("{d} over {d_prime}")),
    );
    Ok(Verdict::conjunction(
        "d_contrast",
        vec![process, ordering],
        Subjects {
            individuals: vec![individual.id.clone()],
            decisions: vec![d.to_string(), d_prime.to_string()],
            interventions: describe_all(&interventions),
        },
    ))
}

/// Was deciding `d` for individual i and `d_prime` for individual j fair?
/// Six clauses: the process is counterfactually fair for both individuals,
/// each individual's own scores order as decided, and the orderings survive
/// swapping the two protected profiles.
pub fn check_i_contrast(
    predictor: &Predictor,
    scm: &FittedScm,
    individual_i: &Individual,
    individual_j: &Individual,
    d: &str,
    d_prime: &str,
    tol: &Tolerance,
) -> Result<Verdict, FairnessError> {
    tol.validate()?;
    if individual_i.id == individual_j.id {
        return Err(FairnessError::SameIndividual {
            id: individual_i.id.clone(),
        });
    }
    require_distinct_decisions(predictor, d, d_prime)?;
    let interventions = enumerate_protected(scm, tol)?;

    let fair_i = invariance_clause(
        "eq4",
        predictor,
        scm,
        individual_i,
        None,
        &interventions,
        tol.eps_fair,
    )?;
    let fair_j = invariance_clause(
        "eq5",
        predictor,
        scm,
        individual_j,
        None,
        &interventions,
        tol.eps_fair,
    )?;

    let last_i = latest_index(individual_i)?;
    let last_j = latest_index(individual_j)?;
    let scores_i = predictor.predict(scm, individual_i, last_i)?;
    let scores_j = predictor.predict(scm, individual_j, last_j)?;
    let own_i = Clause::ordering(
        "eq6",
        score_of(&scores_i, d),
        score_of(&scores_i, d_prime),
        tol.delta_order,
        None,
        Some(format!("{d} over {d_prime}")),
    );
    let own_j = Clause::ordering(
        "eq7",
        score_of(&scores_j, d_prime),
        score_of(&scores_j, d),
        tol.delta_order,
        None,
        Some(format!("{d_prime} over {d}")),
    );

    // Swap the protected profiles: i judged as if it had j's assignment and
    // vice versa; the decided orderings must persist.
    let as_j = Intervention {
        assignments: individual_j.protected.clone(),
    };
    let as_i = Intervention {
        assignments: individual_i.protected.clone(),
    };
    let swapped_i = predictor.counterfactual_score(scm, individual_i, last_i, &as_j)?;
    let swapped_j = predictor.counterfactual_score(scm, individual_j, last_j, &as_i)?;
    let swap_i = Clause::ordering(
        "eq8",
        score_of(&swapped_i, d),
        score_of(&swapped_i, d_prime),
        tol.delta_order,
        Some(as_j.describe()),
        Some(format!("{d} over {d_prime}")),
    );
    let swap_j = Clause::ordering(
        "eq9",
        score_of(&swapped_j, d_prime),
        score_of(&swapped_j, d),
        tol.delta_order,
        Some(as_i.describe()),
        Some(format!("{d_prime} over {d}")),
    );

    Ok(Verdict::conjunction(
        "i_contrast",
        vec![fair_i, fair_j, own_i, own_j, swap_i, swap_j],
        Subjects {
            individuals: vec![individual_i.id.clone(), individual_j.id.clone()],
            decisions: vec![d.to_string(), d_prime.to_string()],
            interventions: describe_all(&interventions),
        },
    ))
}

/// Was changing the decision from `d` at time `t` to `d_prime` at time
/// `t_prime` fair for this individual? The process must be counterfactually
/// fair at every snapshot, and each snapshot's scores must order as decided
/// at its own time.
pub fn check_t_contrast(
    predictor: &Predictor,
    scm: &FittedScm,
    individual: &Individual,
    t: i64,
    t_prime: i64,
    d: &str,
    d_prime: &str,
    tol: &Tolerance,
) -> Result<Verdict, FairnessError> {
    tol.validate()?;
    require_distinct_decisions(predictor, d, d_prime)?;
    let index_of_tick = |tick: i64| {
        individual
            .snapshots
            .iter()
            .position(|s| s.time == tick)
            .ok_or(FairnessError::UnknownSnapshot { time: tick })
    };
    let at_t = index_of_tick(t)?;
    let at_t_prime = index_of_tick(t_prime)?;
    let interventions = enumerate_protected(scm, tol)?;

    let process = invariance_clause(
        "eq10",
        predictor,
        scm,
        individual,
        None,
        &interventions,
        tol.eps_fair,
    )?;
    let scores_t = predictor.predict(scm, individual, at_t)?;
    let scores_t_prime = predictor.predict(scm, individual, at_t_prime)?;
    let then = Clause::ordering(
        "eq11",
        score_of(&scores_t, d),
        score_of(&scores_t, d_prime),
        tol.delta_order,
        None,
        Some(format!("{d} over {d_prime}")),
    );
    let now = Clause::ordering(
        "eq12",
        score_of(&scores_t_prime, d_prime),
        score_of(&scores_t_prime, d),
        tol.delta_order,
        None,
        Some(format!("{d_prime} over {d}")),
    );

    Ok(Verdict::conjunction(
        "t_contrast",
        vec![process, then, now],
        Subjects {
            individuals: vec![individual.id.clone()],
            decisions: vec![d.to_string(), d_prime.to_string()],
            interventions: describe_all(&interventions),
        },
    ))
}

/// Does individual i outscore individual j on decision `d` by more than
/// `lambda_margin` under *both* protected assignments (i's and j's applied to
/// the two of them alike)?
///
/// The reversed inequality for `d_prime` is recorded as an advisory clause:
/// it does not gate the verdict unless `strict_margin` is set.
pub fn check_contrast_margin(
    predictor: &Predictor,
    scm: &FittedScm,
    individual_i: &Individual,
    individual_j: &Individual,
    d: &str,
    d_prime: &str,
    tol: &Tolerance,
) -> Result<Verdict, FairnessError> {
    tol.validate()?;
    if individual_i.id == individual_j.id {
        return Err(FairnessError::SameIndividual {
            id: individual_i.id.clone(),
        });
    }
    require_distinct_decisions(predictor, d, d_prime)?;
    let last_i = latest_index(individual_i)?;
    let last_j = latest_index(individual_j)?;
    let assignments = [
        Intervention {
            assignments: individual_i.protected.clone(),
        },
        Intervention {
            assignments: individual_j.protected.clone(),
        },
    ];

    // Worst (smallest) gap across the two shared assignments, per direction.
    let mut forward: Option<(f64, f64, f64, String)> = None;
    let mut reverse: Option<(f64, f64, f64, String)> = None;
    for shared in &assignments {
        let scores_i = predictor.counterfactual_score(scm, individual_i, last_i, shared)?;
        let scores_j = predictor.counterfactual_score(scm, individual_j, last_j, shared)?;
        let fwd = (score_of(&scores_i, d), score_of(&scores_j, d));
        if forward
            .as_ref()
            .map(|w| fwd.0 - fwd.1 < w.0)
            .unwrap_or(true)
        {
            forward = Some((fwd.0 - fwd.1, fwd.0, fwd.1, shared.describe()));
        }
        let rev = (
            score_of(&scores_j, d_prime),
            score_of(&scores_i, d_prime),
        );
        if reverse
            .as_ref()
            .map(|w| rev.0 - rev.1 < w.0)
            .unwrap_or(true)
        {
            reverse = Some((rev.0 - rev.1, rev.0, rev.1, shared.describe()));
        }
    }
    let (_, lhs, rhs, described) = forward.expect("two assignments examined");
    let mandatory = Clause::ordering(
        "eq13",
        lhs,
        rhs,
        tol.lambda_margin,
        Some(described),
        Some(d.to_string()),
    );
    let (_, lhs, rhs, described) = reverse.expect("two assignments examined");
    let advisory = Clause::ordering(
        "eq14",
        lhs,
        rhs,
        tol.lambda_margin,
        Some(described),
        Some(d_prime.to_string()),
    );

    let passed = mandatory.passed && (!tol.strict_margin || advisory.passed);
    Ok(Verdict {
        criterion: "contrast_margin".to_string(),
        passed,
        clauses: vec![mandatory, advisory],
        subjects: Subjects {
            individuals: vec![individual_i.id.clone(), individual_j.id.clone()],
            decisions: vec![d.to_string(), d_prime.to_string()],
            interventions: assignments.iter().map(Intervention::describe).collect(),
        },
        predictor: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predict::{
        DecisionSpace, Feature, InputSchema, ModelParams, Predictor, PredictorFamily,
    };
    use crate::scm::{CausalGraph, Snapshot, StructuralEquation, VariableRole, VariableSpec};
    use crate::value::Value;

    fn proxy_scm() -> FittedScm {
        let graph = CausalGraph::new(
            vec![
                VariableSpec::categorical("a", VariableRole::Protected, &["0", "1"]),
                VariableSpec::continuous("x", VariableRole::Observable),
                VariableSpec::continuous("y", VariableRole::Outcome),
            ],
            vec![("a", "x"), ("x", "y")],
        );
        FittedScm::from_parts(
            graph,
            vec![StructuralEquation::new("x", 1.0, &[("a=1", 2.0)], 0.5)],
        )
        .expect("valid model")
    }

    fn space() -> DecisionSpace {
        DecisionSpace::new(&["deny", "approve"]).expect("valid space")
    }

    /// Reads x and the protected indicator: z = x − 0.5·[a=1] − 3.
    fn full_predictor(scm: &FittedScm) -> Predictor {
        Predictor::from_parts(
            PredictorFamily::Full,
            space(),
            InputSchema::for_family(PredictorFamily::Full, scm),
            ModelParams::Linear {
                weights: vec![vec![1.0, -0.5]],
                bias: vec![-3.0],
            },
        )
        .expect("valid predictor")
    }

    /// Reads the recovered noise term only: z = 0.8·ε − 0.2.
    fn residual_predictor(scm: &FittedScm) -> Predictor {
        Predictor::from_parts(
            PredictorFamily::Counterfactual,
            space(),
            InputSchema::for_family(PredictorFamily::Counterfactual, scm),
            ModelParams::Linear {
                weights: vec![vec![0.8]],
                bias: vec![-0.2],
            },
        )
        .expect("valid predictor")
    }

    fn person(id: &str, a: &str, x: f64) -> Individual {
        Individual::new(
            id,
            &[("a", Value::from(a))],
            vec![Snapshot::new(0, &[("x", x)])],
        )
    }

    #[test]
    fn proxy_sensitive_scores_fail_counterfactual_fairness() {
        let scm = proxy_scm();
        let predictor = full_predictor(&scm);
        // Factual z = 0.5; under A←0 the residual 1 gives x' = 2, z = −1.
        let verdict =
            check_counterfactual_fairness(&predictor, &scm, &person("p", "1", 4.0), &Tolerance::default())
                .expect("checks");
        assert!(!verdict.passed);
        assert_eq!(verdict.criterion, "counterfactual_fairness");
        let clause = &verdict.clauses[0];
        assert_eq!(clause.equation, "eq1");
        assert!(!clause.passed);
        // σ(0.5) − σ(−1), the same gap on both decision labels.
        assert!((clause.margin - 0.3535179098318595).abs() < 1e-12);
        assert_eq!(clause.intervention.as_deref(), Some("a=0"));
        assert_eq!(verdict.subjects.individuals, vec!["p".to_string()]);
        assert_eq!(
            verdict.subjects.interventions,
            vec!["a=0".to_string(), "a=1".to_string()]
        );

        // The same gap is inside a loose tolerance.
        let loose = Tolerance {
            eps_fair: 0.36,
            ..Tolerance::default()
        };
        assert!(
            check_counterfactual_fairness(&predictor, &scm, &person("p", "1", 4.0), &loose)
                .expect("checks")
                .passed
        );
    }

    #[test]
    fn residual_scores_pass_with_margin_exactly_zero() {
        let scm = proxy_scm();
        let predictor = residual_predictor(&scm);
        let verdict =
            check_counterfactual_fairness(&predictor, &scm, &person("p", "1", 4.0), &Tolerance::default())
                .expect("checks");
        assert!(verdict.passed);
        assert_eq!(verdict.clauses[0].margin, 0.0);
    }

    #[test]
    fn continuous_protected_without_a_grid_is_an_error() {
        let graph = CausalGraph::new(
            vec![
                VariableSpec::continuous("age", VariableRole::Protected),
                VariableSpec::continuous("x", VariableRole::Observable),
                VariableSpec::continuous("y", VariableRole::Outcome),
            ],
            vec![("age", "x"), ("x", "y")],
        );
        let scm = FittedScm::from_parts(
            graph,
            vec![StructuralEquation::new("x", 0.0, &[("age", 1.0)], 1.0)],
        )
        .expect("valid model");
        let predictor = Predictor::from_parts(
            PredictorFamily::Unaware,
            space(),
            InputSchema::new(vec![Feature::Observable { name: "x".into() }]),
            ModelParams::Linear {
                weights: vec![vec![0.1]],
                bias: vec![-3.0],
            },
        )
        .expect("valid predictor");
        let individual = Individual::new(
            "p",
            &[("age", Value::from(30.0))],
            vec![Snapshot::new(0, &[("x", 31.0)])],
        );

        let err =
            check_counterfactual_fairness(&predictor, &scm, &individual, &Tolerance::default())
                .unwrap_err();
        assert!(matches!(
            err,
            FairnessError::ContinuousProtectedUnenumerable { ref name } if name == "age"
        ));

        let mut tol = Tolerance::default();
        tol.protected_grid
            .insert("age".to_string(), vec![25.0, 30.0, 35.0]);
        let verdict = check_counterfactual_fairness(&predictor, &scm, &individual, &tol)
            .expect("grid supplied");
        // The predictor reads x, which moves one-for-one with age.
        assert!(!verdict.passed);
    }

    #[test]
    fn decision_contrast_needs_both_fair_process_and_true_ordering() {
        let scm = proxy_scm();
        let individual = person("p", "1", 4.0);

        // Fair process (residual inputs), decided ordering holds.
        let verdict = check_d_contrast(
            &residual_predictor(&scm),
            &scm,
            &individual,
            "approve",
            "deny",
            &Tolerance::default(),
        )
        .expect("checks");
        assert!(verdict.passed);
        assert_eq!(verdict.clauses[0].equation, "eq2");
        assert_eq!(verdict.clauses[1].equation, "eq3");
        // ε = 1 gives z = 0.6: σ(0.6) − σ(−0.6).
        assert!((verdict.clauses[1].margin - 0.2913126124515908).abs() < 1e-12);

        // Unfair process: eq2 breaks even though eq3 holds.
        let verdict = check_d_contrast(
            &full_predictor(&scm),
            &scm,
            &individual,
            "approve",
            "deny",
            &Tolerance::default(),
        )
        .expect("checks");
        assert!(!verdict.passed);
        assert!(!verdict.clauses[0].passed);
        assert!(verdict.clauses[1].passed);

        // Wrong way round: the taken decision must be the better-scored one.
        let verdict = check_d_contrast(
            &residual_predictor(&scm),
            &scm,
            &individual,
            "deny",
            "approve",
            &Tolerance::default(),
        )
        .expect("checks");
        assert!(!verdict.passed);
        assert!(verdict.clauses[0].passed);
        assert!(!verdict.clauses[1].passed);
    }

    #[test]
    fn an_exact_tie_justifies_neither_decision() {
        let scm = proxy_scm();
        let indifferent = Predictor::from_parts(
            PredictorFamily::Counterfactual,
            space(),
            InputSchema::for_family(PredictorFamily::Counterfactual, &scm),
            ModelParams::Linear {
                weights: vec![vec![0.0]],
                bias: vec![0.0],
            },
        )
        .expect("valid predictor");
        let verdict = check_d_contrast(
            &indifferent,
            &scm,
            &person("p", "1", 4.0),
            "approve",
            "deny",
            &Tolerance::default(),
        )
        .expect("checks");
        assert!(!verdict.passed);
        let ordering = &verdict.clauses[1];
        assert_eq!(ordering.margin, 0.0);
        assert!(!ordering.passed);
    }

    #[test]
    fn bad_decision_labels_are_rejected_upfront() {
        let scm = proxy_scm();
        let predictor = residual_predictor(&scm);
        let individual = person("p", "1", 4.0);
        assert!(matches!(
            check_d_contrast(&predictor, &scm, &individual, "approve", "approve", &Tolerance::default()),
            Err(FairnessError::SameDecision { .. })
        ));
        assert!(matches!(
            check_d_contrast(&predictor, &scm, &individual, "ghost", "deny", &Tolerance::default()),
            Err(FairnessError::UnknownDecision { .. })
        ));
        let bad = Tolerance {
            eps_fair: -1.0,
            ..Tolerance::default()
        };
        assert!(matches!(
            check_d_contrast(&predictor, &scm, &individual, "approve", "deny", &bad),
            Err(FairnessError::InvalidTolerance)
        ));
    }

    #[test]
    fn pair_contrast_passes_on_an_invariant_predictor() {
        let scm = proxy_scm();
        let predictor = residual_predictor(&scm);
        // ε_i = 1 (z = 0.6, approve wins); ε_j = −0.5 (z = −0.6, deny wins).
        let i = person("i", "1", 4.0);
        let j = person("j", "0", 0.5);
        let verdict = check_i_contrast(
            &predictor,
            &scm,
            &i,
            &j,
            "approve",
            "deny",
            &Tolerance::default(),
        )
        .expect("checks");
        assert!(verdict.passed);
        let equations: Vec<&str> = verdict.clauses.iter().map(|c| c.equation.as_str()).collect();
        assert_eq!(equations, vec!["eq4", "eq5", "eq6", "eq7", "eq8", "eq9"]);
        assert!(verdict.clauses.iter().all(|c| c.passed));
        assert_eq!(
            verdict.subjects.individuals,
            vec!["i".to_string(), "j".to_string()]
        );
    }

    #[test]
    fn pair_contrast_catches_orderings_that_break_under_swap() {
        let scm = proxy_scm();
        let predictor = full_predictor(&scm);
        // Loose eps so the per-individual invariance clauses pass and the
        // failure isolates to the swapped orderings.
        let tol = Tolerance {
            eps_fair: 0.5,
            ..Tolerance::default()
        };
        // i: a=1, x=4 → approve wins on its own profile. j: a=0, x=2.5 →
        // deny wins on its own profile. Under the swapped assignments both
        // orderings flip.
        let i = person("i", "1", 4.0);
        let j = person("j", "0", 2.5);
        let verdict =
            check_i_contrast(&predictor, &scm, &i, &j, "approve", "deny", &tol).expect("checks");
        assert!(!verdict.passed);
        let by_eq: std::collections::BTreeMap<&str, &Clause> = verdict
            .clauses
            .iter()
            .map(|c| (c.equation.as_str(), c))
            .collect();
        assert!(by_eq["eq4"].passed);
        assert!(by_eq["eq5"].passed);
        assert!(by_eq["eq6"].passed);
        assert!(by_eq["eq7"].passed);
        assert!(!by_eq["eq8"].passed);
        assert!(!by_eq["eq9"].passed);
        // i judged under j's assignment: σ(−1) − σ(1) on the approve side.
        assert!((by_eq["eq8"].margin + 0.4621171572600098).abs() < 1e-12);
        assert_eq!(by_eq["eq8"].intervention.as_deref(), Some("a=0"));
        assert_eq!(by_eq["eq9"].intervention.as_deref(), Some("a=1"));

        assert!(matches!(
            check_i_contrast(&predictor, &scm, &i, &i, "approve", "deny", &tol),
            Err(FairnessError::SameIndividual { .. })
        ));
    }

    #[test]
    fn time_contrast_orders_each_snapshot_at_its_own_time() {
        let scm = proxy_scm();
        let predictor = residual_predictor(&scm);
        // ε = 1 at tick 0 (approve wins), ε = −1.5 at tick 5 (deny wins).
        let individual = Individual::new(
            "p",
            &[("a", Value::from("1"))],
            vec![
                Snapshot::new(0, &[("x", 4.0)]),
                Snapshot::new(5, &[("x", 1.5)]),
            ],
        );
        let verdict = check_t_contrast(
            &predictor,
            &scm,
            &individual,
            0,
            5,
            "approve",
            "deny",
            &Tolerance::default(),
        )
        .expect("checks");
        assert!(verdict.passed);
        let equations: Vec<&str> = verdict.clauses.iter().map(|c| c.equation.as_str()).collect();
        assert_eq!(equations, vec!["eq10", "eq11", "eq12"]);
        // z = −1.4 at tick 5: σ(1.4) − σ(−1.4) on the deny side.
        assert!((verdict.clauses[2].margin - 0.6043677771171635).abs() < 1e-12);

        // The same change judged the wrong way round fails on the first tick.
        let reversed = check_t_contrast(
            &predictor,
            &scm,
            &individual,
            0,
            5,
            "deny",
            "approve",
            &Tolerance::default(),
        )
        .expect("checks");
        assert!(!reversed.passed);
        assert!(!reversed.clauses[1].passed);

        assert!(matches!(
            check_t_contrast(&predictor, &scm, &individual, 0, 3, "approve", "deny", &Tolerance::default()),
            Err(FairnessError::UnknownSnapshot { time: 3 })
        ));
    }

    #[test]
    fn margin_criterion_requires_a_clear_gap_under_both_assignments() {
        let scm = proxy_scm();
        let predictor = residual_predictor(&scm);
        let i = person("i", "1", 4.0);
        let j = person("j", "0", 0.5);
        let verdict = check_contrast_margin(
            &predictor,
            &scm,
            &i,
            &j,
            "approve",
            "deny",
            &Tolerance::default(),
        )
        .expect("checks");
        assert!(verdict.passed);
        assert_eq!(verdict.clauses[0].equation, "eq13");
        assert_eq!(verdict.clauses[1].equation, "eq14");
        // σ(0.6) − σ(−0.6) on both sides of a binary space.
        assert!((verdict.clauses[0].margin - 0.2913126124515908).abs() < 1e-12);
        assert!((verdict.clauses[1].margin - 0.2913126124515908).abs() < 1e-12);

        // A λ wider than the observed gap fails the mandatory clause.
        let wide = Tolerance {
            lambda_margin: 0.3,
            ..Tolerance::default()
        };
        let verdict = check_contrast_margin(&predictor, &scm, &i, &j, "approve", "deny", &wide)
            .expect("checks");
        assert!(!verdict.passed);
        assert!(!verdict.clauses[0].passed);
    }

    #[test]
    fn advisory_reverse_margin_gates_only_under_strict_margin() {
        // Three decisions: the first label is the softmax pivot. With
        // b = −ln 2 on both rows and weights ln 2.5 / ln 5.5 on the single
        // residual input, ε = 0 scores (0.5, 0.25, 0.25) and ε = 1 scores
        // (0.2, 0.25, 0.55): the "low" gap is 0.3 while the "mid" gap is
        // exactly zero, so the mandatory clause clears λ = 0.05 and the
        // advisory one cannot.
        let scm = proxy_scm();
        let three = DecisionSpace::new(&["low", "mid", "high"]).expect("valid space");
        let predictor = Predictor::from_parts(
            PredictorFamily::Counterfactual,
            three,
            InputSchema::for_family(PredictorFamily::Counterfactual, &scm),
            ModelParams::Linear {
                weights: vec![vec![2.5f64.ln()], vec![5.5f64.ln()]],
                bias: vec![-(2.0f64.ln()), -(2.0f64.ln())],
            },
        )
        .expect("valid predictor");
        let i = person("i", "0", 1.0); // ε = 0
        let j = person("j", "0", 2.0); // ε = 1

        let tol = Tolerance::default();
        let verdict =
            check_contrast_margin(&predictor, &scm, &i, &j, "low", "mid", &tol).expect("checks");
        assert!(verdict.passed);
        let mandatory = &verdict.clauses[0];
        let advisory = &verdict.clauses[1];
        assert!(mandatory.passed);
        assert!((mandatory.margin - 0.3).abs() < 1e-12);
        assert!(!advisory.passed);
        assert!(advisory.margin.abs() < 1e-12);

        let strict = Tolerance {
            strict_margin: true,
            ..Tolerance::default()
        };
        let verdict =
            check_contrast_margin(&predictor, &scm, &i, &j, "low", "mid", &strict).expect("checks");
        assert!(!verdict.passed);
    }
}
