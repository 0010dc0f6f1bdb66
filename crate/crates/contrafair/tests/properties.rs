//! Randomized invariants over seeded model draws.
//!
//! Each property samples structural models, populations, and predictors from
//! the library's own seeded generators, then asserts an algebraic guarantee
//! the engine is supposed to hold for *every* input: factual reconstruction,
//! residual invariance, score normalization, dataset round-tripping,
//! evaluation-order sanity, and tolerance monotonicity.

use std::collections::BTreeMap;

use contrafair::dataset::{load_dataset, write_dataset};
use contrafair::fairness::{check_counterfactual_fairness, Tolerance};
use contrafair::predict::{DecisionSpace, PredictorFamily};
use contrafair::scm::{protected_combinations, FittedScm, Individual, Intervention};
use contrafair::synth::{random_linear_scm, random_predictor, sample_population, GeneratorConfig};
use proptest::prelude::*;

const ALL_FAMILIES: [PredictorFamily; 4] = [
    PredictorFamily::Full,
    PredictorFamily::Unaware,
    PredictorFamily::Counterfactual,
    PredictorFamily::Contrastive,
];

/// A random model plus a small population sampled from it.
fn draw(
    scm_seed: u64,
    pop_seed: u64,
    max_observables: usize,
    n: usize,
    snapshots: usize,
) -> (FittedScm, Vec<Individual>) {
    let scm = random_linear_scm(scm_seed, max_observables);
    let mut config = GeneratorConfig::new(scm.clone(), n, pop_seed);
    config.snapshots_per_individual = snapshots;
    let individuals = sample_population(&config).expect("generator config is valid");
    (scm, individuals)
}

/// Every combination of the model's protected levels.
fn all_interventions(scm: &FittedScm) -> Vec<Intervention> {
    protected_combinations(scm.graph(), &BTreeMap::new())
        .expect("generated protected variables are categorical")
}

proptest! {
    /// Intervening with an individual's own protected profile is a no-op:
    /// abduction followed by re-propagation lands on the observed snapshot.
    #[test]
    fn factual_profile_interventions_change_nothing(
        scm_seed in 0u64..500,
        pop_seed in 0u64..500,
        max_observables in 1usize..4,
        n in 1usize..5,
    ) {
        let (scm, individuals) = draw(scm_seed, pop_seed, max_observables, n, 1);
        for individual in &individuals {
            let own = Intervention {
                assignments: individual.protected.clone(),
            };
            let world = scm.counterfactual(individual, 0, &own).expect("factual profile is valid");
            prop_assert_eq!(world.time, individual.snapshots[0].time);
            for (name, observed) in &individual.snapshots[0].observables {
                prop_assert!(
                    (world.observables[name] - observed).abs() <= 1e-9,
                    "{} rebuilt as {} from {}",
                    name,
                    world.observables[name],
                    observed
                );
            }
        }
    }

    /// Noise terms recovered from a counterfactual world equal the ones
    /// recovered from the factual world: residuals identify the individual,
    /// not the world.
    #[test]
    fn residuals_are_invariant_across_worlds(
        scm_seed in 0u64..500,
        pop_seed in 0u64..500,
        max_observables in 1usize..4,
    ) {
        let (scm, individuals) = draw(scm_seed, pop_seed, max_observables, 2, 1);
        let interventions = all_interventions(&scm);
        for individual in &individuals {
            let factual = scm.abduct(individual, 0).expect("factual world abducts");
            for intervention in &interventions {
                let world = scm
                    .counterfactual(individual, 0, intervention)
                    .expect("level combinations are valid");
                let twin = Individual {
                    id: individual.id.clone(),
                    protected: intervention.merged(&individual.protected),
                    snapshots: vec![world],
                    outcome: None,
                };
                let recovered = scm.abduct(&twin, 0).expect("counterfactual world abducts");
                for (name, residual) in &factual.residuals {
                    prop_assert!(
                        (recovered.residuals[name] - residual).abs() <= 1e-9,
                        "residual of {} drifted under {}",
                        name,
                        intervention.describe()
                    );
                }
            }
        }
    }

    /// Score vectors are probability distributions in every world, for every
    /// family, for binary and three-way decision spaces alike.
    #[test]
    fn scores_are_normalized_in_every_world(
        scm_seed in 0u64..500,
        pop_seed in 0u64..500,
        predictor_seed in 0u64..500,
        max_observables in 1usize..4,
        three_way in any::<bool>(),
    ) {
        let (scm, individuals) = draw(scm_seed, pop_seed, max_observables, 3, 1);
        let labels: &[&str] = if three_way {
            &["deny", "defer", "grant"]
        } else {
            &["deny", "grant"]
        };
        let space = DecisionSpace::new(labels).expect("valid space");
        let interventions = all_interventions(&scm);
        for family in ALL_FAMILIES {
            let predictor = random_predictor(family, &scm, &space, predictor_seed, 1.5)
                .expect("fixture predictor");
            for individual in &individuals {
                let mut worlds = vec![predictor.predict(&scm, individual, 0).expect("scores")];
                for intervention in &interventions {
                    worlds.push(
                        predictor
                            .counterfactual_score(&scm, individual, 0, intervention)
                            .expect("scores"),
                    );
                }
                for scores in &worlds {
                    prop_assert_eq!(scores.scores().len(), space.len());
                    let total: f64 = scores.scores().values().sum();
                    prop_assert!((total - 1.0).abs() <= 1e-12, "scores sum to {total}");
                    for value in scores.scores().values() {
                        prop_assert!((0.0..=1.0).contains(value));
                    }
                }
            }
        }
    }

    /// Residual-reading predictors return bit-identical scores in every
    /// intervened world — invariance with zero slack, not approximate
    /// invariance.
    #[test]
    fn residual_readers_never_move_under_interventions(
        scm_seed in 0u64..500,
        pop_seed in 0u64..500,
        predictor_seed in 0u64..500,
        max_observables in 1usize..4,
    ) {
        let (scm, individuals) = draw(scm_seed, pop_seed, max_observables, 3, 1);
        let space = DecisionSpace::new(&["deny", "grant"]).expect("valid space");
        let predictor = random_predictor(
            PredictorFamily::Counterfactual,
            &scm,
            &space,
            predictor_seed,
            1.5,
        )
        .expect("fixture predictor");
        let interventions = all_interventions(&scm);
        for individual in &individuals {
            let factual = predictor.predict(&scm, individual, 0).expect("scores");
            for intervention in &interventions {
                let shifted = predictor
                    .counterfactual_score(&scm, individual, 0, intervention)
                    .expect("scores");
                prop_assert_eq!(factual.max_abs_diff(&shifted), 0.0);
            }
        }
    }

    /// The evaluation order computes parents before children, and the
    /// feature order is exactly the observables in that order.
    #[test]
    fn evaluation_order_puts_parents_first(
        scm_seed in 0u64..2000,
        max_observables in 1usize..5,
    ) {
        let scm = random_linear_scm(scm_seed, max_observables);

        let topo = scm.topological_order();
        let topo_pos = |name: &str| topo.iter().position(|v| v == name).expect("in order");
        for (parent, child) in &scm.graph().edges {
            prop_assert!(
                topo_pos(parent) < topo_pos(child),
                "{parent} evaluated after its child {child}"
            );
        }

        let features = scm.feature_order();
        let observables = scm.graph().observable_variables();
        prop_assert_eq!(features.len(), observables.len());
        for spec in &observables {
            prop_assert!(features.iter().any(|f| f == &spec.name));
        }
        let feature_pos = |name: &str| features.iter().position(|v| v == name);
        for (parent, child) in &scm.graph().edges {
            if let (Some(p), Some(c)) = (feature_pos(parent), feature_pos(child)) {
                prop_assert!(p < c);
            }
        }
    }

    /// Loosening the equality tolerance never flips a pass into a failure,
    /// and never changes the measured margin.
    #[test]
    fn equality_slack_is_monotone(
        scm_seed in 0u64..300,
        pop_seed in 0u64..300,
        predictor_seed in 0u64..300,
        eps in 0.0f64..0.2,
        extra in 0.0f64..0.5,
    ) {
        let (scm, individuals) = draw(scm_seed, pop_seed, 3, 3, 1);
        let space = DecisionSpace::new(&["deny", "grant"]).expect("valid space");
        let predictor =
            random_predictor(PredictorFamily::Full, &scm, &space, predictor_seed, 1.0)
                .expect("fixture predictor");
        let tight = Tolerance {
            eps_fair: eps,
            ..Tolerance::default()
        };
        let loose = Tolerance {
            eps_fair: eps + extra,
            ..Tolerance::default()
        };
        for individual in &individuals {
            let strict = check_counterfactual_fairness(&predictor, &scm, individual, &tight)
                .expect("check runs");
            let relaxed = check_counterfactual_fairness(&predictor, &scm, individual, &loose)
                .expect("check runs");
            prop_assert_eq!(strict.clauses[0].margin, relaxed.clauses[0].margin);
            if strict.passed {
                prop_assert!(relaxed.passed);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// Writing a population to CSV and loading it back is the identity, for
    /// single- and multi-snapshot trajectories alike.
    #[test]
    fn datasets_round_trip_through_csv(
        scm_seed in 0u64..200,
        pop_seed in 0u64..200,
        snapshots in 1usize..3,
    ) {
        let (scm, individuals) = draw(scm_seed, pop_seed, 3, 4, snapshots);
        let dir = tempfile::tempdir().expect("tempdir");
        let path = dir.path().join("data.csv");
        write_dataset(&path, scm.graph(), &individuals).expect("writes");
        let reloaded = load_dataset(&path, scm.graph()).expect("loads");
        prop_assert_eq!(reloaded, individuals);
    }
}
