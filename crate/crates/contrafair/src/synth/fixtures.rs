//! Hand-authored models and randomized generators used across the test
//! suites and the bundled demos.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::generate::{sample_population, GeneratorConfig};
use super::SynthError;
use crate::predict::{
    DecisionSpace, InputSchema, ModelParams, Predictor, PredictorFamily,
};
use crate::scm::{
    CausalGraph, FittedScm, Individual, StructuralEquation, VariableRole, VariableSpec,
};

/// The two-variable benchmark model: one binary protected attribute `a`, one
/// observable `x = 1 + 2·[a=1] + ε` (ε at scale 0.5), and an outcome
/// `y = 1 + x − 1.9·[a=1] + ε'` (ε' at scale 0.25).
///
/// The protected attribute pushes `x` up by 2 but pulls `y` down by almost as
/// much, so the net outcome gap between groups is small (0.1) while the
/// feature gap is large — the classic proxy trap: a predictor leaning on `x`
/// or `a` is far from counterfactually fair, yet an equally accurate
/// residual-based predictor exists.
pub fn fix_a_scm() -> FittedScm {
    let graph = CausalGraph::new(
        vec![
            VariableSpec::categorical("a", VariableRole::Protected, &["0", "1"]),
            VariableSpec::continuous("x", VariableRole::Observable),
            VariableSpec::continuous("y", VariableRole::Outcome),
        ],
        vec![("a", "x"), ("x", "y"), ("a", "y")],
    );
    let equations = vec![
        StructuralEquation::new("x", 1.0, &[("a=1", 2.0)], 0.5),
        StructuralEquation::new("y", 1.0, &[("x", 1.0), ("a=1", -1.9)], 0.25),
    ];
    FittedScm::from_parts(graph, equations).expect("fixture model is valid")
}

/// A balanced population from [`fix_a_scm`], outcomes included.
pub fn fix_a_population(n: usize, seed: u64) -> Vec<Individual> {
    let mut config = GeneratorConfig::new(fix_a_scm(), n, seed);
    config
        .protected_marginals
        .insert("a".to_string(), vec![0.5, 0.5]);
    sample_population(&config).expect("fixture generation is valid")
}

/// A law-school-like admission model: two binary protected roots (race,
/// sex), two continuous mediators (gpa, lsat), and a first-year-average
/// outcome that reads the mediators *and* the protected roots directly.
///
/// Coefficients are hand-picked, documented values at plausible scales —
/// stand-ins chosen so that group gaps flow through both the mediators and
/// the direct edges.
pub fn law_school_scm() -> FittedScm {
    let graph = CausalGraph::new(
        vec![
            VariableSpec::categorical("race", VariableRole::Protected, &["majority", "minority"]),
            VariableSpec::categorical("sex", VariableRole::Protected, &["female", "male"]),
            VariableSpec::continuous("gpa", VariableRole::Observable),
            VariableSpec::continuous("lsat", VariableRole::Observable),
            VariableSpec::continuous("fya", VariableRole::Outcome),
        ],
        vec![
            ("race", "gpa"),
            ("sex", "gpa"),
            ("race", "lsat"),
            ("sex", "lsat"),
            ("gpa", "fya"),
            ("lsat", "fya"),
            ("race", "fya"),
            ("sex", "fya"),
        ],
    );
    let equations = vec![
        StructuralEquation::new(
            "gpa",
            3.1,
            &[("race=minority", -0.4), ("sex=male", 0.1)],
            0.3,
        ),
        StructuralEquation::new(
            "lsat",
            35.0,
            &[("race=minority", -4.0), ("sex=male", 1.0)],
            4.0,
        ),
        StructuralEquation::new(
            "fya",
            -1.0,
            &[
                ("gpa", 0.5),
                ("lsat", 0.04),
                ("race=minority", -0.2),
                ("sex=male", 0.05),
            ],
            0.3,
        ),
    ];
    FittedScm::from_parts(graph, equations).expect("fixture model is valid")
}

/// Generator settings for a law-school-like population: 80/20 race split,
/// balanced sex.
pub fn law_school_config(n: usize, seed: u64) -> GeneratorConfig {
    let mut config = GeneratorConfig::new(law_school_scm(), n, seed);
    config
        .protected_marginals
        .insert("race".to_string(), vec![0.8, 0.2]);
    config
        .protected_marginals
        .insert("sex".to_string(), vec![0.5, 0.5]);
    config
}

/// A random linear model with at most `max_observables + 3` nodes: one or two
/// categorical protected roots, a chain of observables with random edges from
/// everything upstream, and one outcome reading every variable. Weights in
/// [−2, 2], intercepts in [−1, 1], noise scales in [0.1, 1].
pub fn random_linear_scm(seed: u64, max_observables: usize) -> FittedScm {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_protected = rng.gen_range(1..=2usize);
    let n_observables = rng.gen_range(1..=max_observables.max(1));

    let mut variables = Vec::new();
    let mut edges: Vec<(String, String)> = Vec::new();
    for p in 0..n_protected {
        let n_levels = rng.gen_range(2..=3usize);
        let levels: Vec<String> = (0..n_levels).map(|l| format!("l{l}")).collect();
        variables.push(VariableSpec::categorical(
            &format!("a{p}"),
            VariableRole::Protected,
            &levels.iter().map(|s| s.as_str()).collect::<Vec<_>>(),
        ));
    }
    for o in 0..n_observables {
        variables.push(VariableSpec::continuous(
            &format!("x{o}"),
            VariableRole::Observable,
        ));
        for p in 0..n_protected {
            if rng.gen_bool(0.7) {
                edges.push((format!("a{p}"), format!("x{o}")));
            }
        }
        for earlier in 0..o {
            if rng.gen_bool(0.5) {
                edges.push((format!("x{earlier}"), format!("x{o}")));
            }
        }
    }
    variables.push(VariableSpec::continuous("y", VariableRole::Outcome));
    for p in 0..n_protected {
        edges.push((format!("a{p}"), "y".to_string()));
    }
    for o in 0..n_observables {
        edges.push((format!("x{o}"), "y".to_string()));
    }

    let graph = CausalGraph {
        variables,
        edges,
    };
    let mut equations = Vec::new();
    for spec in graph
        .observable_variables()
        .into_iter()
        .chain(graph.outcome_variables())
    {
        let weights: Vec<(String, f64)> = graph
            .equation_keys(&spec.name)
            .into_iter()
            .map(|key| (key, rng.gen_range(-2.0..2.0)))
            .collect();
        equations.push(StructuralEquation {
            child: spec.name.clone(),
            intercept: rng.gen_range(-1.0..1.0),
            weights: weights.into_iter().collect(),
            noise_std: rng.gen_range(0.1..1.0),
        });
    }
    FittedScm::from_parts(graph, equations).expect("generated model is valid")
}

/// A linear predictor of the given family over the model's canonical schema,
/// with weights and biases drawn uniformly from [−scale, scale].
pub fn random_predictor(
    family: PredictorFamily,
    scm: &FittedScm,
    decision_space: &DecisionSpace,
    seed: u64,
    scale: f64,
) -> Result<Predictor, SynthError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let schema = InputSchema::for_family(family, scm);
    let rows = decision_space.len() - 1;
    let weights: Vec<Vec<f64>> = (0..rows)
        .map(|_| (0..schema.len()).map(|_| rng.gen_range(-scale..scale)).collect())
        .collect();
    let bias: Vec<f64> = (0..rows).map(|_| rng.gen_range(-scale..scale)).collect();
    Ok(Predictor::from_parts(
        family,
        decision_space.clone(),
        schema,
        ModelParams::Linear { weights, bias },
    )?)
}

/// Candidate-value map for the oracle's domain enumeration, taken from the
/// model's categorical protected variables.
pub fn categorical_domain(scm: &FittedScm) -> BTreeMap<String, Vec<crate::Value>> {
    scm.graph()
        .protected_variables()
        .into_iter()
        .map(|spec| {
            (
                spec.name.clone(),
                spec.level_labels()
                    .iter()
                    .map(|l| crate::Value::Categorical(l.clone()))
                    .collect(),
            )
        })
        .collect()
}
