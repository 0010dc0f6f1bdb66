//! Regenerates the job-location demo fixture in `fixtures/job_location/`.
//!
//! The scenario: an HR algorithm assigns employees either to the London
//! headquarters or to a satellite office. Employee P was assigned London,
//! employee Q a satellite office, and Q challenges the pairwise decision as
//! racially biased. The shipped predictor scores London by the performance
//! residual alone — the part of the rating the protected attribute cannot
//! explain — so the audit's pairwise-contrast check can defend the decision.
//!
//! Run from the repository root:
//!
//! ```text
//! cargo run -p contrafair --example job_location_fixture
//! ```

use std::path::PathBuf;

use contrafair::audit::{AuditConfig, CriterionSpec, PredictorSource};
use contrafair::dataset::write_dataset;
use contrafair::fairness::Tolerance;
use contrafair::predict::{
    DecisionSpace, Feature, InputSchema, ModelParams, Predictor, PredictorFamily,
};
use contrafair::scm::{CausalGraph, Individual, Snapshot, VariableRole, VariableSpec};
use contrafair::Value;

fn main() {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("fixtures/job_location"));
    std::fs::create_dir_all(&dir).expect("create fixture directory");

    let graph = CausalGraph::new(
        vec![
            VariableSpec::categorical("race", VariableRole::Protected, &["majority", "minority"]),
            VariableSpec::continuous("rating", VariableRole::Observable),
            VariableSpec::continuous("london_fit", VariableRole::Outcome),
        ],
        vec![("race", "rating"), ("rating", "london_fit")],
    );
    std::fs::write(dir.join("graph.json"), graph.to_json()).expect("write graph");

    // Performance ratings cluster near 3.5 for the majority group and 2.7
    // for the minority group — the structural bias the audit will recover.
    // P is the clear top performer relative to either group baseline, Q the
    // clear bottom, so their rating residuals stay respectively positive and
    // negative under any train/eval split of this roster. `london_fit` is a
    // later suitability assessment, thresholded at 0.5 in the audit config.
    let roster: &[(&str, &str, f64, f64)] = &[
        ("e01", "majority", 3.4, 0.45),
        ("e02", "majority", 3.7, 0.62),
        ("e03", "majority", 3.3, 0.38),
        ("e04", "majority", 3.6, 0.58),
        ("e05", "majority", 3.5, 0.52),
        ("P", "majority", 4.6, 0.92),
        ("e06", "minority", 2.6, 0.44),
        ("e07", "minority", 2.9, 0.63),
        ("e08", "minority", 2.5, 0.35),
        ("e09", "minority", 2.8, 0.57),
        ("e10", "minority", 2.7, 0.48),
        ("Q", "minority", 2.0, 0.08),
    ];
    let employees: Vec<Individual> = roster
        .iter()
        .map(|(id, race, rating, fit)| {
            let mut employee = Individual::new(
                id,
                &[("race", Value::from(*race))],
                vec![Snapshot::new(0, &[("rating", *rating)])],
            );
            employee.outcome = Some(*fit);
            employee
        })
        .collect();
    write_dataset(&dir.join("data.csv"), &graph, &employees).expect("write data");

    // The HR model: London's score rises with the rating residual and reads
    // nothing else, so it is invariant under race interventions by
    // construction.
    let space = DecisionSpace::new(&["Satellite", "London"]).expect("valid space");
    let predictor = Predictor::from_parts(
        PredictorFamily::Counterfactual,
        space,
        InputSchema::new(vec![Feature::Residual {
            name: "rating".to_string(),
        }]),
        ModelParams::Linear {
            weights: vec![vec![1.2]],
            bias: vec![0.0],
        },
    )
    .expect("valid predictor");
    std::fs::write(dir.join("predictor.json"), predictor.to_json()).expect("write predictor");

    // Why London for P and a satellite office for Q? Paths are relative to
    // the repository root, where the demo commands run.
    let audit = AuditConfig {
        graph: PathBuf::from("fixtures/job_location/graph.json"),
        dataset: PathBuf::from("fixtures/job_location/data.csv"),
        seed: 11,
        decision_space: vec!["Satellite".to_string(), "London".to_string()],
        outcome_threshold: Some(0.5),
        predictors: vec![PredictorSource {
            family: PredictorFamily::Counterfactual,
            path: Some(PathBuf::from("fixtures/job_location/predictor.json")),
            train: None,
        }],
        criteria: vec![CriterionSpec::IContrast {
            pairs: vec![("P".to_string(), "Q".to_string())],
            d: "London".to_string(),
            d_prime: "Satellite".to_string(),
            tolerance: Tolerance::default(),
            families: vec![PredictorFamily::Counterfactual],
        }],
        out: None,
        format: None,
    };
    std::fs::write(dir.join("audit.json"), audit.to_json()).expect("write audit config");

    println!("wrote job-location fixture to {}", dir.display());
}
