//! End-to-end audit orchestration.
//!
//! An audit is driven by a single JSON config naming the graph, the dataset,
//! the predictors to train or load, and the criteria to check. The pipeline
//! is fixed: validate the graph, split the dataset 80/20 by seeded shuffle,
//! fit the structural model on the training split, train or load each
//! predictor, measure held-out accuracy, run every configured criterion
//! against every selected predictor, and assemble the report.
//!
//! Configuration mistakes surface as [`AuditError::ConfigConflict`] before
//! any expensive work happens, never as silently skipped checks.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dataset::{load_dataset, DatasetError};
use crate::fairness::{
    check_contrast_margin, check_counterfactual_fairness, check_d_contrast,
    check_demographic_parity, check_equality_of_opportunity, check_i_contrast,
    check_individual_fairness, check_t_contrast, euclidean_distance, FairnessError,
    FavorableOutcome, Tolerance, Verdict,
};
use crate::predict::{
    class_of, train, DecisionSpace, InputSchema, PredictError, Predictor, PredictorFamily,
    TrainConfig,
};
use crate::report::{report_timestamp, AccuracyEntry, AuditReport, ReportMetadata};
use crate::scm::{CausalGraph, FittedScm, Individual, ScmError};

/// Audit failures. `ConfigConflict` covers every self-inconsistent or
/// unsatisfiable configuration; the remaining variants wrap stage errors.
#[derive(Debug, Error)]
pub enum AuditError {
    #[error("configuration conflict: {detail}")]
    ConfigConflict { detail: String },

    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Dataset(#[from] DatasetError),

    #[error(transparent)]
    Scm(#[from] ScmError),

    #[error(transparent)]
    Predict(#[from] PredictError),

    #[error(transparent)]
    Fairness(#[from] FairnessError),
}

fn conflict(detail: impl Into<String>) -> AuditError {
    AuditError::ConfigConflict {
        detail: detail.into(),
    }
}

fn read_file(path: &Path) -> Result<String, AuditError> {
    std::fs::read_to_string(path).map_err(|source| AuditError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Report output flavour.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Text,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "text" => Ok(ReportFormat::Text),
            other => Err(format!("unknown report format {other:?}; use json or text")),
        }
    }
}

/// Hyperparameters for training one predictor inside an audit. The family
/// comes from the enclosing [`PredictorSource`]; the seed and outcome
/// threshold come from the audit level so every model trains under the same
/// regime.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSettings {
    #[serde(default = "TrainSettings::default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "TrainSettings::default_epochs")]
    pub epochs: usize,
    #[serde(default)]
    pub penalty_weight: f64,
    #[serde(default)]
    pub hidden_width: usize,
    #[serde(default)]
    pub l2: f64,
}

impl TrainSettings {
    fn default_learning_rate() -> f64 {
        0.5
    }

    fn default_epochs() -> usize {
        400
    }
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            learning_rate: Self::default_learning_rate(),
            epochs: Self::default_epochs(),
            penalty_weight: 0.0,
            hidden_width: 0,
            l2: 0.0,
        }
    }
}

/// Where one predictor comes from: a JSON file (`path`) or a training run
/// (`train`, defaulted when both are absent). Naming both is a conflict.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictorSource {
    pub family: PredictorFamily,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainSettings>,
}

/// Which individuals a criterion covers: the keyword `"all"`, the keyword
/// `"held_out"` (the 20% evaluation split), or an explicit id list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SubjectSelector {
    Keyword(String),
    Ids(Vec<String>),
}

impl Default for SubjectSelector {
    fn default() -> Self {
        SubjectSelector::Keyword("all".to_string())
    }
}

/// An i/j pair for the contrast-margin criterion, with an optional per-pair
/// λ that overrides the tolerance's `lambda_margin`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginPair {
    pub i: String,
    pub j: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

fn default_families() -> Vec<PredictorFamily> {
    Vec::new()
}

/// One criterion to check, with its subjects, tolerance, and the predictor
/// families it applies to (empty = every configured predictor).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case")]
pub enum CriterionSpec {
    /// Decision scores must be invariant under every protected intervention.
    CounterfactualFairness {
        #[serde(default)]
        subjects: SubjectSelector,
        #[serde(default)]
        tolerance: Tolerance,
        #[serde(default = "default_families")]
        families: Vec<PredictorFamily>,
    },
    /// Why decision d and not d'? Both scores invariant, d preferred.
    /// Without explicit labels, d is the subject's top decision and d' the
    /// runner-up at the latest snapshot.
    DContrast {
        #[serde(default)]
        subjects: SubjectSelector,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        d: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        d_prime: Option<String>,
        #[serde(default)]
        tolerance: Tolerance,
        #[serde(default = "default_families")]
        families: Vec<PredictorFamily>,
    },
    /// Why d for individual i and d' for individual j?
    IContrast {
        pairs: Vec<(String, String)>,
        d: String,
        d_prime: String,
        #[serde(default)]
        tolerance: Tolerance,
        #[serde(default = "default_families")]
        families: Vec<PredictorFamily>,
    },
    /// Why d at time t and d' at time t'? Defaults: t is the subject's first
    /// snapshot, t' the latest.
    TContrast {
        #[serde(default)]
        subjects: SubjectSelector,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        t: Option<i64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        t_prime: Option<i64>,
        d: String,
        d_prime: String,
        #[serde(default)]
        tolerance: Tolerance,
        #[serde(default = "default_families")]
        families: Vec<PredictorFamily>,
    },
    /// Quantitative separation of a contrastive pair under shared
    /// assignments.
    ContrastMargin {
        pairs: Vec<MarginPair>,
        d: String,
        d_prime: String,
        #[serde(default)]
        tolerance: Tolerance,
        #[serde(default = "default_families")]
        families: Vec<PredictorFamily>,
    },
    /// Group-mean score parity across a binary protected attribute.
    DemographicParity {
        group_attr: String,
        #[serde(default)]
        subjects: SubjectSelector,
        #[serde(default = "Tolerance::population")]
        tolerance: Tolerance,
        #[serde(default = "default_families")]
        families: Vec<PredictorFamily>,
    },
    /// Score parity among individuals whose outcome was favorable.
    EqualityOfOpportunity {
        group_attr: String,
        favorable_outcome: FavorableOutcome,
        #[serde(default)]
        subjects: SubjectSelector,
        #[serde(default = "Tolerance::population")]
        tolerance: Tolerance,
        #[serde(default = "default_families")]
        families: Vec<PredictorFamily>,
    },
    /// Similar individuals (euclidean distance over observables below
    /// `pair_threshold`) must score within `score_threshold`.
    IndividualFairness {
        pair_threshold: f64,
        score_threshold: f64,
        #[serde(default)]
        subjects: SubjectSelector,
        #[serde(default = "default_families")]
        families: Vec<PredictorFamily>,
    },
}

impl CriterionSpec {
    fn families(&self) -> &[PredictorFamily] {
        match self {
            CriterionSpec::CounterfactualFairness { families, .. }
            | CriterionSpec::DContrast { families, .. }
            | CriterionSpec::IContrast { families, .. }
            | CriterionSpec::TContrast { families, .. }
            | CriterionSpec::ContrastMargin { families, .. }
            | CriterionSpec::DemographicParity { families, .. }
            | CriterionSpec::EqualityOfOpportunity { families, .. }
            | CriterionSpec::IndividualFairness { families, .. } => families,
        }
    }
}

/// The complete description of one audit run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditConfig {
    /// Path to the graph spec JSON.
    pub graph: PathBuf,
    /// Path to the dataset CSV.
    pub dataset: PathBuf,
    /// Drives the split shuffle, weight initialization, and the report
    /// metadata. Resolution order at the CLI: flag, `CONTRAFAIR_SEED`, this
    /// field.
    #[serde(default)]
    pub seed: u64,
    /// Ordered decision labels shared by every predictor in the audit.
    pub decision_space: Vec<String>,
    /// Binarization threshold applied to continuous outcomes when training
    /// and when computing accuracy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome_threshold: Option<f64>,
    pub predictors: Vec<PredictorSource>,
    pub criteria: Vec<CriterionSpec>,
    /// Default report destination; the CLI's `--out` flag overrides it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Default report format; the CLI's `--format` flag overrides it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<ReportFormat>,
}

impl AuditConfig {
    pub fn from_json(text: &str) -> Result<Self, AuditError> {
        serde_json::from_str(text).map_err(|e| conflict(format!("bad audit config: {e}")))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    /// Hex SHA-256 over the canonical JSON form of the effective config.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    fn validate(&self) -> Result<(), AuditError> {
        if self.criteria.is_empty() {
            return Err(conflict("audit config lists no criteria"));
        }
        if self.predictors.is_empty() {
            return Err(conflict("audit config lists no predictors"));
        }
        let mut seen: Vec<PredictorFamily> = Vec::new();
        for source in &self.predictors {
            if seen.contains(&source.family) {
                return Err(conflict(format!(
                    "predictor family {} is configured twice",
                    source.family
                )));
            }
            seen.push(source.family);
            if source.path.is_some() && source.train.is_some() {
                return Err(conflict(format!(
                    "predictor {} names both a path and training settings",
                    source.family
                )));
            }
        }
        for spec in &self.criteria {
            for family in spec.families() {
                if !seen.contains(family) {
                    return Err(conflict(format!(
                        "criterion references predictor family {family} which is not configured"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Canonical family ordering used in the accuracy table and verdict loops.
pub const FAMILY_ORDER: [PredictorFamily; 4] = [
    PredictorFamily::Full,
    PredictorFamily::Unaware,
    PredictorFamily::Counterfactual,
    PredictorFamily::Contrastive,
];

/// Deterministic 80/20 split: indices are shuffled by a seeded generator,
/// the first 80% (rounded down, at least one) train, the rest evaluate.
fn split_indices(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let train_count = ((n * 4) / 5).max(1).min(n);
    let heldout = indices.split_off(train_count);
    (indices, heldout)
}

struct Stage<'a> {
    scm: &'a FittedScm,
    dataset: &'a [Individual],
    heldout_ids: &'a [String],
    by_id: BTreeMap<&'a str, &'a Individual>,
}

impl<'a> Stage<'a> {
    fn lookup(&self, id: &str) -> Result<&'a Individual, AuditError> {
        self.by_id
            .get(id)
            .copied()
            .ok_or_else(|| conflict(format!("subject id {id} is not in the dataset")))
    }

    fn resolve(&self, selector: &SubjectSelector) -> Result<Vec<&'a Individual>, AuditError> {
        match selector {
            SubjectSelector::Keyword(word) if word == "all" => Ok(self.dataset.iter().collect()),
            SubjectSelector::Keyword(word) if word == "held_out" => Ok(self
                .dataset
                .iter()
                .filter(|ind| self.heldout_ids.contains(&ind.id))
                .collect()),
            SubjectSelector::Keyword(word) => Err(conflict(format!(
                "unknown subject keyword {word:?}; use \"all\", \"held_out\", or an id list"
            ))),
            SubjectSelector::Ids(ids) => {
                if ids.is_empty() {
                    return Err(conflict("criterion lists an empty subject id list"));
                }
                ids.iter().map(|id| self.lookup(id)).collect()
            }
        }
    }
}

/// Top decision and runner-up at the individual's latest snapshot.
fn top_two(
    predictor: &Predictor,
    scm: &FittedScm,
    individual: &Individual,
) -> Result<(String, String), AuditError> {
    let latest = individual.snapshots.len().saturating_sub(1);
    let scores = predictor.predict(scm, individual, latest)?;
    let d = scores.argmax().to_string();
    let d_prime = scores
        .scores()
        .iter()
        .filter(|(label, _)| **label != d)
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
        .map(|(label, _)| label.clone())
        .expect("decision spaces have at least two labels");
    Ok((d, d_prime))
}

fn run_criterion(
    spec: &CriterionSpec,
    predictor: &Predictor,
    stage: &Stage<'_>,
) -> Result<Vec<Verdict>, AuditError> {
    let scm = stage.scm;
    let mut verdicts = Vec::new();
    match spec {
        CriterionSpec::CounterfactualFairness {
            subjects,
            tolerance,
            ..
        } => {
            for individual in stage.resolve(subjects)? {
                verdicts.push(check_counterfactual_fairness(
                    predictor, scm, individual, tolerance,
                )?);
            }
        }
        CriterionSpec::DContrast {
            subjects,
            d,
            d_prime,
            tolerance,
            ..
        } => {
            for individual in stage.resolve(subjects)? {
                let (top, runner_up) = match (d, d_prime) {
                    (Some(d), Some(dp)) => (d.clone(), dp.clone()),
                    (None, None) => top_two(predictor, scm, individual)?,
                    _ => {
                        return Err(conflict(
                            "d_contrast needs both d and d_prime, or neither",
                        ))
                    }
                };
                verdicts.push(check_d_contrast(
                    predictor, scm, individual, &top, &runner_up, tolerance,
                )?);
            }
        }
        CriterionSpec::IContrast {
            pairs,
            d,
            d_prime,
            tolerance,
            ..
        } => {
            if pairs.is_empty() {
                return Err(conflict("i_contrast lists no pairs"));
            }
            for (i, j) in pairs {
                verdicts.push(check_i_contrast(
                    predictor,
                    scm,
                    stage.lookup(i)?,
                    stage.lookup(j)?,
                    d,
                    d_prime,
                    tolerance,
                )?);
            }
        }
        CriterionSpec::TContrast {
            subjects,
            t,
            t_prime,
            d,
            d_prime,
            tolerance,
            ..
        } => {
            for individual in stage.resolve(subjects)? {
                if individual.snapshots.len() < 2 {
                    return Err(conflict(format!(
                        "t_contrast needs at least two snapshots, but {} has {}",
                        individual.id,
                        individual.snapshots.len()
                    )));
                }
                let first = individual.snapshots.first().expect("nonempty").time;
                let last = individual.snapshots.last().expect("nonempty").time;
                verdicts.push(check_t_contrast(
                    predictor,
                    scm,
                    individual,
                    t.unwrap_or(first),
                    t_prime.unwrap_or(last),
                    d,
                    d_prime,
                    tolerance,
                )?);
            }
        }
        CriterionSpec::ContrastMargin {
            pairs,
            d,
            d_prime,
            tolerance,
            ..
        } => {
            if pairs.is_empty() {
                return Err(conflict("contrast_margin lists no pairs"));
            }
            for pair in pairs {
                let mut tol = tolerance.clone();
                if let Some(lambda) = pair.lambda {
                    tol.lambda_margin = lambda;
                }
                verdicts.push(check_contrast_margin(
                    predictor,
                    scm,
                    stage.lookup(&pair.i)?,
                    stage.lookup(&pair.j)?,
                    d,
                    d_prime,
                    &tol,
                )?);
            }
        }
        CriterionSpec::DemographicParity {
            group_attr,
            subjects,
            tolerance,
            ..
        } => {
            let cohort: Vec<Individual> = stage
                .resolve(subjects)?
                .into_iter()
                .cloned()
                .collect();
            verdicts.push(check_demographic_parity(
                predictor, scm, &cohort, group_attr, tolerance,
            )?);
        }
        CriterionSpec::EqualityOfOpportunity {
            group_attr,
            favorable_outcome,
            subjects,
            tolerance,
            ..
        } => {
            let cohort: Vec<Individual> = stage
                .resolve(subjects)?
                .into_iter()
                .cloned()
                .collect();
            verdicts.push(check_equality_of_opportunity(
                predictor,
                scm,
                &cohort,
                group_attr,
                favorable_outcome.clone(),
                tolerance,
            )?);
        }
        CriterionSpec::IndividualFairness {
            pair_threshold,
            score_threshold,
            subjects,
            ..
        } => {
            let cohort: Vec<Individual> = stage
                .resolve(subjects)?
                .into_iter()
                .cloned()
                .collect();
            verdicts.push(check_individual_fairness(
                predictor,
                scm,
                &cohort,
                &euclidean_distance,
                *pair_threshold,
                *score_threshold,
            )?);
        }
    }
    Ok(verdicts)
}

/// Runs the full audit pipeline and assembles the report. Paths in the
/// config are resolved relative to the current working directory.
pub fn run_audit(config: &AuditConfig) -> Result<AuditReport, AuditError> {
    config.validate()?;

    let graph = CausalGraph::from_json(&read_file(&config.graph)?)
        .map_err(|e| conflict(format!("bad graph spec: {e}")))?;
    graph.validate()?;
    let dataset = load_dataset(&config.dataset, &graph)?;
    if dataset.is_empty() {
        return Err(conflict("dataset has no rows"));
    }

    let space = DecisionSpace::new(
        &config
            .decision_space
            .iter()
            .map(String::as_str)
            .collect::<Vec<_>>(),
    )?;

    let (train_idx, heldout_idx) = split_indices(dataset.len(), config.seed);
    let train_split: Vec<Individual> = train_idx.iter().map(|&i| dataset[i].clone()).collect();
    let heldout_ids: Vec<String> = heldout_idx.iter().map(|&i| dataset[i].id.clone()).collect();

    let scm = FittedScm::fit(graph, &train_split)?;

    let mut predictors: Vec<(PredictorFamily, Predictor)> = Vec::new();
    for family in FAMILY_ORDER {
        let Some(source) = config.predictors.iter().find(|s| s.family == family) else {
            continue;
        };
        let predictor = match &source.path {
            Some(path) => {
                let predictor = Predictor::from_json(&read_file(path)?)?;
                if predictor.family() != family {
                    return Err(conflict(format!(
                        "predictor at {} declares family {}, config says {}",
                        path.display(),
                        predictor.family(),
                        family
                    )));
                }
                if predictor.decision_space() != &space {
                    return Err(conflict(format!(
                        "predictor at {} uses decisions [{}], config says [{}]",
                        path.display(),
                        predictor.decision_space().decisions().join(", "),
                        space.decisions().join(", ")
                    )));
                }
                let expected = InputSchema::for_family(family, &scm);
                if predictor.input_schema() != &expected {
                    return Err(conflict(format!(
                        "predictor at {} reads different inputs than the {} family derives \
                         from this graph",
                        path.display(),
                        family
                    )));
                }
                predictor
            }
            None => {
                let settings = source.train.clone().unwrap_or_default();
                let train_config = TrainConfig {
                    family,
                    learning_rate: settings.learning_rate,
                    epochs: settings.epochs,
                    penalty_weight: settings.penalty_weight,
                    hidden_width: settings.hidden_width,
                    seed: config.seed,
                    l2: settings.l2,
                    outcome_threshold: config.outcome_threshold,
                };
                train(&train_config, &scm, &train_split, &space)?
            }
        };
        predictors.push((family, predictor));
    }

    let mut accuracy_table = Vec::new();
    if !heldout_idx.is_empty() {
        for (family, predictor) in &predictors {
            let mut hits = 0usize;
            for &i in &heldout_idx {
                let individual = &dataset[i];
                let expected = class_of(individual, &space, config.outcome_threshold)?;
                let latest = individual.snapshots.len().saturating_sub(1);
                let scores = predictor.predict(&scm, individual, latest)?;
                if space.index_of(scores.argmax()) == Some(expected) {
                    hits += 1;
                }
            }
            accuracy_table.push(AccuracyEntry {
                family: *family,
                accuracy: hits as f64 / heldout_idx.len() as f64,
            });
        }
    }

    let stage = Stage {
        scm: &scm,
        dataset: &dataset,
        heldout_ids: &heldout_ids,
        by_id: dataset.iter().map(|ind| (ind.id.as_str(), ind)).collect(),
    };

    let mut verdicts = Vec::new();
    for spec in &config.criteria {
        let selected: Vec<PredictorFamily> = if spec.families().is_empty() {
            predictors.iter().map(|(f, _)| *f).collect()
        } else {
            FAMILY_ORDER
                .into_iter()
                .filter(|f| spec.families().contains(f))
                .collect()
        };
        for family in selected {
            let predictor = &predictors
                .iter()
                .find(|(f, _)| *f == family)
                .expect("validated family")
                .1;
            for mut verdict in run_criterion(spec, predictor, &stage)? {
                verdict.predictor = Some(family.to_string());
                verdicts.push(verdict);
            }
        }
    }

    let metadata = ReportMetadata {
        config_hash: config.hash(),
        seed: config.seed,
        timestamp: report_timestamp(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
    };
    Ok(AuditReport::new(metadata, accuracy_table, verdicts))
}
