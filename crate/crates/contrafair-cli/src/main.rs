//! `contrafair` — fit causal models, train predictors, and audit them
//! against counterfactual and contrastive fairness criteria.
//!
//! Exit codes: 0 when the requested operation succeeds and, for audits,
//! every verdict passed; 2 when the audit ran but at least one verdict
//! failed; 1 for operational errors (unreadable files, malformed configs,
//! fit or training failures).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use contrafair::audit::{run_audit, AuditConfig, ReportFormat, TrainSettings};
use contrafair::dataset::{load_dataset, write_dataset};
use contrafair::predict::{train, DecisionSpace, PredictorFamily, TrainConfig};
use contrafair::report::AuditReport;
use contrafair::scm::{CausalGraph, FittedScm};
use contrafair::synth::{sample_population, GeneratorConfig};

/// Seed override honoured by every subcommand that takes one.
const SEED_ENV: &str = "CONTRAFAIR_SEED";

#[derive(Parser)]
#[command(
    name = "contrafair",
    version,
    about = "Causal fairness auditor for tabular decision models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SeedArg {
    /// Random seed; precedence: this flag, then CONTRAFAIR_SEED, then the
    /// config file.
    #[arg(long)]
    seed: Option<u64>,
}

impl SeedArg {
    /// Resolves the effective seed given the config file's value.
    fn resolve(&self, config_value: u64) -> Result<u64> {
        if let Some(seed) = self.seed {
            return Ok(seed);
        }
        if let Ok(raw) = std::env::var(SEED_ENV) {
            return raw
                .trim()
                .parse()
                .with_context(|| format!("{SEED_ENV} must be an unsigned integer, got {raw:?}"));
        }
        Ok(config_value)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Fit a linear structural causal model from a graph spec and a dataset.
    Fit {
        /// Graph spec JSON.
        #[arg(long)]
        graph: PathBuf,
        /// Dataset CSV.
        #[arg(long)]
        data: PathBuf,
        /// Where to write the fitted model JSON (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a decision predictor against a fitted or freshly fit model.
    Train {
        /// Graph spec JSON.
        #[arg(long)]
        graph: PathBuf,
        /// Training dataset CSV.
        #[arg(long)]
        data: PathBuf,
        /// Training config JSON: family, decision_space, optional
        /// hyperparameters, seed, and outcome threshold.
        #[arg(long)]
        config: PathBuf,
        /// Where to write the predictor JSON (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Run a fairness audit and emit the report.
    Audit {
        /// Audit config JSON.
        #[arg(long)]
        config: PathBuf,
        /// Override the config's graph path.
        #[arg(long)]
        graph: Option<PathBuf>,
        /// Override the config's dataset path.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Override the config's report destination (stdout when neither
        /// names one).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Report format: json or text. Overrides the config.
        #[arg(long)]
        format: Option<ReportFormat>,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Sample a synthetic population from a fitted model.
    Simulate {
        /// Generator config JSON: model path, population size, marginals,
        /// snapshots per individual, drift.
        #[arg(long)]
        config: PathBuf,
        /// Where to write the dataset CSV.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Re-render a stored report. Exits 2 when the report records failures,
    /// mirroring the audit that produced it.
    Report {
        /// Stored report JSON.
        #[arg(long)]
        data: PathBuf,
        /// Output format: json or text (default text).
        #[arg(long)]
        format: Option<ReportFormat>,
        /// Destination (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Config file for `train`.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainFile {
    family: PredictorFamily,
    decision_space: Vec<String>,
    #[serde(default)]
    train: Option<TrainSettings>,
    #[serde(default)]
    outcome_threshold: Option<f64>,
    #[serde(default)]
    seed: u64,
}

/// Config file for `simulate`. The model is referenced by path so large
/// populations can share one fitted model file.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateFile {
    /// Fitted model JSON (as written by `fit`).
    model: PathBuf,
    /// Population size.
    n: usize,
    #[serde(default)]
    seed: u64,
    /// Per protected variable, one probability per declared level.
    #[serde(default)]
    protected_marginals: BTreeMap<String, Vec<f64>>,
    #[serde(default = "one")]
    snapshots_per_individual: usize,
    /// Additive per-tick shift for named observables.
    #[serde(default)]
    drift: BTreeMap<String, f64>,
}

fn one() -> usize {
    1
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn emit(out: Option<&Path>, content: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, content)
            .with_context(|| format!("cannot write {}", path.display())),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn load_graph(path: &Path) -> Result<CausalGraph> {
    let graph = CausalGraph::from_json(&read(path)?)
        .with_context(|| format!("bad graph spec in {}", path.display()))?;
    graph.validate()?;
    Ok(graph)
}

fn run(command: Command) -> Result<u8> {
    match command {
        Command::Fit { graph, data, out } => {
            let graph = load_graph(&graph)?;
            let individuals = load_dataset(&data, &graph)?;
            let scm = FittedScm::fit(graph, &individuals)?;
            emit(out.as_deref(), &scm.to_json())?;
            Ok(0)
        }
        Command::Train {
            graph,
            data,
            config,
            out,
            seed,
        } => {
            let file: TrainFile = serde_json::from_str(&read(&config)?)
                .with_context(|| format!("bad training config in {}", config.display()))?;
            let graph = load_graph(&graph)?;
            let individuals = load_dataset(&data, &graph)?;
            let scm = FittedScm::fit(graph, &individuals)?;
            let space = DecisionSpace::new(
                &file
                    .decision_space
                    .iter()
                    .map(String::as_str)
                    .collect::<Vec<_>>(),
            )?;
            let settings = file.train.unwrap_or_default();
            let train_config = TrainConfig {
                family: file.family,
                learning_rate: settings.learning_rate,
                epochs: settings.epochs,
                penalty_weight: settings.penalty_weight,
                hidden_width: settings.hidden_width,
                seed: seed.resolve(file.seed)?,
                l2: settings.l2,
                outcome_threshold: file.outcome_threshold,
            };
            let predictor = train(&train_config, &scm, &individuals, &space)?;
            emit(out.as_deref(), &predictor.to_json())?;
            Ok(0)
        }
        Command::Audit {
            config,
            graph,
            data,
            out,
            format,
            seed,
        } => {
            let mut audit_config = AuditConfig::from_json(&read(&config)?)?;
            if let Some(graph) = graph {
                audit_config.graph = graph;
            }
            if let Some(data) = data {
                audit_config.dataset = data;
            }
            audit_config.seed = seed.resolve(audit_config.seed)?;
            let destination = out.or_else(|| audit_config.out.clone());
            let format = format
                .or(audit_config.format)
                .unwrap_or(ReportFormat::Json);

            let report = run_audit(&audit_config)?;
            let rendered = match format {
                ReportFormat::Json => report.to_json(),
                ReportFormat::Text => report.to_text(),
            };
            emit(destination.as_deref(), &rendered)?;
            if let Some(path) = &destination {
                eprintln!(
                    "report written to {} ({} checks, {} failed)",
                    path.display(),
                    report.summary.checks_run,
                    report.summary.failed
                );
            }
            Ok(if report.all_passed() { 0 } else { 2 })
        }
        Command::Simulate { config, out, seed } => {
            let file: SimulateFile = serde_json::from_str(&read(&config)?)
                .with_context(|| format!("bad generator config in {}", config.display()))?;
            let scm = FittedScm::from_json(&read(&file.model)?)?;
            let graph = scm.graph().clone();
            let generator = GeneratorConfig {
                scm,
                n: file.n,
                seed: seed.resolve(file.seed)?,
                protected_marginals: file.protected_marginals,
                snapshots_per_individual: file.snapshots_per_individual,
                drift: file.drift,
            };
            let population = sample_population(&generator)?;
            write_dataset(&out, &graph, &population)?;
            eprintln!(
                "wrote {} individuals ({} rows) to {}",
                population.len(),
                population.iter().map(|i| i.snapshots.len()).sum::<usize>(),
                out.display()
            );
            Ok(0)
        }
        Command::Report { data, format, out } => {
            let report = AuditReport::from_json(&read(&data)?)
                .with_context(|| format!("bad report in {}", data.display()))?;
            let rendered = match format.unwrap_or(ReportFormat::Text) {
                ReportFormat::Json => report.to_json(),
                ReportFormat::Text => report.to_text(),
            };
            emit(out.as_deref(), &rendered)?;
            Ok(if report.all_passed() { 0 } else { 2 })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests are not errors; everything else is
            // an operational failure (exit 1, not clap's default 2, which
            // this tool reserves for failed verdicts).
            let _ = err.print();
            return if err.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
