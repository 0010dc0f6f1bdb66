//! Audit report assembly and rendering.
//!
//! A report is the single artifact an audit run leaves behind: provenance
//! metadata, the held-out accuracy table, every verdict with its clause-level
//! arithmetic, and a pass/fail summary. The JSON form is byte-deterministic
//! for a fixed config and seed so reports can be diffed and archived; set
//! `SOURCE_DATE_EPOCH` to pin the timestamp (the same convention used by
//! reproducible-build tooling).

use serde::{Deserialize, Serialize};

use crate::fairness::Verdict;
use crate::predict::PredictorFamily;

/// Current report schema version. Bumped on any breaking layout change.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Provenance block: enough to reproduce the run that produced the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    /// Hex SHA-256 of the effective audit configuration.
    pub config_hash: String,
    /// Seed that drove the split and any training.
    pub seed: u64,
    /// RFC 3339 UTC timestamp; honours `SOURCE_DATE_EPOCH` when set.
    pub timestamp: String,
    /// Version of the library that wrote the report.
    pub tool_version: String,
}

/// One row of the held-out accuracy table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyEntry {
    pub family: PredictorFamily,
    pub accuracy: f64,
}

/// Pass/fail counts over all verdicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub checks_run: usize,
    pub passed: usize,
    pub failed: usize,
}

/// The complete result of one audit run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub schema_version: u32,
    pub metadata: ReportMetadata,
    /// Per-family held-out accuracy, in the canonical family order.
    pub accuracy_table: Vec<AccuracyEntry>,
    pub verdicts: Vec<Verdict>,
    pub summary: Summary,
}

impl AuditReport {
    /// Builds a report from verdicts, computing the summary block.
    pub fn new(
        metadata: ReportMetadata,
        accuracy_table: Vec<AccuracyEntry>,
        verdicts: Vec<Verdict>,
    ) -> Self {
        let passed = verdicts.iter().filter(|v| v.passed).count();
        let summary = Summary {
            checks_run: verdicts.len(),
            passed,
            failed: verdicts.len() - passed,
        };
        AuditReport {
            schema_version: REPORT_SCHEMA_VERSION,
            metadata,
            accuracy_table,
            verdicts,
            summary,
        }
    }

    /// True when every verdict passed.
    pub fn all_passed(&self) -> bool {
        self.summary.failed == 0
    }

    /// Pretty-printed JSON with a trailing newline. Byte-deterministic for
    /// a fixed config, seed, and timestamp source.
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Human-readable rendering: accuracy columns in family order, one line
    /// per verdict, then the summary.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "contrafair audit report (schema v{})\n",
            self.schema_version
        ));
        out.push_str(&format!(
            "config {}  seed {}  at {}\n\n",
            &self.metadata.config_hash[..12.min(self.metadata.config_hash.len())],
            self.metadata.seed,
            self.metadata.timestamp
        ));

        if !self.accuracy_table.is_empty() {
            out.push_str("held-out accuracy\n");
            let headers: Vec<String> = self
                .accuracy_table
                .iter()
                .map(|e| e.family.to_string())
                .collect();
            let values: Vec<String> = self
                .accuracy_table
                .iter()
                .map(|e| format!("{:.3}", e.accuracy))
                .collect();
            let widths: Vec<usize> = headers
                .iter()
                .zip(&values)
                .map(|(h, v)| h.len().max(v.len()))
                .collect();
            let row = |cells: &[String]| {
                let padded: Vec<String> = cells
                    .iter()
                    .zip(&widths)
                    .map(|(c, w)| format!("{:<width$}", c, width = w))
                    .collect();
                format!("| {} |\n", padded.join(" | "))
            };
            out.push_str(&row(&headers));
            out.push_str(&row(&values));
            out.push('\n');
        }

        out.push_str("verdicts\n");
        for verdict in &self.verdicts {
            let status = if verdict.passed { "PASS" } else { "FAIL" };
            let mut line = format!("  {} {}", status, verdict.criterion);
            if let Some(family) = &verdict.predictor {
                line.push_str(&format!(" predictor={}", family));
            }
            if !verdict.subjects.individuals.is_empty() {
                line.push_str(&format!(
                    " subjects={}",
                    verdict.subjects.individuals.join(",")
                ));
            }
            if !verdict.passed {
                let failing: Vec<&str> = verdict
                    .clauses
                    .iter()
                    .filter(|c| !c.passed)
                    .map(|c| c.equation.as_str())
                    .collect();
                line.push_str(&format!(" failing={}", failing.join(",")));
            }
            out.push_str(&line);
            out.push('\n');
        }
        out.push_str(&format!(
            "\nsummary: {} checks, {} passed, {} failed\n",
            self.summary.checks_run, self.summary.passed, self.summary.failed
        ));
        out
    }
}

/// RFC 3339 UTC timestamp for report metadata.
///
/// Reports must be byte-identical across runs with the same config and
/// seed, so a wall-clock default is ruled out. The timestamp comes from
/// `SOURCE_DATE_EPOCH` (the reproducible-build convention) when that is
/// set, and is the Unix epoch otherwise.
pub fn report_timestamp() -> String {
    let moment = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|raw| raw.parse::<i64>().ok())
        .and_then(|epoch| time::OffsetDateTime::from_unix_timestamp(epoch).ok())
        .unwrap_or(time::OffsetDateTime::UNIX_EPOCH);
    moment
        .replace_nanosecond(0)
        .unwrap_or(moment)
        .format(&time::format_description::well_known::Rfc3339)
        .expect("rfc3339 formatting")
}
