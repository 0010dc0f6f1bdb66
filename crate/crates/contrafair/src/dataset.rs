//! CSV dataset ingestion and export.
//!
//! The on-disk shape is one row per (individual, time): a header with the
//! reserved columns `id` (required) and `time` (optional, integer), and one
//! column per graph variable. Rows sharing an `id` become that individual's
//! time-ordered snapshots; without a `time` column every individual gets a
//! single snapshot at tick 0. Protected values and the outcome must not vary
//! across an individual's rows. Validation is loud by design: unknown or
//! missing columns, bad literals, and out-of-domain values are errors, never
//! warnings.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

use crate::scm::{CausalGraph, Individual, Snapshot, VariableRole};
use crate::value::Value;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}, column {column}: {detail}")]
    ParseError {
        line: usize,
        column: String,
        detail: String,
    },

    #[error("line {line}: value {value} outside the domain of {variable}")]
    DomainViolation {
        line: usize,
        variable: String,
        value: String,
    },

    #[error("individual {id} has two rows at time {time}")]
    DuplicateTimestamp { id: String, time: i64 },

    #[error("dataset is missing a column for {name}")]
    MissingColumn { name: String },

    #[error("column {name} does not match any graph variable")]
    UnknownColumn { name: String },

    #[error("individual {id} has conflicting values for {variable} across rows")]
    InconsistentRow { id: String, variable: String },
}

fn io_err(path: &Path, source: std::io::Error) -> DatasetError {
    DatasetError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Loads and validates a dataset against the graph's variables and domains.
/// Individuals come back in first-appearance order; snapshots sorted by time.
pub fn load_dataset(path: &Path, graph: &CausalGraph) -> Result<Vec<Individual>, DatasetError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => io_err(
                path,
                std::io::Error::new(std::io::ErrorKind::Other, e.to_string()),
            ),
            _ => DatasetError::ParseError {
                line: 1,
                column: String::new(),
                detail: e.to_string(),
            },
        })?;

    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| DatasetError::ParseError {
            line: 1,
            column: String::new(),
            detail: e.to_string(),
        })?
        .iter()
        .map(|h| h.to_string())
        .collect();

    let mut id_col = None;
    let mut time_col = None;
    let mut var_cols: Vec<(usize, String)> = Vec::new();
    for (idx, name) in headers.iter().enumerate() {
        match name.as_str() {
            "id" => id_col = Some(idx),
            "time" => time_col = Some(idx),
            other => {
                if graph.variable(other).is_none() {
                    return Err(DatasetError::UnknownColumn {
                        name: other.to_string(),
                    });
                }
                var_cols.push((idx, other.to_string()));
            }
        }
    }
    let id_col = id_col.ok_or(DatasetError::MissingColumn {
        name: "id".to_string(),
    })?;
    for spec in graph.variables.iter() {
        let required = matches!(
            spec.role,
            VariableRole::Protected | VariableRole::Observable
        );
        if required && !var_cols.iter().any(|(_, n)| n == &spec.name) {
            return Err(DatasetError::MissingColumn {
                name: spec.name.clone(),
            });
        }
    }

    struct Partial {
        protected: BTreeMap<String, Value>,
        snapshots: Vec<Snapshot>,
        outcome: Option<f64>,
    }
    let mut order: Vec<String> = Vec::new();
    let mut partials: BTreeMap<String, Partial> = BTreeMap::new();

    for (row_index, record) in reader.records().enumerate() {
        let line = row_index + 2; // header is line 1
        let record = record.map_err(|e| DatasetError::ParseError {
            line,
            column: String::new(),
            detail: e.to_string(),
        })?;
        let id = record
            .get(id_col)
            .unwrap_or("")
            .to_string();
        if id.is_empty() {
            return Err(DatasetError::ParseError {
                line,
                column: "id".to_string(),
                detail: "empty id".to_string(),
            });
        }
        let time: i64 = match time_col {
            Some(c) => record
                .get(c)
                .unwrap_or("")
                .parse()
                .map_err(|_| DatasetError::ParseError {
                    line,
                    column: "time".to_string(),
                    detail: "expected an integer tick".to_string(),
                })?,
            None => 0,
        };

        let mut protected = BTreeMap::new();
        let mut observables = BTreeMap::new();
        let mut outcome: Option<f64> = None;
        for (col, name) in &var_cols {
            let raw = record.get(*col).unwrap_or("");
            let spec = graph.variable(name).expect("validated header");
            match spec.role {
                VariableRole::Protected => {
                    let value = if spec.is_categorical() {
                        Value::Categorical(raw.to_string())
                    } else {
                        Value::Continuous(raw.parse().map_err(|_| DatasetError::ParseError {
                            line,
                            column: name.clone(),
                            detail: "expected a decimal literal".to_string(),
                        })?)
                    };
                    spec.check_value(&value)
                        .map_err(|_| DatasetError::DomainViolation {
                            line,
                            variable: name.clone(),
                            value: raw.to_string(),
                        })?;
                    protected.insert(name.clone(), value);
                }
                VariableRole::Observable => {
                    let v: f64 = raw.parse().map_err(|_| DatasetError::ParseError {
                        line,
                        column: name.clone(),
                        detail: "expected a decimal literal".to_string(),
                    })?;
                    observables.insert(name.clone(), v);
                }
                VariableRole::Outcome => {
                    if !raw.is_empty() {
                        outcome = Some(raw.parse().map_err(|_| DatasetError::ParseError {
                            line,
                            column: name.clone(),
                            detail: "expected a decimal literal or empty".to_string(),
                        })?);
                    }
                }
            }
        }

        let entry = partials.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            Partial {
                protected: protected.clone(),
                snapshots: Vec::new(),
                outcome: None,
            }
        });
        for (name, value) in &protected {
            if entry.protected.get(name) != Some(value) {
                return Err(DatasetError::InconsistentRow {
                    id,
                    variable: name.clone(),
                });
            }
        }
        if let Some(v) = outcome {
            match entry.outcome {
                Some(prev) if prev != v => {
                    return Err(DatasetError::InconsistentRow {
                        id,
                        variable: "outcome".to_string(),
                    });
                }
                _ => entry.outcome = Some(v),
            }
        }
        if entry.snapshots.iter().any(|s| s.time == time) {
            return Err(DatasetError::DuplicateTimestamp { id, time });
        }
        entry.snapshots.push(Snapshot { time, observables });
    }

    Ok(order
        .into_iter()
        .map(|id| {
            let mut partial = partials.remove(&id).expect("tracked id");
            partial.snapshots.sort_by_key(|s| s.time);
            Individual {
                id,
                protected: partial.protected,
                snapshots: partial.snapshots,
                outcome: partial.outcome,
            }
        })
        .collect())
}

/// Writes a dataset in the canonical column order: `id`, `time`, then the
/// graph's variables in declaration order. Inverse of [`load_dataset`].
pub fn write_dataset(
    path: &Path,
    graph: &CausalGraph,
    individuals: &[Individual],
) -> Result<(), DatasetError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| {
        io_err(
            path,
            std::io::Error::new(std::io::ErrorKind::Other, e.to_string()),
        )
    })?;
    let mut header = vec!["id".to_string(), "time".to_string()];
    header.extend(graph.variables.iter().map(|v| v.name.clone()));
    writer
        .write_record(&header)
        .map_err(|e| DatasetError::ParseError {
            line: 1,
            column: String::new(),
            detail: e.to_string(),
        })?;

    for individual in individuals {
        for snapshot in &individual.snapshots {
            let mut row = vec![individual.id.clone(), snapshot.time.to_string()];
            for spec in graph.variables.iter() {
                let cell = match spec.role {
                    VariableRole::Protected => individual
                        .protected
                        .get(&spec.name)
                        .map(|v| v.to_string())
                        .unwrap_or_default(),
                    VariableRole::Observable => snapshot
                        .observables
                        .get(&spec.name)
                        .map(|v| v.to_string())
                        .unwrap_or_default(),
                    VariableRole::Outcome => individual
                        .outcome
                        .map(|v| v.to_string())
                        .unwrap_or_default(),
                };
                row.push(cell);
            }
            writer
                .write_record(&row)
                .map_err(|e| DatasetError::ParseError {
                    line: 0,
                    column: String::new(),
                    detail: e.to_string(),
                })?;
        }
    }
    writer
        .flush()
        .map_err(|e| io_err(path, e))?;
    Ok(())
}
