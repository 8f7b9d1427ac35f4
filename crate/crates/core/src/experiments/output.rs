//! Per-trial records, aggregated curves, CSV rows and run manifests.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::experiments::{ExperimentConfig, ExperimentKind};

/// Statistics emitted for every curve point, in CSV order.
pub const STATS: [&str; 5] = ["mean", "median", "p10", "p90", "max"];

/// One value produced by one trial.
#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub group: String,
    pub method: String,
    pub k: usize,
    pub value: f64,
}

impl Record {
    pub fn new(group: impl Into<String>, method: impl Into<String>, k: usize, value: f64) -> Self {
        Self {
            group: group.into(),
            method: method.into(),
            k,
            value,
        }
    }
}

/// All values of one `(group, method, K)` point, in trial order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub group: String,
    pub method: String,
    pub k: usize,
    pub values: Vec<f64>,
}

impl Series {
    pub fn stat(&self, name: &str) -> Option<f64> {
        summarize(&self.values, name)
    }
}

/// Linear-interpolation percentile of `q ∈ [0, 1]`; NaN propagates.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    if values.iter().any(|v| v.is_nan()) {
        return f64::NAN;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn summarize(values: &[f64], stat: &str) -> Option<f64> {
    let value = match stat {
        "mean" if values.is_empty() => f64::NAN,
        "mean" => values.iter().sum::<f64>() / values.len() as f64,
        "median" => percentile(values, 0.5),
        "p10" => percentile(values, 0.1),
        "p90" => percentile(values, 0.9),
        "max" => percentile(values, 1.0),
        _ => return None,
    };
    Some(value)
}

/// One CSV line: `experiment,trial_group,method,K,stat,value`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub experiment: ExperimentKind,
    pub trial_group: String,
    pub method: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub stat: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentOutput {
    pub experiment: ExperimentKind,
    pub series: Vec<Series>,
    pub notes: Vec<String>,
}

impl ExperimentOutput {
    /// Groups per-trial records into series, ordered by first appearance.
    pub fn from_trials(
        experiment: ExperimentKind,
        trials: Vec<Vec<Record>>,
        notes: Vec<String>,
    ) -> Self {
        let mut index: HashMap<(String, String, usize), usize> = HashMap::new();
        let mut series: Vec<Series> = Vec::new();
        for record in trials.into_iter().flatten() {
            let key = (record.group, record.method, record.k);
            let slot = *index.entry(key.clone()).or_insert_with(|| {
                series.push(Series {
                    group: key.0.clone(),
                    method: key.1.clone(),
                    k: key.2,
                    values: Vec::new(),
                });
                series.len() - 1
            });
            series[slot].values.push(record.value);
        }
        Self {
            experiment,
            series,
            notes,
        }
    }

    pub fn series(&self, group: &str, method: &str, k: usize) -> Option<&Series> {
        self.series
            .iter()
            .find(|s| s.group == group && s.method == method && s.k == k)
    }

    /// Statistic of one curve point.
    pub fn stat(&self, group: &str, method: &str, k: usize, stat: &str) -> Option<f64> {
        self.series(group, method, k).and_then(|s| s.stat(stat))
    }

    pub fn rows(&self) -> Vec<CsvRow> {
        let mut rows = Vec::with_capacity(self.series.len() * STATS.len());
        for s in &self.series {
            for stat in STATS {
                rows.push(CsvRow {
                    experiment: self.experiment,
                    trial_group: s.group.clone(),
                    method: s.method.clone(),
                    k: s.k,
                    stat: stat.to_string(),
                    value: s.stat(stat).unwrap_or(f64::NAN),
                });
            }
        }
        rows
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        for row in self.rows() {
            writer.serialize(row)?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn write_csv_file(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv_string()?)?;
        Ok(())
    }
}

/// Run metadata written next to the CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: ExperimentKind,
    pub version: String,
    pub seed: u64,
    /// Git-style object hash (`sha256("blob <len>\0" + config)`) of the TOML config echo.
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub rows: usize,
    pub notes: Vec<String>,
}

impl Manifest {
    pub fn new(config: &ExperimentConfig, output: &ExperimentOutput) -> Result<Self> {
        Ok(Self {
            experiment: config.experiment,
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.seed,
            config_hash: content_hash(config.to_toml()?.as_bytes()),
            config: config.clone(),
            rows: output.series.len() * STATS.len(),
            notes: output.notes.clone(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// `sha256("blob <len>\0" + bytes)` in hex.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(format!("blob {}\0", bytes.len()).as_bytes());
    hasher.update(bytes);
    hex::encode(hasher.finalize())
}
