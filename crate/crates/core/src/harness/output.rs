use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, ExperimentResult, FailureKind, HarnessError};
use crate::error::Error;

/// Contents of `run.json`. Its `config` member is a complete, resolved
/// configuration, so the file can be passed back via `--config`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub sampler: String,
    pub target: String,
    pub version: String,
    pub created_unix_seconds: u64,
    pub replicates: Vec<ReplicateRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub base_seed: u64,
    /// ChaCha20 stream index of this replicate.
    pub stream: u64,
    pub initial_sigma2: f64,
    pub sigma2_at_freeze: f64,
    pub sigma2_at_end: f64,
    pub frozen_parameters_unchanged: bool,
    pub burn_in_acceptance: f64,
    pub collect_acceptance: f64,
    pub anomalies: usize,
    pub degenerate_coordinates: Vec<usize>,
}

impl RunRecord {
    pub fn new(result: &ExperimentResult) -> Self {
        let base_seed = result.config.protocol.base_seed;
        Self {
            config: result.config.clone(),
            sampler: result.sampler.clone(),
            target: result.target.clone(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            created_unix_seconds: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            replicates: result
                .replicates
                .iter()
                .map(|r| ReplicateRecord {
                    replicate: r.replicate,
                    base_seed,
                    stream: r.replicate as u64,
                    initial_sigma2: r.initial_sigma2,
                    sigma2_at_freeze: r.at_freeze.sigma2,
                    sigma2_at_end: r.at_end.sigma2,
                    frozen_parameters_unchanged: r.frozen_unchanged(),
                    burn_in_acceptance: r.burn_in_acceptance,
                    collect_acceptance: r.collect_acceptance,
                    anomalies: r.anomalies,
                    degenerate_coordinates: r.ess.degenerate.clone(),
                })
                .collect(),
        }
    }
}

fn out_err(e: impl Into<Error>) -> HarnessError {
    HarnessError::new(FailureKind::Output, e.into())
}

fn csv_err(e: csv::Error) -> HarnessError {
    out_err(Error::Io(std::io::Error::other(e.to_string())))
}

/// Writes `ess.csv`, `ess_summary.csv`, `trace.csv`, `run.json` and, when
/// requested, `samples_<r>.csv` into `dir`.
pub fn write_results(result: &ExperimentResult, dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(out_err)?;

    let mut w = csv::Writer::from_path(dir.join("ess.csv")).map_err(csv_err)?;
    w.write_record([
        "sampler",
        "target",
        "replicate",
        "max_ess",
        "median_ess",
        "min_ess",
    ])
    .map_err(csv_err)?;
    for r in &result.replicates {
        w.write_record([
            result.sampler.clone(),
            result.target.clone(),
            r.replicate.to_string(),
            r.ess.max.to_string(),
            r.ess.median.to_string(),
            r.ess.min.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(out_err)?;

    let s = &result.summary;
    let mut w = csv::Writer::from_path(dir.join("ess_summary.csv")).map_err(csv_err)?;
    w.write_record([
        "sampler",
        "target",
        "replicates",
        "max_ess",
        "median_ess",
        "min_ess",
    ])
    .map_err(csv_err)?;
    w.write_record([
        result.sampler.clone(),
        result.target.clone(),
        s.replicates.to_string(),
        s.max.to_string(),
        s.median.to_string(),
        s.min.to_string(),
    ])
    .map_err(csv_err)?;
    w.flush().map_err(out_err)?;

    let with_norms = result
        .replicates
        .first()
        .is_some_and(|r| r.trace.frobenius_norms.is_some());
    let mut w = csv::Writer::from_path(dir.join("trace.csv")).map_err(csv_err)?;
    let mut header = vec!["replicate", "iteration"];
    if with_norms {
        header.push("frobenius_distance");
    }
    header.extend(["acceptance_rate", "log_target"]);
    w.write_record(&header).map_err(csv_err)?;
    for r in &result.replicates {
        let t = &r.trace;
        for i in 0..t.len() {
            let mut row = vec![r.replicate.to_string(), t.iterations[i].to_string()];
            if let Some(norms) = &t.frobenius_norms {
                row.push(norms[i].to_string());
            }
            row.push(t.acceptance_running_mean[i].to_string());
            row.push(t.log_target_values[i].to_string());
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    w.flush().map_err(out_err)?;

    for r in &result.replicates {
        if let Some(samples) = &r.samples {
            let mut w = csv::Writer::from_path(dir.join(format!("samples_{}.csv", r.replicate)))
                .map_err(csv_err)?;
            for row in samples.row_iter() {
                w.write_record(row.iter().map(|v| v.to_string()))
                    .map_err(csv_err)?;
            }
            w.flush().map_err(out_err)?;
        }
    }

    let json = serde_json::to_string_pretty(&RunRecord::new(result))
        .map_err(|e| out_err(Error::Io(std::io::Error::other(e))))?;
    fs::write(dir.join("run.json"), json).map_err(out_err)?;
    Ok(())
}
