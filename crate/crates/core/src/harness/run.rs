use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{ExperimentConfig, FailureKind, HarnessError, SamplerKind};
use crate::chain::{run_chain, ChainPlan};
use crate::diagnostics::{ess, AdaptationTrace, EssReport, MeanStd, ReplicateSummary};
use crate::error::{Error, Result};
use crate::samplers::{find_initial_sigma2, AdaptedParameters, ChainState};
use crate::targets::Target;

/// Environment variable capping the replicate thread pool.
pub const THREADS_ENV: &str = "FISHER_MALA_THREADS";

#[derive(Debug, Clone)]
pub struct ReplicateResult {
    pub replicate: usize,
    /// Starting `σ²`, configured or found by the initial search.
    pub initial_sigma2: f64,
    pub ess: EssReport,
    pub trace: AdaptationTrace,
    pub at_freeze: AdaptedParameters,
    pub at_end: AdaptedParameters,
    pub burn_in_acceptance: f64,
    pub collect_acceptance: f64,
    pub anomalies: usize,
    /// Collected draws, kept only when the protocol asks to save them.
    pub samples: Option<DMatrix<f64>>,
}

impl ReplicateResult {
    /// Whether the proposal parameters stayed fixed after the freeze.
    pub fn frozen_unchanged(&self) -> bool {
        self.at_freeze == self.at_end
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub sampler: String,
    pub target: String,
    pub replicates: Vec<ReplicateResult>,
    pub summary: ReplicateSummary,
}

/// Replicate `r` uses ChaCha20 seeded with the base seed on stream `r`, so
/// replicates are independent and individually reproducible.
pub fn replicate_rng(base_seed: u64, replicate: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(base_seed);
    rng.set_stream(replicate as u64);
    rng
}

/// One replicate: `x₁ ~ N(0, I)`, adaptive burn-in, freeze, collection, ESS.
pub fn run_replicate(
    config: &ExperimentConfig,
    target: &dyn Target,
    replicate: usize,
) -> Result<ReplicateResult> {
    let p = &config.protocol;
    let mut rng = replicate_rng(p.base_seed, replicate);
    let x0 = DVector::from_fn(target.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
    let sampler = &config.sampler;
    let initial_sigma2 = match sampler.initial_sigma2 {
        Some(v) => v,
        None => {
            let start = ChainState::new(target, x0.clone());
            let steps = (sampler.kind == SamplerKind::Hmc).then_some(sampler.leapfrog_steps);
            find_initial_sigma2(target, &start, steps, &mut rng)
        }
    };
    let mut kernel = sampler.build_with_sigma2(target, initial_sigma2)?;
    let plan = ChainPlan {
        burn_in: p.burn_in,
        collect: p.collect,
        trace_every: p.trace_every,
    };
    let out = run_chain(kernel.as_mut(), target, x0, plan, &mut rng, |_, _| {})?;
    if !out.final_state.is_finite() {
        return Err(Error::Numerical(format!(
            "replicate {replicate} ended in a non-finite state"
        )));
    }
    Ok(ReplicateResult {
        replicate,
        initial_sigma2,
        ess: ess(&out.samples)?,
        trace: out.trace,
        at_freeze: out.at_freeze,
        at_end: out.at_end,
        burn_in_acceptance: out.burn_in_acceptance,
        collect_acceptance: out.collect_acceptance,
        anomalies: out.anomalies,
        samples: p.save_samples.then_some(out.samples),
    })
}

fn thread_count(replicates: usize) -> usize {
    let available = std::thread::available_parallelism().map_or(1, |n| n.get());
    let cap = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(available);
    cap.min(replicates).max(1)
}

fn summarize(reports: &[&EssReport]) -> ReplicateSummary {
    let pick =
        |f: fn(&EssReport) -> f64| MeanStd::of(&reports.iter().map(|r| f(r)).collect::<Vec<_>>());
    ReplicateSummary {
        max: pick(|r| r.max),
        median: pick(|r| r.median),
        min: pick(|r| r.min),
        replicates: reports.len(),
    }
}

fn classify(e: Error) -> HarnessError {
    let kind = match e {
        Error::Config(_) | Error::InvalidParameter(_) => FailureKind::Config,
        Error::UnsupportedTarget(_) | Error::Parse { .. } | Error::Validation(_) | Error::Io(_) => {
            FailureKind::Target
        }
        Error::Numerical(_) | Error::InvalidSignal(_) => FailureKind::Numerical,
    };
    HarnessError::new(kind, e)
}

/// Runs every replicate (in parallel) and summarizes their ESS.
/// Relative dataset paths resolve against `base_dir`.
pub fn run_experiment(
    config: &ExperimentConfig,
    base_dir: &Path,
) -> std::result::Result<ExperimentResult, HarnessError> {
    config
        .validate()
        .map_err(|e| HarnessError::new(FailureKind::Config, e))?;
    let target = config
        .target
        .build(base_dir)
        .map_err(|e| HarnessError::new(FailureKind::Target, e))?;
    // surface sampler/target incompatibility before spawning work
    config.sampler.build(target.as_ref()).map_err(|e| match e {
        Error::UnsupportedTarget(_) => HarnessError::new(FailureKind::Target, e),
        other => HarnessError::new(FailureKind::Config, other),
    })?;

    let n = config.protocol.replicates;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count(n))
        .build()
        .map_err(|e| HarnessError::new(FailureKind::Config, Error::Config(e.to_string())))?;
    let target_ref = target.as_ref();
    let replicates: Vec<ReplicateResult> = pool
        .install(|| {
            (0..n)
                .into_par_iter()
                .map(|r| run_replicate(config, target_ref, r))
                .collect::<Result<Vec<_>>>()
        })
        .map_err(classify)?;
    let summary = summarize(&replicates.iter().map(|r| &r.ess).collect::<Vec<_>>());
    Ok(ExperimentResult {
        sampler: config.sampler.label(),
        target: config.target.label(),
        config: config.clone(),
        replicates,
        summary,
    })
}
