//! Benchmark harness: TOML-configured experiments, parallel replicates and
//! CSV/JSON output.

mod config;
mod output;
mod run;

pub use config::{ExperimentConfig, Protocol, SamplerKind, SamplerSpec, TargetSpec};
pub use output::{write_results, RunRecord};
pub use run::{replicate_rng, run_experiment, run_replicate, ExperimentResult, ReplicateResult};

use crate::error::Error;

/// Which stage of an experiment failed; maps to the CLI exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureKind {
    Config,
    Target,
    Numerical,
    Output,
}

impl FailureKind {
    pub fn exit_code(self) -> i32 {
        match self {
            FailureKind::Config => 2,
            FailureKind::Target => 3,
            FailureKind::Numerical => 4,
            FailureKind::Output => 5,
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{source}")]
pub struct HarnessError {
    pub kind: FailureKind,
    #[source]
    pub source: Error,
}

impl HarnessError {
    pub fn new(kind: FailureKind, source: Error) -> Self {
        Self { kind, source }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind.exit_code()
    }
}
