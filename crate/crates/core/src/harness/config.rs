use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{load_csv_dataset, CsvOptions};
use crate::error::{Error, Result};
use crate::samplers::{
    AdaMalaConfig, AdaMalaKernel, FisherMalaConfig, FisherMalaKernel, HmcConfig, HmcKernel, Kernel,
    MalaKernel, MmalaKernel, SignalMode, StepSizeController, DEFAULT_INITIAL_SIGMA2, DEFAULT_RHO,
    HMC_TARGET_RATE, MALA_TARGET_RATE,
};
use crate::targets::{
    gaussian_2d_with_correlation, gaussian_gp_target, gaussian_inhomogeneous, synthetic_logistic,
    GaussianTarget, Target,
};

/// A complete experiment: target, sampler and run protocol.
///
/// Every omitted field falls back to the benchmark protocol defaults
/// (20000 burn-in + 20000 collection iterations, 10 replicates, λ = 10).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub target: TargetSpec,
    #[serde(default)]
    pub sampler: SamplerSpec,
    #[serde(default)]
    pub protocol: Protocol,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TargetSpec {
    StandardNormal {
        dim: usize,
    },
    #[serde(rename = "gaussian-2d")]
    Gaussian2d {
        #[serde(default = "default_correlation")]
        correlation: f64,
    },
    Gp {
        #[serde(default = "default_dim")]
        dim: usize,
    },
    Inhomogeneous {
        #[serde(default = "default_dim")]
        dim: usize,
    },
    LogisticCsv {
        path: PathBuf,
        #[serde(flatten)]
        csv: CsvOptions,
    },
    LogisticSynthetic {
        #[serde(default = "default_synthetic_dim")]
        dim: usize,
        #[serde(default = "default_observations")]
        observations: usize,
        #[serde(default = "default_span")]
        log10_span: f64,
        #[serde(default)]
        seed: u64,
    },
}

fn default_correlation() -> f64 {
    0.995
}
fn default_dim() -> usize {
    100
}
fn default_synthetic_dim() -> usize {
    20
}
fn default_observations() -> usize {
    500
}
fn default_span() -> f64 {
    3.0
}

impl TargetSpec {
    pub fn label(&self) -> String {
        match self {
            TargetSpec::StandardNormal { dim } => format!("standard-normal-{dim}"),
            TargetSpec::Gaussian2d { .. } => "gaussian-2d".into(),
            TargetSpec::Gp { dim } => format!("gp-{dim}"),
            TargetSpec::Inhomogeneous { dim } => format!("inhomogeneous-{dim}"),
            TargetSpec::LogisticCsv { path, .. } => format!(
                "logistic-{}",
                path.file_stem()
                    .map_or("csv".into(), |s| s.to_string_lossy())
            ),
            TargetSpec::LogisticSynthetic { dim, .. } => format!("logistic-synthetic-{dim}"),
        }
    }

    /// Builds the target. Relative CSV paths resolve against `base_dir`.
    pub fn build(&self, base_dir: &Path) -> Result<Box<dyn Target>> {
        Ok(match self {
            TargetSpec::StandardNormal { dim } => Box::new(GaussianTarget::standard_normal(*dim)?),
            TargetSpec::Gaussian2d { correlation } => {
                Box::new(gaussian_2d_with_correlation(*correlation)?)
            }
            TargetSpec::Gp { dim } => Box::new(gaussian_gp_target(*dim)?),
            TargetSpec::Inhomogeneous { dim } => Box::new(gaussian_inhomogeneous(*dim)?),
            TargetSpec::LogisticCsv { path, csv } => {
                let path = if path.is_relative() {
                    base_dir.join(path)
                } else {
                    path.clone()
                };
                Box::new(load_csv_dataset(&path, csv)?)
            }
            TargetSpec::LogisticSynthetic {
                dim,
                observations,
                log10_span,
                seed,
            } => Box::new(synthetic_logistic(*dim, *observations, *log10_span, *seed)?),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    Mala,
    FisherMala,
    AdaMala,
    Mmala,
    Hmc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSpec {
    pub kind: SamplerKind,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_rho")]
    pub rho: f64,
    /// Defaults to 0.574 for the MALA family and 0.651 for HMC.
    #[serde(default)]
    pub target_rate: Option<f64>,
    #[serde(default = "default_init_iters")]
    pub init_iters: usize,
    #[serde(default = "default_init_iters")]
    pub warmup_iters: usize,
    #[serde(default)]
    pub signal_mode: SignalMode,
    #[serde(default = "default_leapfrog")]
    pub leapfrog_steps: usize,
    /// Starting `σ²` (`ε²` for HMC). When omitted it is chosen per replicate
    /// by doubling/halving until a trial proposal from `x₁` has acceptance ½.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_sigma2: Option<f64>,
}

fn default_lambda() -> f64 {
    10.0
}
fn default_rho() -> f64 {
    DEFAULT_RHO
}
fn default_init_iters() -> usize {
    500
}
fn default_leapfrog() -> usize {
    10
}

impl Default for SamplerSpec {
    fn default() -> Self {
        Self {
            kind: SamplerKind::FisherMala,
            lambda: default_lambda(),
            rho: default_rho(),
            target_rate: None,
            init_iters: default_init_iters(),
            warmup_iters: default_init_iters(),
            signal_mode: SignalMode::Rb,
            leapfrog_steps: default_leapfrog(),
            initial_sigma2: None,
        }
    }
}

impl SamplerSpec {
    pub fn new(kind: SamplerKind) -> Self {
        Self {
            kind,
            ..Default::default()
        }
    }

    pub fn label(&self) -> String {
        match (self.kind, self.signal_mode) {
            (SamplerKind::Mala, _) => "mala".into(),
            (SamplerKind::FisherMala, SignalMode::Rb) => "fisher-mala".into(),
            (SamplerKind::FisherMala, SignalMode::NoRb) => "fisher-mala-no-rb".into(),
            (SamplerKind::FisherMala, SignalMode::Paired) => "fisher-mala-paired-est".into(),
            (SamplerKind::AdaMala, _) => "ada-mala".into(),
            (SamplerKind::Mmala, _) => "mmala".into(),
            (SamplerKind::Hmc, _) => "hmc".into(),
        }
    }

    pub fn target_rate(&self) -> f64 {
        self.target_rate.unwrap_or(match self.kind {
            SamplerKind::Hmc => HMC_TARGET_RATE,
            _ => MALA_TARGET_RATE,
        })
    }

    /// Burn-in iterations the sampler spends before adapting a preconditioner.
    pub fn initialization_iters(&self) -> usize {
        match self.kind {
            SamplerKind::FisherMala => self.init_iters,
            SamplerKind::AdaMala => self.init_iters + self.warmup_iters,
            _ => 0,
        }
    }

    /// Builds the kernel with the configured starting `σ²`, or the library
    /// default when it is left to the per-replicate search.
    pub fn build(&self, target: &dyn Target) -> Result<Box<dyn Kernel>> {
        self.build_with_sigma2(
            target,
            self.initial_sigma2.unwrap_or(DEFAULT_INITIAL_SIGMA2),
        )
    }

    pub fn build_with_sigma2(
        &self,
        target: &dyn Target,
        initial_sigma2: f64,
    ) -> Result<Box<dyn Kernel>> {
        let d = target.dim();
        let controller = || StepSizeController::new(initial_sigma2, self.rho, self.target_rate());
        Ok(match self.kind {
            SamplerKind::Mala => Box::new(MalaKernel::new(controller()?)),
            SamplerKind::Mmala => Box::new(MmalaKernel::for_target(target, controller()?)?),
            SamplerKind::FisherMala => Box::new(FisherMalaKernel::new(
                d,
                &FisherMalaConfig {
                    lambda: self.lambda,
                    rho: self.rho,
                    target_rate: self.target_rate(),
                    init_iters: self.init_iters,
                    signal_mode: self.signal_mode,
                    initial_sigma2,
                },
            )?),
            SamplerKind::AdaMala => Box::new(AdaMalaKernel::new(
                d,
                &AdaMalaConfig {
                    lambda: self.lambda,
                    rho: self.rho,
                    target_rate: self.target_rate(),
                    init_iters: self.init_iters,
                    warmup_iters: self.warmup_iters,
                    initial_sigma2,
                },
            )?),
            SamplerKind::Hmc => Box::new(HmcKernel::new(&HmcConfig {
                leapfrog_steps: self.leapfrog_steps,
                rho: self.rho,
                target_rate: self.target_rate(),
                initial_sigma2,
            })?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Protocol {
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default = "default_burn_in")]
    pub collect: usize,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Trace stride in iterations; 0 disables traces.
    #[serde(default = "default_trace_every")]
    pub trace_every: usize,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Also write each replicate's collected draws to `samples_<r>.csv`.
    #[serde(default)]
    pub save_samples: bool,
}

fn default_burn_in() -> usize {
    20_000
}
fn default_replicates() -> usize {
    10
}
fn default_trace_every() -> usize {
    10
}
fn default_output() -> PathBuf {
    PathBuf::from("results")
}

impl Default for Protocol {
    fn default() -> Self {
        Self {
            burn_in: default_burn_in(),
            collect: default_burn_in(),
            replicates: default_replicates(),
            base_seed: 0,
            trace_every: default_trace_every(),
            output: default_output(),
            save_samples: false,
        }
    }
}

impl ExperimentConfig {
    pub fn new(target: TargetSpec, sampler: SamplerSpec) -> Self {
        Self {
            target,
            sampler,
            protocol: Protocol::default(),
        }
    }

    /// Parses TOML, or JSON when the text starts with `{`. A `run.json` written
    /// by the harness is accepted too: its `config` member is used.
    pub fn parse(text: &str) -> Result<Self> {
        let config = if text.trim_start().starts_with('{') {
            let value: serde_json::Value =
                serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
            let inner = value.get("config").cloned().unwrap_or(value);
            serde_json::from_value(inner).map_err(|e| Error::Config(e.to_string()))?
        } else {
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?
        };
        Self::validate(&config)?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.protocol;
        if p.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        let warm = self.sampler.initialization_iters();
        if p.burn_in < warm {
            return Err(Error::Config(format!(
                "burn_in ({}) must cover the {} initialization iterations",
                p.burn_in, warm
            )));
        }
        if p.collect < 100 {
            return Err(Error::Config(format!(
                "collect ({}) must be at least 100 for ESS",
                p.collect
            )));
        }
        let s = &self.sampler;
        // written so that NaN fails every check
        let positive = |v: f64| v > 0.0;
        if !positive(s.lambda)
            || !(s.rho > 0.0 && s.rho < 1.0)
            || s.initial_sigma2
                .is_some_and(|v| !(v > 0.0 && v.is_finite()))
        {
            return Err(Error::Config(
                "lambda and initial_sigma2 must be positive, rho must lie in (0, 1)".into(),
            ));
        }
        let rate = s.target_rate();
        if !(rate > 0.0 && rate < 1.0) {
            return Err(Error::Config(format!("target_rate {rate} outside (0, 1)")));
        }
        if s.kind == SamplerKind::Hmc && s.leapfrog_steps == 0 {
            return Err(Error::Config("leapfrog_steps must be positive".into()));
        }
        Ok(())
    }
}
