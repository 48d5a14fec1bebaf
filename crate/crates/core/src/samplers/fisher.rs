use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{
    mala_transition, normalized_step, AdaptedParameters, ChainState, Kernel, StepDiagnostics,
    StepSizeController, DEFAULT_INITIAL_SIGMA2, DEFAULT_RHO, MALA_TARGET_RATE,
};
use crate::error::{Error, Result};
use crate::preconditioner::{PairedEstimator, SqrtPreconditioner};
use crate::targets::Target;

/// Which vector feeds the inverse-Fisher recursion.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignalMode {
    /// `√α (∇log π(y) − ∇log π(x))`, the acceptance-weighted score increment.
    #[default]
    Rb,
    /// `1(u < α)(∇log π(y) − ∇log π(x))`, the realized score increment.
    NoRb,
    /// Raw scores `∇log π(x)` with a running mean subtracted.
    Paired,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FisherPhase {
    /// Isotropic MALA; only `σ²` adapts.
    InitMala,
    /// `R` and `σ²` adapt on every iteration.
    Adapting,
    Frozen,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisherMalaConfig {
    pub lambda: f64,
    pub rho: f64,
    pub target_rate: f64,
    pub init_iters: usize,
    pub signal_mode: SignalMode,
    pub initial_sigma2: f64,
}

impl Default for FisherMalaConfig {
    fn default() -> Self {
        Self {
            lambda: 10.0,
            rho: DEFAULT_RHO,
            target_rate: MALA_TARGET_RATE,
            init_iters: 500,
            signal_mode: SignalMode::Rb,
            initial_sigma2: DEFAULT_INITIAL_SIGMA2,
        }
    }
}

#[derive(Debug, Clone)]
enum Estimator {
    Sqrt(SqrtPreconditioner),
    Paired(PairedEstimator),
    Fixed { factor: DMatrix<f64>, trace: f64 },
}

impl Estimator {
    fn factor(&self) -> &DMatrix<f64> {
        match self {
            Estimator::Sqrt(p) => p.factor(),
            Estimator::Paired(p) => p.factor(),
            Estimator::Fixed { factor, .. } => factor,
        }
    }

    fn trace(&self) -> f64 {
        match self {
            Estimator::Sqrt(p) => p.trace(),
            Estimator::Paired(p) => p.trace(),
            Estimator::Fixed { trace, .. } => *trace,
        }
    }
}

/// Fisher-information adaptive MALA.
///
/// Runs `init_iters` iterations of isotropic MALA, then learns a square root
/// `R` of the damped inverse empirical Fisher matrix from score increments
/// while keeping `σ_R² · tr(R Rᵀ)/d = σ²`.
#[derive(Debug, Clone)]
pub struct FisherMalaKernel {
    estimator: Estimator,
    controller: StepSizeController,
    sigma2_r: f64,
    signal_mode: SignalMode,
    phase: FisherPhase,
    init_iters: usize,
    init_done: usize,
}

impl FisherMalaKernel {
    pub fn new(dim: usize, config: &FisherMalaConfig) -> Result<Self> {
        let controller =
            StepSizeController::new(config.initial_sigma2, config.rho, config.target_rate)?;
        let estimator = match config.signal_mode {
            SignalMode::Rb | SignalMode::NoRb => {
                Estimator::Sqrt(SqrtPreconditioner::new(dim, config.lambda)?)
            }
            SignalMode::Paired => Estimator::Paired(PairedEstimator::new(dim, config.lambda)?),
        };
        let phase = if config.init_iters == 0 {
            FisherPhase::Adapting
        } else {
            FisherPhase::InitMala
        };
        Ok(Self {
            estimator,
            controller,
            sigma2_r: config.initial_sigma2,
            signal_mode: config.signal_mode,
            phase,
            init_iters: config.init_iters,
            init_done: 0,
        })
    }

    /// A frozen kernel with a given factor and global step size.
    pub fn frozen_with_factor(factor: DMatrix<f64>, sigma2: f64) -> Result<Self> {
        if factor.nrows() != factor.ncols() || factor.nrows() == 0 {
            return Err(Error::InvalidParameter("factor must be square".into()));
        }
        let mut controller = StepSizeController::new(sigma2, DEFAULT_RHO, MALA_TARGET_RATE)?;
        controller.adapting = false;
        let trace: f64 = factor.iter().map(|v| v * v).sum();
        let sigma2_r = normalized_step(sigma2, trace, factor.nrows());
        Ok(Self {
            estimator: Estimator::Fixed { factor, trace },
            controller,
            sigma2_r,
            signal_mode: SignalMode::Rb,
            phase: FisherPhase::Frozen,
            init_iters: 0,
            init_done: 0,
        })
    }

    pub fn phase(&self) -> FisherPhase {
        self.phase
    }

    pub fn controller(&self) -> &StepSizeController {
        &self.controller
    }

    pub fn sigma2_r(&self) -> f64 {
        self.sigma2_r
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        self.estimator.factor()
    }

    pub fn trace(&self) -> f64 {
        self.estimator.trace()
    }

    /// Signals consumed by the recursion so far.
    pub fn adaptation_count(&self) -> usize {
        match &self.estimator {
            Estimator::Sqrt(p) => p.count(),
            Estimator::Paired(p) => p.count(),
            Estimator::Fixed { .. } => 0,
        }
    }

    fn renormalize(&mut self) {
        let d = self.estimator.factor().nrows();
        self.sigma2_r = normalized_step(self.controller.sigma2, self.estimator.trace(), d);
    }
}

impl Kernel for FisherMalaKernel {
    fn name(&self) -> &'static str {
        "fisher-mala"
    }

    fn step(
        &mut self,
        state: &ChainState,
        target: &dyn Target,
        rng: &mut dyn RngCore,
    ) -> Result<(ChainState, StepDiagnostics)> {
        if self.phase == FisherPhase::InitMala {
            let t = mala_transition(state, None, self.controller.sigma2, target, rng);
            self.controller.adapt(t.alpha);
            self.init_done += 1;
            if self.init_done >= self.init_iters {
                self.phase = FisherPhase::Adapting;
                self.renormalize();
            }
            let diag = t.diagnostics();
            return Ok((t.next_state(state), diag));
        }

        let t = mala_transition(
            state,
            Some(self.estimator.factor()),
            self.sigma2_r,
            target,
            rng,
        );

        if self.phase == FisherPhase::Adapting {
            match &mut self.estimator {
                Estimator::Sqrt(p) => {
                    let signal = match (&t.proposal, self.signal_mode) {
                        (Some(y), SignalMode::Rb) => (&y.grad - &state.grad) * t.alpha.sqrt(),
                        (Some(y), SignalMode::NoRb) if t.accepted => &y.grad - &state.grad,
                        _ => DVector::zeros(state.x.len()),
                    };
                    p.update(&signal)?;
                }
                Estimator::Paired(p) => p.update(&state.grad)?,
                Estimator::Fixed { .. } => {}
            }
            self.controller.adapt(t.alpha);
            self.renormalize();
        }

        let diag = t.diagnostics();
        Ok((t.next_state(state), diag))
    }

    fn freeze(&mut self) {
        self.phase = FisherPhase::Frozen;
        self.controller.adapting = false;
        self.renormalize();
    }

    fn is_frozen(&self) -> bool {
        self.phase == FisherPhase::Frozen
    }

    fn sigma2(&self) -> f64 {
        self.controller.sigma2
    }

    fn preconditioner(&self) -> Option<DMatrix<f64>> {
        let r = self.estimator.factor();
        Some(r * r.transpose())
    }

    fn adapted_parameters(&self) -> AdaptedParameters {
        AdaptedParameters {
            sigma2: self.controller.sigma2,
            factor: Some(self.estimator.factor().clone()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::GaussianTarget;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn phases_advance_and_freeze() {
        let target = GaussianTarget::standard_normal(3).unwrap();
        let config = FisherMalaConfig {
            init_iters: 5,
            ..Default::default()
        };
        let mut k = FisherMalaKernel::new(3, &config).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let mut s = ChainState::new(&target, DVector::zeros(3));
        for _ in 0..5 {
            assert_eq!(k.phase(), FisherPhase::InitMala);
            assert_eq!(k.adaptation_count(), 0);
            s = k.step(&s, &target, &mut rng).unwrap().0;
        }
        assert_eq!(k.phase(), FisherPhase::Adapting);
        for i in 0..50 {
            s = k.step(&s, &target, &mut rng).unwrap().0;
            assert_eq!(k.adaptation_count(), i + 1);
            assert_relative_eq!(
                k.sigma2_r() * k.trace() / 3.0,
                k.sigma2(),
                max_relative = 1e-10
            );
        }
        k.freeze();
        let params = k.adapted_parameters();
        for _ in 0..50 {
            s = k.step(&s, &target, &mut rng).unwrap().0;
        }
        assert_eq!(k.adapted_parameters(), params);
    }

    #[test]
    fn zero_acceptance_gives_zero_signal() {
        // A target whose density is -inf everywhere but at the start point
        // forces α = 0, so the recursion sees zero signals.
        struct Spike;
        impl Target for Spike {
            fn dim(&self) -> usize {
                2
            }
            fn log_density(&self, x: &DVector<f64>) -> f64 {
                if x.norm() == 0.0 {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            fn grad_log_density(&self, _: &DVector<f64>) -> DVector<f64> {
                DVector::zeros(2)
            }
        }
        let config = FisherMalaConfig {
            init_iters: 0,
            ..Default::default()
        };
        let mut k = FisherMalaKernel::new(2, &config).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let s = ChainState::new(&Spike, DVector::zeros(2));
        for _ in 0..3 {
            let (next, diag) = k.step(&s, &Spike, &mut rng).unwrap();
            assert_eq!(diag.alpha, 0.0);
            assert!(diag.anomaly);
            assert_eq!(next, s);
        }
        // first zero signal initializes R = I/√λ, later ones leave it alone
        assert_eq!(k.adaptation_count(), 3);
        assert_relative_eq!(
            k.factor(),
            &(DMatrix::identity(2, 2) / 10f64.sqrt()),
            epsilon = 1e-15
        );
    }
}
