use nalgebra::{Cholesky, DMatrix, DVector};
use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{
    mala_transition, normalized_step, AdaptedParameters, ChainState, Kernel, StepDiagnostics,
    StepSizeController, DEFAULT_INITIAL_SIGMA2, DEFAULT_RHO, MALA_TARGET_RATE,
};
use crate::error::{Error, Result};
use crate::targets::Target;

/// Running mean and damped covariance of visited states:
///
/// `μ_n = ((n−1)/n) μ_{n−1} + x_n/n`,
/// `Σ_n = ((n−2)/(n−1)) Σ_{n−1} + (1/n)(x_n − μ_{n−1})(x_n − μ_{n−1})ᵀ`,
///
/// started from `μ_1 = x_1` and `Σ_2 = ½(x_2 − μ_1)(x_2 − μ_1)ᵀ + λI`. A lower
/// Cholesky factor of `Σ_n` is carried along through rank-one updates.
#[derive(Debug, Clone)]
pub struct EmpiricalCovariance {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    chol: DMatrix<f64>,
    n: usize,
    lambda: f64,
    refactorizations: usize,
}

impl EmpiricalCovariance {
    pub fn new(dim: usize, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "damping must be positive, got {lambda}"
            )));
        }
        Ok(Self {
            mean: DVector::zeros(dim),
            cov: DMatrix::zeros(dim, dim),
            chol: DMatrix::zeros(dim, dim),
            n: 0,
            lambda,
            refactorizations: 0,
        })
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    /// `Σ_n`, defined once at least two states have been pushed.
    pub fn covariance(&self) -> Option<&DMatrix<f64>> {
        (self.n >= 2).then_some(&self.cov)
    }

    pub fn cholesky_factor(&self) -> Option<&DMatrix<f64>> {
        (self.n >= 2).then_some(&self.chol)
    }

    /// How often the rank-one update had to fall back to a full factorization.
    pub fn refactorizations(&self) -> usize {
        self.refactorizations
    }

    pub fn push(&mut self, x: &DVector<f64>) -> Result<()> {
        self.n += 1;
        let n = self.n as f64;
        if self.n == 1 {
            self.mean.copy_from(x);
            return Ok(());
        }
        let dev = x - &self.mean;
        if self.n == 2 {
            let d = x.len();
            self.cov = DMatrix::identity(d, d) * self.lambda;
            self.cov.ger(0.5, &dev, &dev, 1.0);
            self.chol = DMatrix::identity(d, d) * self.lambda.sqrt();
            if !rank_one_update(&mut self.chol, &(&dev * 0.5f64.sqrt())) {
                self.refactor()?;
            }
        } else {
            let shrink = (n - 2.0) / (n - 1.0);
            self.cov *= shrink;
            self.cov.ger(1.0 / n, &dev, &dev, 1.0);
            self.chol *= shrink.sqrt();
            if !rank_one_update(&mut self.chol, &(&dev * (1.0 / n).sqrt())) {
                self.refactor()?;
            }
        }
        self.mean.axpy(1.0 / n, &dev, 1.0);
        Ok(())
    }

    /// Full factorization of `Σ_n`, retrying once with `λ·1e-6·I` jitter.
    fn refactor(&mut self) -> Result<()> {
        self.refactorizations += 1;
        if let Some(c) = Cholesky::new(self.cov.clone()) {
            self.chol = c.l();
            return Ok(());
        }
        let d = self.cov.nrows();
        self.cov += DMatrix::identity(d, d) * (self.lambda * 1e-6);
        match Cholesky::new(self.cov.clone()) {
            Some(c) => {
                self.chol = c.l();
                Ok(())
            }
            None => Err(Error::Numerical(format!(
                "Cholesky of the adaptive covariance failed after jitter (n = {}, trace = {:e}, min diag = {:e})",
                self.n,
                self.cov.trace(),
                self.cov.diagonal().min()
            ))),
        }
    }
}

/// In-place `L Lᵀ ← L Lᵀ + v vᵀ` for lower-triangular `L`. Returns `false` if
/// the result is not a valid factor.
fn rank_one_update(l: &mut DMatrix<f64>, v: &DVector<f64>) -> bool {
    let d = l.nrows();
    let mut w = v.clone();
    for k in 0..d {
        let lkk = l[(k, k)];
        let r = lkk.hypot(w[k]);
        if !(r > 0.0 && r.is_finite() && lkk > 0.0) {
            return false;
        }
        let c = r / lkk;
        let s = w[k] / lkk;
        l[(k, k)] = r;
        for i in (k + 1)..d {
            let lik = (l[(i, k)] + s * w[i]) / c;
            w[i] = c * w[i] - s * lik;
            l[(i, k)] = lik;
        }
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdaPhase {
    InitMala,
    /// Isotropic MALA while the covariance accumulates.
    Warmup,
    Adapting,
    Frozen,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaMalaConfig {
    pub lambda: f64,
    pub rho: f64,
    pub target_rate: f64,
    pub init_iters: usize,
    pub warmup_iters: usize,
    pub initial_sigma2: f64,
}

impl Default for AdaMalaConfig {
    fn default() -> Self {
        Self {
            lambda: 10.0,
            rho: DEFAULT_RHO,
            target_rate: MALA_TARGET_RATE,
            init_iters: 500,
            warmup_iters: 500,
            initial_sigma2: DEFAULT_INITIAL_SIGMA2,
        }
    }
}

/// Adaptive preconditioned MALA with the empirical state covariance as `A`.
#[derive(Debug, Clone)]
pub struct AdaMalaKernel {
    estimator: EmpiricalCovariance,
    controller: StepSizeController,
    phase: AdaPhase,
    init_iters: usize,
    warmup_iters: usize,
    steps: usize,
}

impl AdaMalaKernel {
    pub fn new(dim: usize, config: &AdaMalaConfig) -> Result<Self> {
        let controller =
            StepSizeController::new(config.initial_sigma2, config.rho, config.target_rate)?;
        let mut k = Self {
            estimator: EmpiricalCovariance::new(dim, config.lambda)?,
            controller,
            phase: AdaPhase::InitMala,
            init_iters: config.init_iters,
            warmup_iters: config.warmup_iters,
            steps: 0,
        };
        k.advance_phase();
        Ok(k)
    }

    pub fn phase(&self) -> AdaPhase {
        self.phase
    }

    pub fn estimator(&self) -> &EmpiricalCovariance {
        &self.estimator
    }

    pub fn controller(&self) -> &StepSizeController {
        &self.controller
    }

    fn advance_phase(&mut self) {
        if self.phase == AdaPhase::InitMala && self.steps >= self.init_iters {
            self.phase = AdaPhase::Warmup;
        }
        if self.phase == AdaPhase::Warmup && self.steps >= self.init_iters + self.warmup_iters {
            self.phase = AdaPhase::Adapting;
        }
    }

    /// Proposal factor and normalized step; isotropic until `Σ_n` exists.
    fn proposal(&self) -> (Option<&DMatrix<f64>>, f64) {
        let use_cov = matches!(self.phase, AdaPhase::Adapting | AdaPhase::Frozen);
        match (
            use_cov,
            self.estimator.cholesky_factor(),
            self.estimator.covariance(),
        ) {
            (true, Some(l), Some(cov)) => (
                Some(l),
                normalized_step(self.controller.sigma2, cov.trace(), cov.nrows()),
            ),
            _ => (None, self.controller.sigma2),
        }
    }
}

impl Kernel for AdaMalaKernel {
    fn name(&self) -> &'static str {
        "ada-mala"
    }

    fn step(
        &mut self,
        state: &ChainState,
        target: &dyn Target,
        rng: &mut dyn RngCore,
    ) -> Result<(ChainState, StepDiagnostics)> {
        let (factor, sigma2_r) = self.proposal();
        let t = mala_transition(state, factor, sigma2_r, target, rng);
        let diag = t.diagnostics();
        let next = t.next_state(state);
        if self.phase != AdaPhase::Frozen {
            self.controller.adapt(diag.alpha);
            if matches!(self.phase, AdaPhase::Warmup | AdaPhase::Adapting) {
                self.estimator.push(&next.x)?;
            }
            self.steps += 1;
            self.advance_phase();
        }
        Ok((next, diag))
    }

    fn freeze(&mut self) {
        self.phase = AdaPhase::Frozen;
        self.controller.adapting = false;
    }

    fn is_frozen(&self) -> bool {
        self.phase == AdaPhase::Frozen
    }

    fn sigma2(&self) -> f64 {
        self.controller.sigma2
    }

    fn preconditioner(&self) -> Option<DMatrix<f64>> {
        match self.proposal().0 {
            Some(_) => self.estimator.covariance().cloned(),
            None => {
                let d = self.estimator.mean().len();
                Some(DMatrix::identity(d, d))
            }
        }
    }

    fn adapted_parameters(&self) -> AdaptedParameters {
        AdaptedParameters {
            sigma2: self.controller.sigma2,
            factor: self.proposal().0.cloned(),
        }
    }
}
