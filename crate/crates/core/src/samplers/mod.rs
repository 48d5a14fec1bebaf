//! Metropolis–Hastings transition kernels.
//!
//! Every MALA-family kernel proposes
//! `y = x + (σ_R²/2) R(Rᵀ∇log π(x)) + σ_R R η` with `σ_R² = σ²/(tr(R Rᵀ)/d)`
//! and evaluates the acceptance ratio without forming `R Rᵀ` or its inverse.
//! Kernels differ only in how (and whether) `R` and `σ²` are adapted.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::targets::Target;

mod ada;
mod fisher;
mod hmc;

pub use ada::{AdaMalaConfig, AdaMalaKernel, AdaPhase, EmpiricalCovariance};
pub use fisher::{FisherMalaConfig, FisherMalaKernel, FisherPhase, SignalMode};
pub use hmc::{leapfrog, HmcConfig, HmcKernel};

/// Default target acceptance rate for the MALA family.
pub const MALA_TARGET_RATE: f64 = 0.574;
/// Default target acceptance rate for HMC.
pub const HMC_TARGET_RATE: f64 = 0.651;
/// Default constant step-size learning rate.
pub const DEFAULT_RHO: f64 = 0.015;
/// Default initial `σ²`. Small enough that the initial simple-MALA phase can
/// contract even the narrowest benchmark coordinates before any preconditioner
/// adaptation starts; the controller grows it quickly when it is too small.
pub const DEFAULT_INITIAL_SIGMA2: f64 = 1e-3;

/// Current position with its cached log-density and gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub x: DVector<f64>,
    pub logpi: f64,
    pub grad: DVector<f64>,
}

impl ChainState {
    pub fn new(target: &dyn Target, x: DVector<f64>) -> Self {
        let (logpi, grad) = target.log_density_and_grad(&x);
        Self { x, logpi, grad }
    }

    /// Whether all cached quantities are finite.
    pub fn is_finite(&self) -> bool {
        self.logpi.is_finite() && self.grad.iter().all(|g| g.is_finite())
    }

    /// Re-evaluates the target at `x` and compares against the cache.
    pub fn cache_matches(&self, target: &dyn Target, tol: f64) -> bool {
        let (lp, g) = target.log_density_and_grad(&self.x);
        let scale = 1.0 + lp.abs();
        (lp - self.logpi).abs() <= tol * scale && (&g - &self.grad).amax() <= tol * (1.0 + g.amax())
    }
}

/// Multiplicative Robbins–Monro control of the global step size:
/// `σ² ← σ²[1 + ρ(α − α*)]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSizeController {
    pub sigma2: f64,
    pub rho: f64,
    pub target_rate: f64,
    pub adapting: bool,
}

impl StepSizeController {
    pub fn new(sigma2: f64, rho: f64, target_rate: f64) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "initial step size must be positive, got {sigma2}"
            )));
        }
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "adaptation rate must lie in (0, 1), got {rho}"
            )));
        }
        if !(target_rate > 0.0 && target_rate < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "target acceptance must lie in (0, 1), got {target_rate}"
            )));
        }
        Ok(Self {
            sigma2,
            rho,
            target_rate,
            adapting: true,
        })
    }

    pub fn adapt(&mut self, alpha: f64) {
        if self.adapting {
            self.sigma2 *= 1.0 + self.rho * (alpha - self.target_rate);
        }
    }
}

/// Per-step bookkeeping emitted by every kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub alpha: f64,
    pub accepted: bool,
    /// The proposal produced a non-finite log-density or gradient.
    pub anomaly: bool,
}

/// Parameters that define a kernel's proposal, as a snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptedParameters {
    pub sigma2: f64,
    /// The preconditioner factor `R`, when the kernel has one.
    pub factor: Option<DMatrix<f64>>,
}

pub trait Kernel: Send {
    fn name(&self) -> &'static str;

    /// One Metropolis–Hastings iteration from `state`.
    fn step(
        &mut self,
        state: &ChainState,
        target: &dyn Target,
        rng: &mut dyn RngCore,
    ) -> Result<(ChainState, StepDiagnostics)>;

    /// Stops all adaptation; subsequent steps use fixed proposal parameters.
    fn freeze(&mut self);

    fn is_frozen(&self) -> bool;

    fn sigma2(&self) -> f64;

    /// Current (unnormalized) preconditioner `A`, if the kernel maintains one.
    fn preconditioner(&self) -> Option<DMatrix<f64>> {
        None
    }

    fn adapted_parameters(&self) -> AdaptedParameters;
}

/// `x + (σ_R²/2) R(Rᵀ grad) + σ_R R η`; `factor = None` means `R = I`.
pub fn mala_propose(
    state: &ChainState,
    factor: Option<&DMatrix<f64>>,
    sigma2_r: f64,
    noise: &DVector<f64>,
) -> DVector<f64> {
    let drift = precondition(factor, &state.grad);
    let spread = match factor {
        Some(r) => r * noise,
        None => noise.clone(),
    };
    let mut y = state.x.clone();
    y.axpy(0.5 * sigma2_r, &drift, 1.0);
    y.axpy(sigma2_r.sqrt(), &spread, 1.0);
    y
}

/// `R(Rᵀ v)`, or `v` itself when `R = I`.
pub fn precondition(factor: Option<&DMatrix<f64>>, v: &DVector<f64>) -> DVector<f64> {
    match factor {
        Some(r) => r * r.tr_mul(v),
        None => v.clone(),
    }
}

/// `h(z, v) = ½(z − v − (σ²/4) A∇log π(v))ᵀ ∇log π(v)`.
///
/// `log q(x|y) − log q(y|x) = h(x, y) − h(y, x)` for the preconditioned
/// Langevin proposal, so `A⁻¹` never appears.
pub fn h_term(
    z: &DVector<f64>,
    v: &DVector<f64>,
    grad_v: &DVector<f64>,
    a_grad_v: &DVector<f64>,
    sigma2: f64,
) -> f64 {
    let mut w = z - v;
    w.axpy(-0.25 * sigma2, a_grad_v, 1.0);
    0.5 * w.dot(grad_v)
}

/// Outcome of one preconditioned MALA proposal + accept/reject.
#[derive(Debug, Clone)]
pub(crate) struct Transition {
    /// The evaluated proposal; `None` when it was non-finite.
    pub proposal: Option<ChainState>,
    pub alpha: f64,
    pub accepted: bool,
}

impl Transition {
    pub fn diagnostics(&self) -> StepDiagnostics {
        StepDiagnostics {
            alpha: self.alpha,
            accepted: self.accepted,
            anomaly: self.proposal.is_none(),
        }
    }

    pub fn next_state(self, current: &ChainState) -> ChainState {
        match (self.accepted, self.proposal) {
            (true, Some(p)) => p,
            _ => current.clone(),
        }
    }
}

/// Draws `η`, proposes, evaluates the target once, and draws the uniform for
/// the accept decision. Acceptance is decided in log space.
pub(crate) fn mala_transition(
    state: &ChainState,
    factor: Option<&DMatrix<f64>>,
    sigma2_r: f64,
    target: &dyn Target,
    rng: &mut dyn RngCore,
) -> Transition {
    let d = state.x.len();
    let noise = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let a_grad_x = precondition(factor, &state.grad);
    let mut y = state.x.clone();
    y.axpy(0.5 * sigma2_r, &a_grad_x, 1.0);
    match factor {
        Some(r) => y.gemv(sigma2_r.sqrt(), r, &noise, 1.0),
        None => y.axpy(sigma2_r.sqrt(), &noise, 1.0),
    }
    let proposal = ChainState::new(target, y);
    let u: f64 = rng.random();

    if !proposal.is_finite() {
        return Transition {
            proposal: None,
            alpha: 0.0,
            accepted: false,
        };
    }
    let a_grad_y = precondition(factor, &proposal.grad);
    let log_ratio = proposal.logpi
        + h_term(&state.x, &proposal.x, &proposal.grad, &a_grad_y, sigma2_r)
        - state.logpi
        - h_term(&proposal.x, &state.x, &state.grad, &a_grad_x, sigma2_r);
    let alpha = acceptance_probability(log_ratio);
    Transition {
        accepted: u < alpha,
        proposal: Some(proposal),
        alpha,
    }
}

/// Heuristic starting `σ²`: from 1, doubles or halves until the acceptance
/// probability of one proposal from `state` crosses ½. A single noise draw is
/// reused across trials. With `leapfrog_steps = Some(L)` the trial is an HMC
/// trajectory with `ε = √σ²`; otherwise an isotropic MALA proposal.
pub fn find_initial_sigma2(
    target: &dyn Target,
    state: &ChainState,
    leapfrog_steps: Option<usize>,
    rng: &mut dyn RngCore,
) -> f64 {
    let d = state.x.len();
    let noise = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let alpha = |sigma2: f64| match leapfrog_steps {
        Some(steps) => {
            let (end, p) = leapfrog(target, state, &noise, sigma2.sqrt(), steps);
            let h0 = -state.logpi + 0.5 * noise.norm_squared();
            let h1 = -end.logpi + 0.5 * p.norm_squared();
            if end.is_finite() {
                acceptance_probability(h0 - h1)
            } else {
                0.0
            }
        }
        None => {
            let y = mala_propose(state, None, sigma2, &noise);
            let prop = ChainState::new(target, y);
            if !prop.is_finite() {
                return 0.0;
            }
            let log_ratio = prop.logpi + h_term(&state.x, &prop.x, &prop.grad, &prop.grad, sigma2)
                - state.logpi
                - h_term(&prop.x, &state.x, &state.grad, &state.grad, sigma2);
            acceptance_probability(log_ratio)
        }
    };
    let mut sigma2 = 1.0;
    let up = alpha(sigma2) > 0.5;
    for _ in 0..60 {
        let next = if up { sigma2 * 2.0 } else { sigma2 * 0.5 };
        if (alpha(next) > 0.5) != up {
            return if up { sigma2 } else { next };
        }
        sigma2 = next;
    }
    sigma2
}

/// `exp(min(0, log a))`, with NaN mapped to zero.
pub fn acceptance_probability(log_ratio: f64) -> f64 {
    if log_ratio.is_nan() {
        0.0
    } else {
        log_ratio.min(0.0).exp()
    }
}

fn normalized_step(sigma2: f64, trace: f64, dim: usize) -> f64 {
    sigma2 / (trace / dim as f64)
}

/// Plain MALA with an isotropic proposal; only `σ²` adapts.
#[derive(Debug, Clone)]
pub struct MalaKernel {
    controller: StepSizeController,
}

impl MalaKernel {
    pub fn new(controller: StepSizeController) -> Self {
        Self { controller }
    }

    pub fn controller(&self) -> &StepSizeController {
        &self.controller
    }
}

impl Kernel for MalaKernel {
    fn name(&self) -> &'static str {
        "mala"
    }

    fn step(
        &mut self,
        state: &ChainState,
        target: &dyn Target,
        rng: &mut dyn RngCore,
    ) -> Result<(ChainState, StepDiagnostics)> {
        let t = mala_transition(state, None, self.controller.sigma2, target, rng);
        self.controller.adapt(t.alpha);
        let diag = t.diagnostics();
        Ok((t.next_state(state), diag))
    }

    fn freeze(&mut self) {
        self.controller.adapting = false;
    }

    fn is_frozen(&self) -> bool {
        !self.controller.adapting
    }

    fn sigma2(&self) -> f64 {
        self.controller.sigma2
    }

    fn adapted_parameters(&self) -> AdaptedParameters {
        AdaptedParameters {
            sigma2: self.controller.sigma2,
            factor: None,
        }
    }
}

/// Trace-normalized preconditioned MALA with a fixed factor.
///
/// With the Cholesky factor of a Gaussian target's covariance this is the
/// constant-metric mMALA sampler, which is exact only for Gaussian targets.
#[derive(Debug, Clone)]
pub struct MmalaKernel {
    factor: DMatrix<f64>,
    trace: f64,
    controller: StepSizeController,
}

impl MmalaKernel {
    /// Uses `R = chol(Σ)` of the target, which must be Gaussian.
    pub fn for_target(target: &dyn Target, controller: StepSizeController) -> Result<Self> {
        let gaussian = target.as_gaussian().ok_or_else(|| {
            Error::UnsupportedTarget(
                "constant-metric mMALA needs a Gaussian target with known covariance".into(),
            )
        })?;
        Ok(Self::with_factor(gaussian.cholesky_factor(), controller))
    }

    pub fn with_factor(factor: DMatrix<f64>, controller: StepSizeController) -> Self {
        let trace = factor.iter().map(|v| v * v).sum();
        Self {
            factor,
            trace,
            controller,
        }
    }

    pub fn sigma2_r(&self) -> f64 {
        normalized_step(self.controller.sigma2, self.trace, self.factor.nrows())
    }
}

impl Kernel for MmalaKernel {
    fn name(&self) -> &'static str {
        "mmala"
    }

    fn step(
        &mut self,
        state: &ChainState,
        target: &dyn Target,
        rng: &mut dyn RngCore,
    ) -> Result<(ChainState, StepDiagnostics)> {
        let t = mala_transition(state, Some(&self.factor), self.sigma2_r(), target, rng);
        self.controller.adapt(t.alpha);
        let diag = t.diagnostics();
        Ok((t.next_state(state), diag))
    }

    fn freeze(&mut self) {
        self.controller.adapting = false;
    }

    fn is_frozen(&self) -> bool {
        !self.controller.adapting
    }

    fn sigma2(&self) -> f64 {
        self.controller.sigma2
    }

    fn preconditioner(&self) -> Option<DMatrix<f64>> {
        Some(&self.factor * self.factor.transpose())
    }

    fn adapted_parameters(&self) -> AdaptedParameters {
        AdaptedParameters {
            sigma2: self.controller.sigma2,
            factor: Some(self.factor.clone()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    struct Flat(usize);

    impl Target for Flat {
        fn dim(&self) -> usize {
            self.0
        }
        fn log_density(&self, _: &DVector<f64>) -> f64 {
            0.0
        }
        fn grad_log_density(&self, _: &DVector<f64>) -> DVector<f64> {
            DVector::zeros(self.0)
        }
    }

    #[test]
    fn propose_with_zero_gradient_and_noise_stays_put() {
        let state = ChainState::new(&Flat(3), DVector::from_vec(vec![1.0, 2.0, 3.0]));
        let y = mala_propose(&state, None, 0.7, &DVector::zeros(3));
        assert_eq!(y, state.x);
    }

    #[test]
    fn propose_scalar_arithmetic() {
        let state = ChainState {
            x: DVector::from_element(1, 0.0),
            logpi: 0.0,
            grad: DVector::from_element(1, 1.0),
        };
        let r = DMatrix::from_element(1, 1, 2.0);
        let y = mala_propose(&state, Some(&r), 0.5, &DVector::from_element(1, 0.3));
        assert_relative_eq!(y[0], 1.0 + 0.5f64.sqrt() * 0.6, epsilon = 1e-15);
        assert_relative_eq!(y[0], 1.42426, epsilon = 1e-5);
    }

    #[test]
    fn h_term_special_cases() {
        let z = DVector::from_vec(vec![0.4, -1.0]);
        let zero = DVector::zeros(2);
        assert_eq!(h_term(&z, &z, &zero, &zero, 0.3), 0.0);

        let g = DVector::from_vec(vec![1.5, -0.5]);
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let ag = &a * &g;
        let sigma2 = 0.8;
        let expected = -(sigma2 / 8.0) * g.dot(&ag);
        assert_relative_eq!(h_term(&z, &z, &g, &ag, sigma2), expected, epsilon = 1e-15);
    }

    #[test]
    fn controller_update_rule() {
        let mut c = StepSizeController::new(1.0, DEFAULT_RHO, MALA_TARGET_RATE).unwrap();
        c.adapt(MALA_TARGET_RATE);
        assert_eq!(c.sigma2, 1.0);
        c.adapt(1.0);
        assert_relative_eq!(c.sigma2, 1.00639, epsilon = 1e-12);
        c.adapting = false;
        c.adapt(0.0);
        assert_relative_eq!(c.sigma2, 1.00639, epsilon = 1e-12);
    }

    #[test]
    fn controller_rejects_bad_parameters() {
        assert!(StepSizeController::new(0.0, 0.015, 0.5).is_err());
        assert!(StepSizeController::new(1.0, 1.0, 0.5).is_err());
        assert!(StepSizeController::new(1.0, 0.015, 1.0).is_err());
    }

    #[test]
    fn acceptance_probability_bounds() {
        assert_eq!(acceptance_probability(3.0), 1.0);
        assert_eq!(acceptance_probability(f64::NAN), 0.0);
        assert_eq!(acceptance_probability(f64::NEG_INFINITY), 0.0);
        assert_relative_eq!(acceptance_probability(-1.0), (-1.0f64).exp());
    }

    #[test]
    fn initial_search_scales_with_the_target() {
        use crate::targets::GaussianTarget;
        use rand::SeedableRng;
        // x → s x and σ² → s² σ² leave every trial acceptance unchanged
        let s2 = 2f64.powi(-14);
        let wide = GaussianTarget::standard_normal(3).unwrap();
        let narrow = GaussianTarget::new(DVector::zeros(3), DMatrix::identity(3, 3) * s2).unwrap();
        let x = DVector::from_vec(vec![0.5, -1.0, 2.0]);
        let mut r1 = rand_chacha::ChaCha20Rng::seed_from_u64(3);
        let mut r2 = rand_chacha::ChaCha20Rng::seed_from_u64(3);
        let a = find_initial_sigma2(&wide, &ChainState::new(&wide, x.clone()), None, &mut r1);
        let b = find_initial_sigma2(
            &narrow,
            &ChainState::new(&narrow, x * s2.sqrt()),
            None,
            &mut r2,
        );
        assert!((0.125..=16.0).contains(&a), "{a}");
        assert_eq!(b, a * s2);
        let mut r3 = rand_chacha::ChaCha20Rng::seed_from_u64(3);
        let h = find_initial_sigma2(
            &wide,
            &ChainState::new(&wide, DVector::zeros(3)),
            Some(10),
            &mut r3,
        );
        assert!(h > 0.0 && h < 64.0, "{h}");
    }

    #[test]
    fn mmala_requires_gaussian() {
        let c = StepSizeController::new(0.1, DEFAULT_RHO, MALA_TARGET_RATE).unwrap();
        assert!(matches!(
            MmalaKernel::for_target(&Flat(2), c),
            Err(Error::UnsupportedTarget(_))
        ));
    }
}
