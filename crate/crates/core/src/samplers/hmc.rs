use nalgebra::DVector;
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{
    acceptance_probability, AdaptedParameters, ChainState, Kernel, StepDiagnostics,
    StepSizeController, DEFAULT_INITIAL_SIGMA2, DEFAULT_RHO, HMC_TARGET_RATE,
};
use crate::error::Result;
use crate::targets::Target;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HmcConfig {
    pub leapfrog_steps: usize,
    pub rho: f64,
    pub target_rate: f64,
    /// Initial squared leapfrog step size `ε²`.
    pub initial_sigma2: f64,
}

impl Default for HmcConfig {
    fn default() -> Self {
        Self {
            leapfrog_steps: 10,
            rho: DEFAULT_RHO,
            target_rate: HMC_TARGET_RATE,
            initial_sigma2: DEFAULT_INITIAL_SIGMA2,
        }
    }
}

/// Leapfrog integration with identity mass. Returns the end state and the end
/// momentum; uses exactly `steps` target evaluations since the gradient at the
/// start is taken from `start`.
pub fn leapfrog(
    target: &dyn Target,
    start: &ChainState,
    momentum: &DVector<f64>,
    eps: f64,
    steps: usize,
) -> (ChainState, DVector<f64>) {
    let mut x = start.x.clone();
    let mut p = momentum.clone();
    let mut grad = start.grad.clone();
    let mut logpi = start.logpi;
    for _ in 0..steps {
        p.axpy(0.5 * eps, &grad, 1.0);
        x.axpy(eps, &p, 1.0);
        (logpi, grad) = target.log_density_and_grad(&x);
        p.axpy(0.5 * eps, &grad, 1.0);
    }
    (ChainState { x, logpi, grad }, p)
}

/// Hamiltonian Monte Carlo with a fixed number of leapfrog steps; the step
/// size `ε = √σ²` adapts multiplicatively toward the target acceptance rate.
#[derive(Debug, Clone)]
pub struct HmcKernel {
    controller: StepSizeController,
    leapfrog_steps: usize,
}

impl HmcKernel {
    pub fn new(config: &HmcConfig) -> Result<Self> {
        Ok(Self {
            controller: StepSizeController::new(
                config.initial_sigma2,
                config.rho,
                config.target_rate,
            )?,
            leapfrog_steps: config.leapfrog_steps,
        })
    }

    pub fn controller(&self) -> &StepSizeController {
        &self.controller
    }
}

fn hamiltonian(state: &ChainState, p: &DVector<f64>) -> f64 {
    -state.logpi + 0.5 * p.norm_squared()
}

impl Kernel for HmcKernel {
    fn name(&self) -> &'static str {
        "hmc"
    }

    fn step(
        &mut self,
        state: &ChainState,
        target: &dyn Target,
        rng: &mut dyn RngCore,
    ) -> Result<(ChainState, StepDiagnostics)> {
        let d = state.x.len();
        let p0 = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let eps = self.controller.sigma2.sqrt();
        let (end, p1) = leapfrog(target, state, &p0, eps, self.leapfrog_steps);
        let u: f64 = rng.random();

        let anomaly = !end.is_finite();
        let alpha = if anomaly {
            0.0
        } else {
            acceptance_probability(hamiltonian(state, &p0) - hamiltonian(&end, &p1))
        };
        let accepted = u < alpha;
        self.controller.adapt(alpha);
        let next = if accepted { end } else { state.clone() };
        Ok((
            next,
            StepDiagnostics {
                alpha,
                accepted,
                anomaly,
            },
        ))
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::GaussianTarget;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn zero_momentum_zero_gradient_is_a_fixed_point() {
        let target = GaussianTarget::standard_normal(3).unwrap();
        let start = ChainState::new(&target, DVector::zeros(3));
        let (end, p) = leapfrog(&target, &start, &DVector::zeros(3), 0.3, 10);
        assert_eq!(end.x, start.x);
        assert_eq!(p, DVector::zeros(3));
        assert_eq!(
            acceptance_probability(hamiltonian(&start, &DVector::zeros(3)) - hamiltonian(&end, &p)),
            1.0
        );
    }

    #[test]
    fn leapfrog_is_reversible() {
        let target = crate::targets::gaussian_gp_target(10).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        for _ in 0..20 {
            let x = DVector::from_fn(10, |_, _| rng.sample::<f64, _>(StandardNormal));
            let p = DVector::from_fn(10, |_, _| rng.sample::<f64, _>(StandardNormal));
            let start = ChainState::new(&target, x);
            let (mid, pm) = leapfrog(&target, &start, &p, 0.01, 10);
            let (back, pb) = leapfrog(&target, &mid, &(-pm), 0.01, 10);
            assert_relative_eq!(back.x, start.x, epsilon = 1e-10);
            assert_relative_eq!(-pb, p, epsilon = 1e-10);
        }
    }

    #[test]
    fn energy_error_is_second_order() {
        // halving ε at fixed trajectory length cuts the energy error ~4×
        let target = GaussianTarget::standard_normal(5).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        for _ in 0..100 {
            let x = DVector::from_fn(5, |_, _| rng.sample::<f64, _>(StandardNormal));
            let p = DVector::from_fn(5, |_, _| rng.sample::<f64, _>(StandardNormal));
            let start = ChainState::new(&target, x);
            let h0 = hamiltonian(&start, &p);
            let (e1, p1) = leapfrog(&target, &start, &p, 0.02, 10);
            let (e2, p2) = leapfrog(&target, &start, &p, 0.01, 20);
            let coarse = (hamiltonian(&e1, &p1) - h0).abs();
            let fine = (hamiltonian(&e2, &p2) - h0).abs();
            assert!(coarse < 1e-3, "energy error {coarse}");
            assert!(fine <= coarse / 3.0 + 1e-12, "{fine} vs {coarse}");
        }
    }
}
