//! Expected squared jumped distance (ESJD) of the discretized preconditioned
//! Langevin diffusion, its closed-form stationary point under a trace budget,
//! and Monte Carlo checks of the jump covariance.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::targets::{GaussianTarget, Target};

/// Fisher matrix, discretization step `δ` and trace budget `c`.
#[derive(Debug, Clone)]
pub struct EsjdProblem {
    fisher: DMatrix<f64>,
    delta: f64,
    trace_budget: f64,
}

fn is_spd(a: &DMatrix<f64>) -> bool {
    a.is_square()
        && (a - a.transpose()).amax() <= 1e-10 * a.amax().max(1.0)
        && a.clone().cholesky().is_some()
}

impl EsjdProblem {
    pub fn new(fisher: DMatrix<f64>, delta: f64, trace_budget: f64) -> Result<Self> {
        if !is_spd(&fisher) {
            return Err(Error::InvalidParameter(
                "Fisher matrix must be symmetric positive definite".into(),
            ));
        }
        if !(delta > 0.0 && trace_budget > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "need δ > 0 and c > 0, got δ = {delta}, c = {trace_budget}"
            )));
        }
        Ok(Self {
            fisher,
            delta,
            trace_budget,
        })
    }

    pub fn fisher(&self) -> &DMatrix<f64> {
        &self.fisher
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn trace_budget(&self) -> f64 {
        self.trace_budget
    }

    pub fn dim(&self) -> usize {
        self.fisher.nrows()
    }
}

/// Stationary jump covariance `(δ²/4) A I A + δ A`.
pub fn jump_covariance(fisher: &DMatrix<f64>, a: &DMatrix<f64>, delta: f64) -> DMatrix<f64> {
    a * fisher * a * (0.25 * delta * delta) + a * delta
}

/// `J(A) = tr((δ²/4) A I A + δ A)`.
pub fn esjd_objective(p: &EsjdProblem, a: &DMatrix<f64>) -> Result<f64> {
    if a.nrows() != p.dim() || !is_spd(a) {
        return Err(Error::InvalidParameter(
            "preconditioner must be SPD and match the Fisher dimension".into(),
        ));
    }
    Ok(jump_covariance(&p.fisher, a, p.delta).trace())
}

/// `A* = k I⁻¹` with `k = c / Σᵢ 1/μᵢ`, so that `tr(A*) = c`.
///
/// This is the unique stationary point of `J` on the trace-constrained SPD
/// set. `J` restricted to that set is a convex quadratic, so the stationary
/// point is its minimum; see [`diagonal_grid_search`].
pub fn optimal_preconditioner(p: &EsjdProblem) -> DMatrix<f64> {
    let eig = p.fisher.clone().symmetric_eigen();
    let inv_sum: f64 = eig.eigenvalues.iter().map(|mu| 1.0 / mu).sum();
    let k = p.trace_budget / inv_sum;
    let inv_diag = eig.eigenvalues.map(|mu| k / mu);
    let v = &eig.eigenvectors;
    let out = v * DMatrix::from_diagonal(&inv_diag) * v.transpose();
    (&out + out.transpose()) * 0.5
}

/// Exhaustive search over `A = diag(a₁, c − a₁)` for a two-dimensional
/// diagonal Fisher matrix, with `a₁` on the open grid `step, 2·step, …`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSearch {
    pub argmax: (f64, f64),
    pub max: f64,
    pub argmin: (f64, f64),
    pub min: f64,
}

pub fn diagonal_grid_search(p: &EsjdProblem, step: f64) -> Result<GridSearch> {
    if p.dim() != 2 {
        return Err(Error::InvalidParameter(
            "grid search is defined for two dimensions".into(),
        ));
    }
    if !(step > 0.0 && step < p.trace_budget) {
        return Err(Error::InvalidParameter(format!("bad grid step {step}")));
    }
    let c = p.trace_budget;
    let n = (c / step).round() as usize;
    let mut best = GridSearch {
        argmax: (f64::NAN, f64::NAN),
        max: f64::NEG_INFINITY,
        argmin: (f64::NAN, f64::NAN),
        min: f64::INFINITY,
    };
    for i in 1..n {
        let a1 = i as f64 * step;
        let a2 = c - a1;
        if a2 <= 0.0 {
            break;
        }
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![a1, a2]));
        let j = esjd_objective(p, &a)?;
        if j > best.max {
            best.max = j;
            best.argmax = (a1, a2);
        }
        if j < best.min {
            best.min = j;
            best.argmin = (a1, a2);
        }
    }
    Ok(best)
}

/// Random SPD matrix with trace `c`: `B Bᵀ + εI` from a Gaussian `B`, rescaled.
pub fn random_trace_constrained_spd(d: usize, c: f64, rng: &mut dyn RngCore) -> DMatrix<f64> {
    let b = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let m = &b * b.transpose() + DMatrix::identity(d, d) * 1e-3;
    let tr = m.trace();
    m * (c / tr)
}

/// Monte Carlo estimate of the stationary jump second moment.
#[derive(Debug, Clone)]
pub struct JumpMoments {
    /// Empirical `E[(x_{t+δ} − x_t)(x_{t+δ} − x_t)ᵀ]`.
    pub second_moment: DMatrix<f64>,
    /// Entrywise Monte Carlo standard error of `second_moment`.
    pub standard_error: DMatrix<f64>,
    pub mean: DVector<f64>,
    /// Standard error of each mean coordinate.
    pub mean_standard_error: DVector<f64>,
    pub samples: usize,
}

/// Draws `x_t ~ π` exactly and simulates one Euler–Maruyama step
/// `x_{t+δ} − x_t = (δ/2) A ∇log π(x_t) + √A (B_{t+δ} − B_t)`.
pub fn jump_covariance_mc(
    target: &GaussianTarget,
    a: &DMatrix<f64>,
    delta: f64,
    n_samples: usize,
    rng: &mut dyn RngCore,
) -> Result<JumpMoments> {
    if n_samples < 10_000 {
        return Err(Error::InvalidParameter(format!(
            "need at least 10^4 samples, got {n_samples}"
        )));
    }
    let d = target.dim();
    let sqrt_a = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidParameter("A must be SPD".into()))?
        .l();
    let mut sum = DVector::zeros(d);
    let mut sum_sq = DVector::<f64>::zeros(d);
    let mut outer = DMatrix::zeros(d, d);
    let mut outer_sq = DMatrix::<f64>::zeros(d, d);
    let sd = delta.sqrt();
    for _ in 0..n_samples {
        let x = target.sample(rng);
        let g = target.grad_log_density(&x);
        let noise = DVector::from_fn(d, |_, _| sd * rng.sample::<f64, _>(StandardNormal));
        let mut jump = &sqrt_a * noise;
        jump.gemv(0.5 * delta, a, &g, 1.0);
        sum += &jump;
        sum_sq += jump.component_mul(&jump);
        let jj = &jump * jump.transpose();
        outer_sq += jj.component_mul(&jj);
        outer += jj;
    }
    let n = n_samples as f64;
    let second_moment = outer / n;
    let var = (outer_sq / n - second_moment.component_mul(&second_moment)) * (n / (n - 1.0));
    let standard_error = var.map(|v| (v.max(0.0) / n).sqrt());
    let mean = sum / n;
    let mean_var = (sum_sq / n - mean.component_mul(&mean)) * (n / (n - 1.0));
    let mean_standard_error = mean_var.map(|v| (v.max(0.0) / n).sqrt());
    Ok(JumpMoments {
        second_moment,
        standard_error,
        mean,
        mean_standard_error,
        samples: n_samples,
    })
}
