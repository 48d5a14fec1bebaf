//! Browser bindings: a 2-D sampler scatter, the preconditioner convergence
//! curve and the ESJD objective along the diagonal trace-budget line.
//!
//! Every export returns a flat `Float64Array`; the plain-Rust versions below
//! the bindings are what the tests call.

use fisher_mala::chain::{run_chain, ChainPlan};
use fisher_mala::samplers::{
    FisherMalaConfig, FisherMalaKernel, Kernel, MalaKernel, StepSizeController, DEFAULT_RHO,
    MALA_TARGET_RATE,
};
use fisher_mala::targets::gaussian_2d_with_correlation;
use fisher_mala::theory::{esjd_objective, EsjdProblem};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use wasm_bindgen::prelude::*;

const INITIAL_SIGMA2: f64 = 0.1;

fn kernel(name: &str) -> Result<Box<dyn Kernel>, String> {
    match name {
        "mala" => {
            let c = StepSizeController::new(INITIAL_SIGMA2, DEFAULT_RHO, MALA_TARGET_RATE)
                .map_err(|e| e.to_string())?;
            Ok(Box::new(MalaKernel::new(c)))
        }
        "fisher-mala" => {
            let config = FisherMalaConfig {
                initial_sigma2: INITIAL_SIGMA2,
                ..Default::default()
            };
            Ok(Box::new(
                FisherMalaKernel::new(2, &config).map_err(|e| e.to_string())?,
            ))
        }
        other => Err(format!("unknown sampler {other:?}")),
    }
}

/// `[x₀, y₀, x₁, y₁, …]`: `draws` samples after `burn_in` adaptive steps.
pub fn scatter(
    sampler: &str,
    correlation: f64,
    burn_in: usize,
    draws: usize,
    seed: u64,
) -> Result<Vec<f64>, String> {
    let target = gaussian_2d_with_correlation(correlation).map_err(|e| e.to_string())?;
    let mut k = kernel(sampler)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let plan = ChainPlan {
        burn_in,
        collect: draws,
        trace_every: 0,
    };
    let out = run_chain(
        k.as_mut(),
        &target,
        DVector::zeros(2),
        plan,
        &mut rng,
        |_, _| {},
    )
    .map_err(|e| e.to_string())?;
    Ok(out.samples.transpose().as_slice().to_vec())
}

/// `[iteration, distance, …]` for FisherMALA on the correlated Gaussian.
pub fn convergence(
    correlation: f64,
    steps: usize,
    every: usize,
    seed: u64,
) -> Result<Vec<f64>, String> {
    let target = gaussian_2d_with_correlation(correlation).map_err(|e| e.to_string())?;
    let mut k = kernel("fisher-mala")?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let plan = ChainPlan {
        burn_in: steps,
        collect: 0,
        trace_every: every.max(1),
    };
    let out = run_chain(
        k.as_mut(),
        &target,
        DVector::zeros(2),
        plan,
        &mut rng,
        |_, _| {},
    )
    .map_err(|e| e.to_string())?;
    let norms = out.trace.frobenius_norms.unwrap_or_default();
    Ok(out
        .trace
        .iterations
        .iter()
        .zip(norms)
        .flat_map(|(&i, n)| [i as f64, n])
        .collect())
}

/// `[a₁, J, …]` for `A = diag(a₁, c − a₁)` with `I = diag(i1, i2)` and `c = tr(I⁻¹)`.
pub fn landscape(i1: f64, i2: f64, delta: f64, points: usize) -> Result<Vec<f64>, String> {
    let fisher = DMatrix::from_diagonal(&DVector::from_vec(vec![i1, i2]));
    let c = 1.0 / i1 + 1.0 / i2;
    let p = EsjdProblem::new(fisher, delta, c).map_err(|e| e.to_string())?;
    let n = points.max(2);
    let mut out = Vec::with_capacity(2 * n);
    for k in 1..=n {
        let a1 = c * k as f64 / (n + 1) as f64;
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![a1, c - a1]));
        out.push(a1);
        out.push(esjd_objective(&p, &a).map_err(|e| e.to_string())?);
    }
    Ok(out)
}

#[wasm_bindgen(js_name = scatter)]
pub fn scatter_js(
    sampler: &str,
    correlation: f64,
    burn_in: usize,
    draws: usize,
    seed: u64,
) -> Result<Vec<f64>, JsError> {
    scatter(sampler, correlation, burn_in, draws, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = convergence)]
pub fn convergence_js(
    correlation: f64,
    steps: usize,
    every: usize,
    seed: u64,
) -> Result<Vec<f64>, JsError> {
    convergence(correlation, steps, every, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = landscape)]
pub fn landscape_js(i1: f64, i2: f64, delta: f64, points: usize) -> Result<Vec<f64>, JsError> {
    landscape(i1, i2, delta, points).map_err(|e| JsError::new(&e))
}
