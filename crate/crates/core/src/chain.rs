//! Burn-in / freeze / collection driver shared by the harness and the demo.

use nalgebra::{DMatrix, DVector};
use rand::RngCore;

use crate::diagnostics::{frobenius_distance, AdaptationTrace};
use crate::error::Result;
use crate::samplers::{AdaptedParameters, ChainState, Kernel, StepDiagnostics};
use crate::targets::Target;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainPlan {
    pub burn_in: usize,
    pub collect: usize,
    /// Record a trace point every this many iterations (0 disables tracing).
    pub trace_every: usize,
}

#[derive(Debug, Clone)]
pub struct ChainOutput {
    /// `collect × d` draws from the frozen kernel.
    pub samples: DMatrix<f64>,
    pub trace: AdaptationTrace,
    pub at_freeze: AdaptedParameters,
    pub at_end: AdaptedParameters,
    pub burn_in_acceptance: f64,
    pub collect_acceptance: f64,
    pub anomalies: usize,
    pub final_state: ChainState,
}

/// Runs `plan.burn_in` adaptive iterations, freezes the kernel, then stores
/// `plan.collect` draws. Iterations in the trace are 1-based and count burn-in
/// and collection together.
pub fn run_chain(
    kernel: &mut dyn Kernel,
    target: &dyn Target,
    x0: DVector<f64>,
    plan: ChainPlan,
    rng: &mut dyn RngCore,
    mut on_step: impl FnMut(usize, &StepDiagnostics),
) -> Result<ChainOutput> {
    let d = target.dim();
    let truth = target.as_gaussian().map(|g| g.covariance().clone());
    let mut trace = AdaptationTrace::with_ground_truth(truth.is_some());
    let mut state = ChainState::new(target, x0);
    let mut samples = DMatrix::zeros(plan.collect, d);
    let mut accepted_total = 0usize;
    let mut burn_accepted = 0usize;
    let mut collect_accepted = 0usize;
    let mut anomalies = 0usize;
    let mut at_freeze = kernel.adapted_parameters();
    let total = plan.burn_in + plan.collect;

    for it in 0..total {
        if it == plan.burn_in {
            kernel.freeze();
            at_freeze = kernel.adapted_parameters();
        }
        let (next, diag) = kernel.step(&state, target, rng)?;
        debug_assert!(next.cache_matches(target, 1e-12));
        state = next;
        on_step(it, &diag);
        if diag.accepted {
            accepted_total += 1;
            if it < plan.burn_in {
                burn_accepted += 1;
            } else {
                collect_accepted += 1;
            }
        }
        anomalies += usize::from(diag.anomaly);
        if it >= plan.burn_in {
            samples
                .row_mut(it - plan.burn_in)
                .copy_from(&state.x.transpose());
        }
        if plan.trace_every > 0 && (it + 1) % plan.trace_every == 0 {
            trace.iterations.push(it + 1);
            trace
                .acceptance_running_mean
                .push(accepted_total as f64 / (it + 1) as f64);
            trace.log_target_values.push(state.logpi);
            if let (Some(norms), Some(sigma)) = (trace.frobenius_norms.as_mut(), truth.as_ref()) {
                let a = kernel
                    .preconditioner()
                    .unwrap_or_else(|| DMatrix::identity(d, d));
                norms.push(frobenius_distance(&a, sigma)?);
            }
        }
    }
    if plan.collect == 0 {
        kernel.freeze();
        at_freeze = kernel.adapted_parameters();
    }
    let ratio = |a: usize, n: usize| {
        if n == 0 {
            f64::NAN
        } else {
            a as f64 / n as f64
        }
    };
    Ok(ChainOutput {
        samples,
        trace,
        at_freeze,
        at_end: kernel.adapted_parameters(),
        burn_in_acceptance: ratio(burn_accepted, plan.burn_in),
        collect_acceptance: ratio(collect_accepted, plan.collect),
        anomalies,
        final_state: state,
    })
}
