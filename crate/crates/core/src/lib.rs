//! Fisher-information adaptive MALA.
//!
//! The crate provides the square-root Fisher preconditioner recursions, a
//! preconditioned MALA kernel that adapts them online, baseline samplers
//! (MALA, AdaMALA, mMALA, HMC), benchmark targets, ESS diagnostics and an
//! experiment harness.
//!
//! ```
//! use fisher_mala::chain::{run_chain, ChainPlan};
//! use fisher_mala::samplers::{FisherMalaConfig, FisherMalaKernel};
//! use fisher_mala::targets::gaussian_2d_correlated;
//! use nalgebra::DVector;
//! use rand::SeedableRng;
//!
//! let target = gaussian_2d_correlated();
//! let mut kernel = FisherMalaKernel::new(2, &FisherMalaConfig::default()).unwrap();
//! let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(1);
//! let plan = ChainPlan { burn_in: 1000, collect: 500, trace_every: 0 };
//! let out = run_chain(&mut kernel, &target, DVector::zeros(2), plan, &mut rng, |_, _| {}).unwrap();
//! assert_eq!(out.samples.nrows(), 500);
//! ```

pub mod chain;
pub mod dataset;
pub mod diagnostics;
pub mod error;
#[cfg(feature = "harness")]
pub mod harness;
pub mod preconditioner;
pub mod samplers;
pub mod targets;
pub mod theory;

pub use error::{Error, Result};
