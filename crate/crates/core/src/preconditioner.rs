//! Online inverse-Fisher estimation through O(d²) square-root recursions.
//!
//! The estimators here keep a dense factor `R` with `R Rᵀ = A`, where `A` is the
//! damped inverse of an empirical Fisher matrix built from adaptation signals.
//! Each update is a rank-one modification of `R`; nothing is ever factorized or
//! inverted.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

fn check_finite(s: &DVector<f64>) -> Result<()> {
    if s.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidSignal("signal has non-finite entries".into()))
    }
}

fn check_damping(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "damping must be positive and finite, got {lambda}"
        )))
    }
}

fn sum_of_squares(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum()
}

/// Square root `R` of `A_n = (Σ sᵢsᵢᵀ + λI)⁻¹`.
///
/// Before the first signal `R` is the identity and `n = 0`. The first signal
/// goes through the closed-form initialization, later ones through the
/// rank-one recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct SqrtPreconditioner {
    r: DMatrix<f64>,
    lambda: f64,
    n: usize,
    trace_rrt: f64,
}

impl SqrtPreconditioner {
    /// Identity factor awaiting its first signal.
    pub fn new(dim: usize, lambda: f64) -> Result<Self> {
        check_damping(lambda)?;
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        Ok(Self {
            r: DMatrix::identity(dim, dim),
            lambda,
            n: 0,
            trace_rrt: dim as f64,
        })
    }

    /// `R₁ = (1/√λ)(I − r₁ s₁s₁ᵀ/(λ + s₁ᵀs₁))` with `r₁ = 1/(1 + √(λ/(λ + s₁ᵀs₁)))`.
    pub fn from_first_signal(s1: &DVector<f64>, lambda: f64) -> Result<Self> {
        check_damping(lambda)?;
        check_finite(s1)?;
        let d = s1.len();
        if d == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        let sts = s1.norm_squared();
        let denom = lambda + sts;
        let r1 = 1.0 / (1.0 + (lambda / denom).sqrt());
        let scale = 1.0 / lambda.sqrt();
        let mut r = DMatrix::identity(d, d);
        r.ger(-r1 / denom, s1, s1, 1.0);
        r *= scale;
        let trace_rrt = sum_of_squares(&r);
        Ok(Self {
            r,
            lambda,
            n: 1,
            trace_rrt,
        })
    }

    pub fn dim(&self) -> usize {
        self.r.nrows()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Number of signals consumed so far.
    pub fn count(&self) -> usize {
        self.n
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.r
    }

    /// Cached `tr(R Rᵀ)`, the sum of squared entries of `R`.
    pub fn trace(&self) -> f64 {
        self.trace_rrt
    }

    /// Materializes `A = R Rᵀ`. O(d³); meant for diagnostics only.
    pub fn matrix(&self) -> DMatrix<f64> {
        &self.r * self.r.transpose()
    }

    /// Feeds one signal: closed-form initialization when `n = 0`, otherwise the
    /// rank-one recursion `R ← R − r (Rφ)φᵀ/(1 + φᵀφ)` with `φ = Rᵀs`.
    pub fn update(&mut self, s: &DVector<f64>) -> Result<()> {
        check_finite(s)?;
        self.check_dim(s)?;
        if self.n == 0 {
            *self = Self::from_first_signal(s, self.lambda)?;
            return Ok(());
        }
        let phi = self.r.tr_mul(s);
        let ptp = phi.norm_squared();
        if ptp > 0.0 {
            let denom = 1.0 + ptp;
            let r = 1.0 / (1.0 + (1.0 / denom).sqrt());
            let r_phi = &self.r * &phi;
            self.r.ger(-r / denom, &r_phi, &phi, 1.0);
            self.trace_rrt = sum_of_squares(&self.r);
        }
        self.n += 1;
        Ok(())
    }

    /// Stochastic-approximation step with learning rate `γ ∈ (0, 1)`:
    /// `Î_n = (1 − γ)Î_{n−1} + γ s sᵀ`, tracked through its inverse square root.
    ///
    /// An uninitialized preconditioner is initialized from `s` exactly as in
    /// [`update`](Self::update); `gamma` applies from the second signal on.
    pub fn update_with_rate(&mut self, s: &DVector<f64>, gamma: f64) -> Result<()> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "learning rate must lie in (0, 1), got {gamma}"
            )));
        }
        check_finite(s)?;
        self.check_dim(s)?;
        if self.n == 0 {
            *self = Self::from_first_signal(s, self.lambda)?;
            return Ok(());
        }
        let ratio = (1.0 - gamma) / gamma;
        let phi = self.r.tr_mul(s);
        let ptp = phi.norm_squared();
        let denom = ratio + ptp;
        let r = 1.0 / (1.0 + (ratio / denom).sqrt());
        let r_phi = &self.r * &phi;
        self.r.ger(-r / denom, &r_phi, &phi, 1.0);
        self.r /= (1.0 - gamma).sqrt();
        self.trace_rrt = sum_of_squares(&self.r);
        self.n += 1;
        Ok(())
    }

    fn check_dim(&self, s: &DVector<f64>) -> Result<()> {
        if s.len() == self.dim() {
            Ok(())
        } else {
            Err(Error::InvalidSignal(format!(
                "signal has length {}, expected {}",
                s.len(),
                self.dim()
            )))
        }
    }
}

/// Sherman–Morrison step `A − (A s sᵀ A)/(1 + sᵀ A s)`, i.e. `(A⁻¹ + s sᵀ)⁻¹`.
pub fn woodbury_update(a: &DMatrix<f64>, s: &DVector<f64>) -> DMatrix<f64> {
    let a_s = a * s;
    let denom = 1.0 + s.dot(&a_s);
    let mut out = a.clone();
    out.ger(-1.0 / denom, &a_s, &a_s, 1.0);
    out
}

/// Inverse-Fisher square root from centered signals: tracks the running mean
/// `s̄_n` alongside `R` so that
/// `R Rᵀ = ((1/(n−1)) Σ (sᵢ − s̄_n)(sᵢ − s̄_n)ᵀ + (λ/(n−1)) I)⁻¹`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedEstimator {
    r: DMatrix<f64>,
    mean: DVector<f64>,
    n: usize,
    lambda: f64,
    trace_rrt: f64,
}

impl PairedEstimator {
    pub fn new(dim: usize, lambda: f64) -> Result<Self> {
        check_damping(lambda)?;
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        Ok(Self {
            r: DMatrix::identity(dim, dim),
            mean: DVector::zeros(dim),
            n: 0,
            lambda,
            trace_rrt: dim as f64,
        })
    }

    pub fn dim(&self) -> usize {
        self.r.nrows()
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn trace(&self) -> f64 {
        self.trace_rrt
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        &self.r * self.r.transpose()
    }

    /// The first signal only seeds the mean; from the second on `R` follows
    /// `R_n = (1/√λ_{n−1}) R_{n−1}(I − r_n φφᵀ/(nλ_{n−1} + φᵀφ))` with
    /// `φ = R_{n−1}ᵀ δ_n`, `δ_n = s_n − s̄_{n−1}`, `λ_1 = λ` and
    /// `λ_k = (k−1)/k` afterwards.
    pub fn update(&mut self, s: &DVector<f64>) -> Result<()> {
        check_finite(s)?;
        if s.len() != self.dim() {
            return Err(Error::InvalidSignal(format!(
                "signal has length {}, expected {}",
                s.len(),
                self.dim()
            )));
        }
        self.n += 1;
        let n = self.n as f64;
        if self.n == 1 {
            self.mean.copy_from(s);
            return Ok(());
        }
        let lambda_prev = if self.n == 2 {
            self.lambda
        } else {
            (n - 2.0) / (n - 1.0)
        };
        let delta = s - &self.mean;
        let phi = self.r.tr_mul(&delta);
        let ptp = phi.norm_squared();
        let base = n * lambda_prev;
        let denom = base + ptp;
        let r = 1.0 / (1.0 + (base / denom).sqrt());
        let r_phi = &self.r * &phi;
        self.r.ger(-r / denom, &r_phi, &phi, 1.0);
        self.r /= lambda_prev.sqrt();
        self.trace_rrt = sum_of_squares(&self.r);
        self.mean.axpy(1.0 / n, &delta, 1.0);
        Ok(())
    }
}

/// `B / (tr(B)/d)`: rescales to unit average eigenvalue.
pub fn normalized_matrix(b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = b.nrows() as f64;
    let tr = b.trace();
    if !(tr > 0.0 && tr.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "trace must be positive to normalize, got {tr}"
        )));
    }
    Ok(b * (d / tr))
}
