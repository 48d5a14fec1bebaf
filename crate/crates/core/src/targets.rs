//! Target densities: the sampler-facing interface plus the Gaussian and
//! logistic-regression targets used by the benchmarks.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Bernoulli, Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Log-density (up to an additive constant) and its gradient on `R^d`.
///
/// Evaluations must be pure: many chains share one target read-only.
pub trait Target: Send + Sync {
    fn dim(&self) -> usize;

    fn log_density(&self, x: &DVector<f64>) -> f64;

    fn grad_log_density(&self, x: &DVector<f64>) -> DVector<f64>;

    /// Joint evaluation; override when the two share work.
    fn log_density_and_grad(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        (self.log_density(x), self.grad_log_density(x))
    }

    /// The Gaussian behind this target, when there is one. Samplers that
    /// need the exact covariance (constant-metric mMALA, ground-truth
    /// diagnostics) go through this.
    fn as_gaussian(&self) -> Option<&GaussianTarget> {
        None
    }
}

/// `N(μ, Σ)` with a cached Cholesky factor and precision matrix.
#[derive(Debug, Clone)]
pub struct GaussianTarget {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    precision: DMatrix<f64>,
}

impl GaussianTarget {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 || covariance.nrows() != d || covariance.ncols() != d {
            return Err(Error::InvalidParameter(format!(
                "covariance must be {d}x{d}, got {}x{}",
                covariance.nrows(),
                covariance.ncols()
            )));
        }
        if mean.iter().chain(covariance.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "non-finite mean or covariance".into(),
            ));
        }
        let asym = (&covariance - covariance.transpose()).amax();
        if asym > 1e-12 * covariance.amax().max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "covariance is not symmetric (max asymmetry {asym:e})"
            )));
        }
        let chol = Cholesky::new(covariance.clone())
            .ok_or_else(|| Error::InvalidParameter("covariance is not positive definite".into()))?;
        let mut precision = chol.inverse();
        // symmetrize against rounding so the gradient is an exact linear map
        precision = (&precision + precision.transpose()) * 0.5;
        Ok(Self {
            mean,
            covariance,
            chol,
            precision,
        })
    }

    pub fn standard_normal(dim: usize) -> Result<Self> {
        Self::new(DVector::zeros(dim), DMatrix::identity(dim, dim))
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    /// Lower Cholesky factor `L` with `L Lᵀ = Σ`.
    pub fn cholesky_factor(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    /// For a Gaussian the Fisher matrix `E[∇log π ∇log πᵀ]` is `Σ⁻¹`.
    pub fn fisher(&self) -> &DMatrix<f64> {
        &self.precision
    }

    /// Gradient via a triangular solve against the factorization instead of
    /// the cached precision; used to cross-check the fast path.
    pub fn grad_by_solve(&self, x: &DVector<f64>) -> DVector<f64> {
        -self.chol.solve(&(x - &self.mean))
    }

    /// Exact draw `μ + L z`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let z = DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        &self.mean + self.chol.l_dirty().lower_triangle() * z
    }
}

impl Target for GaussianTarget {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn log_density(&self, x: &DVector<f64>) -> f64 {
        let r = x - &self.mean;
        -0.5 * r.dot(&(&self.precision * &r))
    }

    fn grad_log_density(&self, x: &DVector<f64>) -> DVector<f64> {
        -(&self.precision * (x - &self.mean))
    }

    fn log_density_and_grad(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        let r = x - &self.mean;
        let g = -(&self.precision * &r);
        (0.5 * r.dot(&g), g)
    }

    fn as_gaussian(&self) -> Option<&GaussianTarget> {
        Some(self)
    }
}

/// Two-dimensional Gaussian with unit variances and correlation 0.995,
/// centred at the ones vector.
pub fn gaussian_2d_correlated() -> GaussianTarget {
    gaussian_2d_with_correlation(0.995).expect("fixed covariance is SPD")
}

pub fn gaussian_2d_with_correlation(rho: f64) -> Result<GaussianTarget> {
    if rho.is_nan() || rho.abs() >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "correlation must lie in (-1, 1), got {rho}"
        )));
    }
    let cov = DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0]);
    GaussianTarget::new(DVector::from_element(2, 1.0), cov)
}

/// Covariance from a linear × squared-exponential kernel on an evenly spaced
/// grid over `[1, 2]`, plus 0.001 white noise:
/// `Σᵢⱼ = sᵢsⱼ exp(−½(sᵢ − sⱼ)²/0.09) + 0.001 δᵢⱼ`.
pub fn gaussian_gp_target(dim: usize) -> Result<GaussianTarget> {
    if dim < 2 {
        return Err(Error::InvalidParameter(format!(
            "GP target needs at least 2 grid points, got {dim}"
        )));
    }
    let grid: Vec<f64> = (0..dim)
        .map(|i| 1.0 + i as f64 / (dim - 1) as f64)
        .collect();
    let cov = DMatrix::from_fn(dim, dim, |i, j| {
        let (a, b) = (grid[i], grid[j]);
        let k = a * b * (-0.5 * (a - b).powi(2) / 0.09).exp();
        if i == j {
            k + 0.001
        } else {
            k
        }
    });
    GaussianTarget::new(DVector::from_element(dim, 1.0), cov)
}

/// Diagonal Gaussian with standard deviations `i/d`, `i = 1..=d`.
///
/// For `d = 100` this is the grid `{0.01, 0.02, …, 1}`; other dimensions use
/// the same construction with step `1/d` (see [`inhomogeneous_grid_is_rescaled`]).
pub fn gaussian_inhomogeneous(dim: usize) -> Result<GaussianTarget> {
    if dim == 0 {
        return Err(Error::InvalidParameter("dimension must be positive".into()));
    }
    let var = DVector::from_fn(dim, |i, _| ((i + 1) as f64 / dim as f64).powi(2));
    GaussianTarget::new(
        DVector::from_element(dim, 1.0),
        DMatrix::from_diagonal(&var),
    )
}

/// True when [`gaussian_inhomogeneous`] deviates from the canonical 100-point grid.
pub fn inhomogeneous_grid_is_rescaled(dim: usize) -> bool {
    dim != 100
}

#[inline]
pub(crate) fn log_sigmoid(a: f64) -> f64 {
    if a >= 0.0 {
        -(-a).exp().ln_1p()
    } else {
        a - a.exp().ln_1p()
    }
}

#[inline]
pub(crate) fn sigmoid(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

/// Bayesian logistic regression posterior with a standard normal prior on θ.
#[derive(Debug, Clone)]
pub struct LogisticRegressionTarget {
    inputs: DMatrix<f64>,
    labels: DVector<f64>,
}

impl LogisticRegressionTarget {
    pub fn new(inputs: DMatrix<f64>, labels: Vec<u8>) -> Result<Self> {
        if inputs.nrows() != labels.len() {
            return Err(Error::Validation(format!(
                "{} input rows but {} labels",
                inputs.nrows(),
                labels.len()
            )));
        }
        if inputs.ncols() == 0 {
            return Err(Error::Validation("inputs have no columns".into()));
        }
        if let Some(bad) = labels.iter().find(|&&y| y > 1) {
            return Err(Error::Validation(format!("label {bad} is not binary")));
        }
        if inputs.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("inputs contain non-finite values".into()));
        }
        let labels = DVector::from_iterator(labels.len(), labels.iter().map(|&y| y as f64));
        Ok(Self { inputs, labels })
    }

    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.inputs
    }

    pub fn labels(&self) -> Vec<u8> {
        self.labels.iter().map(|&y| y as u8).collect()
    }

    pub fn num_observations(&self) -> usize {
        self.inputs.nrows()
    }

    /// Negative Hessian `Zᵀ diag(σ(1−σ)) Z + I`.
    pub fn negative_hessian(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        let logits = &self.inputs * theta;
        let w = logits.map(|a| {
            let p = sigmoid(a);
            p * (1.0 - p)
        });
        let mut weighted = self.inputs.clone();
        for (mut row, wi) in weighted.row_iter_mut().zip(w.iter()) {
            row *= *wi;
        }
        self.inputs.transpose() * weighted + DMatrix::identity(self.dim(), self.dim())
    }
}

impl Target for LogisticRegressionTarget {
    fn dim(&self) -> usize {
        self.inputs.ncols()
    }

    fn log_density(&self, theta: &DVector<f64>) -> f64 {
        let logits = &self.inputs * theta;
        let lik: f64 = logits
            .iter()
            .zip(self.labels.iter())
            .map(|(&a, &y)| y * log_sigmoid(a) + (1.0 - y) * log_sigmoid(-a))
            .sum();
        lik - 0.5 * theta.norm_squared()
    }

    fn grad_log_density(&self, theta: &DVector<f64>) -> DVector<f64> {
        self.log_density_and_grad(theta).1
    }

    fn log_density_and_grad(&self, theta: &DVector<f64>) -> (f64, DVector<f64>) {
        let logits = &self.inputs * theta;
        let mut lik = 0.0;
        let mut resid = DVector::zeros(logits.len());
        for i in 0..logits.len() {
            let (a, y) = (logits[i], self.labels[i]);
            lik += y * log_sigmoid(a) + (1.0 - y) * log_sigmoid(-a);
            resid[i] = y - sigmoid(a);
        }
        let grad = self.inputs.tr_mul(&resid) - theta;
        (lik - 0.5 * theta.norm_squared(), grad)
    }
}

/// Synthetic logistic-regression problem with deliberately unstandardized
/// features: column `j` is scaled by `10^(log10_span · j/(d−1))`, so column
/// scales span `10^log10_span`. Labels come from a ground-truth θ scaled so
/// every feature contributes O(1) to the logits.
pub fn synthetic_logistic(
    dim: usize,
    observations: usize,
    log10_span: f64,
    seed: u64,
) -> Result<LogisticRegressionTarget> {
    if dim < 2 || observations == 0 {
        return Err(Error::InvalidParameter(format!(
            "need dim >= 2 and observations >= 1, got {dim} and {observations}"
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let scales: Vec<f64> = (0..dim)
        .map(|j| 10f64.powf(log10_span * j as f64 / (dim - 1) as f64))
        .collect();
    let inputs = DMatrix::from_fn(observations, dim, |_, j| {
        scales[j] * rng.sample::<f64, _>(StandardNormal)
    });
    let truth = DVector::from_fn(dim, |j, _| {
        rng.sample::<f64, _>(StandardNormal) / (scales[j] * (dim as f64).sqrt())
    });
    let logits = &inputs * truth;
    let labels = logits
        .iter()
        .map(|&a| {
            let coin = Bernoulli::new(sigmoid(a)).expect("probability in [0, 1]");
            u8::from(coin.sample(&mut rng))
        })
        .collect();
    LogisticRegressionTarget::new(inputs, labels)
}
