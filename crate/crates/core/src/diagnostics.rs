//! Chain-quality metrics: effective sample size, preconditioner distance,
//! and replicate aggregation.

use std::fmt;

use nalgebra::DMatrix;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preconditioner::normalized_matrix;

/// Per-coordinate ESS with its max/median/min.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EssReport {
    pub per_dim: Vec<f64>,
    pub max: f64,
    pub median: f64,
    pub min: f64,
    /// Coordinates with zero sample variance (reported as ESS = N).
    pub degenerate: Vec<usize>,
}

impl EssReport {
    pub fn from_per_dim(per_dim: Vec<f64>, degenerate: Vec<usize>) -> Self {
        let mut sorted = per_dim.clone();
        sorted.sort_by(f64::total_cmp);
        Self {
            max: *sorted.last().unwrap_or(&f64::NAN),
            min: *sorted.first().unwrap_or(&f64::NAN),
            median: median_sorted(&sorted),
            per_dim,
            degenerate,
        }
    }
}

fn median_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => sorted[n / 2],
        _ => 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]),
    }
}

/// Biased (divide-by-N) autocovariance at all lags, via zero-padded FFT.
pub fn autocovariance(series: &[f64]) -> Vec<f64> {
    let n = series.len();
    if n == 0 {
        return Vec::new();
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let len = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = series
        .iter()
        .map(|&v| Complex::new(v - mean, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(len)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(len).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    let scale = 1.0 / (len as f64 * n as f64);
    buf[..n].iter().map(|c| c.re * scale).collect()
}

/// ESS of one series with Geyer's initial positive sequence truncation.
///
/// Returns `None` for a zero-variance series.
pub fn ess_1d(series: &[f64]) -> Option<f64> {
    let n = series.len();
    let acov = autocovariance(series);
    let var0 = acov[0];
    if var0.is_nan() || var0 <= 0.0 || !var0.is_finite() {
        return None;
    }
    let rho = |k: usize| acov[k] / var0;
    // Γ_m = ρ_{2m} + ρ_{2m+1}; sum while positive.
    let mut gamma_sum = 0.0;
    let mut m = 0;
    while 2 * m + 1 < n {
        let pair = rho(2 * m) + rho(2 * m + 1);
        if pair <= 0.0 {
            break;
        }
        gamma_sum += pair;
        m += 1;
    }
    // τ = −1 + 2 ΣΓ_m = 1 + 2 Σ_{k≥1} ρ_k over the retained lags
    let tau = 2.0 * gamma_sum - 1.0;
    Some(n as f64 / tau)
}

/// Per-coordinate ESS of an `N × d` chain (rows are draws).
pub fn ess(chain: &DMatrix<f64>) -> Result<EssReport> {
    let n = chain.nrows();
    if n < 100 {
        return Err(Error::InvalidParameter(format!(
            "ESS needs at least 100 draws, got {n}"
        )));
    }
    let mut per_dim = Vec::with_capacity(chain.ncols());
    let mut degenerate = Vec::new();
    for (j, col) in chain.column_iter().enumerate() {
        let series: Vec<f64> = col.iter().copied().collect();
        match ess_1d(&series) {
            Some(v) => per_dim.push(v),
            None => {
                degenerate.push(j);
                per_dim.push(n as f64);
            }
        }
    }
    Ok(EssReport::from_per_dim(per_dim, degenerate))
}

/// `‖A/(tr(A)/d) − Σ/(tr(Σ)/d)‖_F`.
pub fn frobenius_distance(a: &DMatrix<f64>, sigma: &DMatrix<f64>) -> Result<f64> {
    Ok((normalized_matrix(a)? - normalized_matrix(sigma)?).norm())
}

/// Per-iteration traces recorded while a chain runs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AdaptationTrace {
    pub iterations: Vec<usize>,
    /// Present only when a ground-truth covariance is known.
    pub frobenius_norms: Option<Vec<f64>>,
    pub acceptance_running_mean: Vec<f64>,
    pub log_target_values: Vec<f64>,
}

impl AdaptationTrace {
    pub fn with_ground_truth(known: bool) -> Self {
        Self {
            frobenius_norms: known.then(Vec::new),
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.iterations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterations.is_empty()
    }
}

/// Mean and sample standard deviation of one statistic across replicates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            std: var.sqrt(),
        }
    }
}

impl fmt::Display for MeanStd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3} ± {:.3}", self.mean, self.std)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicateSummary {
    pub max: MeanStd,
    pub median: MeanStd,
    pub min: MeanStd,
    pub replicates: usize,
}

pub fn aggregate_replicates(reports: &[EssReport]) -> Result<ReplicateSummary> {
    if reports.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "aggregation needs at least 2 replicates, got {}",
            reports.len()
        )));
    }
    let pick = |f: fn(&EssReport) -> f64| MeanStd::of(&reports.iter().map(f).collect::<Vec<_>>());
    Ok(ReplicateSummary {
        max: pick(|r| r.max),
        median: pick(|r| r.median),
        min: pick(|r| r.min),
        replicates: reports.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DVector;

    #[test]
    fn autocovariance_matches_direct_sum() {
        let xs: Vec<f64> = (0..50).map(|i| ((i * 7919) % 31) as f64 * 0.1).collect();
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let fast = autocovariance(&xs);
        for k in [0, 1, 5, 49] {
            let direct: f64 = (0..n - k)
                .map(|t| (xs[t] - mean) * (xs[t + k] - mean))
                .sum::<f64>()
                / n as f64;
            assert_relative_eq!(fast[k], direct, epsilon = 1e-12);
        }
    }

    #[test]
    fn constant_chain_is_degenerate() {
        let chain = DMatrix::from_element(200, 2, 3.0);
        let r = ess(&chain).unwrap();
        assert_eq!(r.degenerate, vec![0, 1]);
        assert_eq!(r.per_dim, vec![200.0, 200.0]);
    }

    #[test]
    fn too_short_chain_rejected() {
        assert!(ess(&DMatrix::zeros(99, 1)).is_err());
    }

    #[test]
    fn median_uses_midpoint_for_even_counts() {
        let r = EssReport::from_per_dim(vec![4.0, 1.0, 3.0, 2.0], vec![]);
        assert_eq!((r.max, r.median, r.min), (4.0, 2.5, 1.0));
    }

    #[test]
    fn frobenius_examples() {
        let sigma = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 0.7]);
        assert!(frobenius_distance(&(sigma.clone() * 4.2), &sigma).unwrap() < 1e-14);
        let a = DMatrix::identity(2, 2);
        let s = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 1.5]));
        assert_relative_eq!(
            frobenius_distance(&a, &s).unwrap(),
            0.5f64.sqrt(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn aggregation_examples() {
        let r = |min: f64| EssReport::from_per_dim(vec![min, min + 10.0, min + 20.0], vec![]);
        let same = aggregate_replicates(&[r(5.0), r(5.0)]).unwrap();
        assert_eq!(same.min.std, 0.0);
        let s = aggregate_replicates(&[r(100.0), r(200.0)]).unwrap();
        assert_relative_eq!(s.min.mean, 150.0);
        assert_relative_eq!(s.min.std, 70.71067811865476, epsilon = 1e-12);
        assert_eq!(s.min.to_string(), "150.000 ± 70.711");
        assert!(aggregate_replicates(&[r(1.0)]).is_err());
    }

    #[test]
    fn summary_format_has_three_decimals() {
        let m = MeanStd {
            mean: 1923.7534,
            std: 95.8201,
        };
        assert_eq!(m.to_string(), "1923.753 ± 95.820");
    }
}
