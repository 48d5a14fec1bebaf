use fisher_mala::diagnostics::{aggregate_replicates, ess, ess_1d, frobenius_distance};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

fn ar1(phi: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let innov = (1.0 - phi * phi).sqrt();
    let mut x: f64 = rng.sample(StandardNormal);
    (0..n)
        .map(|_| {
            x = phi * x + innov * rng.sample::<f64, _>(StandardNormal);
            x
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn ess_is_affine_invariant(a in 0.01f64..100.0, b in -50.0f64..50.0, seed in any::<u64>()) {
        let xs = ar1(0.5, 2000, seed);
        let ys: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
        let (ex, ey) = (ess_1d(&xs).unwrap(), ess_1d(&ys).unwrap());
        prop_assert!((ex - ey).abs() < 1e-6 * ex);
    }

    #[test]
    fn ess_is_time_reversal_invariant(seed in any::<u64>()) {
        let xs = ar1(0.7, 1000, seed);
        let rev: Vec<f64> = xs.iter().rev().copied().collect();
        let (ex, er) = (ess_1d(&xs).unwrap(), ess_1d(&rev).unwrap());
        prop_assert!((ex - er).abs() < 1e-8 * ex);
    }

    #[test]
    fn report_orders_statistics(seed in any::<u64>(), d in 1usize..6) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let chain = DMatrix::from_fn(300, d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let r = ess(&chain).unwrap();
        prop_assert!(r.min <= r.median && r.median <= r.max);
        prop_assert_eq!(r.per_dim.len(), d);
    }
}

#[test]
fn strongly_correlated_chain_has_small_ess() {
    let xs = ar1(0.99, 20_000, 3);
    let e = ess_1d(&xs).unwrap();
    // τ = (1 + φ)/(1 − φ) = 199
    assert!(
        e > 20_000.0 / 199.0 * 0.5 && e < 20_000.0 / 199.0 * 1.5,
        "{e}"
    );
}

#[test]
fn frobenius_distance_is_scale_free() {
    let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 3.0]);
    let s = DMatrix::from_row_slice(2, 2, &[2.0, -0.4, -0.4, 1.0]);
    let base = frobenius_distance(&a, &s).unwrap();
    assert!((frobenius_distance(&(a * 7.0), &(s * 0.1)).unwrap() - base).abs() < 1e-14);
}

#[test]
fn aggregation_needs_two_reports() {
    let chain = DMatrix::from_fn(200, 1, |i, _| (i as f64 * 0.37).sin());
    let r = ess(&chain).unwrap();
    assert!(aggregate_replicates(std::slice::from_ref(&r)).is_err());
    assert_eq!(aggregate_replicates(&[r.clone(), r]).unwrap().replicates, 2);
}
