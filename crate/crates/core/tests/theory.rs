use fisher_mala::targets::{gaussian_2d_with_correlation, GaussianTarget, Target};
use fisher_mala::theory::{
    esjd_objective, jump_covariance, jump_covariance_mc, optimal_preconditioner,
    random_trace_constrained_spd, EsjdProblem,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn random_fisher(d: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    random_trace_constrained_spd(d, d as f64, &mut rng) + DMatrix::identity(d, d) * 0.1
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    /// Directional derivative of J at A* vanishes along trace-free symmetric
    /// directions, checked by central differences.
    #[test]
    fn stationary_point_has_zero_constrained_gradient(
        d in 2usize..=6,
        delta in 0.05f64..2.0,
        c in 0.5f64..5.0,
        seed in any::<u64>(),
    ) {
        let p = EsjdProblem::new(random_fisher(d, seed), delta, c).unwrap();
        let a = optimal_preconditioner(&p);
        prop_assert!((a.trace() - c).abs() < 1e-9 * c);
        let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 1);
        let m = random_trace_constrained_spd(d, 1.0, &mut rng);
        let dir = &m - DMatrix::identity(d, d) / d as f64;
        let h = 1e-5 * a.norm();
        let jp = esjd_objective(&p, &(&a + &dir * h)).unwrap();
        let jm = esjd_objective(&p, &(&a - &dir * h)).unwrap();
        let scale = esjd_objective(&p, &a).unwrap();
        prop_assert!(((jp - jm) / (2.0 * h)).abs() < 1e-6 * (1.0 + scale / a.norm()));
    }

    /// On the trace-constrained set J is convex, so the stationary point is
    /// never beaten from below.
    #[test]
    fn stationary_point_is_the_constrained_minimum(
        d in 2usize..=6,
        seed in any::<u64>(),
    ) {
        let p = EsjdProblem::new(random_fisher(d, seed), 0.7, 2.0).unwrap();
        let j_star = esjd_objective(&p, &optimal_preconditioner(&p)).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        for _ in 0..50 {
            let a = random_trace_constrained_spd(d, 2.0, &mut rng);
            prop_assert!(esjd_objective(&p, &a).unwrap() >= j_star - 1e-10);
        }
    }
}

#[test]
fn mc_jump_moments_for_a_correlated_target() {
    let target = gaussian_2d_with_correlation(0.8).unwrap();
    let a = DMatrix::from_row_slice(2, 2, &[0.6, 0.1, 0.1, 0.3]);
    let delta = 0.4;
    let mut rng = ChaCha20Rng::seed_from_u64(21);
    let m = jump_covariance_mc(&target, &a, delta, 200_000, &mut rng).unwrap();
    let expected = jump_covariance(target.fisher(), &a, delta);
    for i in 0..2 {
        for j in 0..2 {
            let z = (m.second_moment[(i, j)] - expected[(i, j)]) / m.standard_error[(i, j)];
            assert!(z.abs() < 4.0, "entry ({i},{j}) z = {z}");
        }
        assert!((m.mean[i] / m.mean_standard_error[i]).abs() < 4.0);
    }
}

#[test]
fn mc_rejects_small_sample_counts() {
    let target = GaussianTarget::standard_normal(2).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(0);
    assert!(jump_covariance_mc(&target, &DMatrix::identity(2, 2), 0.5, 9_999, &mut rng).is_err());
    assert_eq!(target.dim(), 2);
}

#[test]
fn optimum_is_a_rescaled_inverse_fisher() {
    let f = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 4.0]));
    let p = EsjdProblem::new(f, 1.0, 7.0).unwrap();
    let a = optimal_preconditioner(&p);
    // k = 7 / (1 + 1/2 + 1/4) = 4
    let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 2.0, 1.0]));
    assert!((a - expected).amax() < 1e-12);
}
