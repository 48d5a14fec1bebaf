use fisher_mala::targets::{
    gaussian_2d_correlated, gaussian_gp_target, gaussian_inhomogeneous, synthetic_logistic,
    GaussianTarget, LogisticRegressionTarget, Target,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

/// Central differences of `log π`, with a step relative to each coordinate's scale.
fn fd_grad(t: &dyn Target, x: &DVector<f64>, h: f64) -> DVector<f64> {
    DVector::from_fn(t.dim(), |i, _| {
        let mut up = x.clone();
        let mut down = x.clone();
        up[i] += h;
        down[i] -= h;
        (t.log_density(&up) - t.log_density(&down)) / (2.0 * h)
    })
}

fn check_gradient(t: &dyn Target, x: &DVector<f64>, h: f64, tol: f64) {
    let g = t.grad_log_density(x);
    let fd = fd_grad(t, x, h);
    let err = (&g - &fd).amax() / (1.0 + g.amax());
    assert!(err < tol, "gradient mismatch {err}");
    let (lp, g2) = t.log_density_and_grad(x);
    assert_eq!(lp, t.log_density(x));
    assert!((&g2 - &g).amax() <= 1e-12 * (1.0 + g.amax()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn gaussian_gradients(xs in prop::collection::vec(-2.0f64..2.0, 2)) {
        let t = gaussian_2d_correlated();
        check_gradient(&t, &DVector::from_vec(xs), 1e-6, 1e-5);
    }

    #[test]
    fn logistic_gradients(
        xs in prop::collection::vec(-1.0f64..1.0, 5),
        seed in 0u64..1000,
    ) {
        let t = synthetic_logistic(5, 40, 1.0, seed).unwrap();
        let x = DVector::from_vec(xs) * 0.1;
        check_gradient(&t, &x, 1e-6, 1e-5);
    }

    #[test]
    fn precision_gradient_matches_solve(xs in prop::collection::vec(-3.0f64..3.0, 10)) {
        let t = gaussian_gp_target(10).unwrap();
        let x = DVector::from_vec(xs);
        let g = t.grad_log_density(&x);
        let solved = t.grad_by_solve(&x);
        prop_assert!((&g - &solved).amax() <= 1e-8 * (1.0 + g.amax()));
    }
}

#[test]
fn high_dimensional_targets_pass_fd_checks() {
    let gp = gaussian_gp_target(100).unwrap();
    let inh = gaussian_inhomogeneous(100).unwrap();
    let x = DVector::from_fn(100, |i, _| 1.0 + 0.01 * ((i * 37 % 11) as f64 - 5.0));
    check_gradient(&gp, &x, 1e-6, 1e-4);
    check_gradient(&inh, &x, 1e-7, 1e-4);
}

#[test]
fn gaussian_density_differences_match_closed_form() {
    // log π(x) − log π(μ) = −½ (x−μ)ᵀ Σ⁻¹ (x−μ), with Σ⁻¹ from a general inverse
    let cov = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.1, 0.5, 1.0, 0.2, 0.1, 0.2, 0.5]);
    let mean = DVector::from_vec(vec![1.0, -1.0, 0.5]);
    let t = GaussianTarget::new(mean.clone(), cov.clone()).unwrap();
    let inv = cov.try_inverse().unwrap();
    let x = DVector::from_vec(vec![0.3, 0.7, -1.2]);
    let r = &x - &mean;
    let expected = -0.5 * r.dot(&(&inv * &r));
    let got = t.log_density(&x) - t.log_density(&mean);
    assert!((got - expected).abs() < 1e-12);
    assert!((t.fisher() - &inv).amax() < 1e-10);
}

#[test]
fn logistic_matches_hand_computation() {
    // two observations, x = (1, 2) label 1 and x = (−1, 0.5) label 0
    let inputs = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -1.0, 0.5]);
    let t = LogisticRegressionTarget::new(inputs, vec![1, 0]).unwrap();
    let theta = DVector::from_vec(vec![0.3, -0.2]);
    let z1: f64 = 0.3 - 0.4;
    let z2: f64 = -0.3 - 0.1;
    let sig = |z: f64| 1.0 / (1.0 + (-z).exp());
    let loglik = sig(z1).ln() + (1.0 - sig(z2)).ln();
    let prior = -0.5 * theta.norm_squared();
    assert!((t.log_density(&theta) - (loglik + prior)).abs() < 1e-12);
    let g = DVector::from_vec(vec![
        (1.0 - sig(z1)) * 1.0 + sig(z2) - 0.3,
        (1.0 - sig(z1)) * 2.0 + (0.0 - sig(z2)) * 0.5 + 0.2,
    ]);
    assert!((t.grad_log_density(&theta) - g).amax() < 1e-12);
}

#[test]
fn logistic_is_finite_for_extreme_parameters() {
    let t = synthetic_logistic(4, 30, 3.0, 1).unwrap();
    let x = DVector::from_element(4, 1e4);
    let (lp, g) = t.log_density_and_grad(&x);
    assert!(lp.is_finite() && g.iter().all(|v| v.is_finite()));
}
