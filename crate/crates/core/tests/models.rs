//! Model functions: frozen high-precision reference values for the scalar
//! links, misfit formulas on hand-built cases, and finite-difference checks
//! of the analytic gradients.

use approx::{assert_abs_diff_eq, assert_relative_eq};
use graphuq::models::{
    double_well, grad_phi_gl, grad_phi_probit, log_std_normal_cdf, phi_bls, phi_gl, phi_probit,
    phi_probit_observed, probit_cdf, relaxed_threshold, sign_label, std_normal_cdf,
    std_normal_hazard, threshold,
};
use graphuq::{Error, LabelData, ModelKind, ModelSpec};
use ndarray::{array, Array1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Reference values computed independently at 30-digit precision (normal cdf
// via erfc; the relaxed threshold via its closed-form logistic solution,
// cross-checked against an RK4 integration of the double-well flow).
const PHI_AT_1: f64 = 0.841_344_746_068_542_95;
const LOG_PHI_M8: f64 = -35.013_437_159_914_55;
const LOG_PHI_M10: f64 = -53.231_285_150_512_471;
const LOG_PHI_M20: f64 = -203.917_155_371_097_26;
const LOG_PHI_M50: f64 = -1_254.831_361_139_419_9;
const HAZARD_M8: f64 = 8.121_368_112_236_112_7;
const S_EPS_HALF: f64 = 0.843_347_256_014_742;

#[test]
fn normal_cdf_matches_reference() {
    assert_relative_eq!(std_normal_cdf(1.0), PHI_AT_1, max_relative = 1e-15);
    assert_relative_eq!(std_normal_cdf(0.0), 0.5, max_relative = 1e-15);
    assert_relative_eq!(
        std_normal_cdf(-1.0) + std_normal_cdf(1.0),
        1.0,
        max_relative = 1e-14
    );
}

#[test]
fn log_normal_cdf_is_accurate_in_the_deep_tail() {
    assert_relative_eq!(log_std_normal_cdf(-8.0), LOG_PHI_M8, max_relative = 1e-12);
    assert_relative_eq!(log_std_normal_cdf(-10.0), LOG_PHI_M10, max_relative = 1e-12);
    assert_relative_eq!(log_std_normal_cdf(-20.0), LOG_PHI_M20, max_relative = 1e-12);
    assert_relative_eq!(log_std_normal_cdf(-50.0), LOG_PHI_M50, max_relative = 1e-12);
    // Branch continuity at the switch point t = -8.
    let below = log_std_normal_cdf(-8.0 - 1e-9);
    let above = log_std_normal_cdf(-8.0 + 1e-9);
    assert_abs_diff_eq!(below, above, epsilon = 1e-6);
    // Finite far beyond erfc underflow.
    assert!(log_std_normal_cdf(-300.0).is_finite());
}

#[test]
fn hazard_matches_reference_and_log_cdf_derivative() {
    assert_relative_eq!(std_normal_hazard(-8.0), HAZARD_M8, max_relative = 1e-12);
    // r(t) = d/dt log Φ(t): central finite difference at a few points.
    for &t in &[-9.0, -4.0, -1.0, 0.0, 1.5] {
        let h = 1e-6;
        let fd = (log_std_normal_cdf(t + h) - log_std_normal_cdf(t - h)) / (2.0 * h);
        assert_relative_eq!(std_normal_hazard(t), fd, max_relative = 1e-7);
    }
}

#[test]
fn relaxed_threshold_matches_flow_reference() {
    assert_relative_eq!(relaxed_threshold(0.5, 1.0), S_EPS_HALF, max_relative = 1e-12);
    // Odd, fixes ±1 and 0, and sharpens toward sign(u) as ε shrinks.
    assert_eq!(relaxed_threshold(0.0, 1.0), 0.0);
    assert_relative_eq!(relaxed_threshold(1.0, 0.3), 1.0, max_relative = 1e-14);
    assert_relative_eq!(
        relaxed_threshold(-0.5, 1.0),
        -S_EPS_HALF,
        max_relative = 1e-12
    );
    assert!(relaxed_threshold(0.5, 0.05) > 0.999);
}

#[test]
fn double_well_and_thresholds() {
    assert_relative_eq!(double_well(0.0, 1.0), 0.25, max_relative = 1e-15);
    assert_eq!(double_well(1.0, 0.7), 0.0);
    assert_relative_eq!(double_well(2.0, 0.5), 4.5, max_relative = 1e-15);

    assert_eq!(sign_label(0.0), 1.0, "zero thresholds to +1");
    assert_eq!(sign_label(-1e-300), -1.0);
    let t = threshold(array![0.3, 0.0, -0.2].view());
    assert_eq!(t, array![1.0, 1.0, -1.0]);

    assert_relative_eq!(probit_cdf(1.0, 0.5), std_normal_cdf(2.0), max_relative = 1e-15);
}

fn three_labels() -> LabelData {
    LabelData::new(vec![(0, 1.0), (2, -1.0)], 0.5, 4).unwrap()
}

#[test]
fn probit_misfit_matches_hand_computation() {
    let labels = three_labels();
    let u = array![1.0, 9.9, 0.4, -2.0];
    // Φ_p = −log Φ(y_0 u_0/γ) − log Φ(y_2 u_2/γ) = −log Φ(2) − log Φ(−0.8)
    let want = -log_std_normal_cdf(2.0) - log_std_normal_cdf(-0.8);
    assert_relative_eq!(phi_probit(u.view(), &labels), want, max_relative = 1e-13);
    // The observed-entry form sees only the gathered values.
    let u_obs = labels.gather(u.view());
    assert_relative_eq!(
        phi_probit_observed(u_obs.view(), &labels),
        want,
        max_relative = 1e-13
    );
}

#[test]
fn level_set_misfit_counts_sign_mismatches() {
    let labels = three_labels();
    // Node 0 agrees (S(0.3) = +1), node 2 disagrees (S(0.4) = +1 vs y = −1):
    // Φ = (−1 − 1)² / (2 γ²) = 4 / 0.5 = 8.
    let u = array![0.3, 0.0, 0.4, 0.0];
    assert_relative_eq!(phi_bls(u.view(), &labels), 8.0, max_relative = 1e-13);
    // Both agree: zero misfit regardless of magnitudes.
    let u = array![7.0, 0.0, -0.01, 0.0];
    assert_relative_eq!(phi_bls(u.view(), &labels), 0.0, max_relative = 1e-13);
    // u = 0 thresholds to +1, so node 0 agrees and node 2 contributes.
    let u = Array1::zeros(4);
    assert_relative_eq!(phi_bls(u.view(), &labels), 8.0, max_relative = 1e-13);
}

#[test]
fn ginzburg_landau_misfit_matches_hand_computation() {
    let labels = three_labels();
    let eps = 0.8;
    let v = array![0.5, 1.0, -0.5, 0.0];
    // Double-well over every node + quadratic misfit on the observed ones.
    let wells: f64 = v.iter().map(|&x| double_well(x, eps)).sum();
    let misfit = ((1.0 - 0.5f64).powi(2) + (-1.0 - (-0.5f64)).powi(2)) / (2.0 * 0.25);
    assert_relative_eq!(
        phi_gl(v.view(), &labels, eps),
        wells + misfit,
        max_relative = 1e-13
    );
}

fn finite_difference_gradient(
    f: &dyn Fn(ndarray::ArrayView1<'_, f64>) -> f64,
    u: &Array1<f64>,
    h: f64,
) -> Array1<f64> {
    let mut g = Array1::zeros(u.len());
    let mut w = u.clone();
    for j in 0..u.len() {
        w[j] = u[j] + h;
        let up = f(w.view());
        w[j] = u[j] - h;
        let dn = f(w.view());
        w[j] = u[j];
        g[j] = (up - dn) / (2.0 * h);
    }
    g
}

#[test]
fn analytic_gradients_agree_with_finite_differences() {
    let labels = three_labels();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10 {
        let u = Array1::from_iter((0..4).map(|_| rng.gen_range(-2.0..2.0)));

        let fd = finite_difference_gradient(&|w| phi_probit(w, &labels), &u, 1e-5);
        let g = grad_phi_probit(u.view(), &labels);
        for (a, b) in g.iter().zip(fd.iter()) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-6 * (1.0 + a.abs()));
        }

        let fd = finite_difference_gradient(&|w| phi_gl(w, &labels, 0.7), &u, 1e-5);
        let g = grad_phi_gl(u.view(), &labels, 0.7);
        for (a, b) in g.iter().zip(fd.iter()) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-6 * (1.0 + a.abs()));
        }
    }
}

#[test]
fn probit_gradient_stays_finite_under_extreme_disagreement() {
    // A label deep in the wrong tail: naive cdf ratios would produce 0/0.
    let labels = LabelData::new(vec![(0, 1.0)], 0.1, 1).unwrap();
    let u = array![-6.0]; // y u / γ = −60
    let g = grad_phi_probit(u.view(), &labels);
    assert!(g[0].is_finite());
    // Hazard asymptotics: gradient ≈ −y t/γ = 60/0.1 = 600 for t = −60.
    assert_relative_eq!(g[0], -600.0, max_relative = 1e-2);
}

#[test]
fn label_data_validates_its_inputs() {
    assert!(LabelData::new(vec![], 0.5, 3).is_err(), "empty label set");
    assert!(LabelData::new(vec![(3, 1.0)], 0.5, 3).is_err(), "index range");
    assert!(LabelData::new(vec![(0, 1.0)], 0.0, 3).is_err(), "gamma > 0");
    assert!(LabelData::new(vec![(0, f64::NAN)], 0.5, 3).is_err(), "finite");
    assert!(
        LabelData::new(vec![(1, 1.0), (1, -1.0)], 0.5, 3).is_err(),
        "duplicates"
    );

    let l = LabelData::new(vec![(2, -1.0), (0, 1.0)], 0.5, 3).unwrap();
    assert!(l.all_binary());
    let real = LabelData::new(vec![(0, 0.3)], 0.5, 3).unwrap();
    assert!(!real.all_binary());
}

#[test]
fn model_spec_enforces_parameter_rules() {
    assert!(ModelSpec::new(ModelKind::Probit, 0.0, None, 1.0).is_err());
    assert!(ModelSpec::new(ModelKind::Probit, 0.1, None, 0.0).is_err());
    assert!(ModelSpec::new(ModelKind::Gl, 0.1, None, 1.0).is_err());
    assert!(ModelSpec::new(ModelKind::Gl, 0.1, Some(0.0), 1.0).is_err());
    assert!(ModelSpec::new(ModelKind::Gl, 0.1, Some(1.0), 1.0).is_ok());
    let err = ModelSpec::new(ModelKind::Gl, 0.1, None, 1.0).unwrap_err();
    assert!(matches!(err, Error::Config(_)));
}
