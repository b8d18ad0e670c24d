//! Eigendecomposition and prior scaling: hand-solved spectra for the unit
//! triangle and the 3-node path, plus structural invariants on random graphs.

use approx::{assert_abs_diff_eq, assert_relative_eq};
use graphuq::graph::{build_weights_self_tuning, dirichlet_energy, normalized_laplacian, Laplacian};
use graphuq::spectrum::{saturation_level, scaling_constant};
use graphuq::{eigendecompose, FeatureSet, PriorMode, Truncation, WeightedGraph};
use ndarray::{array, Array1, Array2};

fn triangle_laplacian() -> Laplacian {
    let w = array![[0.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]];
    normalized_laplacian(&WeightedGraph::from_dense(w).unwrap()).unwrap()
}

/// Path 0-1-2 with unit weights. Its normalized Laplacian has the closed-form
/// spectrum λ = (0, 1, 2), q_0 = (1, √2, 1)/2, q_1 = (1, 0, −1)/√2,
/// q_2 = (−1, √2, −1)/2.
fn path_laplacian() -> Laplacian {
    let w = array![[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]];
    normalized_laplacian(&WeightedGraph::from_dense(w).unwrap()).unwrap()
}

#[test]
fn triangle_spectrum_is_known() {
    let spec = eigendecompose(&triangle_laplacian(), Truncation::Full).unwrap();
    let lam = spec.eigenvalues();
    assert_eq!(lam[0], 0.0);
    assert_relative_eq!(lam[1], 1.5, max_relative = 1e-12);
    assert_relative_eq!(lam[2], 1.5, max_relative = 1e-12);
}

#[test]
fn path_spectrum_matches_closed_form() {
    let spec = eigendecompose(&path_laplacian(), Truncation::Full).unwrap();
    let lam = spec.eigenvalues();
    assert_eq!(lam[0], 0.0);
    assert_relative_eq!(lam[1], 1.0, max_relative = 1e-12);
    assert_relative_eq!(lam[2], 2.0, max_relative = 1e-12);

    // q_0 and q_2 have a strict largest-magnitude entry (the middle one), so
    // the make-it-positive orientation pins them completely.
    let s = 2.0f64.sqrt();
    for (k, want) in [array![0.5, s / 2.0, 0.5], array![-0.5, s / 2.0, -0.5]]
        .iter()
        .zip([0usize, 2])
        .map(|(w, k)| (k, w))
    {
        let got = spec.eigenvector(k);
        for (g, w) in got.iter().zip(want.iter()) {
            assert_abs_diff_eq!(*g, *w, epsilon = 1e-12);
        }
    }

    // q_1's two candidate entries ±1/√2 tie only in exact arithmetic; solver
    // rounding decides which one the orientation rule sees as largest. Pin
    // the vector up to that global sign.
    let q1 = spec.eigenvector(1);
    assert_abs_diff_eq!(q1[1], 0.0, epsilon = 1e-12);
    assert_abs_diff_eq!(q1[0].abs(), 1.0 / s, epsilon = 1e-12);
    assert_abs_diff_eq!(q1[0] + q1[2], 0.0, epsilon = 1e-12);

    // Whatever won, the orientation invariant itself must hold everywhere:
    // the largest-magnitude entry of every returned eigenvector is positive.
    for k in 0..3 {
        let q = spec.eigenvector(k);
        let max = q.iter().cloned().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
        assert!(max > 0.0, "eigenvector {k} oriented negatively");
    }
}

#[test]
fn scaling_constants_match_hand_computation() {
    // Triangle, full: c = 3 / (1/1.5 + 1/1.5) = 2.25.
    let tri = eigendecompose(&triangle_laplacian(), Truncation::Full).unwrap();
    assert_relative_eq!(
        scaling_constant(&tri, PriorMode::Full).unwrap(),
        2.25,
        max_relative = 1e-12
    );

    // Path, full: c = 3 / (1/1 + 1/2) = 2.
    let path = eigendecompose(&path_laplacian(), Truncation::Full).unwrap();
    assert_relative_eq!(
        scaling_constant(&path, PriorMode::Full).unwrap(),
        2.0,
        max_relative = 1e-12
    );

    // Path truncated to 2 pairs (one nonzero mode), projected: c = 3 / (1/1).
    let trunc = path.truncated(2).unwrap();
    assert_relative_eq!(
        scaling_constant(&trunc, PriorMode::Projected).unwrap(),
        3.0,
        max_relative = 1e-12
    );

    // Approximated with λ̄ = λ_1 = 1: one replaced tail mode adds 1/λ̄,
    // giving c = 3 / (1 + 1) = 1.5.
    let mut sat = trunc;
    sat.set_saturation(saturation_level(&sat, 1).unwrap()).unwrap();
    assert_relative_eq!(
        scaling_constant(&sat, PriorMode::Approximated).unwrap(),
        1.5,
        max_relative = 1e-12
    );

    // Full scaling demands the full spectrum.
    let trunc2 = path.truncated(2).unwrap();
    assert!(scaling_constant(&trunc2, PriorMode::Full).is_err());
    // Approximated scaling demands a saturation level.
    assert!(scaling_constant(&trunc2, PriorMode::Approximated).is_err());
}

#[test]
fn saturation_level_is_largest_active_eigenvalue() {
    let tri = eigendecompose(&triangle_laplacian(), Truncation::Full).unwrap();
    assert_relative_eq!(saturation_level(&tri, 2).unwrap(), 1.5, max_relative = 1e-12);
    assert_relative_eq!(saturation_level(&tri, 1).unwrap(), 1.5, max_relative = 1e-12);

    let path = eigendecompose(&path_laplacian(), Truncation::Full).unwrap();
    assert_relative_eq!(saturation_level(&path, 1).unwrap(), 1.0, max_relative = 1e-12);
    assert_relative_eq!(saturation_level(&path, 2).unwrap(), 2.0, max_relative = 1e-12);
}

#[test]
fn truncated_keeps_prefix_and_drops_saturation() {
    let mut full = eigendecompose(&path_laplacian(), Truncation::Full).unwrap();
    full.set_saturation(1.7).unwrap();
    let t = full.truncated(2).unwrap();
    assert_eq!(t.n_pairs(), 2);
    assert_eq!(t.n_nodes(), 3);
    assert!(!t.is_full());
    assert_eq!(t.saturation(), None);
    assert_eq!(t.eigenvalues()[1], full.eigenvalues()[1]);
    assert!(t.truncated(1).is_err());
    assert!(t.truncated(3).is_err());
}

#[test]
fn count_truncation_matches_full_prefix() {
    let features = moons_features(80, 5);
    let graph = build_weights_self_tuning(&features, 6).unwrap();
    let lap = normalized_laplacian(&graph).unwrap();
    let full = eigendecompose(&lap, Truncation::Full).unwrap();
    let part = eigendecompose(&lap, Truncation::Count(12)).unwrap();
    assert_eq!(part.n_pairs(), 12);
    for j in 0..12 {
        assert_abs_diff_eq!(
            part.eigenvalues()[j],
            full.eigenvalues()[j],
            epsilon = 1e-9
        );
        let a = part.eigenvector(j);
        let b = full.eigenvector(j);
        // Same deterministic sign convention on both paths.
        for (x, y) in a.iter().zip(b.iter()) {
            assert_abs_diff_eq!(*x, *y, epsilon = 1e-7);
        }
    }
}

fn moons_features(n: usize, seed: u64) -> FeatureSet {
    let data = graphuq::data::gen_two_moons(n, 4, 0.08, seed).unwrap();
    data.features
}

#[test]
fn eigenvalues_lie_in_laplacian_range() {
    for seed in 0..4 {
        let graph = build_weights_self_tuning(&moons_features(60, seed), 5).unwrap();
        let lap = normalized_laplacian(&graph).unwrap();
        let spec = eigendecompose(&lap, Truncation::Full).unwrap();
        let lam = spec.eigenvalues();
        assert!(lam[0] >= 0.0);
        assert!(lam[lam.len() - 1] <= 2.0 + 1e-10);
        for j in 1..lam.len() {
            assert!(lam[j] >= lam[j - 1], "eigenvalues must ascend");
        }
    }
}

#[test]
fn eigenvectors_are_orthonormal_and_q0_is_scaled_degrees() {
    let graph = build_weights_self_tuning(&moons_features(50, 9), 5).unwrap();
    let lap = normalized_laplacian(&graph).unwrap();
    let spec = eigendecompose(&lap, Truncation::Full).unwrap();
    let q = spec.eigenvectors();
    let gram = q.t().dot(q);
    for i in 0..gram.nrows() {
        for j in 0..gram.ncols() {
            let want = if i == j { 1.0 } else { 0.0 };
            assert_abs_diff_eq!(gram[[i, j]], want, epsilon = 1e-9);
        }
    }
    // q_0 agrees with the degree-based null direction up to sign.
    let q0 = spec.eigenvector(0);
    let null = lap.null_direction();
    let dot = q0.dot(&null).abs();
    assert_relative_eq!(dot, 1.0, max_relative = 1e-9);
}

#[test]
fn spectral_dirichlet_energy_matches_quadratic_form() {
    let graph = build_weights_self_tuning(&moons_features(40, 3), 5).unwrap();
    let lap = normalized_laplacian(&graph).unwrap();
    let spec = eigendecompose(&lap, Truncation::Full).unwrap();
    let u = Array1::from_iter((0..40).map(|i| ((i as f64) * 0.37).sin()));
    let spectral = spec.dirichlet_energy(u.view());
    let quadratic = dirichlet_energy(&lap, u.view()).unwrap();
    assert_abs_diff_eq!(spectral, quadratic, epsilon = 1e-8);
}

#[test]
fn reconstruction_from_full_coefficients_is_exact() {
    let graph = build_weights_self_tuning(&moons_features(30, 1), 4).unwrap();
    let lap = normalized_laplacian(&graph).unwrap();
    let spec = eigendecompose(&lap, Truncation::Full).unwrap();
    let u = Array1::from_iter((0..30).map(|i| (i as f64 - 14.5) / 7.0));
    let coeffs = spec.coefficients(u.view());
    let back = spec.eigenvectors().dot(&coeffs);
    for (a, b) in u.iter().zip(back.iter()) {
        assert_abs_diff_eq!(*a, *b, epsilon = 1e-10);
    }
}

#[test]
fn from_parts_rejects_mismatched_shapes() {
    let vals = Array1::zeros(3);
    let vecs = Array2::<f64>::zeros((4, 2));
    assert!(graphuq::LaplacianSpectrum::from_parts(vals, vecs, None).is_err());
    let vals = Array1::zeros(5);
    let vecs = Array2::<f64>::zeros((4, 5));
    assert!(graphuq::LaplacianSpectrum::from_parts(vals, vecs, None).is_err());
}
