//! Prior sampler: coefficient scales, support, mode preconditions, and
//! Monte Carlo checks of the unit per-node variance normalization.

use approx::{assert_abs_diff_eq, assert_relative_eq};
use graphuq::graph::{normalized_laplacian, WeightedGraph};
use graphuq::spectrum::saturation_level;
use graphuq::{eigendecompose, PriorMode, PriorSampler, Truncation};
use ndarray::array;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Path 0-1-2: spectrum λ = (0, 1, 2), full-mode scaling c = 2.
fn path_spectrum() -> graphuq::LaplacianSpectrum {
    let w = array![[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]];
    let lap = normalized_laplacian(&WeightedGraph::from_dense(w).unwrap()).unwrap();
    eigendecompose(&lap, Truncation::Full).unwrap()
}

#[test]
fn coefficient_scales_are_sqrt_c_over_lambda() {
    let spec = path_spectrum();
    let sampler = PriorSampler::new(&spec, PriorMode::Full).unwrap();
    assert_relative_eq!(sampler.scaling(), 2.0, max_relative = 1e-12);
    assert_eq!(sampler.n_coeffs(), 2);
    assert_relative_eq!(sampler.coeff_std()[0], 2.0f64.sqrt(), max_relative = 1e-12);
    assert_relative_eq!(sampler.coeff_std()[1], 1.0, max_relative = 1e-12);
}

#[test]
fn mode_preconditions_are_enforced() {
    let spec = path_spectrum();
    let trunc = spec.truncated(2).unwrap();
    assert!(PriorSampler::new(&trunc, PriorMode::Full).is_err());
    assert!(PriorSampler::new(&trunc, PriorMode::Approximated).is_err());
    assert!(PriorSampler::new(&trunc, PriorMode::Projected).is_ok());

    let mut sat = spec.truncated(2).unwrap();
    sat.set_saturation(saturation_level(&sat, 1).unwrap()).unwrap();
    let approx = PriorSampler::new(&sat, PriorMode::Approximated).unwrap();
    assert_relative_eq!(approx.scaling(), 1.5, max_relative = 1e-12);
}

#[test]
fn draws_are_orthogonal_to_the_trivial_mode() {
    let data = graphuq::data::gen_two_moons(60, 4, 0.08, 2).unwrap();
    let graph = graphuq::graph::build_weights_self_tuning(&data.features, 5).unwrap();
    let lap = normalized_laplacian(&graph).unwrap();
    let full = eigendecompose(&lap, Truncation::Full).unwrap();
    let mut sat = full.truncated(13).unwrap();
    sat.set_saturation(saturation_level(&sat, 12).unwrap()).unwrap();

    for (spec, mode) in [
        (&full, PriorMode::Full),
        (&sat, PriorMode::Projected),
        (&sat, PriorMode::Approximated),
    ] {
        let sampler = PriorSampler::new(spec, mode).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let q0 = full.eigenvector(0);
        for _ in 0..20 {
            let u = sampler.sample(&mut rng);
            assert_abs_diff_eq!(u.dot(&q0), 0.0, epsilon = 1e-10);
        }
    }
}

#[test]
fn approximated_tail_is_orthogonal_to_stored_modes() {
    let data = graphuq::data::gen_two_moons(50, 4, 0.08, 7).unwrap();
    let graph = graphuq::graph::build_weights_self_tuning(&data.features, 5).unwrap();
    let lap = normalized_laplacian(&graph).unwrap();
    let full = eigendecompose(&lap, Truncation::Full).unwrap();
    let mut sat = full.truncated(9).unwrap();
    sat.set_saturation(saturation_level(&sat, 8).unwrap()).unwrap();
    let sampler = PriorSampler::new(&sat, PriorMode::Approximated).unwrap();

    // Subtracting the coefficient part leaves the tail; the tail must have no
    // component along any of the stored modes.
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let u = sampler.sample(&mut rng);
    let coeffs = sat.coefficients(u.view());
    let head = sat.eigenvectors().dot(&coeffs);
    let tail = &u - &head;
    for k in 0..sat.n_pairs() {
        assert_abs_diff_eq!(tail.dot(&sat.eigenvector(k)), 0.0, epsilon = 1e-10);
    }
    // The tail is nonzero in approximated mode.
    assert!(tail.dot(&tail).sqrt() > 1e-6);
}

#[test]
fn mean_squared_norm_is_close_to_one_per_node() {
    // E|u|²/N = 1 by the scaling construction; Monte Carlo over 20k draws on
    // the 3-node path has standard error ≈ 0.0075, so 0.04 is a wide gate.
    let spec = path_spectrum();
    let sampler = PriorSampler::new(&spec, PriorMode::Full).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let draws = 20_000;
    let mut acc = 0.0;
    for _ in 0..draws {
        let u = sampler.sample(&mut rng);
        acc += u.dot(&u) / spec.n_nodes() as f64;
    }
    assert_abs_diff_eq!(acc / draws as f64, 1.0, epsilon = 0.04);
}

#[test]
fn sampling_is_deterministic_per_seed_and_batch_invariant() {
    let spec = path_spectrum();
    let sampler = PriorSampler::new(&spec, PriorMode::Full).unwrap();

    let mut rng_a = ChaCha8Rng::seed_from_u64(9);
    let mut rng_b = ChaCha8Rng::seed_from_u64(9);
    let one_by_one: Vec<_> = (0..4).map(|_| sampler.sample(&mut rng_a)).collect();
    let batch = sampler.sample_batch(4, &mut rng_b);
    for (k, u) in one_by_one.iter().enumerate() {
        for (a, b) in u.iter().zip(batch.column(k).iter()) {
            assert_eq!(*a, *b, "batching must not change the sample stream");
        }
    }
}

#[test]
fn from_coefficients_applies_the_active_basis() {
    let spec = path_spectrum();
    let sampler = PriorSampler::new(&spec, PriorMode::Full).unwrap();
    let a = array![0.7, -0.3];
    let u = sampler.from_coefficients(a.view());
    let manual = &spec.eigenvector(1).to_owned() * 0.7 - &(&spec.eigenvector(2).to_owned() * 0.3);
    for (x, y) in u.iter().zip(manual.iter()) {
        assert_abs_diff_eq!(*x, *y, epsilon = 1e-14);
    }
    // active_basis excludes q_0.
    assert_eq!(sampler.active_basis().ncols(), 2);
    assert_eq!(sampler.active_basis().nrows(), 3);
}

#[test]
fn pcn_proposal_interpolates_between_state_and_fresh_draw() {
    let spec = path_spectrum();
    let sampler = PriorSampler::new(&spec, PriorMode::Full).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let u = sampler.sample(&mut rng);

    // β = 0 keeps the state exactly.
    let w = sampler.pcn_proposal(u.view(), 0.0, &mut rng).unwrap();
    for (a, b) in w.iter().zip(u.iter()) {
        assert_eq!(*a, *b);
    }

    // β = 1 discards the state: the proposal equals the fresh draw that the
    // same RNG stream would have produced.
    let mut rng_a = ChaCha8Rng::seed_from_u64(17);
    let mut rng_b = ChaCha8Rng::seed_from_u64(17);
    let w = sampler.pcn_proposal(u.view(), 1.0, &mut rng_a).unwrap();
    let xi = sampler.sample(&mut rng_b);
    for (a, b) in w.iter().zip(xi.iter()) {
        assert_abs_diff_eq!(*a, *b, epsilon = 1e-15);
    }

    assert!(sampler.pcn_proposal(u.view(), 1.5, &mut rng).is_err());
}
