//! pCN chains: streaming statistics, determinism, prior invariance, support
//! preservation, and a cross-check of the two chain engines against an
//! independent random-walk baseline.

use approx::{assert_abs_diff_eq, assert_relative_eq};
use graphuq::graph::{build_weights_self_tuning, normalized_laplacian, WeightedGraph};
use graphuq::sampler::{pcn_prior_chain, rwm_run, StoragePolicy};
use graphuq::{
    eigendecompose, pcn_run, ChainConfig, ChainInit, LabelData, ModelKind, ModelSpec,
    PosteriorProblem, PriorMode, PriorSampler, SummaryReducer, Truncation,
};
use ndarray::{array, Array1};

fn path_spectrum() -> graphuq::LaplacianSpectrum {
    let w = array![[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]];
    let lap = normalized_laplacian(&WeightedGraph::from_dense(w).unwrap()).unwrap();
    eigendecompose(&lap, Truncation::Full).unwrap()
}

fn moons_spectrum(n: usize, seed: u64) -> graphuq::LaplacianSpectrum {
    let data = graphuq::data::gen_two_moons(n, 4, 0.08, seed).unwrap();
    let graph = build_weights_self_tuning(&data.features, 6).unwrap();
    eigendecompose(&normalized_laplacian(&graph).unwrap(), Truncation::Full).unwrap()
}

fn probit_problem(spectrum: &graphuq::LaplacianSpectrum) -> PosteriorProblem<'_> {
    let sampler = PriorSampler::new(spectrum, PriorMode::Full).unwrap();
    let model = ModelSpec::new(ModelKind::Probit, 0.5, None, sampler.scaling()).unwrap();
    let labels = LabelData::new(vec![(0, 1.0)], 0.5, spectrum.n_nodes()).unwrap();
    PosteriorProblem::new(sampler, model, labels).unwrap()
}

#[test]
fn reducer_statistics_match_hand_computation() {
    let mut r = SummaryReducer::new(2);
    r.add(array![1.0, -1.0].view());
    r.add(array![2.0, 0.0].view());
    r.add(array![3.0, -3.0].view());
    assert_eq!(r.n_samples(), 3);
    let mean = r.mean();
    assert_relative_eq!(mean[0], 2.0, max_relative = 1e-15);
    assert_relative_eq!(mean[1], -4.0 / 3.0, max_relative = 1e-14);
    // Population variance.
    let var = r.variance();
    assert_relative_eq!(var[0], 2.0 / 3.0, max_relative = 1e-13);
    // Zero counts as nonnegative: column 1 has one of three entries ≥ 0.
    let frac = r.nonneg_fraction();
    assert_relative_eq!(frac[0], 1.0, max_relative = 1e-15);
    assert_relative_eq!(frac[1], 1.0 / 3.0, max_relative = 1e-15);
}

#[test]
fn reducer_run_lengths_and_merge_agree_with_plain_adds() {
    // A run-length of k must equal adding the same state k times, and a
    // merge of two reducers must equal one reducer over the concatenation.
    let u = array![0.5, -0.25, 0.0];
    let v = array![-1.5, 2.0, 1.0];

    let mut runs = SummaryReducer::new(3);
    runs.add_run(u.view(), 3);
    runs.add_run(v.view(), 2);

    let mut plain = SummaryReducer::new(3);
    for _ in 0..3 {
        plain.add(u.view());
    }
    for _ in 0..2 {
        plain.add(v.view());
    }

    let mut left = SummaryReducer::new(3);
    left.add_run(u.view(), 3);
    let mut right = SummaryReducer::new(3);
    right.add_run(v.view(), 2);
    left.merge(&right);

    for r in [&runs, &left] {
        assert_eq!(r.n_samples(), plain.n_samples());
        for (a, b) in r.mean().iter().zip(plain.mean().iter()) {
            assert_relative_eq!(*a, *b, max_relative = 1e-14);
        }
        for (a, b) in r.variance().iter().zip(plain.variance().iter()) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-13);
        }
        for (a, b) in r.nonneg_fraction().iter().zip(plain.nonneg_fraction().iter()) {
            assert_eq!(*a, *b);
        }
    }
}

#[test]
fn chain_config_is_validated() {
    let spectrum = path_spectrum();
    let problem = probit_problem(&spectrum);
    let bad_beta = ChainConfig::new(1.5, 100, 0);
    assert!(pcn_run(&problem, &bad_beta, &ChainInit::PriorDraw).is_err());
    let zero_len = ChainConfig::new(0.5, 0, 0);
    assert!(pcn_run(&problem, &zero_len, &ChainInit::PriorDraw).is_err());
    let bad_burn = ChainConfig::new(0.5, 100, 0).with_burn_in(100);
    assert!(pcn_run(&problem, &bad_burn, &ChainInit::PriorDraw).is_err());
    let bad_init = ChainInit::State(Array1::zeros(5));
    let ok = ChainConfig::new(0.5, 100, 0);
    assert!(pcn_run(&problem, &ok, &bad_init).is_err());
}

#[test]
fn chains_are_deterministic_per_seed() {
    let spectrum = moons_spectrum(40, 3);
    let problem = probit_problem(&spectrum);
    let config = ChainConfig::new(0.4, 2000, 9).with_storage(StoragePolicy::Always);
    let a = pcn_run(&problem, &config, &ChainInit::PriorDraw).unwrap();
    let b = pcn_run(&problem, &config, &ChainInit::PriorDraw).unwrap();
    assert_eq!(a.acceptance_rate, b.acceptance_rate);
    assert_eq!(a.samples.as_ref().unwrap(), b.samples.as_ref().unwrap());
    assert_eq!(a.reducer.mean(), b.reducer.mean());

    let other = ChainConfig::new(0.4, 2000, 10).with_storage(StoragePolicy::Always);
    let c = pcn_run(&problem, &other, &ChainInit::PriorDraw).unwrap();
    assert_ne!(a.samples.as_ref().unwrap(), c.samples.as_ref().unwrap());
}

#[test]
fn storage_policy_controls_sample_retention() {
    let spectrum = path_spectrum();
    let problem = probit_problem(&spectrum);

    let never = ChainConfig::new(0.5, 500, 1).with_storage(StoragePolicy::Never);
    let out = pcn_run(&problem, &never, &ChainInit::PriorDraw).unwrap();
    assert!(out.samples.is_none());
    assert_eq!(out.n_states, 500);
    assert_eq!(out.beta_used, 0.5);

    let always = ChainConfig::new(0.5, 500, 1).with_storage(StoragePolicy::Always);
    let out = pcn_run(&problem, &always, &ChainInit::PriorDraw).unwrap();
    let samples = out.samples.as_ref().unwrap();
    assert_eq!(samples.nrows(), 500);
    assert_eq!(samples.ncols(), 3);

    // Auto keeps small chains (3 × 500 ≪ the element budget).
    let auto = ChainConfig::new(0.5, 500, 1);
    let out = pcn_run(&problem, &auto, &ChainInit::PriorDraw).unwrap();
    assert!(out.samples.is_some());
}

#[test]
fn reducer_sees_only_post_burn_in_states() {
    let spectrum = path_spectrum();
    let problem = probit_problem(&spectrum);
    let config = ChainConfig::new(0.5, 400, 2)
        .with_burn_in(150)
        .with_storage(StoragePolicy::Always);
    let out = pcn_run(&problem, &config, &ChainInit::PriorDraw).unwrap();
    assert_eq!(out.reducer.n_samples(), 250);

    // The streamed statistics equal a recount over the stored tail states.
    let samples = out.samples.as_ref().unwrap();
    let mut recount = SummaryReducer::new(3);
    for row in samples.rows().into_iter().skip(150) {
        recount.add(row);
    }
    for (a, b) in out.reducer.mean().iter().zip(recount.mean().iter()) {
        assert_abs_diff_eq!(*a, *b, epsilon = 1e-12);
    }
    for (a, b) in out
        .reducer
        .nonneg_fraction()
        .iter()
        .zip(recount.nonneg_fraction().iter())
    {
        assert_eq!(*a, *b);
    }
}

#[test]
fn prior_chain_accepts_every_proposal() {
    // With Φ ≡ 0 the acceptance ratio is exp(0) = 1 for every proposal, so
    // the rate is exactly 1 by construction, for any β and seed.
    let spectrum = moons_spectrum(30, 5);
    let sampler = PriorSampler::new(&spectrum, PriorMode::Full).unwrap();
    for seed in [0, 7] {
        let config = ChainConfig::new(0.9, 3000, seed).with_storage(StoragePolicy::Never);
        let out = pcn_prior_chain(&sampler, &config, &ChainInit::PriorDraw).unwrap();
        assert_eq!(out.acceptance_rate, 1.0);
        assert_eq!(out.n_states, 3000);
    }
}

#[test]
fn chain_states_stay_orthogonal_to_the_trivial_mode() {
    let spectrum = moons_spectrum(40, 8);
    let problem = probit_problem(&spectrum);
    let config = ChainConfig::new(0.5, 3000, 4).with_storage(StoragePolicy::Never);
    let out = pcn_run(&problem, &config, &ChainInit::PriorDraw).unwrap();
    assert!(
        out.max_support_violation < 1e-8,
        "support violation {}",
        out.max_support_violation
    );

    // A state initializer outside the support gets its q_0 component removed.
    let shifted = Array1::from_elem(40, 1.0);
    let out = pcn_run(
        &problem,
        &ChainConfig::new(0.5, 500, 4).with_storage(StoragePolicy::Never),
        &ChainInit::State(shifted),
    )
    .unwrap();
    assert!(out.max_support_violation < 1e-8);
}

#[test]
fn convergence_checkpoints_and_early_stop() {
    let spectrum = path_spectrum();
    let problem = probit_problem(&spectrum);
    let mut config = ChainConfig::new(0.5, 4000, 6).with_storage(StoragePolicy::Never);
    config.check_period = 500;
    config.tolerance = 10.0; // coarse enough to trigger at the second checkpoint
    let out = pcn_run(&problem, &config, &ChainInit::PriorDraw).unwrap();
    assert!(!out.cumulative_means.is_empty());
    for (k, mean) in &out.cumulative_means {
        assert_eq!(k % 500, 0, "checkpoints label the produced-state count");
        assert_eq!(mean.len(), 3);
    }
    // The earliest possible verdict needs two checkpoints to compare.
    assert_eq!(out.converged_at, Some(1000));

    config.stop_on_convergence = true;
    let stopped = pcn_run(&problem, &config, &ChainInit::PriorDraw).unwrap();
    assert_eq!(stopped.n_states, 1000);
    assert_eq!(stopped.converged_at, Some(1000));
}

#[test]
fn beta_tuning_moves_the_step_toward_the_target_rate() {
    let spectrum = moons_spectrum(40, 12);
    let problem = probit_problem(&spectrum);
    // β = 1 over-proposes; tuning toward 0.9 acceptance must shrink it.
    let mut config = ChainConfig::new(1.0, 4000, 3)
        .with_storage(StoragePolicy::Never)
        .with_tuning(0.9);
    config.burn_in = Some(2000);
    let out = pcn_run(&problem, &config, &ChainInit::PriorDraw).unwrap();
    assert!(out.beta_used < 1.0);
    assert!(out.beta_used >= 1e-4);

    // Tuning off: β is reported unchanged.
    let fixed = ChainConfig::new(0.3, 500, 3).with_storage(StoragePolicy::Never);
    let out = pcn_run(&problem, &fixed, &ChainInit::PriorDraw).unwrap();
    assert_eq!(out.beta_used, 0.3);
}

#[test]
fn pcn_and_random_walk_agree_on_a_small_posterior() {
    // Two independent samplers of the same 3-node probit posterior: pCN in
    // coefficient space vs a projected random-walk Metropolis using the full
    // objective. Their score vectors must agree to Monte Carlo accuracy.
    let spectrum = path_spectrum();
    let problem = probit_problem(&spectrum);

    let pcn_cfg = ChainConfig::new(0.5, 60_000, 11)
        .with_burn_in(5_000)
        .with_storage(StoragePolicy::Never);
    let pcn_out = pcn_run(&problem, &pcn_cfg, &ChainInit::PriorDraw).unwrap();

    let mut rwm_cfg = ChainConfig::new(0.8, 60_000, 13).with_storage(StoragePolicy::Never);
    rwm_cfg.burn_in = Some(5_000);
    let rwm_out = rwm_run(&problem, &rwm_cfg, &ChainInit::PriorDraw).unwrap();

    let s_pcn = pcn_out.reducer.nonneg_fraction().mapv(|q| 2.0 * q - 1.0);
    let s_rwm = rwm_out.reducer.nonneg_fraction().mapv(|q| 2.0 * q - 1.0);
    for (a, b) in s_pcn.iter().zip(s_rwm.iter()) {
        assert_abs_diff_eq!(*a, *b, epsilon = 0.05);
    }
}

#[test]
fn approximated_mode_runs_through_the_node_space_engine() {
    // Approximated priors carry a white-noise tail, which forces the
    // node-space path; the run must still satisfy the support invariant and
    // deliver deterministic results.
    let full = moons_spectrum(40, 2);
    let mut sat = full.truncated(9).unwrap();
    sat.set_saturation(graphuq::spectrum::saturation_level(&sat, 8).unwrap())
        .unwrap();
    let sampler = PriorSampler::new(&sat, PriorMode::Approximated).unwrap();
    let model = ModelSpec::new(ModelKind::Probit, 0.5, None, sampler.scaling()).unwrap();
    let labels = LabelData::new(vec![(0, 1.0), (17, -1.0)], 0.5, 40).unwrap();
    let problem = PosteriorProblem::new(sampler, model, labels).unwrap();

    let config = ChainConfig::new(0.5, 2000, 5).with_storage(StoragePolicy::Always);
    let a = pcn_run(&problem, &config, &ChainInit::PriorDraw).unwrap();
    let b = pcn_run(&problem, &config, &ChainInit::PriorDraw).unwrap();
    assert_eq!(a.samples.as_ref().unwrap(), b.samples.as_ref().unwrap());
    assert!(a.max_support_violation < 1e-8);
    assert!(a.acceptance_rate > 0.0 && a.acceptance_rate < 1.0);
}

#[test]
fn gl_chain_tracks_real_valued_labels() {
    let spectrum = moons_spectrum(30, 6);
    let sampler = PriorSampler::new(&spectrum, PriorMode::Full).unwrap();
    let model = ModelSpec::new(ModelKind::Gl, 0.5, Some(1.0), sampler.scaling()).unwrap();
    let labels = LabelData::new(vec![(0, 0.8), (5, -0.9)], 0.5, 30).unwrap();
    let problem = PosteriorProblem::new(sampler, model, labels).unwrap();
    let config = ChainConfig::new(0.3, 4000, 7).with_storage(StoragePolicy::Never);
    let out = pcn_run(&problem, &config, &ChainInit::PriorDraw).unwrap();
    // The labeled nodes' posterior means must be pulled toward their labels.
    let mean = out.reducer.mean();
    assert!(mean[0] > 0.0);
    assert!(mean[5] < 0.0);
}
