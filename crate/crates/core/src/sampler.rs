//! The pCN Metropolis–Hastings driver over every prior mode, with step-size
//! tuning during burn-in, cumulative-average convergence checkpoints, and
//! streaming summary reducers for long chains.

use ndarray::{Array1, Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::models::{ModelKind, PosteriorProblem};
use crate::prior::PriorSampler;
use crate::spectrum::PriorMode;

/// Whether the raw chain is kept in memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StoragePolicy {
    /// Store the chain when N·M ≤ 5×10⁷ entries, stream otherwise.
    Auto,
    Always,
    Never,
}

impl StoragePolicy {
    fn keep(self, n: usize, m: usize) -> bool {
        match self {
            StoragePolicy::Auto => (n as u64) * (m as u64) <= 50_000_000,
            StoragePolicy::Always => true,
            StoragePolicy::Never => false,
        }
    }
}

/// Initial chain state.
#[derive(Debug, Clone)]
pub enum ChainInit {
    /// A fresh draw from the configured prior (the default).
    PriorDraw,
    /// An explicit state; its component outside the prior support is dropped.
    State(Array1<f64>),
}

/// Chain hyperparameters.
#[derive(Debug, Clone)]
pub struct ChainConfig {
    /// pCN step parameter β ∈ [0, 1].
    pub beta: f64,
    /// Number of retained Markov states M.
    pub n_samples: usize,
    /// Leading samples excluded from summaries (default M/10).
    pub burn_in: Option<usize>,
    pub seed: u64,
    /// Cumulative-average checkpoint period T.
    pub check_period: usize,
    /// Convergence tolerance for ‖ũ^{(kT)} − ũ^{((k−1)T)}‖.
    pub tolerance: f64,
    /// When set, β is adapted toward this acceptance fraction during burn-in
    /// (multiplied or divided by 1.1 every 100 steps, clamped to [1e-4, 1])
    /// and frozen afterwards.
    pub tune_target: Option<f64>,
    /// Treat the convergence check as a stopping rule instead of a
    /// diagnostic.
    pub stop_on_convergence: bool,
    pub storage: StoragePolicy,
}

impl ChainConfig {
    pub fn new(beta: f64, n_samples: usize, seed: u64) -> Self {
        ChainConfig {
            beta,
            n_samples,
            burn_in: None,
            seed,
            check_period: 5000,
            tolerance: 1e-3,
            tune_target: None,
            stop_on_convergence: false,
            storage: StoragePolicy::Auto,
        }
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = Some(burn_in);
        self
    }

    pub fn with_storage(mut self, storage: StoragePolicy) -> Self {
        self.storage = storage;
        self
    }

    pub fn with_tuning(mut self, target: f64) -> Self {
        self.tune_target = Some(target);
        self
    }

    pub fn effective_burn_in(&self) -> usize {
        self.burn_in.unwrap_or(self.n_samples / 10)
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::config("beta must lie in [0, 1]"));
        }
        if self.n_samples == 0 {
            return Err(Error::config("n_samples must be positive"));
        }
        if self.effective_burn_in() >= self.n_samples {
            return Err(Error::config("burn_in must be smaller than n_samples"));
        }
        if self.check_period == 0 {
            return Err(Error::config("check_period must be at least 1"));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::config("tolerance must be positive"));
        }
        if let Some(t) = self.tune_target {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::config("tune target must lie in [0, 1]"));
            }
        }
        Ok(())
    }
}

/// Streaming per-node statistics over the retained samples. Mergeable across
/// chains; merging weights by sample count automatically since raw sums are
/// kept.
#[derive(Debug, Clone)]
pub struct SummaryReducer {
    n: u64,
    nonneg: Vec<u64>,
    sum: Array1<f64>,
    sum_sq: Array1<f64>,
}

impl SummaryReducer {
    pub fn new(n_nodes: usize) -> Self {
        SummaryReducer {
            n: 0,
            nonneg: vec![0; n_nodes],
            sum: Array1::zeros(n_nodes),
            sum_sq: Array1::zeros(n_nodes),
        }
    }

    /// Record `count` consecutive occurrences of the same state.
    pub fn add_run(&mut self, u: ArrayView1<'_, f64>, count: u64) {
        if count == 0 {
            return;
        }
        self.n += count;
        let c = count as f64;
        for (j, &v) in u.iter().enumerate() {
            if v >= 0.0 {
                self.nonneg[j] += count;
            }
            self.sum[j] += c * v;
            self.sum_sq[j] += c * v * v;
        }
    }

    pub fn add(&mut self, u: ArrayView1<'_, f64>) {
        self.add_run(u, 1);
    }

    pub fn merge(&mut self, other: &SummaryReducer) {
        assert_eq!(self.nonneg.len(), other.nonneg.len());
        self.n += other.n;
        for (a, b) in self.nonneg.iter_mut().zip(&other.nonneg) {
            *a += b;
        }
        self.sum += &other.sum;
        self.sum_sq += &other.sum_sq;
    }

    pub fn n_samples(&self) -> u64 {
        self.n
    }

    pub fn n_nodes(&self) -> usize {
        self.nonneg.len()
    }

    /// Fraction of samples with u_j ≥ 0, per node.
    pub fn nonneg_fraction(&self) -> Array1<f64> {
        let n = self.n.max(1) as f64;
        Array1::from_iter(self.nonneg.iter().map(|&c| c as f64 / n))
    }

    /// Per-node sample mean.
    pub fn mean(&self) -> Array1<f64> {
        let n = self.n.max(1) as f64;
        &self.sum / n
    }

    /// Per-node sample variance (population convention).
    pub fn variance(&self) -> Array1<f64> {
        let n = self.n.max(1) as f64;
        let mean = self.mean();
        let second = &self.sum_sq / n;
        (second - &(&mean * &mean)).mapv(|v| v.max(0.0))
    }
}

/// Result of a pCN run.
#[derive(Debug, Clone)]
pub struct ChainOutput {
    /// The raw chain (retained states × nodes) when storage allows.
    pub samples: Option<Array2<f64>>,
    pub acceptance_rate: f64,
    /// First checkpoint kT at which the cumulative-average criterion held.
    pub converged_at: Option<usize>,
    /// Checkpointed cumulative averages (sample index, ũ).
    pub cumulative_means: Vec<(usize, Array1<f64>)>,
    /// Post-burn-in streaming statistics.
    pub reducer: SummaryReducer,
    /// β in effect after tuning (equals the configured β when tuning is off).
    pub beta_used: f64,
    /// Number of states actually produced (smaller than n_samples only when
    /// the convergence stopping rule fires).
    pub n_states: usize,
    /// Largest |⟨u, q_0⟩| / ‖u‖ seen across accepted states.
    pub max_support_violation: f64,
}

/// Step-size tuner: multiplicative adaptation toward a target acceptance
/// fraction over 100-step windows, active only during burn-in.
struct BetaTuner {
    target: f64,
    window_hits: usize,
    window_len: usize,
}

impl BetaTuner {
    const WINDOW: usize = 100;
    const FACTOR: f64 = 1.1;
    const LO: f64 = 1e-4;
    const HI: f64 = 1.0;

    fn new(target: f64) -> Self {
        BetaTuner {
            target,
            window_hits: 0,
            window_len: 0,
        }
    }

    fn record(&mut self, accepted: bool, beta: &mut f64) {
        self.window_len += 1;
        if accepted {
            self.window_hits += 1;
        }
        if self.window_len == Self::WINDOW {
            let rate = self.window_hits as f64 / Self::WINDOW as f64;
            if rate >= self.target {
                *beta = (*beta * Self::FACTOR).min(Self::HI);
            } else {
                *beta = (*beta / Self::FACTOR).max(Self::LO);
            }
            self.window_len = 0;
            self.window_hits = 0;
        }
    }
}

/// Run a pCN chain on a posterior problem.
///
/// The proposal is `w = √(1−β²)·u + β·ξ` with ξ a prior draw in the
/// configured mode; acceptance probability is `min{1, exp(Φ(u) − Φ(w))}`.
/// Identical (seed, config, problem) triples produce identical outputs.
///
/// Chains whose misfit reads only labeled nodes (probit, level-set) and whose
/// prior has no white-noise tail run in Karhunen-Loève coefficient space,
/// which makes the per-step cost proportional to the number of labels rather
/// than the number of nodes; the node-space path handles the rest. Both paths
/// consume randomness in the same per-step order (coefficient draws, tail
/// draws if any, then the acceptance uniform).
pub fn pcn_run(
    problem: &PosteriorProblem<'_>,
    config: &ChainConfig,
    init: &ChainInit,
) -> Result<ChainOutput> {
    config.validate()?;
    let coefficient_path = problem.model().kind != ModelKind::Gl
        && problem.prior_mode() != PriorMode::Approximated;
    if coefficient_path {
        run_coefficient_space(problem, config, init)
    } else {
        run_node_space(problem, config, init)
    }
}

/// Shared bookkeeping: counters, checkpoints, storage, reducer.
struct ChainTracker {
    burn_in: usize,
    check_period: usize,
    tolerance: f64,
    stop_on_convergence: bool,
    reducer: SummaryReducer,
    pending_kept: u64,
    cum_sum: Array1<f64>,
    pending_cum: u64,
    cumulative_means: Vec<(usize, Array1<f64>)>,
    converged_at: Option<usize>,
    samples: Option<Vec<f64>>,
    n_nodes: usize,
    accepted: usize,
    max_support_violation: f64,
}

impl ChainTracker {
    fn new(n_nodes: usize, config: &ChainConfig) -> Self {
        let store = config.storage.keep(n_nodes, config.n_samples);
        ChainTracker {
            burn_in: config.effective_burn_in(),
            check_period: config.check_period,
            tolerance: config.tolerance,
            stop_on_convergence: config.stop_on_convergence,
            reducer: SummaryReducer::new(n_nodes),
            pending_kept: 0,
            cum_sum: Array1::zeros(n_nodes),
            pending_cum: 0,
            cumulative_means: Vec::new(),
            converged_at: None,
            samples: store.then(|| Vec::with_capacity(n_nodes * config.n_samples)),
            n_nodes,
            accepted: 0,
            max_support_violation: 0.0,
        }
    }

    /// Push pending run-length counts onto the reducer and cumulative sum.
    fn flush(&mut self, state: ArrayView1<'_, f64>) {
        if self.pending_kept > 0 {
            self.reducer.add_run(state, self.pending_kept);
            self.pending_kept = 0;
        }
        if self.pending_cum > 0 {
            let c = self.pending_cum as f64;
            self.cum_sum.zip_mut_with(&state, |s, &v| *s += c * v);
            self.pending_cum = 0;
        }
    }

    /// Record the state produced at step `k` (0-based); returns true when the
    /// run should stop early.
    fn record(&mut self, k: usize, state: ArrayView1<'_, f64>) -> bool {
        if let Some(buf) = self.samples.as_mut() {
            buf.extend(state.iter());
        }
        if k >= self.burn_in {
            self.pending_kept += 1;
        }
        self.pending_cum += 1;
        if (k + 1) % self.check_period == 0 {
            self.flush(state);
            let produced = (k + 1) as f64;
            let mean = &self.cum_sum / produced;
            if let Some((_, prev)) = self.cumulative_means.last() {
                if self.converged_at.is_none() {
                    let diff = (&mean - prev).mapv(|d| d * d).sum().sqrt();
                    if diff <= self.tolerance {
                        self.converged_at = Some(k + 1);
                    }
                }
            }
            self.cumulative_means.push((k + 1, mean));
            if self.stop_on_convergence && self.converged_at.is_some() {
                return true;
            }
        }
        false
    }

    fn finish(
        mut self,
        state: ArrayView1<'_, f64>,
        n_states: usize,
        n_proposals: usize,
        beta_used: f64,
    ) -> ChainOutput {
        self.flush(state);
        let samples = self.samples.take().map(|buf| {
            let rows = buf.len() / self.n_nodes;
            Array2::from_shape_vec((rows, self.n_nodes), buf).expect("row-major chain buffer")
        });
        ChainOutput {
            samples,
            acceptance_rate: self.accepted as f64 / n_proposals.max(1) as f64,
            converged_at: self.converged_at,
            cumulative_means: self.cumulative_means,
            reducer: self.reducer,
            beta_used,
            n_states,
            max_support_violation: self.max_support_violation,
        }
    }

    fn note_support(&mut self, state: ArrayView1<'_, f64>, q0: ArrayView1<'_, f64>) {
        let norm = state.dot(&state).sqrt();
        if norm > 0.0 {
            let violation = state.dot(&q0).abs() / norm;
            if violation > self.max_support_violation {
                self.max_support_violation = violation;
            }
        }
    }
}

fn nan_abort(step: usize, phi_u: f64, phi_w: f64) -> Error {
    Error::numerical(format!(
        "NaN in acceptance ratio at step {step}: Phi(u) = {phi_u}, Phi(w) = {phi_w}; \
         aborting chain"
    ))
}

fn run_coefficient_space(
    problem: &PosteriorProblem<'_>,
    config: &ChainConfig,
    init: &ChainInit,
) -> Result<ChainOutput> {
    let sampler = problem.sampler();
    let n = sampler.n_nodes();
    let m1 = sampler.n_coeffs();
    let coeff_std = sampler.coeff_std().clone();
    let basis = sampler.active_basis();
    let q0 = problem.spectrum().eigenvector(0);

    // Rows of the active basis at labeled nodes: observed values of a state
    // follow from its coefficients by a small matrix-vector product.
    let labels = problem.labels();
    let mut obs_basis = Array2::zeros((labels.len(), m1));
    for (row, &j) in labels.nodes().iter().enumerate() {
        obs_basis.row_mut(row).assign(&basis.row(j));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut a = match init {
        ChainInit::PriorDraw => sampler.sample_coefficients(&mut rng),
        ChainInit::State(u0) => {
            if u0.len() != n {
                return Err(Error::config("initial state has the wrong dimension"));
            }
            basis.t().dot(u0)
        }
    };
    let u_obs = obs_basis.dot(&a);
    let mut phi_u = problem
        .phi_observed(u_obs.view())
        .expect("coefficient path only runs for observed-node misfits");
    if phi_u.is_nan() {
        return Err(nan_abort(0, phi_u, f64::NAN));
    }

    let mut u_full = basis.dot(&a);
    let mut tracker = ChainTracker::new(n, config);
    tracker.note_support(u_full.view(), q0);

    let mut beta = config.beta;
    let mut tuner = config.tune_target.map(BetaTuner::new);
    let burn_in = config.effective_burn_in();

    let mut z = Array1::zeros(m1);
    let mut n_states = 0;
    for k in 0..config.n_samples {
        for zi in z.iter_mut() {
            *zi = rng.sample::<f64, _>(StandardNormal);
        }
        let r: f64 = rng.gen();

        let sqb = (1.0 - beta * beta).sqrt();
        let w_coef = Array1::from_iter(
            a.iter()
                .zip(z.iter().zip(coeff_std.iter()))
                .map(|(&ai, (&zi, &sd))| sqb * ai + beta * sd * zi),
        );
        let w_obs = obs_basis.dot(&w_coef);
        let phi_w = problem
            .phi_observed(w_obs.view())
            .expect("coefficient path");
        let dphi = phi_u - phi_w;
        if dphi.is_nan() {
            return Err(nan_abort(k, phi_u, phi_w));
        }
        let accepted = dphi >= 0.0 || r < dphi.exp();
        if accepted {
            tracker.flush(u_full.view());
            a = w_coef;
            phi_u = phi_w;
            u_full = basis.dot(&a);
            tracker.accepted += 1;
            tracker.note_support(u_full.view(), q0);
        }
        if let Some(t) = tuner.as_mut() {
            if k < burn_in {
                t.record(accepted, &mut beta);
            }
        }
        n_states = k + 1;
        if tracker.record(k, u_full.view()) {
            break;
        }
    }
    Ok(tracker.finish(u_full.view(), n_states, n_states, beta))
}

fn run_node_space(
    problem: &PosteriorProblem<'_>,
    config: &ChainConfig,
    init: &ChainInit,
) -> Result<ChainOutput> {
    let sampler = problem.sampler();
    let n = sampler.n_nodes();
    let q0 = problem.spectrum().eigenvector(0);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut u = match init {
        ChainInit::PriorDraw => sampler.sample(&mut rng),
        ChainInit::State(u0) => {
            if u0.len() != n {
                return Err(Error::config("initial state has the wrong dimension"));
            }
            // Drop any q_0 component so the chain starts inside the support.
            let mut v = u0.clone();
            let c0 = v.dot(&q0);
            v.zip_mut_with(&q0.to_owned(), |vi, &qi| *vi -= c0 * qi);
            v
        }
    };
    let mut phi_u = problem.phi(u.view());
    if phi_u.is_nan() {
        return Err(nan_abort(0, phi_u, f64::NAN));
    }

    let mut tracker = ChainTracker::new(n, config);
    tracker.note_support(u.view(), q0);

    let mut beta = config.beta;
    let mut tuner = config.tune_target.map(BetaTuner::new);
    let burn_in = config.effective_burn_in();

    let mut n_states = 0;
    for k in 0..config.n_samples {
        let xi = sampler.sample(&mut rng);
        let r: f64 = rng.gen();

        let sqb = (1.0 - beta * beta).sqrt();
        let w = Array1::from_iter(
            u.iter()
                .zip(xi.iter())
                .map(|(&ui, &xii)| sqb * ui + beta * xii),
        );
        let phi_w = problem.phi(w.view());
        let dphi = phi_u - phi_w;
        if dphi.is_nan() {
            return Err(nan_abort(k, phi_u, phi_w));
        }
        let accepted = dphi >= 0.0 || r < dphi.exp();
        if accepted {
            tracker.flush(u.view());
            u = w;
            phi_u = phi_w;
            tracker.accepted += 1;
            tracker.note_support(u.view(), q0);
        }
        if let Some(t) = tuner.as_mut() {
            if k < burn_in {
                t.record(accepted, &mut beta);
            }
        }
        n_states = k + 1;
        if tracker.record(k, u.view()) {
            break;
        }
    }
    Ok(tracker.finish(u.view(), n_states, n_states, beta))
}

/// pCN chain with zero misfit: every proposal is accepted (ΔΦ = 0 exactly),
/// so the chain explores the prior itself. Used to validate that the proposal
/// preserves the prior; the acceptance uniform is still drawn each step so
/// the randomness schedule matches the general engine.
pub fn pcn_prior_chain(
    sampler: &PriorSampler<'_>,
    config: &ChainConfig,
    init: &ChainInit,
) -> Result<ChainOutput> {
    config.validate()?;
    let n = sampler.n_nodes();
    let q0 = sampler.spectrum().eigenvector(0);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut u = match init {
        ChainInit::PriorDraw => sampler.sample(&mut rng),
        ChainInit::State(u0) => {
            if u0.len() != n {
                return Err(Error::config("initial state has the wrong dimension"));
            }
            u0.clone()
        }
    };

    let mut tracker = ChainTracker::new(n, config);
    tracker.note_support(u.view(), q0);

    let mut beta = config.beta;
    let mut tuner = config.tune_target.map(BetaTuner::new);
    let burn_in = config.effective_burn_in();

    let mut n_states = 0;
    for k in 0..config.n_samples {
        let xi = sampler.sample(&mut rng);
        let _r: f64 = rng.gen();

        let sqb = (1.0 - beta * beta).sqrt();
        tracker.flush(u.view());
        u.zip_mut_with(&xi, |ui, &xii| *ui = sqb * *ui + beta * xii);
        tracker.accepted += 1;
        tracker.note_support(u.view(), q0);
        if let Some(t) = tuner.as_mut() {
            if k < burn_in {
                t.record(true, &mut beta);
            }
        }
        n_states = k + 1;
        if tracker.record(k, u.view()) {
            break;
        }
    }
    Ok(tracker.finish(u.view(), n_states, n_states, beta))
}

/// Plain random-walk Metropolis over the same posterior, used as a baseline
/// in dimension-robustness comparisons. The proposal adds isotropic noise
/// projected onto the prior support, and the acceptance ratio must therefore
/// include the prior density through the full objective J.
pub fn rwm_run(
    problem: &PosteriorProblem<'_>,
    config: &ChainConfig,
    init: &ChainInit,
) -> Result<ChainOutput> {
    config.validate()?;
    let sampler = problem.sampler();
    let n = sampler.n_nodes();
    let q0 = problem.spectrum().eigenvector(0).to_owned();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut u = match init {
        ChainInit::PriorDraw => sampler.sample(&mut rng),
        ChainInit::State(u0) => u0.clone(),
    };
    let mut j_u = problem.objective(u.view())?;

    let mut tracker = ChainTracker::new(n, config);
    let beta = config.beta;
    let mut n_states = 0;
    for k in 0..config.n_samples {
        let mut eta: Array1<f64> =
            Array1::from_iter((0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let c0 = eta.dot(&q0);
        eta.zip_mut_with(&q0, |e, &q| *e -= c0 * q);
        let r: f64 = rng.gen();

        let w = &u + &(&eta * beta);
        let j_w = problem.objective(w.view())?;
        let dj = j_u - j_w;
        if dj.is_nan() {
            return Err(nan_abort(k, j_u, j_w));
        }
        if dj >= 0.0 || r < dj.exp() {
            tracker.flush(u.view());
            u = w;
            j_u = j_w;
            tracker.accepted += 1;
        }
        n_states = k + 1;
        if tracker.record(k, u.view()) {
            break;
        }
    }
    Ok(tracker.finish(u.view(), n_states, n_states, beta))
}
