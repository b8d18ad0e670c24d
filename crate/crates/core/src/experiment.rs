//! Repeated-trial experiment drivers: the canonical two-moons pipeline,
//! parameter sweeps of the posterior label variance, and the
//! projection-versus-approximation fidelity comparison.

use ndarray::Array1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{gen_two_moons, subsample_labels, LabelNoise, SubsampleScheme};
use crate::error::{Error, Result};
use crate::graph::{build_weights_self_tuning, normalized_laplacian};
use crate::models::{LabelData, ModelKind, ModelSpec, PosteriorProblem};
use crate::prior::PriorSampler;
use crate::sampler::{pcn_run, ChainConfig, ChainInit, StoragePolicy};
use crate::spectrum::{
    eigendecompose, saturation_level, LaplacianSpectrum, PriorMode, Truncation,
};
use crate::uq::UQSummary;

/// Mix a base seed with context indices so every trial, grid point, and
/// chain gets an independent, reproducible stream (splitmix64 chaining).
pub fn derive_seed(base: u64, salt: &[u64]) -> u64 {
    let mut state = base;
    for &s in salt {
        state = state.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(s);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        state = z ^ (z >> 31);
    }
    state
}

/// Everything one trial of the canonical pipeline needs: two-moons data, a
/// self-tuning graph, a truncated spectrum, revealed labels, and a pCN chain.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialPipeline {
    pub n: usize,
    pub dim: usize,
    pub sigma: f64,
    /// Self-tuning neighborhood size K.
    pub knn: usize,
    /// Number of non-trivial modes retained (the stored spectrum holds
    /// ell + 1 pairs including the trivial one). Ignored in full mode.
    pub ell: usize,
    pub mode: PriorMode,
    /// Tail saturation level for the approximated mode; defaults to the
    /// largest retained non-trivial eigenvalue.
    pub lambda_bar: Option<f64>,
    pub gamma: f64,
    /// Double-well width, required when a Ginzburg-Landau chain is run.
    pub epsilon: Option<f64>,
    pub labels: SubsampleScheme,
    pub label_noise: LabelNoise,
    pub beta: f64,
    pub n_samples: usize,
    pub burn_in: Option<usize>,
}

impl TrialPipeline {
    /// The two-moons defaults used throughout: N = 2000, d = 100, σ = 0.06,
    /// K = 10, 150 retained modes, 3% labels, γ = 0.1, β = 0.3.
    pub fn canonical() -> Self {
        TrialPipeline {
            n: 2000,
            dim: 100,
            sigma: 0.06,
            knn: 10,
            ell: 150,
            mode: PriorMode::Projected,
            lambda_bar: None,
            gamma: 0.1,
            epsilon: None,
            labels: SubsampleScheme::Fraction(0.03),
            label_noise: LabelNoise::Exact,
            beta: 0.3,
            n_samples: 100_000,
            burn_in: None,
        }
    }

    fn truncation(&self) -> Truncation {
        match self.mode {
            PriorMode::Full => Truncation::Full,
            _ => Truncation::Count(self.ell + 1),
        }
    }
}

/// Dataset, spectrum, and labels for one trial; chains for several models can
/// be run against the same instance.
pub struct TrialInstance {
    pub truth: Array1<f64>,
    pub spectrum: LaplacianSpectrum,
    pub labels: LabelData,
}

/// Build the per-trial instance: moons → self-tuning graph → Laplacian →
/// truncated spectrum (with tail level in approximated mode) → labels.
pub fn build_trial(p: &TrialPipeline, data_seed: u64, label_seed: u64) -> Result<TrialInstance> {
    let dataset = gen_two_moons(p.n, p.dim, p.sigma, data_seed)?;
    let truth = dataset.truth.expect("generator always sets truth");
    let graph = build_weights_self_tuning(&dataset.features, p.knn)?;
    let laplacian = normalized_laplacian(&graph)?;
    let mut spectrum = eigendecompose(&laplacian, p.truncation())?;
    if p.mode == PriorMode::Approximated {
        let bar = match p.lambda_bar {
            Some(v) => v,
            None => saturation_level(&spectrum, p.ell)?,
        };
        spectrum.set_saturation(bar)?;
    }
    let labels = subsample_labels(truth.view(), p.labels, p.label_noise, p.gamma, label_seed)?;
    Ok(TrialInstance {
        truth,
        spectrum,
        labels,
    })
}

/// Run one model's chain on a built instance and summarize it.
pub fn run_model_chain(
    p: &TrialPipeline,
    instance: &TrialInstance,
    kind: ModelKind,
    chain_seed: u64,
) -> Result<(UQSummary, f64)> {
    let sampler = PriorSampler::new(&instance.spectrum, p.mode)?;
    let scaling = sampler.scaling();
    let model = ModelSpec::new(kind, p.gamma, p.epsilon, scaling)?;
    let problem = PosteriorProblem::new(sampler, model, instance.labels.clone())?;
    let mut config = ChainConfig::new(p.beta, p.n_samples, chain_seed)
        .with_storage(StoragePolicy::Never);
    config.burn_in = p.burn_in;
    let out = pcn_run(&problem, &config, &ChainInit::PriorDraw)?;
    let summary = UQSummary::from_chain(&out, kind)?;
    Ok((summary, out.acceptance_rate))
}

/// Which pipeline knob a sweep varies.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    /// Feature noise σ.
    Sigma(Vec<f64>),
    /// Fraction of nodes revealed as labels.
    Fraction(Vec<f64>),
    /// Observation noise γ.
    Gamma(Vec<f64>),
}

impl SweepAxis {
    pub fn values(&self) -> &[f64] {
        match self {
            SweepAxis::Sigma(v) | SweepAxis::Fraction(v) | SweepAxis::Gamma(v) => v,
        }
    }

    fn apply(&self, base: &TrialPipeline, x: f64) -> TrialPipeline {
        let mut p = base.clone();
        match self {
            SweepAxis::Sigma(_) => p.sigma = x,
            SweepAxis::Fraction(_) => p.labels = SubsampleScheme::Fraction(x),
            SweepAxis::Gamma(_) => p.gamma = x,
        }
        p
    }
}

/// A grid × trials × models study of the mean posterior variance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepProtocol {
    pub pipeline: TrialPipeline,
    pub axis: SweepAxis,
    pub models: Vec<ModelKind>,
    pub trials: usize,
    pub seed: u64,
}

/// One chain's result within a sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    /// The varied parameter's value.
    pub x: f64,
    pub trial: usize,
    pub model: ModelKind,
    pub mean_variance: f64,
    pub acceptance_rate: f64,
}

/// Run the full grid in parallel over (grid point, trial) tasks. Seeds are
/// derived from (seed, grid index, trial), so results are identical no matter
/// how tasks are scheduled; rows come back grid-major, trial-minor, model
/// order as configured.
pub fn run_sweep(protocol: &SweepProtocol) -> Result<Vec<SweepRow>> {
    if protocol.models.is_empty() {
        return Err(Error::config("sweep needs at least one model"));
    }
    if protocol.trials == 0 {
        return Err(Error::config("sweep needs at least one trial"));
    }
    let values = protocol.axis.values();
    if values.is_empty() {
        return Err(Error::config("sweep grid must be nonempty"));
    }
    let tasks: Vec<(usize, usize)> = (0..values.len())
        .flat_map(|gi| (0..protocol.trials).map(move |t| (gi, t)))
        .collect();
    let nested: Vec<Vec<SweepRow>> = tasks
        .into_par_iter()
        .map(|(gi, trial)| {
            let x = values[gi];
            let p = protocol.axis.apply(&protocol.pipeline, x);
            let data_seed = derive_seed(protocol.seed, &[1, gi as u64, trial as u64]);
            let label_seed = derive_seed(protocol.seed, &[2, gi as u64, trial as u64]);
            let instance = build_trial(&p, data_seed, label_seed)?;
            protocol
                .models
                .iter()
                .enumerate()
                .map(|(ki, &kind)| {
                    let chain_seed =
                        derive_seed(protocol.seed, &[3, gi as u64, trial as u64, ki as u64]);
                    let (summary, acceptance_rate) =
                        run_model_chain(&p, &instance, kind, chain_seed)?;
                    Ok(SweepRow {
                        x,
                        trial,
                        model: kind,
                        mean_variance: summary.mean_variance,
                        acceptance_rate,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(nested.into_iter().flatten().collect())
}

/// Trial-averaged sweep curve for one model, in grid order.
pub fn averaged_curve(rows: &[SweepRow], model: ModelKind, grid: &[f64]) -> Vec<f64> {
    grid.iter()
        .map(|&x| {
            let (sum, count) = rows
                .iter()
                .filter(|r| r.model == model && r.x == x)
                .fold((0.0, 0usize), |(s, c), r| (s + r.mean_variance, c + 1));
            sum / count.max(1) as f64
        })
        .collect()
}

/// Spearman rank correlation with tie-averaged ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "spearman needs paired inputs");
    let rx = tied_ranks(x);
    let ry = tied_ranks(y);
    pearson(&rx, &ry)
}

fn tied_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap_or(std::cmp::Ordering::Equal));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

/// Fidelity study: how close projected and approximated posteriors come to
/// the full-prior posterior, measured by the mean absolute score gap.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FidelityProtocol {
    pub pipeline: TrialPipeline,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FidelityOutcome {
    /// Trial-averaged mean |s − s_full| under the projected prior.
    pub projected_gap: f64,
    /// Same under the approximated prior (projection plus saturated tail).
    pub approximated_gap: f64,
}

/// Run probit chains under full, projected, and approximated priors on the
/// same data and compare scores against the full-prior reference. One full
/// eigendecomposition per trial serves all three modes.
pub fn fidelity_experiment(protocol: &FidelityProtocol) -> Result<FidelityOutcome> {
    if protocol.trials == 0 {
        return Err(Error::config("fidelity study needs at least one trial"));
    }
    let p = &protocol.pipeline;
    let gaps: Vec<(f64, f64)> = (0..protocol.trials)
        .into_par_iter()
        .map(|trial| {
            let data_seed = derive_seed(protocol.seed, &[1, trial as u64]);
            let label_seed = derive_seed(protocol.seed, &[2, trial as u64]);

            let mut full_p = p.clone();
            full_p.mode = PriorMode::Full;
            let instance = build_trial(&full_p, data_seed, label_seed)?;
            let full_spectrum = &instance.spectrum;

            let truncated = full_spectrum.truncated(p.ell + 1)?;
            let bar = match p.lambda_bar {
                Some(v) => v,
                None => saturation_level(&truncated, p.ell)?,
            };
            let mut saturated = truncated.clone();
            saturated.set_saturation(bar)?;

            let run = |spectrum: &LaplacianSpectrum, mode: PriorMode, salt: u64| {
                let sampler = PriorSampler::new(spectrum, mode)?;
                let model =
                    ModelSpec::new(ModelKind::Probit, p.gamma, p.epsilon, sampler.scaling())?;
                let problem = PosteriorProblem::new(sampler, model, instance.labels.clone())?;
                let mut config =
                    ChainConfig::new(p.beta, p.n_samples, derive_seed(protocol.seed, &[3, trial as u64, salt]))
                        .with_storage(StoragePolicy::Never);
                config.burn_in = p.burn_in;
                let out = pcn_run(&problem, &config, &ChainInit::PriorDraw)?;
                Ok::<_, Error>(UQSummary::from_chain(&out, ModelKind::Probit)?.scores)
            };

            let s_full = run(full_spectrum, PriorMode::Full, 0)?;
            let s_proj = run(&truncated, PriorMode::Projected, 1)?;
            let s_approx = run(&saturated, PriorMode::Approximated, 2)?;

            let gap = |s: &Array1<f64>| (s - &s_full).mapv(f64::abs).mean().unwrap_or(0.0);
            Ok((gap(&s_proj), gap(&s_approx)))
        })
        .collect::<Result<Vec<_>>>()?;
    let t = gaps.len() as f64;
    Ok(FidelityOutcome {
        projected_gap: gaps.iter().map(|g| g.0).sum::<f64>() / t,
        approximated_gap: gaps.iter().map(|g| g.1).sum::<f64>() / t,
    })
}
