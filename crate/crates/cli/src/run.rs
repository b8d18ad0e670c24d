//! Command implementations: argument validation (reporting every violation
//! at once), artifact IO, and progress logging to standard error.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use graphuq::data::{
    self, gen_two_moons, subsample_labels, ChainSummaryRecord, LabelNoise, MapRecord,
    SubsampleScheme,
};
use graphuq::experiment::{
    averaged_curve, fidelity_experiment, run_sweep, spearman, FidelityProtocol, SweepProtocol,
};
use graphuq::graph::{
    build_weights_cosine, build_weights_knn, build_weights_rbf, build_weights_self_tuning,
    normalized_laplacian, WeightedGraph,
};
use graphuq::models::{ModelKind, ModelSpec, PosteriorProblem};
use graphuq::optimizer::{map_estimate, FlowConfig, FlowInit};
use graphuq::sampler::{pcn_run, ChainConfig, ChainInit, ChainOutput, SummaryReducer};
use graphuq::spectrum::{eigendecompose, saturation_level, LaplacianSpectrum, Truncation};
use graphuq::uq::UQSummary;
use graphuq::{Error, FeatureSet, PriorMode, PriorSampler, Result};

use crate::{
    GenMoonsArgs, GraphArgs, MapArgs, MethodArg, ModelArg, SampleArgs, SpectrumArgs,
    SummarizeArgs, SweepArgs, WeightFormatArg,
};

/// Resolve the output directory: flag, then $GRAPHUQ_OUT_DIR, then ".".
fn resolve_out_dir(flag: Option<PathBuf>) -> Result<PathBuf> {
    let dir = flag
        .or_else(|| std::env::var_os("GRAPHUQ_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)
        .map_err(|e| Error::io(format!("cannot create output directory {}: {e}", dir.display())))?;
    Ok(dir)
}

/// Reject with every collected violation, or proceed if there are none.
fn check(violations: Vec<String>) -> Result<()> {
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Error::config(format!(
            "invalid configuration:\n  - {}",
            violations.join("\n  - ")
        )))
    }
}

fn log(msg: std::fmt::Arguments<'_>) {
    eprintln!("[graphuq] {msg}");
}

pub fn gen_moons(args: GenMoonsArgs) -> Result<()> {
    let mut violations = Vec::new();
    if args.n < 2 {
        violations.push("--n must be at least 2".into());
    }
    if args.dim < 2 {
        violations.push("--dim must be at least 2".into());
    }
    if !(args.sigma >= 0.0) {
        violations.push("--sigma must be nonnegative".into());
    }
    if !(0.0..=1.0).contains(&args.flip) {
        violations.push("--flip must lie in [0, 1]".into());
    }
    if let Some(f) = args.label_fraction {
        if !(f > 0.0 && f <= 1.0) {
            violations.push("--label-fraction must lie in (0, 1]".into());
        }
    }
    if let Some(c) = args.label_count {
        if c == 0 || c > args.n {
            violations.push(format!("--label-count must lie in [1, {}]", args.n));
        }
    }
    let per_class = match args.per_class.as_deref() {
        None => None,
        Some(text) => match parse_per_class(text) {
            Ok(pair) => Some(pair),
            Err(msg) => {
                violations.push(msg);
                None
            }
        },
    };
    check(violations)?;

    let started = Instant::now();
    let dir = resolve_out_dir(args.out_dir)?;
    let dataset = gen_two_moons(args.n, args.dim, args.sigma, args.seed)?;
    let truth = dataset.truth.as_ref().expect("generator sets truth");
    data::save_features_csv(dir.join("features.csv"), &dataset.features)?;
    data::save_vector_csv(dir.join("truth.csv"), truth.view())?;
    log(format_args!(
        "wrote features.csv and truth.csv (n={}, dim={}, sigma={}) in {:.2}s",
        args.n,
        args.dim,
        args.sigma,
        started.elapsed().as_secs_f64()
    ));

    let scheme = args
        .label_fraction
        .map(SubsampleScheme::Fraction)
        .or(args.label_count.map(SubsampleScheme::Count))
        .or(per_class.map(|(p, n)| SubsampleScheme::PerClass(p, n)));
    if let Some(scheme) = scheme {
        let noise = if args.flip > 0.0 {
            LabelNoise::Flip(args.flip)
        } else {
            LabelNoise::Exact
        };
        // The label CSV carries no noise level; γ is bound at model time.
        let labels = subsample_labels(truth.view(), scheme, noise, 1.0, args.label_seed)?;
        data::save_labels_csv(dir.join("labels.csv"), &labels)?;
        log(format_args!("wrote labels.csv ({} labels)", labels.len()));
    }
    Ok(())
}

fn parse_per_class(text: &str) -> std::result::Result<(usize, usize), String> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 2 {
        return Err("--per-class must be \"pos,neg\"".into());
    }
    let pos = parts[0]
        .trim()
        .parse()
        .map_err(|_| "--per-class: malformed positive quota".to_string())?;
    let neg = parts[1]
        .trim()
        .parse()
        .map_err(|_| "--per-class: malformed negative quota".to_string())?;
    Ok((pos, neg))
}

fn build_graph(
    features: &FeatureSet,
    method: MethodArg,
    k: usize,
    tau: Option<f64>,
) -> Result<WeightedGraph> {
    match method {
        MethodArg::SelfTuning => build_weights_self_tuning(features, k),
        MethodArg::Knn => build_weights_knn(features, k),
        MethodArg::Rbf => build_weights_rbf(features, tau.expect("validated")),
        MethodArg::Cosine => build_weights_cosine(features),
    }
}

fn validate_graph_params(
    method: MethodArg,
    k: usize,
    tau: Option<f64>,
    violations: &mut Vec<String>,
) {
    match method {
        MethodArg::SelfTuning | MethodArg::Knn => {
            if k == 0 {
                violations.push("--k must be at least 1".into());
            }
        }
        MethodArg::Rbf => match tau {
            None => violations.push("--tau is required for the rbf graph".into()),
            Some(t) if !(t > 0.0) => violations.push("--tau must be positive".into()),
            _ => {}
        },
        MethodArg::Cosine => {}
    }
}

pub fn graph(args: GraphArgs) -> Result<()> {
    let mut violations = Vec::new();
    validate_graph_params(args.method, args.k, args.tau, &mut violations);
    check(violations)?;

    let started = Instant::now();
    let dir = resolve_out_dir(args.out_dir)?;
    let features = data::load_features_csv(&args.features)?;
    let graph = build_graph(&features, args.method, args.k, args.tau)?;
    let dense = graph.to_dense_weights();
    let path = match args.format {
        WeightFormatArg::Dense => {
            let p = dir.join("weights.csv");
            data::save_weights_dense_csv(&p, dense.view())?;
            p
        }
        WeightFormatArg::Coo => {
            let p = dir.join("weights_coo.csv");
            data::save_weights_coo_csv(&p, dense.view())?;
            p
        }
    };
    log(format_args!(
        "wrote {} ({} nodes, connected) in {:.2}s",
        path.display(),
        graph.n_nodes(),
        started.elapsed().as_secs_f64()
    ));
    Ok(())
}

pub fn spectrum(args: SpectrumArgs) -> Result<()> {
    let mut violations = Vec::new();
    validate_graph_params(args.method, args.k, args.tau, &mut violations);
    if !args.full && args.ell == 0 {
        violations.push("--ell must be at least 1".into());
    }
    if let Some(l) = args.lambda_bar {
        if !(l > 0.0) {
            violations.push("--lambda-bar must be positive".into());
        }
    }
    check(violations)?;

    let started = Instant::now();
    let dir = resolve_out_dir(args.out_dir)?;
    let features = data::load_features_csv(&args.features)?;
    let graph = build_graph(&features, args.method, args.k, args.tau)?;
    let laplacian = normalized_laplacian(&graph)?;
    let truncation = if args.full {
        Truncation::Full
    } else {
        Truncation::Count(args.ell + 1)
    };
    let mut spectrum = eigendecompose(&laplacian, truncation)?;
    if let Some(bar) = args.lambda_bar {
        spectrum.set_saturation(bar)?;
    } else if args.saturate {
        let ell = spectrum.n_pairs() - 1;
        spectrum.set_saturation(saturation_level(&spectrum, ell)?)?;
    }
    let path = match args.format {
        crate::SpectrumFormatArg::Bin => {
            let p = dir.join("spectrum.bin");
            data::save_spectrum(&p, &spectrum)?;
            p
        }
        crate::SpectrumFormatArg::Csv => {
            if spectrum.saturation().is_some() {
                log(format_args!(
                    "note: the CSV spectrum format does not carry the tail level"
                ));
            }
            let p = dir.join("spectrum.csv");
            data::save_spectrum_csv(&p, &spectrum)?;
            p
        }
    };
    log(format_args!(
        "wrote {} ({} of {} pairs, lambda_1={:.4e}) in {:.2}s",
        path.display(),
        spectrum.n_pairs(),
        spectrum.n_nodes(),
        spectrum.eigenvalues()[1],
        started.elapsed().as_secs_f64()
    ));
    Ok(())
}

fn load_spectrum_any(path: &Path) -> Result<LaplacianSpectrum> {
    if path.extension().is_some_and(|e| e == "csv") {
        data::load_spectrum_csv(path)
    } else {
        data::load_spectrum(path)
    }
}

/// Apply an optional in-memory truncation and resolve the tail level the
/// approximated prior will use.
fn prepare_spectrum(
    mut spectrum: LaplacianSpectrum,
    ell: Option<usize>,
    lambda_bar: Option<f64>,
    mode: PriorMode,
) -> Result<LaplacianSpectrum> {
    if let Some(ell) = ell {
        let stored_bar = spectrum.saturation();
        spectrum = spectrum.truncated(ell + 1)?;
        if let Some(bar) = stored_bar {
            spectrum.set_saturation(bar)?;
        }
    }
    if let Some(bar) = lambda_bar {
        spectrum.set_saturation(bar)?;
    }
    if mode == PriorMode::Approximated && spectrum.saturation().is_none() {
        let ell = spectrum.n_pairs() - 1;
        let bar = saturation_level(&spectrum, ell)?;
        spectrum.set_saturation(bar)?;
        log(format_args!(
            "using automatic tail level lambda_bar = {bar:.6}"
        ));
    }
    Ok(spectrum)
}

pub fn sample(args: SampleArgs) -> Result<()> {
    let mut violations = Vec::new();
    if !(args.gamma > 0.0) {
        violations.push("--gamma must be positive".into());
    }
    if !(0.0..=1.0).contains(&args.beta) {
        violations.push("--beta must lie in [0, 1]".into());
    }
    if args.n_samples == 0 {
        violations.push("--n-samples must be positive".into());
    }
    if let Some(b) = args.burn_in {
        if b >= args.n_samples {
            violations.push("--burn-in must be smaller than --n-samples".into());
        }
    }
    if args.check_period == 0 {
        violations.push("--check-period must be at least 1".into());
    }
    if !(args.tolerance > 0.0) {
        violations.push("--tolerance must be positive".into());
    }
    if let Some(t) = args.tune {
        if !(0.0..=1.0).contains(&t) {
            violations.push("--tune must lie in [0, 1]".into());
        }
    }
    if args.model == ModelArg::Gl {
        match args.epsilon {
            None => violations.push("--epsilon is required for the gl model".into()),
            Some(e) if !(e > 0.0) => violations.push("--epsilon must be positive".into()),
            _ => {}
        }
    } else if args.epsilon.is_some() {
        violations.push("--epsilon only applies to the gl model".into());
    }
    check(violations)?;

    let started = Instant::now();
    let dir = resolve_out_dir(args.out_dir)?;
    let mode: PriorMode = args.prior.into();
    let spectrum = prepare_spectrum(
        load_spectrum_any(&args.spectrum)?,
        args.ell,
        args.lambda_bar,
        mode,
    )?;
    let labels = data::load_labels_csv(&args.labels, args.gamma, spectrum.n_nodes())?;
    let sampler = PriorSampler::new(&spectrum, mode)?;
    let kind: ModelKind = args.model.into();
    let model = ModelSpec::new(kind, args.gamma, args.epsilon, sampler.scaling())?;
    let problem = PosteriorProblem::new(sampler, model, labels)?;

    let config = ChainConfig {
        beta: args.beta,
        n_samples: args.n_samples,
        burn_in: args.burn_in,
        seed: args.seed,
        check_period: args.check_period,
        tolerance: args.tolerance,
        tune_target: args.tune,
        stop_on_convergence: args.stop_on_convergence,
        storage: args.store_chain.into(),
    };
    let out = pcn_run(&problem, &config, &ChainInit::PriorDraw)?;
    log(format_args!(
        "chain done: {} states, acceptance {:.3}, converged_at {:?} in {:.2}s",
        out.n_states,
        out.acceptance_rate,
        out.converged_at,
        started.elapsed().as_secs_f64()
    ));

    let summary = UQSummary::from_chain(&out, kind)?;
    let record = ChainSummaryRecord::new(
        out.acceptance_rate,
        out.converged_at,
        out.n_states,
        out.beta_used,
        &summary,
    );
    data::save_json(dir.join("summary.json"), &record)?;
    data::save_summary_csv(dir.join("summary.csv"), &summary)?;
    if let Some(samples) = &out.samples {
        data::save_chain(dir.join("chain.bin"), samples.view(), args.seed)?;
        log(format_args!("wrote chain.bin ({} states)", samples.nrows()));
    }
    log(format_args!(
        "wrote summary.json and summary.csv (mean variance {:.4})",
        summary.mean_variance
    ));
    Ok(())
}

pub fn map(args: MapArgs) -> Result<()> {
    let mut violations = Vec::new();
    if !(args.gamma > 0.0) {
        violations.push("--gamma must be positive".into());
    }
    if !(args.step > 0.0) {
        violations.push("--step must be positive".into());
    }
    if args.max_iters == 0 {
        violations.push("--max-iters must be positive".into());
    }
    if !(args.grad_tol > 0.0) {
        violations.push("--grad-tol must be positive".into());
    }
    match args.model {
        ModelArg::Bls => {
            violations.push(
                "MAP estimation is not defined for the bls model (its objective has \
                 no minimizer); use `sample` instead"
                    .into(),
            );
        }
        ModelArg::Gl => match args.epsilon {
            None => violations.push("--epsilon is required for the gl model".into()),
            Some(e) if !(e > 0.0) => violations.push("--epsilon must be positive".into()),
            _ => {}
        },
        ModelArg::Probit => {
            if args.epsilon.is_some() {
                violations.push("--epsilon only applies to the gl model".into());
            }
            if args.init == "probit-map" {
                violations
                    .push("--init probit-map only applies to the gl model".into());
            }
        }
    }
    check(violations)?;

    let started = Instant::now();
    let dir = resolve_out_dir(args.out_dir)?;
    let spectrum = prepare_spectrum(
        load_spectrum_any(&args.spectrum)?,
        args.ell,
        None,
        PriorMode::Projected,
    )?;
    let labels = data::load_labels_csv(&args.labels, args.gamma, spectrum.n_nodes())?;
    let sampler = PriorSampler::new(&spectrum, PriorMode::Projected)?;
    let kind: ModelKind = args.model.into();
    let model = ModelSpec::new(kind, args.gamma, args.epsilon, sampler.scaling())?;
    let problem = PosteriorProblem::new(sampler, model, labels)?;

    let init = match args.init.as_str() {
        "prior-draw" => FlowInit::PriorDraw,
        "probit-map" => FlowInit::ProbitMap,
        path => FlowInit::State(data::load_vector_csv(path)?),
    };
    let config = FlowConfig {
        step: args.step,
        max_iters: args.max_iters,
        grad_tol: args.grad_tol,
        seed: args.seed,
        init,
    };
    let result = map_estimate(&problem, &config)?;
    log(format_args!(
        "flow done: J = {:.6}, {} iterations, converged = {}, residual {:.2e} in {:.2}s",
        result.objective,
        result.iterations,
        result.converged,
        result.residual_norm,
        started.elapsed().as_secs_f64()
    ));
    let record = MapRecord {
        objective: result.objective,
        iterations: result.iterations,
        converged: result.converged,
        state: result.state.to_vec(),
        hard_labels: graphuq::models::threshold(result.state.view()).to_vec(),
    };
    data::save_json(dir.join("map.json"), &record)?;
    log(format_args!("wrote map.json"));
    Ok(())
}

/// Post-hoc summary of a stored raw chain.
#[derive(Debug, Serialize, Deserialize)]
struct SummarizeRecord {
    n_states: usize,
    burn_in: usize,
    /// Fraction of steps whose state differs from the previous one — an
    /// estimate of the acceptance rate recoverable from the chain alone.
    state_change_fraction: f64,
    mean_variance: f64,
}

pub fn summarize(args: SummarizeArgs) -> Result<()> {
    let started = Instant::now();
    let dir = resolve_out_dir(args.out_dir)?;
    let (samples, _seed) = data::load_chain(&args.chain)?;
    let m = samples.nrows();
    let burn = args.burn_in.unwrap_or(m / 10);
    if burn >= m {
        return Err(Error::config(format!(
            "--burn-in ({burn}) must be smaller than the chain length ({m})"
        )));
    }
    let mut reducer = SummaryReducer::new(samples.ncols());
    for row in samples.rows().into_iter().skip(burn) {
        reducer.add(row);
    }
    let changes = samples
        .rows()
        .into_iter()
        .zip(samples.rows().into_iter().skip(1))
        .filter(|(a, b)| a != b)
        .count();
    let out = ChainOutput {
        samples: None,
        acceptance_rate: changes as f64 / (m - 1).max(1) as f64,
        converged_at: None,
        cumulative_means: Vec::new(),
        reducer,
        beta_used: f64::NAN,
        n_states: m,
        max_support_violation: 0.0,
    };
    let summary = UQSummary::from_chain(&out, args.model.into())?;
    data::save_summary_csv(dir.join("summary.csv"), &summary)?;
    data::save_json(
        dir.join("summarize.json"),
        &SummarizeRecord {
            n_states: m,
            burn_in: burn,
            state_change_fraction: out.acceptance_rate,
            mean_variance: summary.mean_variance,
        },
    )?;
    log(format_args!(
        "summarized {} states (mean variance {:.4}) in {:.2}s",
        m,
        summary.mean_variance,
        started.elapsed().as_secs_f64()
    ));
    Ok(())
}

/// Versioned experiment config: one sweep or fidelity study per file.
#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "lowercase")]
enum ExperimentSpec {
    Variance(SweepProtocol),
    Fidelity(FidelityProtocol),
}

#[derive(Debug, Serialize, Deserialize)]
struct ConfigFile {
    version: u32,
    #[serde(flatten)]
    spec: ExperimentSpec,
}

/// Averaged sweep curves, one per model, with their rank correlation against
/// the grid.
#[derive(Debug, Serialize)]
struct CurveRecord {
    model: ModelKind,
    grid: Vec<f64>,
    mean_variance: Vec<f64>,
    spearman_vs_grid: f64,
}

pub fn sweep(args: SweepArgs) -> Result<()> {
    let started = Instant::now();
    let dir = resolve_out_dir(args.out_dir)?;
    let config: ConfigFile = data::load_json(&args.config)?;
    if config.version != 1 {
        return Err(Error::config(format!(
            "unsupported config version {} (this build reads version 1)",
            config.version
        )));
    }
    match config.spec {
        ExperimentSpec::Variance(mut protocol) => {
            if let Some(t) = args.trials {
                protocol.trials = t;
            }
            if let Some(s) = args.seed {
                protocol.seed = s;
            }
            if let Some(m) = args.n_samples {
                protocol.pipeline.n_samples = m;
            }
            if let Some(b) = args.beta {
                protocol.pipeline.beta = b;
            }
            let rows = run_sweep(&protocol)?;
            let grid = protocol.axis.values().to_vec();
            let mut curves = Vec::new();
            for &model in &protocol.models {
                let per_model: Vec<(f64, usize, f64)> = rows
                    .iter()
                    .filter(|r| r.model == model)
                    .map(|r| (r.x, r.trial, r.mean_variance))
                    .collect();
                let name = dir.join(format!("sweep_{model}.csv"));
                data::save_sweep_csv(&name, &per_model)?;
                let curve = averaged_curve(&rows, model, &grid);
                let rho = spearman(&grid, &curve);
                log(format_args!(
                    "{model}: curve {:?} (spearman {rho:.3})",
                    curve.iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>()
                ));
                curves.push(CurveRecord {
                    model,
                    grid: grid.clone(),
                    mean_variance: curve,
                    spearman_vs_grid: rho,
                });
            }
            data::save_json(dir.join("curves.json"), &curves)?;
            log(format_args!(
                "sweep done: {} rows in {:.1}s",
                rows.len(),
                started.elapsed().as_secs_f64()
            ));
        }
        ExperimentSpec::Fidelity(mut protocol) => {
            if let Some(t) = args.trials {
                protocol.trials = t;
            }
            if let Some(s) = args.seed {
                protocol.seed = s;
            }
            if let Some(m) = args.n_samples {
                protocol.pipeline.n_samples = m;
            }
            if let Some(b) = args.beta {
                protocol.pipeline.beta = b;
            }
            let outcome = fidelity_experiment(&protocol)?;
            data::save_json(dir.join("fidelity.json"), &outcome)?;
            log(format_args!(
                "fidelity done: projected gap {:.4}, approximated gap {:.4} in {:.1}s",
                outcome.projected_gap,
                outcome.approximated_gap,
                started.elapsed().as_secs_f64()
            ));
        }
    }
    Ok(())
}
