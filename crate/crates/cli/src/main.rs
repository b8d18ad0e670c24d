//! `graphuq`: command-line front end for the graph-based Bayesian
//! semi-supervised classification pipeline. Subcommands mirror the pipeline
//! stages; every artifact is a file, so stages compose through paths and any
//! run is reproducible from its flags and seeds.

mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 IO.
fn exit_code_for(err: &graphuq::Error) -> u8 {
    match err {
        graphuq::Error::Config(_) => 2,
        graphuq::Error::Numerical(_) => 3,
        graphuq::Error::Io(_) => 4,
    }
}

#[derive(Parser)]
#[command(
    name = "graphuq",
    version,
    about = "Graph-based Bayesian semi-supervised classification with uncertainty quantification"
)]
struct Cli {
    /// Cap worker threads for sweeps and multi-chain runs (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a two-moons dataset (features, truth, optional labels).
    GenMoons(GenMoonsArgs),
    /// Build a weighted similarity graph and export its weight matrix.
    Graph(GraphArgs),
    /// Decompose the normalized Laplacian and persist the spectrum.
    Spectrum(SpectrumArgs),
    /// Sample a posterior with pCN and write label-space summaries.
    Sample(SampleArgs),
    /// Compute a MAP estimate by gradient flow.
    Map(MapArgs),
    /// Recompute label-space summaries from a stored raw chain.
    Summarize(SummarizeArgs),
    /// Run a multi-trial experiment described by a JSON config.
    Sweep(SweepArgs),
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Probit,
    Bls,
    Gl,
}

impl From<ModelArg> for graphuq::ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Probit => graphuq::ModelKind::Probit,
            ModelArg::Bls => graphuq::ModelKind::Bls,
            ModelArg::Gl => graphuq::ModelKind::Gl,
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
pub enum PriorArg {
    Full,
    Projected,
    Approximated,
}

impl From<PriorArg> for graphuq::PriorMode {
    fn from(m: PriorArg) -> Self {
        match m {
            PriorArg::Full => graphuq::PriorMode::Full,
            PriorArg::Projected => graphuq::PriorMode::Projected,
            PriorArg::Approximated => graphuq::PriorMode::Approximated,
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    SelfTuning,
    Rbf,
    Knn,
    Cosine,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
pub enum WeightFormatArg {
    Dense,
    Coo,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
pub enum SpectrumFormatArg {
    Bin,
    Csv,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
pub enum StorageArg {
    Auto,
    Always,
    Never,
}

impl From<StorageArg> for graphuq::sampler::StoragePolicy {
    fn from(s: StorageArg) -> Self {
        match s {
            StorageArg::Auto => graphuq::sampler::StoragePolicy::Auto,
            StorageArg::Always => graphuq::sampler::StoragePolicy::Always,
            StorageArg::Never => graphuq::sampler::StoragePolicy::Never,
        }
    }
}

#[derive(Args)]
pub struct GenMoonsArgs {
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 100)]
    dim: usize,
    /// Feature noise standard deviation.
    #[arg(long, default_value_t = 0.06)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Reveal this fraction of nodes as labels (writes labels.csv).
    #[arg(long, conflicts_with_all = ["label_count", "per_class"])]
    label_fraction: Option<f64>,
    /// Reveal exactly this many labels.
    #[arg(long, conflicts_with = "per_class")]
    label_count: Option<usize>,
    /// Reveal fixed per-class quotas "pos,neg".
    #[arg(long, value_name = "POS,NEG")]
    per_class: Option<String>,
    /// Flip each revealed label with this probability.
    #[arg(long, default_value_t = 0.0)]
    flip: f64,
    #[arg(long, default_value_t = 1)]
    label_seed: u64,
    /// Output directory (default: $GRAPHUQ_OUT_DIR or ".").
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
pub struct GraphArgs {
    /// Feature CSV (one row per node).
    #[arg(long)]
    features: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::SelfTuning)]
    method: MethodArg,
    /// Neighborhood size for self-tuning and knn graphs.
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Bandwidth for the rbf graph.
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, value_enum, default_value_t = WeightFormatArg::Dense)]
    format: WeightFormatArg,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
pub struct SpectrumArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::SelfTuning)]
    method: MethodArg,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long)]
    tau: Option<f64>,
    /// Number of non-trivial modes to retain.
    #[arg(long, default_value_t = 150, conflicts_with = "full")]
    ell: usize,
    /// Keep the complete spectrum instead of truncating.
    #[arg(long)]
    full: bool,
    /// Store this tail saturation level with the spectrum.
    #[arg(long, conflicts_with = "saturate")]
    lambda_bar: Option<f64>,
    /// Store the automatic tail level (largest retained non-trivial eigenvalue).
    #[arg(long)]
    saturate: bool,
    #[arg(long, value_enum, default_value_t = SpectrumFormatArg::Bin)]
    format: SpectrumFormatArg,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
pub struct SampleArgs {
    /// Spectrum file written by the spectrum command.
    #[arg(long)]
    spectrum: PathBuf,
    /// Label CSV ("node_index,label").
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, value_enum)]
    model: ModelArg,
    #[arg(long, value_enum, default_value_t = PriorArg::Projected)]
    prior: PriorArg,
    /// Truncate the loaded spectrum to this many non-trivial modes first.
    #[arg(long)]
    ell: Option<usize>,
    /// Override the stored tail saturation level.
    #[arg(long)]
    lambda_bar: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    gamma: f64,
    /// Double-well width (Ginzburg-Landau only).
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, default_value_t = 0.3)]
    beta: f64,
    #[arg(long, default_value_t = 100_000)]
    n_samples: usize,
    /// Samples discarded from summaries (default n-samples/10).
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Cumulative-average checkpoint period.
    #[arg(long, default_value_t = 5000)]
    check_period: usize,
    /// Convergence tolerance on successive cumulative averages.
    #[arg(long, default_value_t = 1e-3)]
    tolerance: f64,
    /// Adapt beta toward this acceptance fraction during burn-in.
    #[arg(long)]
    tune: Option<f64>,
    /// Treat the convergence check as a stopping rule.
    #[arg(long)]
    stop_on_convergence: bool,
    /// Raw-chain retention policy (auto keeps it for N·M ≤ 5e7).
    #[arg(long, value_enum, default_value_t = StorageArg::Auto)]
    store_chain: StorageArg,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
pub struct MapArgs {
    #[arg(long)]
    spectrum: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, value_enum)]
    model: ModelArg,
    #[arg(long)]
    ell: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    gamma: f64,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Flow learning rate.
    #[arg(long, default_value_t = 0.1)]
    step: f64,
    #[arg(long, default_value_t = 500_000)]
    max_iters: usize,
    /// Stopping threshold on the per-iteration displacement.
    #[arg(long, default_value_t = 1e-6)]
    grad_tol: f64,
    /// "prior-draw", "probit-map", or a path to a state CSV.
    #[arg(long, default_value = "prior-draw")]
    init: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
pub struct SummarizeArgs {
    /// Raw chain file written by the sample command.
    #[arg(long)]
    chain: PathBuf,
    #[arg(long, value_enum)]
    model: ModelArg,
    /// Leading samples to discard (default: a tenth of the chain).
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
pub struct SweepArgs {
    /// Experiment config JSON (versioned schema).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's trial count.
    #[arg(long)]
    trials: Option<usize>,
    /// Override the config's base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the per-chain sample count.
    #[arg(long)]
    n_samples: Option<usize>,
    /// Override the pCN step parameter.
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error (config): --jobs must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            eprintln!("error (config): cannot size the worker pool: {e}");
            return ExitCode::from(2);
        }
    }
    let outcome = match cli.command {
        Command::GenMoons(args) => run::gen_moons(args),
        Command::Graph(args) => run::graph(args),
        Command::Spectrum(args) => run::spectrum(args),
        Command::Sample(args) => run::sample(args),
        Command::Map(args) => run::map(args),
        Command::Summarize(args) => run::summarize(args),
        Command::Sweep(args) => run::sweep(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = match e {
                graphuq::Error::Config(_) => "config",
                graphuq::Error::Numerical(_) => "numerical",
                graphuq::Error::Io(_) => "io",
            };
            eprintln!("error ({kind}): {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
