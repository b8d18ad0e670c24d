//! Graph-based Bayesian semi-supervised binary classification with
//! uncertainty quantification.
//!
//! The pipeline: build a weighted similarity graph from feature vectors,
//! take the low end of its normalized Laplacian spectrum, place a graph
//! Gaussian prior on latent node values through the Karhunen-Loève expansion
//! (optionally projected to the leading modes or completed with a saturated
//! tail), condition on a few observed labels through a probit, level-set, or
//! Ginzburg-Landau misfit, and then either sample the posterior with pCN
//! Metropolis-Hastings or find its mode by a linearly-implicit gradient
//! flow. Posterior samples reduce to per-node confidence scores, label
//! variances, and uncertainty rankings.
//!
//! ```
//! use graphuq::data::gen_two_moons;
//! use graphuq::graph::{build_weights_self_tuning, normalized_laplacian};
//! use graphuq::prior::PriorSampler;
//! use graphuq::spectrum::{eigendecompose, PriorMode, Truncation};
//! use rand::SeedableRng;
//!
//! # fn main() -> graphuq::Result<()> {
//! let dataset = gen_two_moons(60, 2, 0.08, 7)?;
//! let graph = build_weights_self_tuning(&dataset.features, 8)?;
//! let laplacian = normalized_laplacian(&graph)?;
//! let spectrum = eigendecompose(&laplacian, Truncation::Count(20))?;
//! let sampler = PriorSampler::new(&spectrum, PriorMode::Projected)?;
//! let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
//! let draw = sampler.sample(&mut rng);
//! assert_eq!(draw.len(), 60);
//! # Ok(())
//! # }
//! ```

pub mod data;
pub mod error;
pub mod experiment;
pub mod graph;
mod lapack;
pub mod models;
pub mod optimizer;
pub mod prior;
pub mod sampler;
pub mod spectrum;
pub mod uq;

pub use error::{Error, Result};
pub use graph::{FeatureSet, Laplacian, WeightedGraph};
pub use models::{LabelData, ModelKind, ModelSpec, PosteriorProblem};
pub use optimizer::{map_estimate, FlowConfig, FlowInit, FlowResult};
pub use prior::PriorSampler;
pub use sampler::{pcn_run, ChainConfig, ChainInit, ChainOutput, SummaryReducer};
pub use spectrum::{eigendecompose, LaplacianSpectrum, PriorMode, Truncation};
pub use uq::UQSummary;
