//! Shared fixtures for the pipeline benchmarks.

use graphuq::data::gen_two_moons;
use graphuq::graph::{build_weights_self_tuning, normalized_laplacian};
use graphuq::{eigendecompose, LaplacianSpectrum, Laplacian, Truncation, WeightedGraph};

/// Two-moons features at the given size (σ = 0.06, d = 100, K = 10).
pub fn moons_graph(n: usize) -> WeightedGraph {
    let data = gen_two_moons(n, 100, 0.06, 1).expect("valid moons parameters");
    build_weights_self_tuning(&data.features, 10).expect("non-degenerate geometry")
}

pub fn moons_laplacian(n: usize) -> Laplacian {
    normalized_laplacian(&moons_graph(n)).expect("connected graph")
}

pub fn moons_spectrum(n: usize, pairs: usize) -> LaplacianSpectrum {
    eigendecompose(&moons_laplacian(n), Truncation::Count(pairs)).expect("solver converges")
}
