//! Weighted-graph construction from feature vectors and the normalized graph
//! Laplacian `L = I − D^{−1/2} A D^{−1/2}`.

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};

/// A set of feature vectors, one row per node.
#[derive(Debug, Clone)]
pub struct FeatureSet {
    points: Array2<f64>,
}

impl FeatureSet {
    pub fn new(points: Array2<f64>) -> Result<Self> {
        if points.nrows() < 2 {
            return Err(Error::config("at least 2 nodes required"));
        }
        if points.ncols() < 1 {
            return Err(Error::config("feature dimension must be at least 1"));
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(Error::config("features must be finite"));
        }
        Ok(FeatureSet { points })
    }

    pub fn n_nodes(&self) -> usize {
        self.points.nrows()
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn points(&self) -> &Array2<f64> {
        &self.points
    }

    pub fn row(&self, j: usize) -> ArrayView1<'_, f64> {
        self.points.row(j)
    }
}

/// Compressed sparse row storage for symmetric weight patterns.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[a..b], &self.values[a..b])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(p) => vals[p],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut a = Array2::zeros((self.n, self.n));
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &w) in cols.iter().zip(vals) {
                a[[i, j]] = w;
            }
        }
        a
    }
}

/// Weight storage: dense for fully connected graphs, CSR for neighbor graphs.
#[derive(Debug, Clone)]
pub enum WeightStorage {
    Dense(Array2<f64>),
    Sparse(CsrMatrix),
}

/// A symmetric nonnegatively weighted graph together with its degree vector.
#[derive(Debug, Clone)]
pub struct WeightedGraph {
    storage: WeightStorage,
    degrees: Array1<f64>,
}

impl WeightedGraph {
    /// Wrap a dense weight matrix. The matrix is symmetrized, checked for
    /// nonnegativity, and degrees are computed.
    pub fn from_dense(weights: Array2<f64>) -> Result<Self> {
        if weights.nrows() != weights.ncols() {
            return Err(Error::config("weight matrix must be square"));
        }
        let sym = symmetrize_dense(&weights);
        if sym.iter().any(|&w| !w.is_finite() || w < 0.0) {
            return Err(Error::config("weights must be finite and nonnegative"));
        }
        let degrees = sym.sum_axis(ndarray::Axis(1));
        if degrees.iter().any(|&d| d <= 0.0) {
            return Err(Error::numerical("zero degree: graph has an isolated node"));
        }
        Ok(WeightedGraph {
            storage: WeightStorage::Dense(sym),
            degrees,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.degrees.len()
    }

    pub fn degrees(&self) -> &Array1<f64> {
        &self.degrees
    }

    pub fn storage(&self) -> &WeightStorage {
        &self.storage
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        match &self.storage {
            WeightStorage::Dense(a) => a[[i, j]],
            WeightStorage::Sparse(csr) => csr.get(i, j),
        }
    }

    pub fn to_dense_weights(&self) -> Array2<f64> {
        match &self.storage {
            WeightStorage::Dense(a) => a.clone(),
            WeightStorage::Sparse(csr) => csr.to_dense(),
        }
    }

    /// True when every pair of nodes is joined by a path of positive weights.
    pub fn is_connected(&self) -> bool {
        let n = self.n_nodes();
        let mut uf = UnionFind::new(n);
        match &self.storage {
            WeightStorage::Dense(a) => {
                for i in 0..n {
                    for j in (i + 1)..n {
                        if a[[i, j]] > 0.0 {
                            uf.union(i, j);
                        }
                    }
                }
            }
            WeightStorage::Sparse(csr) => {
                for i in 0..n {
                    let (cols, vals) = csr.row(i);
                    for (&j, &w) in cols.iter().zip(vals) {
                        if w > 0.0 {
                            uf.union(i, j);
                        }
                    }
                }
            }
        }
        uf.n_components() == 1
    }
}

/// The normalized graph Laplacian of a connected weighted graph.
///
/// Kept dense: the eigensolver needs a dense symmetric matrix and the target
/// problem sizes are a few thousand nodes.
#[derive(Debug, Clone)]
pub struct Laplacian {
    matrix: Array2<f64>,
    degrees: Array1<f64>,
}

impl Laplacian {
    pub fn n_nodes(&self) -> usize {
        self.degrees.len()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn degrees(&self) -> &Array1<f64> {
        &self.degrees
    }

    /// The unit vector proportional to `D^{1/2}𝟙`, the null direction of L.
    pub fn null_direction(&self) -> Array1<f64> {
        let mut q0 = self.degrees.mapv(f64::sqrt);
        let norm = q0.dot(&q0).sqrt();
        q0 /= norm;
        q0
    }
}

/// Pairwise squared Euclidean distances.
fn squared_distances(features: &FeatureSet) -> Array2<f64> {
    let x = features.points();
    let gram = x.dot(&x.t());
    let sq: Vec<f64> = (0..x.nrows()).map(|i| gram[[i, i]]).collect();
    let n = x.nrows();
    let mut d2 = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            d2[[i, j]] = (sq[i] + sq[j] - 2.0 * gram[[i, j]]).max(0.0);
        }
    }
    d2
}

/// Self-tuning local scale: distance from each node to its K-th nearest
/// neighbor, the node itself excluded, ties broken by node index.
fn local_scales(d2: &Array2<f64>, k: usize) -> Result<Vec<f64>> {
    let n = d2.nrows();
    let mut tau = vec![0.0; n];
    for j in 0..n {
        let mut others: Vec<(f64, usize)> = (0..n)
            .filter(|&i| i != j)
            .map(|i| (d2[[j, i]], i))
            .collect();
        others.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
        let kth = others[k - 1].0.sqrt();
        if kth <= 0.0 {
            return Err(Error::numerical(format!(
                "degenerate local scale: node {j} has a duplicate within its {k} nearest neighbors"
            )));
        }
        tau[j] = kth;
    }
    Ok(tau)
}

/// Indices of the K nearest neighbors of each node (self excluded, ties by
/// index), as sorted index lists.
fn knn_sets(d2: &Array2<f64>, k: usize) -> Vec<Vec<usize>> {
    let n = d2.nrows();
    (0..n)
        .map(|j| {
            let mut others: Vec<(f64, usize)> = (0..n)
                .filter(|&i| i != j)
                .map(|i| (d2[[j, i]], i))
                .collect();
            others.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
            let mut idx: Vec<usize> = others[..k].iter().map(|&(_, i)| i).collect();
            idx.sort_unstable();
            idx
        })
        .collect()
}

/// Fully connected graph with self-tuning weights
/// `a_ij = exp(−‖x_i − x_j‖² / (2 τ_i τ_j))`, where τ_j is the distance from
/// node j to its K-th nearest neighbor. The formula gives `a_jj = 1`, which is
/// kept: the normalized Laplacian absorbs self-loops consistently.
pub fn build_weights_self_tuning(features: &FeatureSet, k: usize) -> Result<WeightedGraph> {
    let n = features.n_nodes();
    if k == 0 || k >= n {
        return Err(Error::config(format!(
            "neighbor count K must satisfy 1 <= K < N (got K={k}, N={n})"
        )));
    }
    let d2 = squared_distances(features);
    let tau = local_scales(&d2, k)?;
    let mut a = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            a[[i, j]] = (-d2[[i, j]] / (2.0 * tau[i] * tau[j])).exp();
        }
    }
    WeightedGraph::from_dense(a)
}

/// Fully connected graph with a single global bandwidth:
/// `a_ij = exp(−‖x_i − x_j‖² / (2 τ²))`.
pub fn build_weights_rbf(features: &FeatureSet, tau: f64) -> Result<WeightedGraph> {
    if !(tau > 0.0) {
        return Err(Error::config("bandwidth tau must be positive"));
    }
    let d2 = squared_distances(features);
    let a = d2.mapv(|d| (-d / (2.0 * tau * tau)).exp());
    WeightedGraph::from_dense(a)
}

/// K-nearest-neighbor graph: an edge is kept iff one endpoint is among the
/// other's K nearest neighbors; kept edges carry self-tuning weights with the
/// same K. Stored sparse (CSR). Errors when the result is disconnected.
pub fn build_weights_knn(features: &FeatureSet, k: usize) -> Result<WeightedGraph> {
    let n = features.n_nodes();
    if k == 0 || k >= n {
        return Err(Error::config(format!(
            "neighbor count K must satisfy 1 <= K < N (got K={k}, N={n})"
        )));
    }
    let d2 = squared_distances(features);
    let tau = local_scales(&d2, k)?;
    let knn = knn_sets(&d2, k);

    // Union of the directed neighbor sets, plus the diagonal (the weight
    // formula gives a_jj = 1, matching the fully connected builders).
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::new();
    let mut values = Vec::new();
    row_ptr.push(0);
    for i in 0..n {
        let mut cols: Vec<usize> = knn[i].clone();
        for (j, set) in knn.iter().enumerate() {
            if j != i && set.binary_search(&i).is_ok() {
                cols.push(j);
            }
        }
        cols.push(i);
        cols.sort_unstable();
        cols.dedup();
        for &j in &cols {
            let w = (-d2[[i, j]] / (2.0 * tau[i] * tau[j])).exp();
            col_idx.push(j);
            values.push(w);
        }
        row_ptr.push(col_idx.len());
    }
    let csr = CsrMatrix {
        n,
        row_ptr,
        col_idx,
        values,
    };

    let mut degrees = Array1::zeros(n);
    for i in 0..n {
        let (_, vals) = csr.row(i);
        degrees[i] = vals.iter().sum();
    }
    let graph = WeightedGraph {
        storage: WeightStorage::Sparse(csr),
        degrees,
    };
    if !graph.is_connected() {
        return Err(Error::numerical(
            "graph not connected: increase K or adjust features",
        ));
    }
    Ok(graph)
}

/// Fully connected graph with cosine-similarity weights
/// `w_ij = ⟨x_i, x_j⟩ / (‖x_i‖‖x_j‖)`, negative values clamped to zero.
pub fn build_weights_cosine(features: &FeatureSet) -> Result<WeightedGraph> {
    let x = features.points();
    let n = x.nrows();
    let norms: Vec<f64> = (0..n).map(|i| x.row(i).dot(&x.row(i)).sqrt()).collect();
    if let Some(j) = norms.iter().position(|&v| v <= 0.0) {
        return Err(Error::config(format!("zero feature vector at node {j}")));
    }
    let gram = x.dot(&x.t());
    let mut a = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            a[[i, j]] = (gram[[i, j]] / (norms[i] * norms[j])).max(0.0);
        }
    }
    WeightedGraph::from_dense(a)
}

fn symmetrize_dense(a: &Array2<f64>) -> Array2<f64> {
    let n = a.nrows();
    let mut s = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            s[[i, j]] = 0.5 * (a[[i, j]] + a[[j, i]]);
        }
    }
    s
}

/// Replace A by (A + Aᵀ)/2. Idempotent; the output equals its own transpose
/// exactly.
pub fn symmetrize(graph: &WeightedGraph) -> Result<WeightedGraph> {
    WeightedGraph::from_dense(symmetrize_dense(&graph.to_dense_weights()))
}

/// The normalized graph Laplacian `L = I − D^{−1/2} A D^{−1/2}`.
///
/// Requires positive degrees and a connected graph; both are hard errors
/// because the prior scaling divides by λ_1.
pub fn normalized_laplacian(graph: &WeightedGraph) -> Result<Laplacian> {
    let n = graph.n_nodes();
    if graph.degrees().iter().any(|&d| d <= 0.0) {
        return Err(Error::numerical("zero degree: Laplacian undefined"));
    }
    if !graph.is_connected() {
        return Err(Error::numerical(
            "graph not connected: the spectral gap would vanish",
        ));
    }
    let inv_sqrt_d: Vec<f64> = graph.degrees().iter().map(|&d| 1.0 / d.sqrt()).collect();
    let a = graph.to_dense_weights();
    let mut l = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let v = -a[[i, j]] * inv_sqrt_d[i] * inv_sqrt_d[j];
            l[[i, j]] = if i == j { 1.0 + v } else { v };
        }
    }
    Ok(Laplacian {
        matrix: l,
        degrees: graph.degrees().clone(),
    })
}

/// The graph Dirichlet energy `½⟨u, Lu⟩`.
pub fn dirichlet_energy(laplacian: &Laplacian, u: ArrayView1<'_, f64>) -> Result<f64> {
    if u.len() != laplacian.n_nodes() {
        return Err(Error::config(format!(
            "dimension mismatch: vector has {} entries, graph has {} nodes",
            u.len(),
            laplacian.n_nodes()
        )));
    }
    Ok(0.5 * u.dot(&laplacian.matrix().dot(&u)))
}

/// Union-find over node indices, used for connectivity checks.
struct UnionFind {
    parent: Vec<usize>,
    components: usize,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            components: n,
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
            self.components -= 1;
        }
    }

    fn n_components(&self) -> usize {
        self.components
    }
}
