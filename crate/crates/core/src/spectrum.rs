//! Eigendecomposition of the normalized Laplacian, spectral truncation, the
//! tail saturation level λ̄, and the prior scaling constants.

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::graph::Laplacian;
use crate::lapack;

/// How much of the spectrum to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truncation {
    Full,
    Count(usize),
}

/// Which covariance variant a scaling constant (and a prior sampler) targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorMode {
    /// All N−1 nonzero modes with exact eigenvalues.
    Full,
    /// Support restricted to the first ℓ−1 nonzero modes.
    Projected,
    /// First ℓ−1 exact modes plus a white-noise tail at saturation level λ̄.
    Approximated,
}

/// The lowest part of the spectrum of a normalized graph Laplacian.
///
/// Eigenvalues ascend starting from λ_0 = 0; eigenvector columns are
/// orthonormal with a deterministic sign convention (the largest-magnitude
/// entry of each column is positive, first such entry on ties).
#[derive(Debug, Clone)]
pub struct LaplacianSpectrum {
    eigenvalues: Array1<f64>,
    eigenvectors: Array2<f64>,
    ambient: usize,
    saturation: Option<f64>,
}

impl LaplacianSpectrum {
    /// Assemble a spectrum from parts (used by file loading and tests); the
    /// parts are trusted to satisfy the structural invariants.
    pub fn from_parts(
        eigenvalues: Array1<f64>,
        eigenvectors: Array2<f64>,
        saturation: Option<f64>,
    ) -> Result<Self> {
        if eigenvectors.ncols() != eigenvalues.len() {
            return Err(Error::config(
                "eigenvalue count must match eigenvector column count",
            ));
        }
        if eigenvectors.nrows() < eigenvalues.len() {
            return Err(Error::config("more eigenpairs than ambient dimension"));
        }
        Ok(LaplacianSpectrum {
            ambient: eigenvectors.nrows(),
            eigenvalues,
            eigenvectors,
            saturation,
        })
    }

    /// Number of stored eigenpairs (m = N for a full decomposition).
    pub fn n_pairs(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Ambient dimension N (number of graph nodes).
    pub fn n_nodes(&self) -> usize {
        self.ambient
    }

    pub fn eigenvalues(&self) -> &Array1<f64> {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &Array2<f64> {
        &self.eigenvectors
    }

    pub fn eigenvector(&self, k: usize) -> ArrayView1<'_, f64> {
        self.eigenvectors.column(k)
    }

    pub fn is_full(&self) -> bool {
        self.n_pairs() == self.ambient
    }

    pub fn saturation(&self) -> Option<f64> {
        self.saturation
    }

    pub fn set_saturation(&mut self, lambda_bar: f64) -> Result<()> {
        if !(lambda_bar > 0.0) {
            return Err(Error::config("saturation level must be positive"));
        }
        self.saturation = Some(lambda_bar);
        Ok(())
    }

    /// A copy keeping only the first `m` stored pairs, so one full
    /// decomposition can serve several truncation levels. Any saturation
    /// level is dropped; set a fresh one if needed.
    pub fn truncated(&self, m: usize) -> Result<LaplacianSpectrum> {
        if m < 2 || m > self.n_pairs() {
            return Err(Error::config(format!(
                "truncation must keep between 2 and {} pairs; requested {m}",
                self.n_pairs()
            )));
        }
        LaplacianSpectrum::from_parts(
            self.eigenvalues.slice(ndarray::s![..m]).to_owned(),
            self.eigenvectors.slice(ndarray::s![.., ..m]).to_owned(),
            None,
        )
    }

    /// Coefficients ⟨u, q_j⟩ for all stored eigenvectors.
    pub fn coefficients(&self, u: ArrayView1<'_, f64>) -> Array1<f64> {
        self.eigenvectors.t().dot(&u)
    }

    /// Spectral Dirichlet energy `½ Σ_{j≥1} λ_j ⟨u,q_j⟩²` over stored modes.
    pub fn dirichlet_energy(&self, u: ArrayView1<'_, f64>) -> f64 {
        let coeffs = self.coefficients(u);
        0.5 * coeffs
            .iter()
            .zip(self.eigenvalues.iter())
            .skip(1)
            .map(|(a, l)| l * a * a)
            .sum::<f64>()
    }
}

/// Compute the smallest eigenpairs of a Laplacian, ascending and orthonormal,
/// with the deterministic sign convention applied.
pub fn eigendecompose(laplacian: &Laplacian, truncation: Truncation) -> Result<LaplacianSpectrum> {
    let n = laplacian.n_nodes();
    let m = match truncation {
        Truncation::Full => n,
        Truncation::Count(ell) => {
            if ell < 1 || ell > n {
                return Err(Error::config(format!(
                    "truncation must satisfy 1 <= ell <= N (got {ell}, N={n})"
                )));
            }
            ell
        }
    };
    let (eigenvalues, mut eigenvectors) = lapack::smallest_eigenpairs(laplacian.matrix(), m)?;

    // Sanity: the normalized Laplacian spectrum lives in [0, 2].
    let lo = eigenvalues[0];
    let hi = eigenvalues[eigenvalues.len() - 1];
    if lo < -1e-10 || hi > 2.0 + 1e-10 {
        return Err(Error::numerical(format!(
            "eigenvalues outside [0, 2]: range [{lo}, {hi}]"
        )));
    }

    // Sign convention: make the largest-magnitude entry of each eigenvector
    // positive; the first such entry wins on exact magnitude ties.
    for mut col in eigenvectors.columns_mut() {
        let mut best = 0usize;
        for (i, &v) in col.iter().enumerate() {
            if v.abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.mapv_inplace(|v| -v);
        }
    }

    let mut eigenvalues = eigenvalues;
    // Clamp the numerically-zero bottom eigenvalue of the connected graph.
    let scale = hi.abs().max(1.0);
    if eigenvalues[0].abs() < 1e-10 * scale {
        eigenvalues[0] = 0.0;
    }
    if eigenvalues.len() > 1 && eigenvalues[1] <= 0.0 {
        return Err(Error::numerical(
            "second eigenvalue is not positive: graph effectively disconnected",
        ));
    }

    LaplacianSpectrum::from_parts(eigenvalues, eigenvectors, None)
}

/// Prior scaling constant: the factor c making the per-node prior variance 1.
///
/// full: `c = N / Σ_{j=1}^{N−1} λ_j^{−1}`;
/// projected: the sum truncates after j = m−1;
/// approximated: tail eigenvalues are replaced by λ̄, adding `(N−m)/λ̄`.
pub fn scaling_constant(spectrum: &LaplacianSpectrum, mode: PriorMode) -> Result<f64> {
    let m = spectrum.n_pairs();
    let n = spectrum.n_nodes();
    if m < 2 {
        return Err(Error::config("scaling requires at least one nonzero mode"));
    }
    let lam = spectrum.eigenvalues();
    if lam[1] <= 0.0 {
        return Err(Error::numerical("λ_1 <= 0: graph disconnected"));
    }
    let head: f64 = lam.iter().skip(1).map(|&l| 1.0 / l).sum();
    match mode {
        PriorMode::Full => {
            if !spectrum.is_full() {
                return Err(Error::config("full scaling requires the full spectrum"));
            }
            Ok(n as f64 / head)
        }
        PriorMode::Projected => Ok(n as f64 / head),
        PriorMode::Approximated => {
            let lambda_bar = spectrum
                .saturation()
                .ok_or_else(|| Error::config("approximated scaling requires a saturation level"))?;
            let tail = (n - m) as f64 / lambda_bar;
            Ok(n as f64 / (head + tail))
        }
    }
}

/// Saturation level λ̄: the maximum of the first `ell` nonzero eigenvalues
/// (λ_ell for a monotone spectrum). Falls back to the largest stored nonzero
/// eigenvalue when fewer than `ell + 1` pairs are stored.
pub fn saturation_level(spectrum: &LaplacianSpectrum, ell: usize) -> Result<f64> {
    let m = spectrum.n_pairs();
    if m < 2 {
        return Err(Error::config("saturation requires at least one nonzero mode"));
    }
    if ell < 1 {
        return Err(Error::config("ell must be at least 1"));
    }
    let last = ell.min(m - 1);
    let lam = spectrum.eigenvalues();
    let mut best = f64::NEG_INFINITY;
    for j in 1..=last {
        best = best.max(lam[j]);
    }
    Ok(best)
}
