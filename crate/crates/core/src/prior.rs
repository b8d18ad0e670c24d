//! Sampling from the graph-Gaussian prior N(0, C) with C = c QΣQ*, its
//! spectrally projected restriction, and the saturated-tail approximation;
//! plus the pCN proposal kernel built on those draws.

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::spectrum::{scaling_constant, LaplacianSpectrum, PriorMode};

/// Prior sampler: immutable configuration over a spectrum; RNG state is
/// passed explicitly per call so independent chains can share one sampler.
#[derive(Debug, Clone)]
pub struct PriorSampler<'a> {
    spectrum: &'a LaplacianSpectrum,
    mode: PriorMode,
    scaling: f64,
    /// Standard deviations √(c/λ_j) of the Karhunen-Loève coefficients on
    /// q_1 … q_{m−1}.
    coeff_std: Array1<f64>,
    /// Tail standard deviation √(c/λ̄) (approximated mode only).
    tail_std: Option<f64>,
}

impl<'a> PriorSampler<'a> {
    pub fn new(spectrum: &'a LaplacianSpectrum, mode: PriorMode) -> Result<Self> {
        match mode {
            PriorMode::Full => {
                if !spectrum.is_full() {
                    return Err(Error::config(
                        "full prior mode requires the full spectrum (m = N)",
                    ));
                }
            }
            PriorMode::Projected => {}
            PriorMode::Approximated => {
                if spectrum.saturation().is_none() {
                    return Err(Error::config(
                        "approximated prior mode requires a saturation level",
                    ));
                }
            }
        }
        let scaling = scaling_constant(spectrum, mode)?;
        let lam = spectrum.eigenvalues();
        let coeff_std = Array1::from_iter(lam.iter().skip(1).map(|&l| (scaling / l).sqrt()));
        let tail_std = match mode {
            PriorMode::Approximated => {
                let lambda_bar = spectrum.saturation().expect("checked above");
                Some((scaling / lambda_bar).sqrt())
            }
            _ => None,
        };
        Ok(PriorSampler {
            spectrum,
            mode,
            scaling,
            coeff_std,
            tail_std,
        })
    }

    pub fn spectrum(&self) -> &LaplacianSpectrum {
        self.spectrum
    }

    pub fn mode(&self) -> PriorMode {
        self.mode
    }

    /// The scaling constant c (c_ℓ, c_{ℓ,o}) in effect.
    pub fn scaling(&self) -> f64 {
        self.scaling
    }

    /// Standard deviations of the coefficients on q_1 … q_{m−1}.
    pub fn coeff_std(&self) -> &Array1<f64> {
        &self.coeff_std
    }

    /// Number of active Karhunen-Loève coefficients (m − 1).
    pub fn n_coeffs(&self) -> usize {
        self.coeff_std.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.spectrum.n_nodes()
    }

    /// Draw the coefficient part of one sample: √(c/λ_j)·z_j for j = 1…m−1.
    pub fn sample_coefficients<R: Rng + ?Sized>(&self, rng: &mut R) -> Array1<f64> {
        Array1::from_iter(
            self.coeff_std
                .iter()
                .map(|&sd| sd * rng.sample::<f64, _>(StandardNormal)),
        )
    }

    /// Draw `count` samples as columns of an N×count matrix.
    ///
    /// The RNG is consumed sample by sample (coefficients z_1…z_{m−1}, then —
    /// in approximated mode — the tail vector z̄), so batching does not change
    /// the stream: k draws consume the same randomness regardless of how they
    /// are grouped into batches.
    pub fn sample_batch<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Array2<f64> {
        let n = self.n_nodes();
        let m1 = self.n_coeffs();
        let q_active = self.active_basis();

        match self.mode {
            PriorMode::Full | PriorMode::Projected => {
                let mut coeffs = Array2::zeros((m1, count));
                for mut col in coeffs.columns_mut() {
                    for (c, &sd) in col.iter_mut().zip(self.coeff_std.iter()) {
                        *c = sd * rng.sample::<f64, _>(StandardNormal);
                    }
                }
                q_active.dot(&coeffs)
            }
            PriorMode::Approximated => {
                let tail_std = self.tail_std.expect("approximated mode");
                let mut coeffs = Array2::zeros((m1, count));
                let mut zbar = Array2::zeros((n, count));
                for k in 0..count {
                    for (c, &sd) in coeffs.column_mut(k).iter_mut().zip(self.coeff_std.iter()) {
                        *c = sd * rng.sample::<f64, _>(StandardNormal);
                    }
                    for z in zbar.column_mut(k).iter_mut() {
                        *z = rng.sample::<f64, _>(StandardNormal);
                    }
                }
                let mut out = q_active.dot(&coeffs);
                // Tail: project z̄ onto the complement of span(q_0 … q_{m−1});
                // removing q_0 as well keeps samples in the prior support.
                let q_all = self.spectrum.eigenvectors();
                let proj = q_all.dot(&q_all.t().dot(&zbar));
                out.zip_mut_with(&(&zbar - &proj), |o, &t| *o += tail_std * t);
                out
            }
        }
    }

    /// Draw a single prior sample.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Array1<f64> {
        let batch = self.sample_batch(1, rng);
        batch.column(0).to_owned()
    }

    /// The pCN proposal `w = √(1−β²)·u + β·ξ` with ξ a fresh prior draw.
    pub fn pcn_proposal<R: Rng + ?Sized>(
        &self,
        u: ArrayView1<'_, f64>,
        beta: f64,
        rng: &mut R,
    ) -> Result<Array1<f64>> {
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::config("pCN step beta must lie in [0, 1]"));
        }
        let xi = self.sample(rng);
        Ok(&u * (1.0 - beta * beta).sqrt() + &(&xi * beta))
    }

    /// Columns q_1 … q_{m−1} (the active sampling basis).
    pub fn active_basis(&self) -> ndarray::ArrayView2<'_, f64> {
        let m = self.spectrum.n_pairs();
        self.spectrum.eigenvectors().slice(ndarray::s![.., 1..m])
    }

    /// Reconstruct a node-space vector from active coefficients.
    pub fn from_coefficients(&self, coeffs: ArrayView1<'_, f64>) -> Array1<f64> {
        self.active_basis().dot(&coeffs)
    }
}
