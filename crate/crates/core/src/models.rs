//! The three posterior models — probit, Bayesian level-set, and
//! Ginzburg-Landau — with their threshold maps, misfit functionals Φ,
//! gradients, and MAP objectives J.

use ndarray::{Array1, ArrayView1};

use crate::error::{Error, Result};
use crate::prior::PriorSampler;
use crate::spectrum::{LaplacianSpectrum, PriorMode};

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

/// Hard threshold: +1 for u ≥ 0, −1 otherwise (the 0 ↦ +1 convention is used
/// everywhere, including empirical sign statistics).
pub fn threshold(u: ArrayView1<'_, f64>) -> Array1<f64> {
    u.mapv(|v| if v >= 0.0 { 1.0 } else { -1.0 })
}

/// Scalar version of [`threshold`].
pub fn sign_label(v: f64) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Double-well potential `W_ε(v) = (1/4ε)(v² − 1)²`.
pub fn double_well(v: f64, epsilon: f64) -> f64 {
    let q = v * v - 1.0;
    q * q / (4.0 * epsilon)
}

/// Relaxed threshold S_ε(u): the double-well gradient flow `v̇ = −W_ε'(v)`,
/// started at u and evaluated at t = 1.
///
/// The flow has the closed-form logistic solution in s = v²:
/// `s(t) = s₀ / (s₀ + (1 − s₀)e^{−2t/ε})`, with the sign of u preserved;
/// the e^{−2/ε} form stays finite for arbitrarily small ε.
pub fn relaxed_threshold(u: f64, epsilon: f64) -> f64 {
    if u == 0.0 {
        return 0.0;
    }
    let s0 = u * u;
    let decay = (-2.0 / epsilon).exp();
    let s1 = s0 / (s0 + (1.0 - s0) * decay);
    u.signum() * s1.sqrt()
}

/// Standard normal cumulative distribution function.
pub fn std_normal_cdf(t: f64) -> f64 {
    0.5 * libm::erfc(-t / SQRT_2)
}

/// Probit link Ψ(v; γ) = P(N(0, γ²) ≤ v), the cdf of centred Gaussian noise.
pub fn probit_cdf(v: f64, gamma: f64) -> f64 {
    std_normal_cdf(v / gamma)
}

/// Alternating Mills-ratio asymptotic series
/// `S(t) = 1 − 1/t² + 3/t⁴ − 15/t⁶ + …` for t ≪ 0, truncated adaptively at
/// its smallest term (the optimal stopping point of an asymptotic series).
fn mills_series(t: f64) -> f64 {
    let inv_t2 = 1.0 / (t * t);
    let mut sum = 1.0;
    let mut term = 1.0;
    let mut k = 1.0;
    loop {
        let next = -term * (2.0 * k - 1.0) * inv_t2;
        if next.abs() >= term.abs() && k > 1.0 {
            break;
        }
        sum += next;
        term = next;
        k += 1.0;
        if k > 60.0 {
            break;
        }
    }
    sum
}

/// log Φ_std(t), finite for every finite t.
///
/// Direct evaluation through erfc underflows near t ≈ −38; below t = −8 the
/// Mills-ratio expansion `log Φ(t) = −t²/2 − log(−t) − log√(2π) + log S(t)`
/// is used instead (the two branches agree to ~1e-13 at the switch point).
pub fn log_std_normal_cdf(t: f64) -> f64 {
    if t >= -8.0 {
        std_normal_cdf(t).ln()
    } else {
        -0.5 * t * t - (-t).ln() - LN_SQRT_2PI + mills_series(t).ln()
    }
}

/// Hazard ratio φ(t)/Φ(t) of the standard normal, the derivative of
/// −log Φ(t) up to sign; same branch structure as [`log_std_normal_cdf`].
pub fn std_normal_hazard(t: f64) -> f64 {
    if t >= -8.0 {
        let log_pdf = -0.5 * t * t - LN_SQRT_2PI;
        (log_pdf - log_std_normal_cdf(t)).exp()
    } else {
        -t / mills_series(t)
    }
}

/// Observed labels: a subset of nodes with values and the noise level γ.
#[derive(Debug, Clone)]
pub struct LabelData {
    nodes: Vec<usize>,
    values: Vec<f64>,
    gamma: f64,
}

impl LabelData {
    /// Build from (node, label) pairs. Indices must be unique and within
    /// range; values must be finite. Binary ±1 values are required by the
    /// probit and level-set models and checked at model binding.
    pub fn new(entries: Vec<(usize, f64)>, gamma: f64, n_nodes: usize) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::config("observed label set must be nonempty"));
        }
        if !(gamma > 0.0) {
            return Err(Error::config("label noise gamma must be positive"));
        }
        let mut seen = vec![false; n_nodes];
        for &(j, y) in &entries {
            if j >= n_nodes {
                return Err(Error::config(format!(
                    "label index {j} out of range for {n_nodes} nodes"
                )));
            }
            if seen[j] {
                return Err(Error::config(format!("duplicate label for node {j}")));
            }
            seen[j] = true;
            if !y.is_finite() {
                return Err(Error::config(format!("non-finite label at node {j}")));
            }
        }
        let (nodes, values) = entries.into_iter().unzip();
        Ok(LabelData {
            nodes,
            values,
            gamma,
        })
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.nodes.iter().copied().zip(self.values.iter().copied())
    }

    pub fn all_binary(&self) -> bool {
        self.values.iter().all(|&y| y == 1.0 || y == -1.0)
    }

    /// The observed entries of a state vector, in label order.
    pub fn gather(&self, u: ArrayView1<'_, f64>) -> Array1<f64> {
        Array1::from_iter(self.nodes.iter().map(|&j| u[j]))
    }
}

/// Which of the three posterior models is in use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Probit,
    Bls,
    Gl,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelKind::Probit => write!(f, "probit"),
            ModelKind::Bls => write!(f, "bls"),
            ModelKind::Gl => write!(f, "gl"),
        }
    }
}

/// Model selection plus its scalar parameters.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub gamma: f64,
    /// Double-well width; required by (and only used for) Ginzburg-Landau.
    pub epsilon: Option<f64>,
    /// The prior scaling constant c, fixing the precision P = c^{−1}L.
    pub precision_scale: f64,
}

impl ModelSpec {
    pub fn new(
        kind: ModelKind,
        gamma: f64,
        epsilon: Option<f64>,
        precision_scale: f64,
    ) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(Error::config("model gamma must be positive"));
        }
        if !(precision_scale > 0.0) {
            return Err(Error::config("precision scale must be positive"));
        }
        if kind == ModelKind::Gl {
            match epsilon {
                Some(e) if e > 0.0 => {}
                _ => {
                    return Err(Error::config(
                        "Ginzburg-Landau requires a positive epsilon",
                    ))
                }
            }
        }
        Ok(ModelSpec {
            kind,
            gamma,
            epsilon,
            precision_scale,
        })
    }

    /// ε for a GL model; panics if called for other kinds (guarded by `new`).
    pub fn epsilon_gl(&self) -> f64 {
        self.epsilon.expect("epsilon validated for GL models")
    }
}

/// Probit misfit `Φ_p(u; y) = −Σ_{j∈Z'} log Ψ(y_j u_j; γ)`, evaluated from
/// the observed entries of u.
pub fn phi_probit_observed(u_obs: ArrayView1<'_, f64>, labels: &LabelData) -> f64 {
    let gamma = labels.gamma();
    u_obs
        .iter()
        .zip(labels.values())
        .map(|(&u, &y)| -log_std_normal_cdf(y * u / gamma))
        .sum()
}

/// Probit misfit on a full state vector.
pub fn phi_probit(u: ArrayView1<'_, f64>, labels: &LabelData) -> f64 {
    phi_probit_observed(labels.gather(u).view(), labels)
}

/// Gradient of Φ_p: component `−(y_j/γ)·r(y_j u_j/γ)` at observed nodes
/// (with r the standard normal hazard), zero elsewhere.
pub fn grad_phi_probit(u: ArrayView1<'_, f64>, labels: &LabelData) -> Array1<f64> {
    let gamma = labels.gamma();
    let mut g = Array1::zeros(u.len());
    for (j, y) in labels.iter() {
        g[j] = -(y / gamma) * std_normal_hazard(y * u[j] / gamma);
    }
    g
}

/// Level-set misfit `Φ_ls(u; y) = Σ_{j∈Z'} |y_j − S(u_j)|² / (2γ²)`,
/// piecewise constant in u.
pub fn phi_bls_observed(u_obs: ArrayView1<'_, f64>, labels: &LabelData) -> f64 {
    let gamma = labels.gamma();
    let misfit: f64 = u_obs
        .iter()
        .zip(labels.values())
        .map(|(&u, &y)| {
            let d = y - sign_label(u);
            d * d
        })
        .sum();
    misfit / (2.0 * gamma * gamma)
}

/// Level-set misfit on a full state vector.
pub fn phi_bls(u: ArrayView1<'_, f64>, labels: &LabelData) -> f64 {
    phi_bls_observed(labels.gather(u).view(), labels)
}

/// Ginzburg-Landau misfit
/// `Φ_gl(v; y) = Σ_{j∈Z} W_ε(v_j) + Σ_{j∈Z'} |y_j − v_j|² / (2γ²)`;
/// the double-well sum runs over every node.
pub fn phi_gl(v: ArrayView1<'_, f64>, labels: &LabelData, epsilon: f64) -> f64 {
    let gamma = labels.gamma();
    let well: f64 = v.iter().map(|&x| double_well(x, epsilon)).sum();
    let misfit: f64 = labels
        .iter()
        .map(|(j, y)| {
            let d = y - v[j];
            d * d
        })
        .sum();
    well + misfit / (2.0 * gamma * gamma)
}

/// Gradient of Φ_gl: `(1/ε)(v³ − v)` everywhere plus `(v − y)/γ²` on
/// observed nodes.
pub fn grad_phi_gl(v: ArrayView1<'_, f64>, labels: &LabelData, epsilon: f64) -> Array1<f64> {
    let gamma = labels.gamma();
    let mut g = v.mapv(|x| (x * x * x - x) / epsilon);
    for (j, y) in labels.iter() {
        g[j] += (v[j] - y) / (gamma * gamma);
    }
    g
}

/// The MAP objective `J(w) = (1/2c) Σ_{j≥1} λ_j ⟨w,q_j⟩² + Φ(w)`, with the
/// quadratic term evaluated spectrally over the stored modes.
pub fn objective(
    w: ArrayView1<'_, f64>,
    model: &ModelSpec,
    spectrum: &LaplacianSpectrum,
    labels: &LabelData,
) -> Result<f64> {
    if w.len() != spectrum.n_nodes() {
        return Err(Error::config("dimension mismatch in objective"));
    }
    let quad = spectrum.dirichlet_energy(w) / model.precision_scale;
    let phi = match model.kind {
        ModelKind::Probit => phi_probit(w, labels),
        ModelKind::Bls => phi_bls(w, labels),
        ModelKind::Gl => phi_gl(w, labels, model.epsilon_gl()),
    };
    Ok(quad + phi)
}

/// A fully bound posterior: prior sampler + model + labels, validated for
/// mutual consistency. This is what the samplers and optimizers consume.
#[derive(Debug, Clone)]
pub struct PosteriorProblem<'a> {
    sampler: PriorSampler<'a>,
    model: ModelSpec,
    labels: LabelData,
}

impl<'a> PosteriorProblem<'a> {
    pub fn new(sampler: PriorSampler<'a>, model: ModelSpec, labels: LabelData) -> Result<Self> {
        if labels.gamma() != model.gamma {
            return Err(Error::config(format!(
                "label noise gamma ({}) and model gamma ({}) disagree",
                labels.gamma(),
                model.gamma
            )));
        }
        if let Some(&j) = labels.nodes().iter().find(|&&j| j >= sampler.n_nodes()) {
            return Err(Error::config(format!(
                "label index {j} out of range for {} nodes",
                sampler.n_nodes()
            )));
        }
        if matches!(model.kind, ModelKind::Probit | ModelKind::Bls) && !labels.all_binary() {
            return Err(Error::config(
                "probit and level-set models require labels in {−1, +1}",
            ));
        }
        let c = sampler.scaling();
        if (model.precision_scale - c).abs() > 1e-12 * c.max(1.0) {
            return Err(Error::config(format!(
                "model precision scale ({}) disagrees with the prior scaling ({c})",
                model.precision_scale
            )));
        }
        Ok(PosteriorProblem {
            sampler,
            model,
            labels,
        })
    }

    pub fn sampler(&self) -> &PriorSampler<'a> {
        &self.sampler
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn labels(&self) -> &LabelData {
        &self.labels
    }

    pub fn spectrum(&self) -> &LaplacianSpectrum {
        self.sampler.spectrum()
    }

    pub fn prior_mode(&self) -> PriorMode {
        self.sampler.mode()
    }

    pub fn n_nodes(&self) -> usize {
        self.sampler.n_nodes()
    }

    /// Misfit Φ on a full state vector.
    pub fn phi(&self, u: ArrayView1<'_, f64>) -> f64 {
        match self.model.kind {
            ModelKind::Probit => phi_probit(u, &self.labels),
            ModelKind::Bls => phi_bls(u, &self.labels),
            ModelKind::Gl => phi_gl(u, &self.labels, self.model.epsilon_gl()),
        }
    }

    /// Misfit Φ from the observed entries alone. `None` for models whose Φ
    /// touches every node (Ginzburg-Landau).
    pub fn phi_observed(&self, u_obs: ArrayView1<'_, f64>) -> Option<f64> {
        match self.model.kind {
            ModelKind::Probit => Some(phi_probit_observed(u_obs, &self.labels)),
            ModelKind::Bls => Some(phi_bls_observed(u_obs, &self.labels)),
            ModelKind::Gl => None,
        }
    }

    /// Gradient of Φ. Level-set has none (piecewise constant).
    pub fn grad_phi(&self, u: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        match self.model.kind {
            ModelKind::Probit => Ok(grad_phi_probit(u, &self.labels)),
            ModelKind::Gl => Ok(grad_phi_gl(u, &self.labels, self.model.epsilon_gl())),
            ModelKind::Bls => Err(Error::config(
                "the level-set misfit is piecewise constant and has no gradient",
            )),
        }
    }

    /// The MAP objective J at a full state vector.
    pub fn objective(&self, w: ArrayView1<'_, f64>) -> Result<f64> {
        objective(w, &self.model, self.spectrum(), &self.labels)
    }
}
