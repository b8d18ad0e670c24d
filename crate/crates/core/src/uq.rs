//! Posterior summaries in label space: per-node confidence scores, label
//! variances, hard classifications, and uncertainty rankings.

use ndarray::{Array1, ArrayView1};

use crate::error::{Error, Result};
use crate::models::{self, ModelKind};
use crate::sampler::ChainOutput;

/// Label-space posterior summary for one chain (or a merge of chains).
#[derive(Debug, Clone)]
pub struct UQSummary {
    /// Per-node confidence s_j ∈ [−1, 1]: for probit and level-set chains
    /// 2·P(u_j ≥ 0) − 1 under the empirical measure; for Ginzburg-Landau the
    /// posterior mean of v_j, clamped into [−1, 1].
    pub scores: Array1<f64>,
    /// Per-node label variance in [0, 1], computed from the sign chain for
    /// every model: 1 − (2·P(u_j ≥ 0) − 1)².
    pub node_variance: Array1<f64>,
    /// Average of `node_variance`; 1 exactly when every node is a coin flip.
    pub mean_variance: f64,
    /// S(scores): the thresholded classification, with S(0) = +1.
    pub hard_labels: Array1<f64>,
    /// Node indices sorted by ascending |score| (most uncertain first),
    /// ties broken by index.
    pub uncertainty_order: Vec<usize>,
    /// Per-node posterior mean of the raw state (u, or v for
    /// Ginzburg-Landau).
    pub value_mean: Array1<f64>,
    /// Per-node posterior variance of the raw state.
    pub value_variance: Array1<f64>,
}

impl UQSummary {
    /// Reduce a chain to its label-space summary.
    pub fn from_chain(chain: &ChainOutput, kind: ModelKind) -> Result<Self> {
        let reducer = &chain.reducer;
        if reducer.n_samples() == 0 {
            return Err(Error::config(
                "cannot summarize an empty chain: no post-burn-in samples",
            ));
        }
        let sign_scores = reducer.nonneg_fraction().mapv(|q| 2.0 * q - 1.0);
        let node_variance = sign_scores.mapv(|s| 1.0 - s * s);
        let value_mean = reducer.mean();
        let scores = match kind {
            ModelKind::Probit | ModelKind::Bls => sign_scores,
            ModelKind::Gl => value_mean.mapv(|v| v.clamp(-1.0, 1.0)),
        };
        let mean_variance = node_variance.mean().unwrap_or(0.0);
        let hard_labels = models::threshold(scores.view());
        let uncertainty_order = rank_by_uncertainty(scores.view());
        Ok(UQSummary {
            scores,
            node_variance,
            mean_variance,
            hard_labels,
            uncertainty_order,
            value_mean,
            value_variance: reducer.variance(),
        })
    }

    /// Nodes whose classification is uncertain at threshold θ: |s_j| < θ.
    pub fn uncertain_below(&self, theta: f64) -> Vec<usize> {
        filter_uncertain(self.scores.view(), theta)
    }
}

/// Per-node confidence scores of a chain: sign-fraction scores for probit and
/// level-set models, the raw posterior mean for Ginzburg-Landau.
pub fn posterior_label_mean(chain: &ChainOutput, kind: ModelKind) -> Result<Array1<f64>> {
    Ok(UQSummary::from_chain(chain, kind)?.scores)
}

/// Average label variance (1/N)Σ(1 − s_j²); equals 1 only at s ≡ 0.
pub fn mean_posterior_variance(scores: ArrayView1<'_, f64>) -> f64 {
    if scores.is_empty() {
        return 0.0;
    }
    scores.mapv(|s| 1.0 - s * s).mean().unwrap_or(0.0)
}

/// Node indices ordered most-uncertain-first: ascending |s_j|, ties by index.
pub fn rank_by_uncertainty(scores: ArrayView1<'_, f64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[a]
            .abs()
            .partial_cmp(&scores[b].abs())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}

/// Indices with |s_j| < θ, in index order.
pub fn filter_uncertain(scores: ArrayView1<'_, f64>, theta: f64) -> Vec<usize> {
    scores
        .iter()
        .enumerate()
        .filter(|&(_, &s)| s.abs() < theta)
        .map(|(j, _)| j)
        .collect()
}

/// Hard classification S(scores).
pub fn classify(scores: ArrayView1<'_, f64>) -> Array1<f64> {
    models::threshold(scores)
}

/// Fraction of nodes whose hard label matches the truth.
pub fn accuracy(labels: ArrayView1<'_, f64>, truth: ArrayView1<'_, f64>) -> Result<f64> {
    if labels.len() != truth.len() {
        return Err(Error::config(format!(
            "label/truth dimension mismatch: {} vs {}",
            labels.len(),
            truth.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::config("cannot score an empty label vector"));
    }
    let matched = labels
        .iter()
        .zip(truth.iter())
        .filter(|(&l, &t)| l == t)
        .count();
    Ok(matched as f64 / labels.len() as f64)
}

/// Accuracy up to a global label swap: max(acc, 1 − acc). Appropriate when
/// the ±1 naming of the two classes is arbitrary.
pub fn swap_invariant_accuracy(
    labels: ArrayView1<'_, f64>,
    truth: ArrayView1<'_, f64>,
) -> Result<f64> {
    let acc = accuracy(labels, truth)?;
    Ok(acc.max(1.0 - acc))
}
