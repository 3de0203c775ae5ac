//! Hypotheses, distributions over them, and how their losses are evaluated.
//!
//! Two backends share one interface: categorical distributions over a finite
//! class of threshold rules (expectations are exact), and factorized Gaussian
//! distributions over network weights (expectations are estimated with one
//! draw per data point).

pub mod finite;
pub mod network;
pub mod surrogate;
pub mod train;

use ndarray::ArrayView1;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::concentration::ProbValue;
use crate::data::View;
use crate::error::{Error, Result};
use crate::rng::stream_rng;

pub use finite::{categorical_kl, CategoricalDistribution, FiniteHypothesisClass, ThresholdRule};
pub use network::{gaussian_kl, Architecture, GaussianNetworkDistribution, Mlp};
pub use surrogate::{bounded_cross_entropy, sigmoid_indicator, SurrogateConfig};

/// A deterministic prediction rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Classifier {
    Threshold(ThresholdRule),
    Network(Mlp),
}

impl Classifier {
    pub fn predict(&self, x: ArrayView1<'_, f32>) -> Result<usize> {
        match self {
            Classifier::Threshold(rule) => {
                if rule.feature >= x.len() {
                    return Err(Error::ShapeMismatch(format!(
                        "threshold on feature {} of a {}-dimensional input",
                        rule.feature,
                        x.len()
                    )));
                }
                Ok(rule.predict(x))
            }
            Classifier::Network(net) => {
                if net.arch.input_dim() != x.len() {
                    return Err(Error::ShapeMismatch(format!(
                        "network expects {} inputs, got {}",
                        net.arch.input_dim(),
                        x.len()
                    )));
                }
                Ok(net.predict(x))
            }
        }
    }
}

/// `1[h(x) ≠ y]`.
pub fn zero_one_loss(h: &Classifier, x: ArrayView1<'_, f32>, y: usize) -> Result<u8> {
    Ok(u8::from(h.predict(x)? != y))
}

/// Zero-one losses of `h` on every point of `view`.
pub fn classifier_losses(h: &Classifier, view: &View<'_>) -> Result<Vec<u8>> {
    (0..view.len())
        .map(|p| zero_one_loss(h, view.x(p), view.y(p)))
        .collect()
}

/// Mean zero-one loss of `h` on `view`.
pub fn classifier_error(h: &Classifier, view: &View<'_>) -> Result<f64> {
    if view.is_empty() {
        return Err(Error::EmptyData);
    }
    let losses = classifier_losses(h, view)?;
    Ok(losses.iter().map(|&l| f64::from(l)).sum::<f64>() / view.len() as f64)
}

/// How expectations over a hypothesis distribution are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    /// Closed-form posterior averages; finite backend only.
    Exact,
    /// One independent hypothesis draw per data point.
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "snake_case")]
pub enum HypothesisDistribution {
    Finite(CategoricalDistribution),
    Network(GaussianNetworkDistribution),
}

/// Rows evaluated together when sampling network predictions.
const CHUNK: usize = 256;

impl HypothesisDistribution {
    /// `KL(self ‖ prior)`.
    pub fn kl(&self, prior: &HypothesisDistribution) -> Result<f64> {
        match (self, prior) {
            (Self::Finite(a), Self::Finite(b)) => categorical_kl(a, b),
            (Self::Network(a), Self::Network(b)) => gaussian_kl(a, b),
            _ => Err(Error::ShapeMismatch("distributions from different backends".into())),
        }
    }

    pub fn sample_hypothesis<R: Rng + ?Sized>(&self, rng: &mut R) -> Classifier {
        match self {
            Self::Finite(d) => Classifier::Threshold(d.class.rules[d.sample_index(rng)]),
            Self::Network(d) => Classifier::Network(d.sample(rng)),
        }
    }

    /// Zero-one loss of an independent draw for each point of `view`.
    ///
    /// The draw for a point comes from the stream of `seed` numbered by the
    /// point's index in the underlying dataset, so a point gets the same
    /// draw in every view that contains it, whatever the evaluation order.
    pub fn sampled_losses(&self, view: &View<'_>, seed: u64) -> Result<Vec<u8>> {
        match self {
            Self::Finite(d) => (0..view.len())
                .into_par_iter()
                .map(|p| {
                    let mut rng = stream_rng(seed, view.indices[p] as u64);
                    let rule = d.class.rules[d.sample_index(&mut rng)];
                    zero_one_loss(&Classifier::Threshold(rule), view.x(p), view.y(p))
                })
                .collect(),
            Self::Network(d) => {
                if d.arch.input_dim() != view.data.dim() {
                    return Err(Error::ShapeMismatch(format!(
                        "network expects {} inputs, data has {}",
                        d.arch.input_dim(),
                        view.data.dim()
                    )));
                }
                let positions: Vec<usize> = (0..view.len()).collect();
                let chunks: Vec<Vec<u8>> = positions
                    .par_chunks(CHUNK)
                    .map(|chunk| {
                        let x = view.batch(chunk);
                        let mut rngs: Vec<_> = chunk
                            .iter()
                            .map(|&p| stream_rng(seed, view.indices[p] as u64))
                            .collect();
                        let logits = d.sample_logits_per_row(&x, &mut rngs);
                        chunk
                            .iter()
                            .enumerate()
                            .map(|(r, &p)| u8::from(network::argmax(logits.row(r)) != view.y(p)))
                            .collect()
                    })
                    .collect();
                Ok(chunks.concat())
            }
        }
    }

    /// Probability that a random hypothesis errs on each point of `view`.
    pub fn error_probabilities(&self, view: &View<'_>) -> Result<Vec<f64>> {
        match self {
            Self::Finite(d) => {
                let table = finite_loss_table(&d.class, view)?;
                let mut probs = vec![0.0; view.len()];
                for (w, losses) in d.weights().iter().zip(&table) {
                    if *w > 0.0 {
                        for (p, &l) in probs.iter_mut().zip(losses) {
                            *p += w * f64::from(l);
                        }
                    }
                }
                Ok(probs)
            }
            Self::Network(_) => Err(Error::ExactUnsupported),
        }
    }
}

/// `table[k][i]`: zero-one loss of rule `k` on point `i` of `view`.
pub fn finite_loss_table(class: &FiniteHypothesisClass, view: &View<'_>) -> Result<Vec<Vec<u8>>> {
    class
        .rules
        .iter()
        .map(|&r| classifier_losses(&Classifier::Threshold(r), view))
        .collect()
}

/// Gibbs loss of `dist` on `view` and the number of draws behind it (zero in
/// exact mode).
pub fn empirical_gibbs_loss(
    dist: &HypothesisDistribution,
    view: &View<'_>,
    mode: EvalMode,
    seed: u64,
) -> Result<(ProbValue, usize)> {
    if view.is_empty() {
        return Err(Error::EmptyData);
    }
    let n = view.len() as f64;
    match mode {
        EvalMode::Exact => {
            let probs = dist.error_probabilities(view)?;
            Ok((ProbValue::clamped(probs.iter().sum::<f64>() / n), 0))
        }
        EvalMode::Sampled => {
            let losses = dist.sampled_losses(view, seed)?;
            let total: u64 = losses.iter().map(|&l| u64::from(l)).sum();
            Ok((ProbValue::clamped(total as f64 / n), view.len()))
        }
    }
}
