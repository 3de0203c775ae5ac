//! Finite hypothesis classes of threshold rules with categorical
//! distributions over them. Expectations under these distributions are
//! computed exactly.

use ndarray::ArrayView1;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// `h_θ(x) = 1[x_feature ≥ θ]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRule {
    pub theta: f64,
    #[serde(default)]
    pub feature: usize,
}

impl ThresholdRule {
    pub fn new(theta: f64) -> Self {
        Self { theta, feature: 0 }
    }

    pub fn predict(&self, x: ArrayView1<'_, f32>) -> usize {
        usize::from(f64::from(x[self.feature]) >= self.theta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteHypothesisClass {
    pub rules: Vec<ThresholdRule>,
}

impl FiniteHypothesisClass {
    pub fn new(rules: Vec<ThresholdRule>) -> Result<Self> {
        if rules.is_empty() {
            return Err(invalid("hypothesis class must be nonempty"));
        }
        Ok(Self { rules })
    }

    /// `size` thresholds evenly spaced on `[0, 1]`, endpoints included.
    pub fn threshold_grid(size: usize) -> Result<Self> {
        match size {
            0 => Err(invalid("hypothesis class must be nonempty")),
            1 => Self::new(vec![ThresholdRule::new(0.5)]),
            _ => Self::new(
                (0..size)
                    .map(|k| ThresholdRule::new(k as f64 / (size - 1) as f64))
                    .collect(),
            ),
        }
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }
}

/// Probability vector over a [`FiniteHypothesisClass`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalDistribution {
    pub class: FiniteHypothesisClass,
    weights: Vec<f64>,
}

impl CategoricalDistribution {
    pub fn new(class: FiniteHypothesisClass, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != class.len() {
            return Err(Error::LengthMismatch {
                expected: class.len(),
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(invalid("weights must be non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { class, weights })
    }

    pub fn uniform(class: FiniteHypothesisClass) -> Self {
        let m = class.len();
        Self {
            class,
            weights: vec![1.0 / m as f64; m],
        }
    }

    pub fn point_mass(class: FiniteHypothesisClass, index: usize) -> Result<Self> {
        if index >= class.len() {
            return Err(invalid(format!("index {index} outside class of {}", class.len())));
        }
        let mut weights = vec![0.0; class.len()];
        weights[index] = 1.0;
        Ok(Self { class, weights })
    }

    /// `softmax(logits)`; entries at `-∞` get zero mass.
    pub fn from_logits(class: FiniteHypothesisClass, logits: &[f64]) -> Result<Self> {
        if logits.len() != class.len() {
            return Err(Error::LengthMismatch {
                expected: class.len(),
                got: logits.len(),
            });
        }
        Ok(Self {
            class,
            weights: softmax(logits),
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Index drawn with probability proportional to the weights.
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut last = 0;
        for (i, &w) in self.weights.iter().enumerate() {
            if w > 0.0 {
                acc += w;
                last = i;
                if u < acc {
                    return i;
                }
            }
        }
        last
    }
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// `Σ_h ρ(h)·ln(ρ(h)/π(h))`; `+∞` when `ρ` puts mass where `π` has none.
pub fn categorical_kl(post: &CategoricalDistribution, prior: &CategoricalDistribution) -> Result<f64> {
    if post.class != prior.class {
        return Err(Error::ShapeMismatch("different hypothesis classes".into()));
    }
    let mut kl = 0.0;
    for (&r, &p) in post.weights.iter().zip(&prior.weights) {
        if r > 0.0 {
            if p == 0.0 {
                return Ok(f64::INFINITY);
            }
            kl += r * (r / p).ln();
        }
    }
    Ok(kl.max(0.0))
}
