//! Bernoulli relative entropy, its inverses, and the split-kl inequality for
//! random variables on a finite grid.
//!
//! A `(K+1)`-valued variable `Z ∈ {b_0 < … < b_K}` decomposes exactly as
//!
//! ```text
//! Z = b_0 + Σ_j α_j · 1[Z ≥ b_j],   α_j = b_j − b_{j−1}
//! ```
//!
//! Each indicator is a Bernoulli variable, so the kl inequality applies to
//! each of them separately and a union bound over the `K` components gives
//! an upper bound on `E[Z]` that adapts to the variance of `Z`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Bisection iteration cap for the kl inverses.
pub const KL_INV_MAX_ITER: usize = 200;

/// Absolute tolerance used to match a value to a support point.
pub const SUPPORT_TOL: f64 = 1e-12;

/// A probability, i.e. a real number in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct ProbValue(f64);

impl ProbValue {
    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(invalid(format!("probability {value} outside [0, 1]")))
        }
    }

    /// Clamps into `[0, 1]`; NaN maps to 1.
    pub fn clamped(value: f64) -> Self {
        if value.is_nan() {
            Self(1.0)
        } else {
            Self(value.clamp(0.0, 1.0))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for ProbValue {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<ProbValue> for f64 {
    fn from(p: ProbValue) -> f64 {
        p.0
    }
}

fn check_prob(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(invalid(format!("{name} = {p} outside [0, 1]")))
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps >= 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("kl budget {eps} must be non-negative")))
    }
}

pub(crate) fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("confidence parameter {delta} outside (0, 1)")))
    }
}

/// `kl(p‖q)`, the KL divergence between Bernoulli(p) and Bernoulli(q).
///
/// Uses `0·ln(0/x) = 0`, and returns `+∞` when `q` puts no mass on an
/// outcome that `p` can produce.
pub fn bern_kl(p: f64, q: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&p) && (0.0..=1.0).contains(&q));
    let mut kl = 0.0;
    if p > 0.0 {
        if q == 0.0 {
            return f64::INFINITY;
        }
        kl += p * (p / q).ln();
    }
    if p < 1.0 {
        if q == 1.0 {
            return f64::INFINITY;
        }
        kl += (1.0 - p) * ((1.0 - p) / (1.0 - q)).ln();
    }
    // Rounding can leave a tiny negative value when p ≈ q.
    kl.max(0.0)
}

/// Largest `q ∈ [p_hat, 1]` with `kl(p_hat‖q) ≤ eps`.
///
/// The boundary cases `p_hat ∈ {0, 1}` are solved in closed form. Otherwise
/// bisection runs until the bracket collapses to adjacent floats (or
/// [`KL_INV_MAX_ITER`] halvings), and the feasible end of the bracket is
/// returned.
pub fn kl_inv_upper(p_hat: f64, eps: f64) -> Result<f64> {
    check_prob("p_hat", p_hat)?;
    check_eps(eps)?;
    if eps == 0.0 || p_hat == 1.0 {
        return Ok(p_hat);
    }
    if eps == f64::INFINITY {
        return Ok(1.0);
    }
    if p_hat == 0.0 {
        // kl(0‖q) = −ln(1 − q)
        return Ok(-(-eps).exp_m1());
    }
    let (mut lo, mut hi) = (p_hat, 1.0_f64);
    for _ in 0..KL_INV_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if bern_kl(p_hat, mid) <= eps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Smallest `q ∈ [0, p_hat]` with `kl(p_hat‖q) ≤ eps`.
pub fn kl_inv_lower(p_hat: f64, eps: f64) -> Result<f64> {
    check_prob("p_hat", p_hat)?;
    check_eps(eps)?;
    if eps == 0.0 || p_hat == 0.0 {
        return Ok(p_hat);
    }
    if eps == f64::INFINITY {
        return Ok(0.0);
    }
    if p_hat == 1.0 {
        // kl(1‖q) = −ln q
        return Ok((-eps).exp());
    }
    let (mut lo, mut hi) = (0.0_f64, p_hat);
    for _ in 0..KL_INV_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if bern_kl(p_hat, mid) <= eps {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Upper confidence bound of the kl inequality for the mean of `n` i.i.d.
/// `[0,1]`-valued variables: `kl⁻¹⁺(p_hat, ln(1/δ)/n)`.
pub fn kl_bound_upper(p_hat: f64, n: usize, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    if n == 0 {
        return Err(invalid("sample size must be positive"));
    }
    kl_inv_upper(p_hat, (1.0 / delta).ln() / n as f64)
}

/// Sorted grid `b_0 < b_1 < … < b_K` (with `K ≥ 1`) of values a discrete
/// random variable can take.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteSupport {
    points: Vec<f64>,
}

impl DiscreteSupport {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::DegenerateSupport(format!(
                "need at least two points, got {}",
                points.len()
            )));
        }
        if points.iter().any(|b| !b.is_finite()) {
            return Err(Error::DegenerateSupport("non-finite point".into()));
        }
        if let Some(w) = points.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::DegenerateSupport(format!(
                "points must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Number of binary components `K`.
    pub fn k(&self) -> usize {
        self.points.len() - 1
    }

    pub fn min(&self) -> f64 {
        self.points[0]
    }

    pub fn max(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    /// Gaps `α_j = b_j − b_{j−1}` for `j = 1..=K`.
    pub fn gaps(&self) -> Vec<f64> {
        self.points.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Index of the support point within [`SUPPORT_TOL`] of `z`.
    pub fn level_of(&self, z: f64) -> Result<usize> {
        self.points
            .iter()
            .position(|b| (z - b).abs() <= SUPPORT_TOL)
            .ok_or(Error::NotOnSupport(z))
    }

    /// `b_0 + Σ_j α_j · m_j` for per-component values `m_j` (typically
    /// means or upper bounds of the indicators).
    pub fn combine(&self, components: &[f64]) -> Result<f64> {
        if components.len() != self.k() {
            return Err(Error::LengthMismatch {
                expected: self.k(),
                got: components.len(),
            });
        }
        Ok(self.min()
            + self
                .gaps()
                .iter()
                .zip(components)
                .map(|(a, m)| a * m)
                .sum::<f64>())
    }
}

/// The indicators `1[Z ≥ b_j]`, `j = 1..=K`, of one value on a support.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BinaryDecomposition {
    indicators: Vec<bool>,
}

impl BinaryDecomposition {
    /// Fails unless the indicators are monotone non-increasing in `j`.
    pub fn new(indicators: Vec<bool>) -> Result<Self> {
        if indicators.windows(2).any(|w| !w[0] && w[1]) {
            return Err(Error::NonMonotone);
        }
        Ok(Self { indicators })
    }

    /// Decomposition of the `level`-th support point out of `k` components.
    pub fn from_level(level: usize, k: usize) -> Self {
        Self {
            indicators: (1..=k).map(|j| j <= level).collect(),
        }
    }

    pub fn indicators(&self) -> &[bool] {
        &self.indicators
    }

    /// Number of leading ones, i.e. the index of the encoded support point.
    pub fn level(&self) -> usize {
        self.indicators.iter().take_while(|&&b| b).count()
    }

    pub fn len(&self) -> usize {
        self.indicators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indicators.is_empty()
    }
}

/// Splits `z` into its threshold indicators on `support`.
pub fn binarify(z: f64, support: &DiscreteSupport) -> Result<BinaryDecomposition> {
    let level = support.level_of(z)?;
    Ok(BinaryDecomposition::from_level(level, support.k()))
}

/// Inverse of [`binarify`]: `b_0 + Σ_j α_j · indicator_j`.
///
/// With monotone indicators the sum telescopes to `b_level`, which is
/// returned directly so the round trip is exact in floating point.
pub fn reconstruct(d: &BinaryDecomposition, support: &DiscreteSupport) -> Result<f64> {
    if d.len() != support.k() {
        return Err(Error::LengthMismatch {
            expected: support.k(),
            got: d.len(),
        });
    }
    // `BinaryDecomposition` is monotone by construction.
    Ok(support.points()[d.level()])
}

pub(crate) fn check_means(means: &[f64], support: &DiscreteSupport) -> Result<()> {
    if means.len() != support.k() {
        return Err(Error::LengthMismatch {
            expected: support.k(),
            got: means.len(),
        });
    }
    means.iter().try_for_each(|&m| check_prob("indicator mean", m))
}

/// Split-kl upper bound on `E[Z]` from the empirical means of the `K`
/// indicator components over `n` i.i.d. draws; holds with probability at
/// least `1 − δ`.
pub fn split_kl_upper(
    indicator_means: &[f64],
    support: &DiscreteSupport,
    n: usize,
    delta: f64,
) -> Result<f64> {
    check_means(indicator_means, support)?;
    check_delta(delta)?;
    if n == 0 {
        return Err(invalid("sample size must be positive"));
    }
    let eps = (support.k() as f64 / delta).ln() / n as f64;
    let uppers = indicator_means
        .iter()
        .map(|&m| kl_inv_upper(m, eps))
        .collect::<Result<Vec<_>>>()?;
    support.combine(&uppers)
}
