//! PAC-Bayes-kl and PAC-Bayes-split-kl bounds, the McAllester relaxation
//! used as a training objective, and the kl bound that accounts for
//! estimating Gibbs expectations by sampling.

use serde::{Deserialize, Serialize};

use crate::concentration::{
    check_delta, check_means, kl_inv_upper, DiscreteSupport, ProbValue,
};
use crate::error::{invalid, Result};

/// How the failure probabilities `δ` (for the PAC-Bayes bounds) and `δ′`
/// (for the sampling estimates) are shared.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceBudget {
    pub delta: f64,
    /// Number of simultaneous bounds sharing `delta`.
    pub union_factor: usize,
    pub delta_prime: f64,
    /// Number of estimated quantities sharing `delta_prime`.
    pub sampling_parts: usize,
}

impl ConfidenceBudget {
    pub fn new(
        delta: f64,
        union_factor: usize,
        delta_prime: f64,
        sampling_parts: usize,
    ) -> Result<Self> {
        check_delta(delta)?;
        check_delta(delta_prime)?;
        if delta + delta_prime >= 1.0 {
            return Err(invalid("delta + delta_prime must be below 1"));
        }
        if union_factor == 0 || sampling_parts == 0 {
            return Err(invalid("union_factor and sampling_parts must be positive"));
        }
        Ok(Self {
            delta,
            union_factor,
            delta_prime,
            sampling_parts,
        })
    }

    /// Budget for a `T`-step recursive bound: `T` PAC-Bayes applications and
    /// `1 + 3(T−1)` sampled quantities.
    pub fn recursive(delta: f64, delta_prime: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(invalid("number of recursion steps must be positive"));
        }
        Self::new(delta, steps, delta_prime, 1 + 3 * (steps - 1))
    }

    /// Share of `δ′` given to each sampled quantity.
    pub fn delta_prime_part(&self) -> f64 {
        self.delta_prime / self.sampling_parts as f64
    }
}

/// Empirical Gibbs loss, KL to the prior, and the sample size the bound
/// refers to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub empirical_mean: ProbValue,
    pub kl_divergence: f64,
    pub n: usize,
}

impl BoundInputs {
    pub fn new(empirical_mean: f64, kl_divergence: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("sample size must be positive"));
        }
        if kl_divergence.is_nan() || kl_divergence < 0.0 {
            return Err(invalid(format!("KL divergence {kl_divergence} must be >= 0")));
        }
        Ok(Self {
            empirical_mean: ProbValue::new(empirical_mean)?,
            kl_divergence,
            n,
        })
    }
}

/// `ln(2·factor·√n / δ)`.
pub fn complexity_log_term(n: usize, delta: f64, factor: usize) -> f64 {
    (2.0 * factor as f64 * (n as f64).sqrt() / delta).ln()
}

fn check_union(delta: f64, union_factor: usize) -> Result<()> {
    check_delta(delta)?;
    if union_factor == 0 {
        return Err(invalid("union_factor must be positive"));
    }
    Ok(())
}

/// PAC-Bayes-kl upper bound on the expected Gibbs loss:
/// `kl⁻¹⁺(L̂, (KL + ln(2·f·√n/δ))/n)`.
pub fn pb_kl_upper(b: &BoundInputs, delta: f64, union_factor: usize) -> Result<f64> {
    check_union(delta, union_factor)?;
    let eps = (b.kl_divergence + complexity_log_term(b.n, delta, union_factor)) / b.n as f64;
    kl_inv_upper(b.empirical_mean.get(), eps)
}

/// PAC-Bayes-split-kl upper bound for a loss on `support`; `indicator_means`
/// are the posterior-averaged empirical means of the `K` components.
pub fn pb_split_kl_upper(
    indicator_means: &[f64],
    support: &DiscreteSupport,
    kl_divergence: f64,
    n: usize,
    delta: f64,
    union_factor: usize,
) -> Result<f64> {
    check_means(indicator_means, support)?;
    check_union(delta, union_factor)?;
    if n == 0 {
        return Err(invalid("sample size must be positive"));
    }
    if kl_divergence.is_nan() || kl_divergence < 0.0 {
        return Err(invalid(format!("KL divergence {kl_divergence} must be >= 0")));
    }
    let eps = (kl_divergence + complexity_log_term(n, delta, support.k() * union_factor))
        / n as f64;
    let uppers = indicator_means
        .iter()
        .map(|&m| kl_inv_upper(m, eps))
        .collect::<Result<Vec<_>>>()?;
    support.combine(&uppers)
}

/// McAllester relaxation `L̂ + √((KL + ln(2·f·√n/δ)) / 2n)`.
///
/// Shares its log term with [`pb_kl_upper`], so by Pinsker's inequality it is
/// never smaller than the kl bound on the same inputs.
pub fn mcallester_relaxed(b: &BoundInputs, delta: f64, union_factor: usize) -> Result<f64> {
    check_union(delta, union_factor)?;
    Ok(b.empirical_mean.get() + mcallester_penalty(b.kl_divergence, b.n, delta, union_factor))
}

/// The square-root complexity term of [`mcallester_relaxed`].
pub fn mcallester_penalty(kl_divergence: f64, n: usize, delta: f64, union_factor: usize) -> f64 {
    ((kl_divergence + complexity_log_term(n, delta, union_factor)) / (2.0 * n as f64)).sqrt()
}

/// Upper bound on `E_π[f(h)]` from the average of `f` over `m` independent
/// draws `h ~ π`; holds with probability at least `1 − δ_part`.
pub fn sampling_upper(sample_mean: f64, m: usize, delta_part: f64) -> Result<f64> {
    check_delta(delta_part)?;
    if m == 0 {
        return Err(invalid("number of draws must be positive"));
    }
    kl_inv_upper(sample_mean, (1.0 / delta_part).ln() / m as f64)
}
