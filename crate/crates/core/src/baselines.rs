//! Non-recursive comparison bounds: an uninformed prior, a prior trained on
//! half the data, and that prior combined with an excess loss relative to
//! an empirical risk minimizer.

use serde::{Deserialize, Serialize};

use crate::concentration::{kl_bound_upper, DiscreteSupport};
use crate::data::{Dataset, View};
use crate::error::{Error, Result};
use crate::hypotheses::train::{complexity_penalty, erm_train, train_pi1, train_posterior, ExcessTarget, TrainConfig};
use crate::hypotheses::{classifier_losses, Classifier, empirical_gibbs_loss, EvalMode, HypothesisDistribution};
use crate::pacbayes::{pb_kl_upper, pb_split_kl_upper, sampling_upper, BoundInputs, ConfidenceBudget};
use crate::recursion::{geometric_split, split_order, StepSeeds};
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineMethod {
    Uninformed,
    Informed,
    InformedExcess,
}

impl BaselineMethod {
    pub fn tag(&self) -> &'static str {
        match self {
            BaselineMethod::Uninformed => "uninformed",
            BaselineMethod::Informed => "informed",
            BaselineMethod::InformedExcess => "informed-excess",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub delta: f64,
    pub delta_prime: f64,
    pub mode: EvalMode,
    /// Optimizer for the data-informed prior and the reference classifier.
    pub train_prior: TrainConfig,
    pub train_posterior: TrainConfig,
    pub seed: u64,
}

/// Terms of the informed+excess bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcessTerms {
    /// Bound on `E_ρ[L(h) − L(h*)]`.
    pub excess_bound: f64,
    /// Bound on `L(h*)`.
    pub h_star_bound: f64,
    pub kl_over_n: f64,
    /// `E_ρ[Δ̂(h, h*, S_2)]`.
    pub empirical_excess: f64,
    /// Means of `1[Δ ≥ 0]` and `1[Δ ≥ 1]`.
    pub component_means: [f64; 2],
    pub h_star_empirical: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub method: BaselineMethod,
    /// Gibbs loss of the posterior on all training data.
    pub train01: f64,
    pub test01: Option<f64>,
    pub bound: f64,
    /// Size of the sample the bound is evaluated on.
    pub n_bound: usize,
    pub kl: f64,
    /// Empirical Gibbs loss on the bound's sample.
    pub empirical_loss: f64,
    pub excess: Option<ExcessTerms>,
    pub posterior: HypothesisDistribution,
    /// Data-informed prior the posterior is measured against.
    pub prior: Option<HypothesisDistribution>,
    /// Reference classifier of the excess bound.
    pub h_star: Option<Classifier>,
}

struct Seeds(u64);

impl Seeds {
    fn get(&self, label: &str) -> u64 {
        derive_seed(self.0, label, 0)
    }
}

fn inflate(mean: f64, m: usize, mode: EvalMode, delta_part: f64) -> Result<f64> {
    match mode {
        EvalMode::Exact => Ok(mean),
        EvalMode::Sampled => Ok(sampling_upper(mean, m, delta_part)?.clamp(0.0, 1.0)),
    }
}

fn gibbs(dist: &HypothesisDistribution, view: &View<'_>, mode: EvalMode, seed: u64) -> Result<(f64, usize)> {
    empirical_gibbs_loss(dist, view, mode, seed).map(|(v, m)| (v.get(), m))
}

fn test01(dist: &HypothesisDistribution, test: Option<&Dataset>, mode: EvalMode, seed: u64) -> Result<Option<f64>> {
    test.map(|d| gibbs(dist, &d.view(), mode, seed).map(|(v, _)| v))
        .transpose()
}

fn ternary() -> DiscreteSupport {
    DiscreteSupport::new(vec![-1.0, 0.0, 1.0]).expect("sorted distinct points")
}

/// Empirical loss, KL and PAC-Bayes-kl bound of `rho` against `prior` on
/// `view`.
fn kl_bound_on(
    rho: &HypothesisDistribution,
    prior: &HypothesisDistribution,
    view: &View<'_>,
    cfg: &BaselineConfig,
    budget: &ConfidenceBudget,
) -> Result<(f64, f64, f64)> {
    let (emp, m) = gibbs(rho, view, cfg.mode, Seeds(cfg.seed).get("posterior-draws"))?;
    let kl = rho.kl(prior)?;
    let q = inflate(emp, m, cfg.mode, budget.delta_prime_part())?;
    let bound = pb_kl_upper(&BoundInputs::new(q, kl, view.len())?, cfg.delta, 1)?;
    Ok((emp, kl, bound))
}

/// Empirical loss, KL and the terms of the informed+excess bound, with
/// `ref_losses` the reference classifier's losses on `view`.
fn excess_bound_on(
    rho: &HypothesisDistribution,
    prior: &HypothesisDistribution,
    ref_losses: &[u8],
    view: &View<'_>,
    cfg: &BaselineConfig,
    budget: &ConfidenceBudget,
) -> Result<(f64, f64, ExcessTerms)> {
    let n = view.len();
    let (probs, m) = match cfg.mode {
        EvalMode::Exact => (rho.error_probabilities(view)?, 0),
        EvalMode::Sampled => (
            rho.sampled_losses(view, Seeds(cfg.seed).get("posterior-draws"))?
                .into_iter()
                .map(f64::from)
                .collect(),
            n,
        ),
    };
    // Δ = ℓ − ℓ*: 1[Δ ≥ 0] fires when ρ errs or h* is right, 1[Δ ≥ 1] when
    // ρ errs and h* is right.
    let (mut c0, mut c1, mut emp) = (0.0, 0.0, 0.0);
    for (&p, &r) in probs.iter().zip(ref_losses) {
        emp += p;
        if r == 0 {
            c0 += 1.0;
            c1 += p;
        } else {
            c0 += p;
        }
    }
    let nf = n as f64;
    let means = [c0 / nf, c1 / nf];
    let h_star_emp = ref_losses.iter().map(|&l| f64::from(l)).sum::<f64>() / nf;
    let inflated = [
        inflate(means[0], m, cfg.mode, budget.delta_prime_part())?,
        inflate(means[1], m, cfg.mode, budget.delta_prime_part())?,
    ];
    let kl = rho.kl(prior)?;
    let excess_bound = pb_split_kl_upper(&inflated, &ternary(), kl, n, 2.0 * cfg.delta / 3.0, 1)?;
    let h_star_bound = kl_bound_upper(h_star_emp, n, cfg.delta / 3.0)?;
    Ok((
        emp / nf,
        kl,
        ExcessTerms {
            excess_bound,
            h_star_bound,
            kl_over_n: kl / nf,
            empirical_excess: -1.0 + means[0] + means[1],
            component_means: means,
            h_star_empirical: h_star_emp,
        },
    ))
}

/// Recomputes a report's bound from its stored distributions, on the same
/// data and configuration it was produced with.
pub fn recompute_bound(
    report: &BaselineReport,
    data: &Dataset,
    pi0: &HypothesisDistribution,
    cfg: &BaselineConfig,
) -> Result<f64> {
    let missing = || Error::InvalidParameter(format!("{} report lacks a stored prior", report.method.tag()));
    match report.method {
        BaselineMethod::Uninformed => {
            let budget = ConfidenceBudget::new(cfg.delta, 1, cfg.delta_prime, 1)?;
            Ok(kl_bound_on(&report.posterior, pi0, &data.view(), cfg, &budget)?.2)
        }
        BaselineMethod::Informed => {
            let budget = ConfidenceBudget::new(cfg.delta, 1, cfg.delta_prime, 1)?;
            let h = halves(data, cfg.seed)?;
            let prior = report.prior.as_ref().ok_or_else(missing)?;
            Ok(kl_bound_on(&report.posterior, prior, &h.second, cfg, &budget)?.2)
        }
        BaselineMethod::InformedExcess => {
            let budget = ConfidenceBudget::new(cfg.delta, 1, cfg.delta_prime, 2)?;
            let h = halves(data, cfg.seed)?;
            let prior = report.prior.as_ref().ok_or_else(missing)?;
            let h_star = report.h_star.as_ref().ok_or_else(missing)?;
            let refs = classifier_losses(h_star, &h.second)?;
            let (_, _, t) = excess_bound_on(&report.posterior, prior, &refs, &h.second, cfg, &budget)?;
            Ok(t.excess_bound + t.h_star_bound)
        }
    }
}

/// Bound on the posterior's loss when `π_0` is the prior and all of `data`
/// is used for the bound.
pub fn run_uninformed(
    data: &Dataset,
    test: Option<&Dataset>,
    pi0: &HypothesisDistribution,
    cfg: &BaselineConfig,
) -> Result<BaselineReport> {
    let seeds = Seeds(cfg.seed);
    let budget = ConfidenceBudget::new(cfg.delta, 1, cfg.delta_prime, 1)?;
    let all = data.view();
    let train = TrainConfig {
        seed: seeds.get("trainer"),
        ..cfg.train_posterior
    };
    let rho = train_pi1(pi0, &all, data.len(), &budget, &train)?;
    let (emp, kl, bound) = kl_bound_on(&rho, pi0, &all, cfg, &budget)?;
    Ok(BaselineReport {
        method: BaselineMethod::Uninformed,
        train01: emp,
        test01: test01(&rho, test, cfg.mode, seeds.get("test-draws"))?,
        bound,
        n_bound: data.len(),
        kl,
        empirical_loss: emp,
        excess: None,
        posterior: rho,
        prior: None,
        h_star: None,
    })
}

struct Halves<'a> {
    first: View<'a>,
    second: View<'a>,
}

fn halves<'a>(data: &'a Dataset, seed: u64) -> Result<Halves<'a>> {
    let schedule = geometric_split(data.len(), 2)?;
    let order = split_order(data.len(), StepSeeds::new(seed).split());
    Ok(Halves {
        first: View::new(data, order[schedule.chunk(1)].to_vec()),
        second: View::new(data, order[schedule.chunk(2)].to_vec()),
    })
}

/// Prior `π_1` trained on the first half, posterior trained on the second,
/// bound evaluated on the second half against `π_1`.
pub fn run_informed(
    data: &Dataset,
    test: Option<&Dataset>,
    pi0: &HypothesisDistribution,
    cfg: &BaselineConfig,
) -> Result<BaselineReport> {
    let seeds = Seeds(cfg.seed);
    let budget = ConfidenceBudget::new(cfg.delta, 1, cfg.delta_prime, 1)?;
    let h = halves(data, cfg.seed)?;
    let prior_cfg = TrainConfig {
        seed: seeds.get("prior-trainer"),
        ..cfg.train_prior
    };
    let pi1 = train_pi1(pi0, &h.first, h.first.len(), &budget, &prior_cfg)?;
    let post_cfg = TrainConfig {
        seed: seeds.get("trainer"),
        ..cfg.train_posterior
    };
    let rho = train_pi1(&pi1, &h.second, h.second.len(), &budget, &post_cfg)?;
    let (emp, kl, bound) = kl_bound_on(&rho, &pi1, &h.second, cfg, &budget)?;
    Ok(BaselineReport {
        method: BaselineMethod::Informed,
        train01: gibbs(&rho, &data.view(), cfg.mode, seeds.get("train-draws"))?.0,
        test01: test01(&rho, test, cfg.mode, seeds.get("test-draws"))?,
        bound,
        n_bound: h.second.len(),
        kl,
        empirical_loss: emp,
        excess: None,
        posterior: rho,
        prior: Some(pi1),
        h_star: None,
    })
}

/// The first half trains both a prior `π_1` and a deterministic reference
/// `h*`. On the second half, `E_ρ[L(h) − L(h*)]` is bounded by split-kl on
/// `{−1, 0, 1}` and `L(h*)` by the kl inequality, each of the three kl
/// applications getting `δ/3`.
pub fn run_informed_excess(
    data: &Dataset,
    test: Option<&Dataset>,
    pi0: &HypothesisDistribution,
    cfg: &BaselineConfig,
) -> Result<BaselineReport> {
    let seeds = Seeds(cfg.seed);
    // Two sampled component means share δ′.
    let budget = ConfidenceBudget::new(cfg.delta, 1, cfg.delta_prime, 2)?;
    let h = halves(data, cfg.seed)?;
    let prior_cfg = TrainConfig {
        seed: seeds.get("prior-trainer"),
        ..cfg.train_prior
    };
    let pi1 = train_pi1(pi0, &h.first, h.first.len(), &budget, &prior_cfg)?;
    let erm_cfg = TrainConfig {
        seed: seeds.get("erm-trainer"),
        ..cfg.train_prior
    };
    let h_star = erm_train(pi0, &h.first, &erm_cfg)?;
    let ref_losses = classifier_losses(&h_star, &h.second)?;

    let support = ternary();
    let split_delta = 2.0 * cfg.delta / 3.0;
    let n2 = h.second.len();
    let target = ExcessTarget {
        ref_losses: &ref_losses,
        scale: 1.0,
        support: &support,
    };
    let penalty = complexity_penalty(n2, split_delta, support.k(), support.max() - support.min());
    let post_cfg = TrainConfig {
        seed: seeds.get("trainer"),
        ..cfg.train_posterior
    };
    let rho = train_posterior(&pi1, &h.second, Some(&target), &penalty, &post_cfg)?;

    let (emp, kl, terms) = excess_bound_on(&rho, &pi1, &ref_losses, &h.second, cfg, &budget)?;
    Ok(BaselineReport {
        method: BaselineMethod::InformedExcess,
        train01: gibbs(&rho, &data.view(), cfg.mode, seeds.get("train-draws"))?.0,
        test01: test01(&rho, test, cfg.mode, seeds.get("test-draws"))?,
        bound: terms.excess_bound + terms.h_star_bound,
        n_bound: n2,
        kl,
        empirical_loss: emp,
        excess: Some(terms),
        posterior: rho,
        prior: Some(pi1),
        h_star: Some(h_star),
    })
}

pub fn run_baseline(
    method: BaselineMethod,
    data: &Dataset,
    test: Option<&Dataset>,
    pi0: &HypothesisDistribution,
    cfg: &BaselineConfig,
) -> Result<BaselineReport> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    match method {
        BaselineMethod::Uninformed => run_uninformed(data, test, pi0, cfg),
        BaselineMethod::Informed => run_informed(data, test, pi0, cfg),
        BaselineMethod::InformedExcess => run_informed_excess(data, test, pi0, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concentration::kl_inv_upper;
    use crate::data::{gen_threshold_data, ThresholdDistribution};
    use crate::hypotheses::{CategoricalDistribution, FiniteHypothesisClass};
    use crate::pacbayes::complexity_log_term;
    use approx::assert_abs_diff_eq;

    fn setup(n: usize) -> (Dataset, HypothesisDistribution) {
        let data = gen_threshold_data(&ThresholdDistribution::new(0.5, 0.1).unwrap(), n, 8);
        let class = FiniteHypothesisClass::threshold_grid(21).unwrap();
        (data, HypothesisDistribution::Finite(CategoricalDistribution::uniform(class)))
    }

    fn cfg(epochs: usize) -> BaselineConfig {
        let train = TrainConfig { epochs, ..TrainConfig::finite() };
        BaselineConfig {
            delta: 0.05,
            delta_prime: 0.01,
            mode: EvalMode::Exact,
            train_prior: train,
            train_posterior: train,
            seed: 3,
        }
    }

    #[test]
    fn zero_epoch_uninformed_is_the_prior_bound() {
        let (data, pi0) = setup(200);
        let r = run_uninformed(&data, None, &pi0, &cfg(0)).unwrap();
        assert_eq!(r.kl, 0.0);
        let (emp, _) = empirical_gibbs_loss(&pi0, &data.view(), EvalMode::Exact, 0).unwrap();
        let expected = kl_inv_upper(emp.get(), complexity_log_term(200, 0.05, 1) / 200.0).unwrap();
        assert_abs_diff_eq!(r.bound, expected, epsilon = 1e-15);
    }

    #[test]
    fn informed_uses_the_second_half() {
        let (data, pi0) = setup(201);
        let r = run_informed(&data, None, &pi0, &cfg(50)).unwrap();
        assert_eq!(r.n_bound, 100);
        let prior = r.prior.as_ref().unwrap();
        let expected = kl_inv_upper(r.empirical_loss, (r.kl + complexity_log_term(100, 0.05, 1)) / 100.0).unwrap();
        assert_abs_diff_eq!(r.bound, expected, epsilon = 1e-15);
        assert_abs_diff_eq!(r.kl, r.posterior.kl(prior).unwrap(), epsilon = 0.0);
    }

    #[test]
    fn informed_excess_decomposes_exactly() {
        let (data, pi0) = setup(400);
        let r = run_informed_excess(&data, None, &pi0, &cfg(50)).unwrap();
        let e = r.excess.unwrap();
        assert!((r.empirical_loss - (e.empirical_excess + e.h_star_empirical)).abs() <= 1e-12);
        assert_eq!(r.bound, e.excess_bound + e.h_star_bound);
        let expected_h = kl_inv_upper(e.h_star_empirical, (3.0 / 0.05f64).ln() / 200.0).unwrap();
        assert_abs_diff_eq!(e.h_star_bound, expected_h, epsilon = 1e-15);
        let eps = (r.kl + (2.0 * 2.0 * 200f64.sqrt() / (2.0 * 0.05 / 3.0)).ln()) / 200.0;
        let expected_e = -1.0
            + kl_inv_upper(e.component_means[0], eps).unwrap()
            + kl_inv_upper(e.component_means[1], eps).unwrap();
        assert_abs_diff_eq!(e.excess_bound, expected_e, epsilon = 1e-14);
    }

    #[test]
    fn point_mass_at_reference_has_no_excess() {
        // A posterior equal to h* yields Δ = 0 everywhere: means (1, 0).
        let (data, _) = setup(300);
        let class = FiniteHypothesisClass::threshold_grid(21).unwrap();
        let h = halves(&data, 3).unwrap();
        let init = HypothesisDistribution::Finite(CategoricalDistribution::uniform(class.clone()));
        let h_star = erm_train(&init, &h.first, &TrainConfig::finite()).unwrap();
        let idx = match h_star {
            crate::hypotheses::Classifier::Threshold(rule) => class.rules.iter().position(|r| *r == rule).unwrap(),
            _ => unreachable!(),
        };
        let point = HypothesisDistribution::Finite(CategoricalDistribution::point_mass(class, idx).unwrap());
        let r = run_informed_excess(&data, None, &point, &cfg(0)).unwrap();
        let e = r.excess.unwrap();
        assert_eq!(e.component_means, [1.0, 0.0]);
        assert_eq!(e.empirical_excess, 0.0);
        assert!(e.excess_bound > 0.0);
    }
}
