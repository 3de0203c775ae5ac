//! Monte Carlo checks that each high-probability bound holds at its stated
//! level, on problems whose true values are known exactly.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{run_baseline, BaselineConfig, BaselineMethod};
use crate::concentration::{binarify, kl_bound_upper, split_kl_upper, DiscreteSupport};
use crate::data::{gen_threshold_data, true_risk_threshold, Dataset, ThresholdDistribution};
use crate::error::{invalid, Result};
use crate::hypotheses::train::{train_pi1, TrainConfig};
use crate::hypotheses::{
    empirical_gibbs_loss, finite_loss_table, CategoricalDistribution, EvalMode, FiniteHypothesisClass,
    HypothesisDistribution,
};
use crate::pacbayes::{pb_kl_upper, pb_split_kl_upper, sampling_upper, BoundInputs, ConfidenceBudget};
use crate::recursion::{run_recursive, GammaPolicy, RecursionConfig};
use crate::rng::{derive_seed, stream_rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub name: String,
    pub trials: usize,
    pub violations: usize,
    pub coverage: f64,
    /// Stated confidence level `1 − δ` (or `1 − δ − δ′`).
    pub level: f64,
    /// Binomial allowance `3·√(δ(1−δ)/R)` below `level`.
    pub slack: f64,
    pub mean_gap: f64,
    pub bounds: Vec<f64>,
    pub truths: Vec<f64>,
}

impl CoverageReport {
    pub const CSV_HEADER: &'static str = "name,trials,violations,coverage,level,slack,mean_gap,pass";

    pub fn new(name: impl Into<String>, level: f64, bounds: Vec<f64>, truths: Vec<f64>) -> Self {
        let trials = bounds.len();
        let violations = bounds.iter().zip(&truths).filter(|(b, t)| t > b).count();
        let delta = 1.0 - level;
        let mean_gap = if trials == 0 {
            f64::NAN
        } else {
            bounds.iter().zip(&truths).map(|(b, t)| b - t).sum::<f64>() / trials as f64
        };
        Self {
            name: name.into(),
            trials,
            violations,
            coverage: 1.0 - violations as f64 / trials.max(1) as f64,
            level,
            slack: 3.0 * (delta * (1.0 - delta) / trials.max(1) as f64).sqrt(),
            mean_gap,
            bounds,
            truths,
        }
    }

    pub fn passes(&self) -> bool {
        self.coverage >= self.level - self.slack
    }

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.name,
            self.trials,
            self.violations,
            self.coverage,
            self.level,
            self.slack,
            self.mean_gap,
            self.passes()
        )
    }
}

/// Runs `trial` for `r = 0..trials` in parallel, each with its own seed.
/// Results do not depend on scheduling.
pub fn run_trials<F>(trials: usize, seed: u64, trial: F) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: Fn(u64) -> Result<(f64, f64)> + Sync,
{
    let pairs: Vec<(f64, f64)> = (0..trials as u64)
        .into_par_iter()
        .map(|r| trial(derive_seed(seed, "trial", r)))
        .collect::<Result<_>>()?;
    Ok(pairs.into_iter().unzip())
}

/// Which bound a split-kl coverage run evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundVariant {
    #[default]
    Correct,
    /// The empirical mean with no confidence correction, which must fail.
    NegativeControl,
}

fn draw_categorical<R: Rng>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

fn check_weights(weights: &[f64], support: &DiscreteSupport) -> Result<()> {
    if weights.len() != support.k() + 1 || weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(invalid("one non-negative weight per support point required"));
    }
    if (weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        return Err(invalid("weights must sum to 1"));
    }
    Ok(())
}

/// Coverage of the split-kl bound for i.i.d. draws from `weights` on
/// `support`.
pub fn coverage_split_kl(
    support: &DiscreteSupport,
    weights: &[f64],
    n: usize,
    delta: f64,
    trials: usize,
    seed: u64,
    variant: BoundVariant,
) -> Result<CoverageReport> {
    check_weights(weights, support)?;
    let truth: f64 = support.points().iter().zip(weights).map(|(b, w)| b * w).sum();
    let k = support.k();
    let (bounds, truths) = run_trials(trials, seed, |s| {
        let mut rng = stream_rng(s, 0);
        let mut counts = vec![0usize; k];
        let mut total = 0.0;
        for _ in 0..n {
            let level = draw_categorical(weights, &mut rng);
            total += support.points()[level];
            let d = binarify(support.points()[level], support)?;
            for (c, on) in counts.iter_mut().zip(d.indicators()) {
                *c += usize::from(*on);
            }
        }
        let means: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
        let bound = match variant {
            BoundVariant::Correct => split_kl_upper(&means, support, n, delta)?,
            BoundVariant::NegativeControl => total / n as f64,
        };
        Ok((bound, truth))
    })?;
    Ok(CoverageReport::new("split-kl", 1.0 - delta, bounds, truths))
}

/// Coverage of the kl inequality for Bernoulli(`p`) samples.
pub fn coverage_kl(p: f64, n: usize, delta: f64, trials: usize, seed: u64) -> Result<CoverageReport> {
    let (bounds, truths) = run_trials(trials, seed, |s| {
        let mut rng = stream_rng(s, 0);
        let hits = (0..n).filter(|_| rng.random::<f64>() < p).count();
        Ok((kl_bound_upper(hits as f64 / n as f64, n, delta)?, p))
    })?;
    Ok(CoverageReport::new("kl", 1.0 - delta, bounds, truths))
}

/// Threshold rules on a uniform grid over a noisy threshold distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSetup {
    pub class_size: usize,
    pub theta_star: f64,
    pub eta: f64,
}

impl Default for ThresholdSetup {
    fn default() -> Self {
        Self {
            class_size: 101,
            theta_star: 0.5,
            eta: 0.1,
        }
    }
}

impl ThresholdSetup {
    pub fn distribution(&self) -> Result<ThresholdDistribution> {
        ThresholdDistribution::new(self.theta_star, self.eta)
    }

    pub fn class(&self) -> Result<FiniteHypothesisClass> {
        FiniteHypothesisClass::threshold_grid(self.class_size)
    }

    pub fn uniform_prior(&self) -> Result<HypothesisDistribution> {
        Ok(HypothesisDistribution::Finite(CategoricalDistribution::uniform(self.class()?)))
    }

    /// `E_ρ[L(h)]` in closed form.
    pub fn true_gibbs_risk(&self, dist: &HypothesisDistribution) -> Result<f64> {
        let target = self.distribution()?;
        match dist {
            HypothesisDistribution::Finite(d) => Ok(d
                .class
                .rules
                .iter()
                .zip(d.weights())
                .map(|(r, w)| w * true_risk_threshold(r.theta, &target))
                .sum()),
            HypothesisDistribution::Network(_) => Err(crate::error::Error::ExactUnsupported),
        }
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<Dataset> {
        Ok(gen_threshold_data(&self.distribution()?, n, seed))
    }
}

/// Coverage of PAC-Bayes-kl for a posterior trained on the same sample.
pub fn coverage_pb_kl(
    setup: &ThresholdSetup,
    n: usize,
    delta: f64,
    trials: usize,
    seed: u64,
    train: &TrainConfig,
) -> Result<CoverageReport> {
    let pi0 = setup.uniform_prior()?;
    let budget = ConfidenceBudget::new(delta, 1, 0.5 * (1.0 - delta), 1)?;
    let (bounds, truths) = run_trials(trials, seed, |s| {
        let data = setup.sample(n, s)?;
        let rho = train_pi1(&pi0, &data.view(), n, &budget, train)?;
        let (emp, _) = empirical_gibbs_loss(&rho, &data.view(), EvalMode::Exact, 0)?;
        let bound = pb_kl_upper(&BoundInputs::new(emp.get(), rho.kl(&pi0)?, n)?, delta, 1)?;
        Ok((bound, setup.true_gibbs_risk(&rho)?))
    })?;
    Ok(CoverageReport::new("pac-bayes-kl", 1.0 - delta, bounds, truths))
}

/// Coverage of PAC-Bayes-split-kl for `ℓ(h) − γ·ℓ(h′)` with `h′` drawn per
/// point from the uniform prior and the posterior trained on the sample.
pub fn coverage_pb_split_kl(
    setup: &ThresholdSetup,
    n: usize,
    gamma: f64,
    delta: f64,
    trials: usize,
    seed: u64,
    train: &TrainConfig,
) -> Result<CoverageReport> {
    let pi0 = setup.uniform_prior()?;
    let support = DiscreteSupport::new(vec![-gamma, 0.0, 1.0 - gamma, 1.0])?;
    let budget = ConfidenceBudget::new(delta, 1, 0.5 * (1.0 - delta), 1)?;
    let prior_risk = setup.true_gibbs_risk(&pi0)?;
    let (bounds, truths) = run_trials(trials, seed, |s| {
        let data = setup.sample(n, s)?;
        let rho = train_pi1(&pi0, &data.view(), n, &budget, train)?;
        let refs = pi0.sampled_losses(&data.view(), derive_seed(s, "prior-draws", 0))?;
        let probs = rho.error_probabilities(&data.view())?;
        let mut sums = [0.0; 3];
        for (&p, &r) in probs.iter().zip(&refs) {
            for (l, w) in [(1u8, p), (0u8, 1.0 - p)] {
                let d = binarify(f64::from(l) - gamma * f64::from(r), &support)?;
                for (acc, on) in sums.iter_mut().zip(d.indicators()) {
                    *acc += w * f64::from(u8::from(*on));
                }
            }
        }
        let means = sums.map(|v| (v / n as f64).clamp(0.0, 1.0));
        let bound = pb_split_kl_upper(&means, &support, rho.kl(&pi0)?, n, delta, 1)?;
        Ok((bound, setup.true_gibbs_risk(&rho)? - gamma * prior_risk))
    })?;
    Ok(CoverageReport::new("pac-bayes-split-kl", 1.0 - delta, bounds, truths))
}

/// Coverage of the sampling bound: `E_π[L̂(h,S)]` on a fixed sample,
/// estimated from `m` independent draws.
pub fn coverage_sampling(
    setup: &ThresholdSetup,
    n: usize,
    m: usize,
    delta_prime: f64,
    trials: usize,
    seed: u64,
) -> Result<CoverageReport> {
    let data = setup.sample(n, derive_seed(seed, "data", 0))?;
    let class = setup.class()?;
    // A skewed distribution so the truth is not a round number.
    let logits: Vec<f64> = (0..class.len()).map(|k| -((k as f64 - 30.0) / 15.0).powi(2)).collect();
    let dist = CategoricalDistribution::from_logits(class.clone(), &logits)?;
    let table = finite_loss_table(&class, &data.view())?;
    let per_rule: Vec<f64> = table
        .iter()
        .map(|l| l.iter().map(|&v| f64::from(v)).sum::<f64>() / n as f64)
        .collect();
    let truth: f64 = per_rule.iter().zip(dist.weights()).map(|(l, w)| l * w).sum();
    let (bounds, truths) = run_trials(trials, seed, |s| {
        let mut rng = stream_rng(s, 0);
        let total: f64 = (0..m).map(|_| per_rule[dist.sample_index(&mut rng)]).sum();
        Ok((sampling_upper(total / m as f64, m, delta_prime)?, truth))
    })?;
    Ok(CoverageReport::new("sampling", 1.0 - delta_prime, bounds, truths))
}

/// Coverage of the recursive bound: each trial draws a fresh sample, runs
/// the whole pipeline in exact mode, and compares `B_T` with the exact risk
/// of `π_T`.
pub fn coverage_recursive(
    setup: &ThresholdSetup,
    n: usize,
    steps: usize,
    delta: f64,
    gamma: GammaPolicy,
    trials: usize,
    seed: u64,
    train: &TrainConfig,
) -> Result<CoverageReport> {
    let pi0 = setup.uniform_prior()?;
    let (bounds, truths) = run_trials(trials, seed, |s| {
        let data = setup.sample(n, s)?;
        let cfg = RecursionConfig {
            steps,
            gamma: gamma.clone(),
            delta,
            // No sampled quantities in exact mode; δ′ only has to be valid.
            delta_prime: 0.5 * (1.0 - delta),
            mode: EvalMode::Exact,
            train_first: *train,
            train_rest: *train,
            seed: s,
        };
        let out = run_recursive(&data, None, &pi0, &cfg)?;
        Ok((out.trace.final_bound(), setup.true_gibbs_risk(out.posteriors.last().unwrap())?))
    })?;
    Ok(CoverageReport::new("recursive", 1.0 - delta, bounds, truths))
}

/// Coverage of one of the non-recursive comparison bounds in exact mode.
pub fn coverage_baseline(
    method: BaselineMethod,
    setup: &ThresholdSetup,
    n: usize,
    delta: f64,
    trials: usize,
    seed: u64,
    train: &TrainConfig,
) -> Result<CoverageReport> {
    let pi0 = setup.uniform_prior()?;
    let (bounds, truths) = run_trials(trials, seed, |s| {
        let data = setup.sample(n, s)?;
        let cfg = BaselineConfig {
            delta,
            delta_prime: 0.5 * (1.0 - delta),
            mode: EvalMode::Exact,
            train_prior: *train,
            train_posterior: *train,
            seed: s,
        };
        let r = run_baseline(method, &data, None, &pi0, &cfg)?;
        Ok((r.bound, setup.true_gibbs_risk(&r.posterior)?))
    })?;
    Ok(CoverageReport::new(method.tag(), 1.0 - delta, bounds, truths))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid4() -> DiscreteSupport {
        DiscreteSupport::new(vec![-0.5, 0.0, 0.5, 1.0]).unwrap()
    }

    #[test]
    fn report_arithmetic() {
        let r = CoverageReport::new("x", 0.95, vec![1.0, 0.5, 0.2, 0.9], vec![0.5, 0.5, 0.3, 0.1]);
        assert_eq!(r.violations, 1);
        assert_eq!(r.coverage, 0.75);
        assert!((r.mean_gap - 0.3).abs() < 1e-15);
        assert!(r.csv_line().starts_with("x,4,1,0.75,0.95,"));
    }

    #[test]
    fn point_mass_is_always_covered() {
        let r = coverage_split_kl(&grid4(), &[0.0, 0.0, 1.0, 0.0], 20, 0.05, 200, 1, BoundVariant::Correct).unwrap();
        assert_eq!(r.coverage, 1.0);
    }

    #[test]
    fn large_delta_small_n_still_covers() {
        let r = coverage_split_kl(&grid4(), &[0.1, 0.4, 0.4, 0.1], 5, 0.5, 2000, 2, BoundVariant::Correct).unwrap();
        assert!(r.coverage >= 0.5, "{}", r.coverage);
    }

    #[test]
    fn negative_control_is_caught() {
        let r = coverage_split_kl(&grid4(), &[0.1, 0.4, 0.4, 0.1], 100, 0.05, 1000, 3, BoundVariant::NegativeControl)
            .unwrap();
        assert!(!r.passes());
    }

    #[test]
    fn trials_do_not_depend_on_thread_count() {
        let run = || coverage_kl(0.3, 50, 0.1, 64, 7).unwrap();
        let a = run();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(run);
        assert_eq!(a, b);
    }

    #[test]
    fn small_harnesses_pass() {
        let setup = ThresholdSetup { class_size: 21, ..ThresholdSetup::default() };
        let train = TrainConfig::finite();
        assert!(coverage_kl(0.2, 100, 0.05, 500, 1).unwrap().passes());
        assert!(coverage_pb_kl(&setup, 200, 0.05, 100, 2, &train).unwrap().passes());
        assert!(coverage_pb_split_kl(&setup, 200, 0.5, 0.05, 100, 3, &train).unwrap().passes());
        assert!(coverage_sampling(&setup, 200, 100, 0.05, 500, 4).unwrap().passes());
        assert!(coverage_recursive(&setup, 200, 2, 0.05, GammaPolicy::Fixed(0.5), 50, 5, &train)
            .unwrap()
            .passes());
        for m in [BaselineMethod::Uninformed, BaselineMethod::Informed, BaselineMethod::InformedExcess] {
            assert!(coverage_baseline(m, &setup, 200, 0.05, 50, 6, &train).unwrap().passes());
        }
    }
}
