//! Bound-minimizing trainers.
//!
//! The training objective replaces each kl-inverse in a bound by its
//! McAllester relaxation `mean + √((KL + log_term)/(2n))`, and, for networks,
//! the zero-one loss by the bounded cross-entropy and each indicator by a
//! sigmoid. Finite posteriors are parameterized by softmax logits and the
//! losses stay exact, since Gibbs averages over a finite class are already
//! linear in the weights.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::finite::{softmax, CategoricalDistribution};
use super::network::{gaussian_kl_grad, GaussianNetworkDistribution, Mlp};
use super::surrogate::{bounded_cross_entropy_grad, sigmoid_indicator, SurrogateConfig};
use super::{finite_loss_table, Classifier, HypothesisDistribution};
use crate::concentration::{binarify, DiscreteSupport};
use crate::data::View;
use crate::error::{invalid, Error, Result};
use crate::pacbayes::{complexity_log_term, ConfidenceBudget};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    /// Passes over the data (full-batch steps for the finite backend).
    pub epochs: usize,
    pub seed: u64,
    #[serde(default)]
    pub surrogate: SurrogateConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.005,
            momentum: 0.95,
            batch_size: 250,
            epochs: 200,
            seed: 0,
            surrogate: SurrogateConfig::default(),
        }
    }
}

impl TrainConfig {
    /// Short schedule for runs on a few thousand points.
    pub fn desk() -> Self {
        Self {
            learning_rate: 0.05,
            momentum: 0.9,
            batch_size: 100,
            epochs: 20,
            ..Self::default()
        }
    }

    /// Full-batch settings for softmax-parameterized finite posteriors.
    pub fn finite() -> Self {
        Self {
            learning_rate: 2.0,
            momentum: 0.9,
            batch_size: usize::MAX,
            epochs: 100,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(invalid("learning_rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(invalid("momentum must lie in [0, 1)"));
        }
        if self.batch_size == 0 {
            return Err(invalid("batch_size must be positive"));
        }
        self.surrogate.validate()
    }
}

/// The relaxed complexity term `multiplier · √((KL + log_term)/(2n))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Penalty {
    pub n: usize,
    pub log_term: f64,
    pub multiplier: f64,
}

impl Penalty {
    pub fn value(&self, kl: f64) -> f64 {
        self.multiplier * ((kl + self.log_term) / (2.0 * self.n as f64)).sqrt()
    }

    /// Derivative in `KL`.
    pub fn slope(&self, kl: f64) -> f64 {
        let root = ((kl + self.log_term) / (2.0 * self.n as f64)).sqrt();
        self.multiplier / (4.0 * self.n as f64 * root)
    }
}

/// Penalty sharing its log term `ln(2·f·√n/δ)` with the PAC-Bayes bounds.
pub fn complexity_penalty(n: usize, delta: f64, union_factor: usize, multiplier: f64) -> Penalty {
    Penalty {
        n,
        log_term: complexity_log_term(n, delta, union_factor),
        multiplier,
    }
}

/// Reference losses turning the plain loss into `ℓ(h) − scale·ref` on a
/// discrete support.
#[derive(Debug, Clone, Copy)]
pub struct ExcessTarget<'a> {
    pub ref_losses: &'a [u8],
    pub scale: f64,
    pub support: &'a DiscreteSupport,
}

impl ExcessTarget<'_> {
    fn check(&self, n: usize) -> Result<()> {
        if self.ref_losses.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: self.ref_losses.len(),
            });
        }
        if !(self.scale > 0.0 && self.scale <= 1.0) {
            return Err(invalid("excess scale must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Relaxed bound and its gradient in `(mean, ln σ)` for one fixed weight
/// draw `post.mean + σ ⊙ noise` on the rows of `x`.
///
/// Without a target the data term is the mean bounded cross-entropy. With
/// one it is `Σ_j α_j · mean(sigmoid(f̃ − b_j))` with
/// `f̃ = bounded CE − scale·ref`, and the penalty multiplier should be
/// `Σ_j α_j`.
#[allow(clippy::too_many_arguments)]
pub fn network_objective(
    post: &GaussianNetworkDistribution,
    prior: &GaussianNetworkDistribution,
    x: &Array2<f64>,
    y: &[usize],
    target: Option<&ExcessTarget<'_>>,
    penalty: &Penalty,
    noise: &[f64],
    cfg: &SurrogateConfig,
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    if x.nrows() == 0 {
        return Err(Error::EmptyData);
    }
    if y.len() != x.nrows() {
        return Err(Error::LengthMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    if let Some(t) = target {
        t.check(y.len())?;
    }
    let net = post.with_noise(noise);
    let cache = net.forward(x);
    let rows = x.nrows() as f64;
    let k = net.arch.num_classes();
    let mut grad_logits = Array2::zeros(cache.logits.raw_dim());
    let mut data_term = 0.0;
    let mut g = vec![0.0; k];
    for (r, &label) in y.iter().enumerate() {
        let logits = cache.logits.row(r).to_vec();
        let ce = bounded_cross_entropy_grad(&logits, label, cfg, &mut g);
        let weight = match target {
            None => {
                data_term += ce;
                1.0
            }
            Some(t) => {
                let f = ce - t.scale * f64::from(t.ref_losses[r]);
                let mut slope = 0.0;
                for (b, a) in t.support.points()[1..].iter().zip(t.support.gaps()) {
                    let s = sigmoid_indicator(f, *b, cfg.c1);
                    data_term += a * s;
                    slope += a * cfg.c1 * s * (1.0 - s);
                }
                slope
            }
        };
        for (d, gi) in grad_logits.row_mut(r).iter_mut().zip(&g) {
            *d = weight * gi / rows;
        }
    }
    data_term /= rows;
    let grad_w = net.backward(&cache, &grad_logits);
    let (kl, kl_gm, kl_gs) = gaussian_kl_grad(post, prior)?;
    let slope = penalty.slope(kl);
    let sigmas = post.sigmas();
    let grad_mean: Vec<f64> = grad_w.iter().zip(&kl_gm).map(|(gw, gk)| gw + slope * gk).collect();
    let grad_log_sigma: Vec<f64> = grad_w
        .iter()
        .zip(noise)
        .zip(&sigmas)
        .zip(&kl_gs)
        .map(|(((gw, e), s), gk)| gw * e * s + slope * gk)
        .collect();
    Ok((data_term + penalty.value(kl), grad_mean, grad_log_sigma))
}

/// Relaxed objective for a softmax-parameterized finite posterior,
/// `Σ_k ρ_k·cost_k + penalty(KL(ρ‖π))`, and its gradient in the logits.
pub fn finite_objective(
    logits: &[f64],
    prior: &CategoricalDistribution,
    costs: &[f64],
    penalty: &Penalty,
) -> (f64, Vec<f64>) {
    let rho = softmax(logits);
    let pi = prior.weights();
    let mut kl = 0.0;
    let mut log_ratio = vec![0.0; rho.len()];
    for k in 0..rho.len() {
        if rho[k] > 0.0 {
            log_ratio[k] = (rho[k] / pi[k]).ln();
            kl += rho[k] * log_ratio[k];
        }
    }
    let kl = kl.max(0.0);
    let mean_cost: f64 = rho.iter().zip(costs).map(|(r, c)| r * c).sum();
    let slope = penalty.slope(kl);
    let grad = (0..rho.len())
        .map(|k| rho[k] * (costs[k] - mean_cost) + slope * rho[k] * (log_ratio[k] - kl))
        .collect();
    (mean_cost + penalty.value(kl), grad)
}

/// Heavy-ball update in place: `v ← μ·v + g`, `θ ← θ − lr·v`.
fn momentum_step(params: &mut [f64], velocity: &mut [f64], grad: &[f64], cfg: &TrainConfig) {
    for ((p, v), g) in params.iter_mut().zip(velocity.iter_mut()).zip(grad) {
        *v = cfg.momentum * *v + g;
        *p -= cfg.learning_rate * *v;
    }
}

fn train_finite(
    prior: &CategoricalDistribution,
    costs: &[f64],
    penalty: &Penalty,
    cfg: &TrainConfig,
) -> Result<CategoricalDistribution> {
    let mut logits: Vec<f64> = prior.weights().iter().map(|w| w.ln()).collect();
    let mut velocity = vec![0.0; logits.len()];
    for _ in 0..cfg.epochs {
        let (_, grad) = finite_objective(&logits, prior, costs, penalty);
        momentum_step(&mut logits, &mut velocity, &grad, cfg);
    }
    CategoricalDistribution::from_logits(prior.class.clone(), &logits)
}

fn train_network(
    prior: &GaussianNetworkDistribution,
    data: &View<'_>,
    target: Option<&ExcessTarget<'_>>,
    penalty: &Penalty,
    cfg: &TrainConfig,
) -> Result<GaussianNetworkDistribution> {
    let mut post = prior.clone();
    let p = post.num_params();
    let (mut vm, mut vs) = (vec![0.0; p], vec![0.0; p]);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let batch = cfg.batch_size.min(data.len());
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            let x = data.batch(chunk);
            let y: Vec<usize> = chunk.iter().map(|&i| data.y(i)).collect();
            let refs: Vec<u8>;
            let sub = match target {
                Some(t) => {
                    refs = chunk.iter().map(|&i| t.ref_losses[i]).collect();
                    Some(ExcessTarget {
                        ref_losses: &refs,
                        ..*t
                    })
                }
                None => None,
            };
            let noise = post.draw_noise(&mut rng);
            let (_, gm, gs) =
                network_objective(&post, prior, &x, &y, sub.as_ref(), penalty, &noise, &cfg.surrogate)?;
            momentum_step(&mut post.mean, &mut vm, &gm, cfg);
            momentum_step(&mut post.log_sigma, &mut vs, &gs, cfg);
        }
    }
    Ok(post)
}

/// Per-hypothesis data term of a finite posterior: the empirical loss, or
/// with a target the mean of `Σ_j α_j·1[ℓ − scale·ref ≥ b_j]`.
fn finite_costs(
    dist: &CategoricalDistribution,
    data: &View<'_>,
    target: Option<&ExcessTarget<'_>>,
) -> Result<Vec<f64>> {
    let table = finite_loss_table(&dist.class, data)?;
    let n = data.len() as f64;
    table
        .iter()
        .map(|losses| match target {
            None => Ok(losses.iter().map(|&l| f64::from(l)).sum::<f64>() / n),
            Some(t) => {
                let gaps = t.support.gaps();
                let mut total = 0.0;
                for (&l, &r) in losses.iter().zip(t.ref_losses) {
                    let z = f64::from(l) - t.scale * f64::from(r);
                    let d = binarify(z, t.support)?;
                    total += d
                        .indicators()
                        .iter()
                        .zip(&gaps)
                        .filter(|(on, _)| **on)
                        .map(|(_, a)| a)
                        .sum::<f64>();
                }
                Ok(total / n)
            }
        })
        .collect()
}

/// Minimizes the relaxed bound over posteriors, starting from `prior`.
pub fn train_posterior(
    prior: &HypothesisDistribution,
    data: &View<'_>,
    target: Option<&ExcessTarget<'_>>,
    penalty: &Penalty,
    cfg: &TrainConfig,
) -> Result<HypothesisDistribution> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    if let Some(t) = target {
        t.check(data.len())?;
    }
    match prior {
        HypothesisDistribution::Finite(pi) => {
            let costs = finite_costs(pi, data, target)?;
            Ok(HypothesisDistribution::Finite(train_finite(pi, &costs, penalty, cfg)?))
        }
        HypothesisDistribution::Network(pi) => Ok(HypothesisDistribution::Network(train_network(
            pi, data, target, penalty, cfg,
        )?)),
    }
}

/// First posterior of the recursion, trained on `S_1` against the bound on
/// all `n_total` points.
pub fn train_pi1(
    pi0: &HypothesisDistribution,
    s1: &View<'_>,
    n_total: usize,
    budget: &ConfidenceBudget,
    cfg: &TrainConfig,
) -> Result<HypothesisDistribution> {
    let penalty = complexity_penalty(n_total, budget.delta, budget.union_factor, 1.0);
    train_posterior(pi0, s1, None, &penalty, cfg)
}

/// Posterior of step `t ≥ 2`, trained on the excess loss of `S_t` relative
/// to the recorded prior draws, against the bound on `n_val` points.
pub fn train_pit(
    pi_prev: &HypothesisDistribution,
    st: &View<'_>,
    prior_losses: &[u8],
    n_val: usize,
    gamma: f64,
    budget: &ConfidenceBudget,
    cfg: &TrainConfig,
) -> Result<HypothesisDistribution> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(invalid(format!("gamma {gamma} outside (0, 1)")));
    }
    let support = DiscreteSupport::new(vec![-gamma, 0.0, 1.0 - gamma, 1.0])?;
    let target = ExcessTarget {
        ref_losses: prior_losses,
        scale: gamma,
        support: &support,
    };
    let penalty = complexity_penalty(n_val, budget.delta, 3 * budget.union_factor, support.max() - support.min());
    train_posterior(pi_prev, st, Some(&target), &penalty, cfg)
}

/// Deterministic reference classifier trained on `data`.
///
/// Finite class: the rule with the smallest empirical error (ties to the
/// lowest index). Networks: the mean network, started from `init`'s mean
/// and trained on the bounded cross-entropy with the same optimizer.
pub fn erm_train(init: &HypothesisDistribution, data: &View<'_>, cfg: &TrainConfig) -> Result<Classifier> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    match init {
        HypothesisDistribution::Finite(d) => {
            let table = finite_loss_table(&d.class, data)?;
            let errors: Vec<usize> = table.iter().map(|l| l.iter().map(|&v| usize::from(v)).sum()).collect();
            let best = (0..errors.len()).min_by_key(|&k| (errors[k], k)).unwrap();
            Ok(Classifier::Threshold(d.class.rules[best]))
        }
        HypothesisDistribution::Network(d) => {
            let mut net = d.mean_network();
            let mut velocity = vec![0.0; net.params.len()];
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let mut order: Vec<usize> = (0..data.len()).collect();
            let batch = cfg.batch_size.min(data.len());
            for _ in 0..cfg.epochs {
                order.shuffle(&mut rng);
                for chunk in order.chunks(batch) {
                    let x = data.batch(chunk);
                    let grad = mean_ce_grad(&net, &x, chunk.iter().map(|&i| data.y(i)), &cfg.surrogate);
                    momentum_step(&mut net.params, &mut velocity, &grad, cfg);
                }
            }
            Ok(Classifier::Network(net))
        }
    }
}

fn mean_ce_grad(net: &Mlp, x: &Array2<f64>, y: impl Iterator<Item = usize>, cfg: &SurrogateConfig) -> Vec<f64> {
    let cache = net.forward(x);
    let rows = x.nrows() as f64;
    let mut grad_logits = Array2::zeros(cache.logits.raw_dim());
    let mut g = vec![0.0; net.arch.num_classes()];
    for (r, label) in y.enumerate() {
        let logits = cache.logits.row(r).to_vec();
        bounded_cross_entropy_grad(&logits, label, cfg, &mut g);
        for (d, gi) in grad_logits.row_mut(r).iter_mut().zip(&g) {
            *d = gi / rows;
        }
    }
    net.backward(&cache, &grad_logits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_threshold_data, Dataset, ThresholdDistribution};
    use crate::hypotheses::network::Architecture;
    use crate::hypotheses::{categorical_kl, classifier_error, FiniteHypothesisClass};
    use approx::assert_abs_diff_eq;

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-4)
    }

    #[test]
    fn finite_objective_gradient_matches_finite_differences() {
        let class = FiniteHypothesisClass::threshold_grid(4).unwrap();
        let prior = CategoricalDistribution::new(class, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let costs = [0.3, 0.1, 0.5, 0.25];
        let penalty = Penalty { n: 50, log_term: 3.0, multiplier: 1.5 };
        let logits = [0.2, -0.4, 1.1, 0.0];
        let (_, grad) = finite_objective(&logits, &prior, &costs, &penalty);
        for i in 0..4 {
            let h = 1e-6;
            let (mut up, mut dn) = (logits, logits);
            up[i] += h;
            dn[i] -= h;
            let fd = (finite_objective(&up, &prior, &costs, &penalty).0
                - finite_objective(&dn, &prior, &costs, &penalty).0)
                / (2.0 * h);
            assert!(rel_err(grad[i], fd) < 1e-6, "{} vs {fd}", grad[i]);
        }
    }

    #[test]
    fn excess_objective_single_triplet_by_hand() {
        let arch = Architecture::new(vec![1, 2]).unwrap();
        let post = GaussianNetworkDistribution::new(arch, vec![0.4, -0.3, 0.1, 0.2], vec![-3.0; 4]).unwrap();
        let x = Array2::from_shape_vec((1, 1), vec![0.5]).unwrap();
        let noise = [0.0; 4];
        let cfg = SurrogateConfig::default();
        let support = DiscreteSupport::new(vec![-0.5, 0.0, 0.5, 1.0]).unwrap();
        let target = ExcessTarget { ref_losses: &[0], scale: 0.5, support: &support };
        let penalty = Penalty { n: 10, log_term: 1.0, multiplier: 1.5 };
        let (value, _, _) =
            network_objective(&post, &post, &x, &[1], Some(&target), &penalty, &noise, &cfg).unwrap();
        let logits = [0.4 * 0.5 + 0.1, -0.3 * 0.5 + 0.2];
        let ce = crate::hypotheses::bounded_cross_entropy(&logits, 1, &cfg);
        let expected = 0.5 * sigmoid_indicator(ce, 0.0, 5.0)
            + 0.5 * sigmoid_indicator(ce, 0.5, 5.0)
            + 0.5 * sigmoid_indicator(ce, 1.0, 5.0)
            + 1.5 * (1.0f64 / 20.0).sqrt();
        assert_abs_diff_eq!(value, expected, epsilon = 1e-14);
    }

    fn threshold_problem(n: usize, seed: u64) -> Dataset {
        gen_threshold_data(&ThresholdDistribution::new(0.3, 0.0).unwrap(), n, seed)
    }

    #[test]
    fn finite_training_descends_and_respects_kl() {
        let data = threshold_problem(200, 1);
        let class = FiniteHypothesisClass::threshold_grid(3).unwrap();
        let pi0 = CategoricalDistribution::uniform(class);
        let costs = finite_costs(&pi0, &data.view(), None).unwrap();
        let penalty = Penalty { n: 200, log_term: complexity_log_term(200, 0.05, 1), multiplier: 1.0 };
        let cfg = TrainConfig { momentum: 0.0, learning_rate: 0.5, ..TrainConfig::finite() };
        let mut logits = vec![0.0; 3];
        let mut velocity = vec![0.0; 3];
        let mut last = finite_objective(&logits, &pi0, &costs, &penalty).0;
        for _ in 0..200 {
            let (_, grad) = finite_objective(&logits, &pi0, &costs, &penalty);
            momentum_step(&mut logits, &mut velocity, &grad, &cfg);
            let now = finite_objective(&logits, &pi0, &costs, &penalty).0;
            assert!(now <= last + 1e-15);
            last = now;
        }

        // With only a handful of points the KL term keeps the posterior
        // closer to the prior than with many.
        let prior = HypothesisDistribution::Finite(pi0.clone());
        let budget = ConfidenceBudget::new(0.05, 1, 0.01, 1).unwrap();
        let big = train_pi1(&prior, &data.view(), 200, &budget, &TrainConfig::finite()).unwrap();
        let small_view = View::new(&data, (0..5).collect());
        let small = train_pi1(&prior, &small_view, 5, &budget, &TrainConfig::finite()).unwrap();
        assert!(small.kl(&prior).unwrap() < big.kl(&prior).unwrap());

        let zero = TrainConfig { epochs: 0, ..TrainConfig::finite() };
        assert_eq!(train_pi1(&prior, &data.view(), 200, &budget, &zero).unwrap(), prior);
        assert!(train_pi1(&prior, &View::new(&data, vec![]), 200, &budget, &zero).is_err());
    }

    #[test]
    fn finite_excess_costs_by_enumeration() {
        let data = threshold_problem(5, 2);
        let class = FiniteHypothesisClass::threshold_grid(3).unwrap();
        let pi = CategoricalDistribution::uniform(class.clone());
        let refs = [1u8, 0, 1, 1, 0];
        let support = DiscreteSupport::new(vec![-0.5, 0.0, 0.5, 1.0]).unwrap();
        let target = ExcessTarget { ref_losses: &refs, scale: 0.5, support: &support };
        let costs = finite_costs(&pi, &data.view(), Some(&target)).unwrap();
        for (k, rule) in class.rules.iter().enumerate() {
            let mut total = 0.0;
            for i in 0..5 {
                let l = f64::from(u8::from(rule.predict(data.x(i)) != data.labels[i]));
                // f + γ: the decomposition's weighted indicators sum to f − b_0
                total += l - 0.5 * f64::from(refs[i]) + 0.5;
            }
            assert_abs_diff_eq!(costs[k], total / 5.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn finite_erm_is_separating() {
        let data = threshold_problem(300, 3);
        let class = FiniteHypothesisClass::threshold_grid(11).unwrap();
        let init = HypothesisDistribution::Finite(CategoricalDistribution::uniform(class));
        let h = erm_train(&init, &data.view(), &TrainConfig::finite()).unwrap();
        assert_eq!(h, Classifier::Threshold(crate::hypotheses::ThresholdRule::new(0.3)));
        assert_eq!(classifier_error(&h, &data.view()).unwrap(), 0.0);
    }

    #[test]
    fn network_training_is_deterministic_and_zero_epochs_is_identity() {
        let data = threshold_problem(120, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let arch = Architecture::new(vec![1, 4, 2]).unwrap();
        let pi0 = HypothesisDistribution::Network(GaussianNetworkDistribution::random_prior(arch, 0.03, &mut rng).unwrap());
        let budget = ConfidenceBudget::new(0.05, 1, 0.01, 1).unwrap();
        let cfg = TrainConfig { epochs: 3, batch_size: 32, ..TrainConfig::default() };
        let a = train_pi1(&pi0, &data.view(), 120, &budget, &cfg).unwrap();
        let b = train_pi1(&pi0, &data.view(), 120, &budget, &cfg).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, pi0);
        let zero = TrainConfig { epochs: 0, ..cfg };
        assert_eq!(train_pi1(&pi0, &data.view(), 120, &budget, &zero).unwrap(), pi0);
        let erm0 = erm_train(&pi0, &data.view(), &zero).unwrap();
        match (&erm0, &pi0) {
            (Classifier::Network(net), HypothesisDistribution::Network(d)) => assert_eq!(net.params, d.mean),
            _ => unreachable!(),
        }
    }

    #[test]
    fn finite_posterior_kl_matches_trained_weights() {
        let data = threshold_problem(100, 5);
        let class = FiniteHypothesisClass::threshold_grid(5).unwrap();
        let pi0 = CategoricalDistribution::uniform(class);
        let budget = ConfidenceBudget::new(0.05, 1, 0.01, 1).unwrap();
        let prior = HypothesisDistribution::Finite(pi0.clone());
        let post = train_pi1(&prior, &data.view(), 100, &budget, &TrainConfig::finite()).unwrap();
        match &post {
            HypothesisDistribution::Finite(rho) => {
                assert_abs_diff_eq!(post.kl(&prior).unwrap(), categorical_kl(rho, &pi0).unwrap());
                // the separating rule θ = 0.25 is nearest θ* = 0.3 on this grid
                let best = (0..5).max_by(|&a, &b| rho.weights()[a].total_cmp(&rho.weights()[b])).unwrap();
                assert_eq!(best, 1);
            }
            HypothesisDistribution::Network(_) => unreachable!(),
        }
    }
}
