//! Recursive bound: data-split schedules, the excess loss relative to a
//! downscaled prior, and the step-by-step evaluator and training pipeline.

use std::io::Write;
use std::ops::Range;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::concentration::{binarify, BinaryDecomposition, DiscreteSupport};
use crate::data::{Dataset, View};
use crate::error::{invalid, Error, Result};
use crate::hypotheses::train::{train_pi1, train_pit, TrainConfig};
use crate::hypotheses::{empirical_gibbs_loss, EvalMode, HypothesisDistribution};
use crate::pacbayes::{pb_kl_upper, pb_split_kl_upper, sampling_upper, BoundInputs, ConfidenceBudget};
use crate::rng::{derive_seed, stream_rng};

/// Partition of `0..total_n` into consecutive chunks `S_1, …, S_T`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSchedule {
    pub total_n: usize,
    pub chunk_sizes: Vec<usize>,
}

impl SplitSchedule {
    pub fn new(chunk_sizes: Vec<usize>) -> Result<Self> {
        if chunk_sizes.is_empty() || chunk_sizes.contains(&0) {
            return Err(invalid(format!("chunk sizes {chunk_sizes:?} must be positive")));
        }
        Ok(Self {
            total_n: chunk_sizes.iter().sum(),
            chunk_sizes,
        })
    }

    pub fn steps(&self) -> usize {
        self.chunk_sizes.len()
    }

    fn start(&self, t: usize) -> usize {
        self.chunk_sizes[..t - 1].iter().sum()
    }

    /// Positions of `S_t` (steps are numbered from 1).
    pub fn chunk(&self, t: usize) -> Range<usize> {
        let start = self.start(t);
        start..start + self.chunk_sizes[t - 1]
    }

    /// Positions of `S_1 ∪ … ∪ S_t`.
    pub fn train_prefix(&self, t: usize) -> Range<usize> {
        0..self.chunk(t).end
    }

    /// Positions of `S_t ∪ … ∪ S_T`.
    pub fn val_suffix(&self, t: usize) -> Range<usize> {
        self.start(t)..self.total_n
    }

    pub fn n_val(&self, t: usize) -> usize {
        self.total_n - self.start(t)
    }
}

/// Chunks that roughly double: `s_t = ⌊n/2^{T−t+1}⌋` for `t ≥ 3`,
/// `s_2 = ⌈n/2^{T−1}⌉`, and `S_1` takes the remainder. With `T ≤ 2` the
/// last chunk is `⌊n/2⌋`.
pub fn geometric_split(n: usize, steps: usize) -> Result<SplitSchedule> {
    if steps == 0 {
        return Err(invalid("number of steps must be positive"));
    }
    if steps > 63 || n < 1usize << (steps - 1) {
        return Err(invalid(format!("n = {n} is too small for {steps} nonempty chunks")));
    }
    let mut sizes = vec![0; steps];
    match steps {
        1 => sizes[0] = n,
        2 => {
            sizes[1] = n / 2;
            sizes[0] = n - n / 2;
        }
        _ => {
            for t in 3..=steps {
                sizes[t - 1] = n >> (steps - t + 1);
            }
            sizes[1] = n.div_ceil(1 << (steps - 1));
            sizes[0] = n - sizes[1..].iter().sum::<usize>();
        }
    }
    SplitSchedule::new(sizes)
}

/// The four values `{−γ, 0, 1−γ, 1}` taken by `ℓ(h) − γ·ℓ(h′)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcessSupport {
    gamma: f64,
    support: DiscreteSupport,
}

impl ExcessSupport {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(invalid(format!("gamma {gamma} outside (0, 1)")));
        }
        Ok(Self {
            gamma,
            support: DiscreteSupport::new(vec![-gamma, 0.0, 1.0 - gamma, 1.0])?,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn support(&self) -> &DiscreteSupport {
        &self.support
    }
}

/// `h_loss − γ·prior_loss`.
pub fn excess_value(h_loss: u8, prior_loss: u8, gamma: f64) -> f64 {
    f64::from(h_loss) - gamma * f64::from(prior_loss)
}

pub fn excess_indicators(h_loss: u8, prior_loss: u8, support: &ExcessSupport) -> Result<BinaryDecomposition> {
    binarify(excess_value(h_loss, prior_loss, support.gamma), &support.support)
}

/// Validation points paired with the zero-one loss of one prior draw each.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripletSet {
    /// Row indices into the dataset.
    pub indices: Vec<usize>,
    pub prior_losses: Vec<u8>,
    pub prior_seed: u64,
}

impl TripletSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn view<'a>(&self, data: &'a Dataset) -> View<'a> {
        View::new(data, self.indices.clone())
    }
}

/// Draws one hypothesis from `prior` per point of `points` and records its
/// loss. The draw for a point depends only on `seed` and its row index.
pub fn build_triplets(points: &View<'_>, prior: &HypothesisDistribution, seed: u64) -> Result<TripletSet> {
    Ok(TripletSet {
        indices: points.indices.clone(),
        prior_losses: prior.sampled_losses(points, seed)?,
        prior_seed: seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcessEstimate {
    /// Empirical means of the three indicator components.
    pub means: [f64; 3],
    /// `−γ + Σ_j α_j·means_j`.
    pub f_hat: f64,
    /// Posterior draws behind the means (zero in exact mode).
    pub m: usize,
}

/// Posterior-averaged component means of the excess loss on `triplets`.
pub fn estimate_excess_means(
    posterior: &HypothesisDistribution,
    triplets: &TripletSet,
    data: &Dataset,
    support: &ExcessSupport,
    mode: EvalMode,
    seed: u64,
) -> Result<ExcessEstimate> {
    if triplets.is_empty() {
        return Err(Error::EmptyData);
    }
    let view = triplets.view(data);
    // Probability that the posterior errs on each point.
    let (probs, m): (Vec<f64>, usize) = match mode {
        EvalMode::Exact => (posterior.error_probabilities(&view)?, 0),
        EvalMode::Sampled => (
            posterior
                .sampled_losses(&view, seed)?
                .into_iter()
                .map(f64::from)
                .collect(),
            triplets.len(),
        ),
    };
    let mut sums = [0.0; 3];
    for (&p, &r) in probs.iter().zip(&triplets.prior_losses) {
        let wrong = excess_indicators(1, r, support)?;
        let right = excess_indicators(0, r, support)?;
        for j in 0..3 {
            let on = |d: &BinaryDecomposition| f64::from(u8::from(d.indicators()[j]));
            sums[j] += p * on(&wrong) + (1.0 - p) * on(&right);
        }
    }
    let n = triplets.len() as f64;
    let means = sums.map(|s| (s / n).clamp(0.0, 1.0));
    let f_hat = support.support.combine(&means)?;
    Ok(ExcessEstimate { means, f_hat, m })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstStep {
    pub empirical_loss: f64,
    /// Empirical loss after the sampling correction (equal in exact mode).
    pub inflated_loss: f64,
    pub kl: f64,
    pub n: usize,
    pub bound: f64,
}

/// `B_1 = kl⁻¹⁺(E_{π_1}[L̂(h,S)], (KL(π_1‖π_0) + ln(2T√n/δ))/n)`.
pub fn step_bound_first(
    pi1: &HypothesisDistribution,
    pi0: &HypothesisDistribution,
    full_data: &View<'_>,
    budget: &ConfidenceBudget,
    mode: EvalMode,
    seed: u64,
) -> Result<FirstStep> {
    let (emp, m) = empirical_gibbs_loss(pi1, full_data, mode, seed)?;
    let inflated = match mode {
        EvalMode::Exact => emp.get(),
        EvalMode::Sampled => sampling_upper(emp.get(), m, budget.delta_prime_part())?.clamp(0.0, 1.0),
    };
    let kl = pi1.kl(pi0)?;
    let n = full_data.len();
    let bound = pb_kl_upper(&BoundInputs::new(inflated, kl, n)?, budget.delta, budget.union_factor)?;
    Ok(FirstStep {
        empirical_loss: emp.get(),
        inflated_loss: inflated,
        kl,
        n,
        bound,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcessStep {
    pub gamma: f64,
    pub estimate: ExcessEstimate,
    /// Component means after the sampling correction.
    pub inflated_means: [f64; 3],
    pub kl: f64,
    pub n_val: usize,
    /// `E_t`, the bound on the expected excess loss.
    pub excess_bound: f64,
}

impl ExcessStep {
    /// `B_t = E_t + γ_t·B_{t−1}`.
    pub fn bound(&self, previous: f64) -> f64 {
        self.excess_bound + self.gamma * previous
    }
}

/// `E_t = −γ + Σ_j α_j·kl⁻¹⁺(q̂_j, (KL(π_t‖π_{t−1}) + ln(6T√n_val/δ))/n_val)`,
/// with `T` taken from `budget.union_factor`.
#[allow(clippy::too_many_arguments)]
pub fn step_bound_next(
    pi_t: &HypothesisDistribution,
    pi_prev: &HypothesisDistribution,
    gamma: f64,
    triplets: &TripletSet,
    data: &Dataset,
    budget: &ConfidenceBudget,
    mode: EvalMode,
    seed: u64,
) -> Result<ExcessStep> {
    let support = ExcessSupport::new(gamma)?;
    let estimate = estimate_excess_means(pi_t, triplets, data, &support, mode, seed)?;
    let inflated_means = match mode {
        EvalMode::Exact => estimate.means,
        EvalMode::Sampled => {
            let mut out = [0.0; 3];
            for (o, &q) in out.iter_mut().zip(&estimate.means) {
                *o = sampling_upper(q, estimate.m, budget.delta_prime_part())?.clamp(0.0, 1.0);
            }
            out
        }
    };
    let kl = pi_t.kl(pi_prev)?;
    let n_val = triplets.len();
    let excess_bound = pb_split_kl_upper(
        &inflated_means,
        &support.support,
        kl,
        n_val,
        budget.delta,
        budget.union_factor,
    )?;
    Ok(ExcessStep {
        gamma,
        estimate,
        inflated_means,
        kl,
        n_val,
        excess_bound,
    })
}

/// One row of a [`BoundTrace`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub n_val: usize,
    pub gamma: Option<f64>,
    /// Empirical Gibbs loss on all data (first step only).
    pub empirical_loss: Option<f64>,
    pub component_means: Option<[f64; 3]>,
    pub f_hat: Option<f64>,
    pub kl: f64,
    pub kl_over_nval: f64,
    pub e_t: Option<f64>,
    pub b_t: f64,
    pub test01: Option<f64>,
    pub vacuous: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundTrace {
    pub delta: f64,
    pub delta_prime: f64,
    pub mode: EvalMode,
    pub steps: Vec<StepRecord>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl BoundTrace {
    pub const CSV_HEADER: [&'static str; 7] = ["t", "n_val", "F_hat", "KL_over_nval", "E_t", "B_t", "test01"];

    pub fn final_bound(&self) -> f64 {
        self.steps.last().map_or(f64::NAN, |s| s.b_t)
    }

    /// Largest `|B_t − (E_t + γ_t·B_{t−1})|` over the trace.
    pub fn identity_gap(&self) -> f64 {
        self.steps
            .windows(2)
            .map(|w| match (w[1].e_t, w[1].gamma) {
                (Some(e), Some(g)) => (w[1].b_t - (e + g * w[0].b_t)).abs(),
                _ => f64::INFINITY,
            })
            .fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::CSV_HEADER)?;
        for s in &self.steps {
            w.write_record([
                s.t.to_string(),
                s.n_val.to_string(),
                opt(s.f_hat),
                s.kl_over_nval.to_string(),
                opt(s.e_t),
                s.b_t.to_string(),
                opt(s.test01),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Evaluates the recursive bound for given posteriors and `γ_2, …, γ_T`.
/// `order` lists the dataset rows in split order; `π_t` and `γ_t` must
/// have been built from the first `t` chunks only.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_recursive(
    posteriors: &[HypothesisDistribution],
    pi0: &HypothesisDistribution,
    gammas: &[f64],
    schedule: &SplitSchedule,
    data: &Dataset,
    order: &[usize],
    cfg: &RecursionConfig,
    test: Option<&Dataset>,
) -> Result<BoundTrace> {
    let (budget, step_budget) = cfg.budgets()?;
    let (mode, seed) = (cfg.mode, cfg.seed);
    let steps = schedule.steps();
    if posteriors.len() != steps || gammas.len() + 1 != steps {
        return Err(Error::LengthMismatch {
            expected: steps,
            got: posteriors.len(),
        });
    }
    if order.len() != schedule.total_n || data.len() < schedule.total_n {
        return Err(Error::LengthMismatch {
            expected: schedule.total_n,
            got: order.len(),
        });
    }
    let seeds = StepSeeds::new(seed);
    let mut trace = BoundTrace {
        delta: budget.delta,
        delta_prime: budget.delta_prime,
        mode,
        steps: Vec::with_capacity(steps),
    };
    let all = View::new(data, order.to_vec());
    let first = step_bound_first(&posteriors[0], pi0, &all, &budget, mode, seeds.posterior(1))?;
    trace.steps.push(first_record(&first, test01(&posteriors[0], test, mode, seeds.test(1))?));
    for t in 2..=steps {
        let val = View::new(data, order[schedule.val_suffix(t)].to_vec());
        let triplets = build_triplets(&val, &posteriors[t - 2], seeds.prior(t))?;
        let step = step_bound_next(
            &posteriors[t - 1],
            &posteriors[t - 2],
            gammas[t - 2],
            &triplets,
            data,
            &step_budget,
            mode,
            seeds.posterior(t),
        )?;
        let prev = trace.steps.last().unwrap().b_t;
        let record = excess_record(t, &step, prev, test01(&posteriors[t - 1], test, mode, seeds.test(t))?);
        trace.steps.push(record);
    }
    Ok(trace)
}

fn first_record(first: &FirstStep, test01: Option<f64>) -> StepRecord {
    StepRecord {
        t: 1,
        n_val: first.n,
        gamma: None,
        empirical_loss: Some(first.empirical_loss),
        component_means: None,
        f_hat: None,
        kl: first.kl,
        kl_over_nval: first.kl / first.n as f64,
        e_t: None,
        b_t: first.bound,
        test01,
        vacuous: first.bound >= 1.0,
    }
}

fn excess_record(t: usize, step: &ExcessStep, previous: f64, test01: Option<f64>) -> StepRecord {
    let b_t = step.bound(previous);
    StepRecord {
        t,
        n_val: step.n_val,
        gamma: Some(step.gamma),
        empirical_loss: None,
        component_means: Some(step.estimate.means),
        f_hat: Some(step.estimate.f_hat),
        kl: step.kl,
        kl_over_nval: step.kl / step.n_val as f64,
        e_t: Some(step.excess_bound),
        b_t,
        test01,
        vacuous: b_t >= 1.0,
    }
}

fn test01(
    dist: &HypothesisDistribution,
    test: Option<&Dataset>,
    mode: EvalMode,
    seed: u64,
) -> Result<Option<f64>> {
    test.map(|d| empirical_gibbs_loss(dist, &d.view(), mode, seed).map(|(v, _)| v.get()))
        .transpose()
}

/// Named random streams of one recursive run.
#[derive(Debug, Clone, Copy)]
pub struct StepSeeds {
    pub root: u64,
}

impl StepSeeds {
    pub fn new(root: u64) -> Self {
        Self { root }
    }

    pub fn split(&self) -> u64 {
        derive_seed(self.root, "split", 0)
    }

    pub fn trainer(&self, t: usize) -> u64 {
        derive_seed(self.root, "trainer", t as u64)
    }

    pub fn prior(&self, t: usize) -> u64 {
        derive_seed(self.root, "prior-draws", t as u64)
    }

    pub fn posterior(&self, t: usize) -> u64 {
        derive_seed(self.root, "posterior-draws", t as u64)
    }

    pub fn test(&self, t: usize) -> u64 {
        derive_seed(self.root, "test-draws", t as u64)
    }
}

/// Random order of `0..n` used to cut the data into chunks.
pub fn split_order(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream_rng(seed, 0));
    order
}

/// The grid value whose candidate bound is smallest; ties go to the smaller
/// `γ`. Candidates must already account for the grid in their union bound.
pub fn select_gamma(grid: &[f64], candidate_bounds: &[f64]) -> Result<f64> {
    if grid.is_empty() {
        return Err(invalid("empty gamma grid"));
    }
    if grid.len() != candidate_bounds.len() {
        return Err(Error::LengthMismatch {
            expected: grid.len(),
            got: candidate_bounds.len(),
        });
    }
    let mut best = 0;
    for i in 1..grid.len() {
        let (b, c) = (candidate_bounds[i], candidate_bounds[best]);
        if b < c || (b == c && grid[i] < grid[best]) {
            best = i;
        }
    }
    Ok(grid[best])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GammaPolicy {
    Fixed(f64),
    Grid(Vec<f64>),
}

impl GammaPolicy {
    pub fn candidates(&self) -> Vec<f64> {
        match self {
            GammaPolicy::Fixed(g) => vec![*g],
            GammaPolicy::Grid(g) => g.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.candidates();
        if c.is_empty() {
            return Err(invalid("empty gamma grid"));
        }
        for g in c {
            ExcessSupport::new(g)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecursionConfig {
    pub steps: usize,
    pub gamma: GammaPolicy,
    pub delta: f64,
    pub delta_prime: f64,
    pub mode: EvalMode,
    /// Optimizer for `π_1`; later steps use `train_rest`.
    pub train_first: TrainConfig,
    pub train_rest: TrainConfig,
    pub seed: u64,
}

impl RecursionConfig {
    /// Failure probabilities: `δ/T` for the first step and `δ/(T·G)` for
    /// each later step and grid value; `δ′` split over every sampled
    /// quantity.
    pub fn budget(&self) -> Result<ConfidenceBudget> {
        self.gamma.validate()?;
        let g = self.gamma.candidates().len();
        let parts = 1 + 3 * (self.steps.max(1) - 1) * g;
        ConfidenceBudget::new(self.delta, self.steps, self.delta_prime, parts)
    }

    /// Budgets of the first step and of the later steps.
    pub fn budgets(&self) -> Result<(ConfidenceBudget, ConfidenceBudget)> {
        let first = self.budget()?;
        let later = ConfidenceBudget {
            union_factor: self.steps * self.gamma.candidates().len(),
            ..first
        };
        Ok((first, later))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecursionOutcome {
    pub schedule: SplitSchedule,
    pub trace: BoundTrace,
    pub posteriors: Vec<HypothesisDistribution>,
    pub gammas: Vec<f64>,
}

/// Trains `π_1, …, π_T` on growing prefixes of `data` and evaluates the
/// recursive bound along the way.
pub fn run_recursive(
    data: &Dataset,
    test: Option<&Dataset>,
    pi0: &HypothesisDistribution,
    cfg: &RecursionConfig,
) -> Result<RecursionOutcome> {
    let (budget, step_budget) = cfg.budgets()?;
    let seeds = StepSeeds::new(cfg.seed);
    let schedule = geometric_split(data.len(), cfg.steps)?;
    let order = split_order(data.len(), seeds.split());
    let at = |r: Range<usize>| View::new(data, order[r].to_vec());
    let grid = cfg.gamma.candidates();

    let train = |base: &TrainConfig, t| TrainConfig {
        seed: seeds.trainer(t),
        ..*base
    };
    let pi1 = train_pi1(pi0, &at(schedule.chunk(1)), data.len(), &budget, &train(&cfg.train_first, 1))?;
    let first = step_bound_first(&pi1, pi0, &at(0..data.len()), &budget, cfg.mode, seeds.posterior(1))?;
    let mut trace = BoundTrace {
        delta: cfg.delta,
        delta_prime: cfg.delta_prime,
        mode: cfg.mode,
        steps: vec![first_record(&first, test01(&pi1, test, cfg.mode, seeds.test(1))?)],
    };
    let mut posteriors = vec![pi1];
    let mut gammas = Vec::new();

    for t in 2..=cfg.steps {
        let prev = posteriors.last().unwrap();
        let val = at(schedule.val_suffix(t));
        let triplets = build_triplets(&val, prev, seeds.prior(t))?;
        // U^val_t starts with S_t, so its first s_t triplets belong to S_t.
        let s_t = at(schedule.chunk(t));
        let train_refs = &triplets.prior_losses[..s_t.len()];
        let mut candidates = Vec::with_capacity(grid.len());
        for &gamma in &grid {
            let post = train_pit(
                prev,
                &s_t,
                train_refs,
                val.len(),
                gamma,
                &step_budget,
                &train(&cfg.train_rest, t),
            )?;
            let step = step_bound_next(&post, prev, gamma, &triplets, data, &step_budget, cfg.mode, seeds.posterior(t))?;
            candidates.push((post, step));
        }
        let b_prev = trace.steps.last().unwrap().b_t;
        let bounds: Vec<f64> = candidates.iter().map(|(_, s)| s.bound(b_prev)).collect();
        let gamma = select_gamma(&grid, &bounds)?;
        let (post, step) = candidates.into_iter().find(|(_, s)| s.gamma == gamma).unwrap();
        let record = excess_record(t, &step, b_prev, test01(&post, test, cfg.mode, seeds.test(t))?);
        trace.steps.push(record);
        posteriors.push(post);
        gammas.push(gamma);
    }
    Ok(RecursionOutcome {
        schedule,
        trace,
        posteriors,
        gammas,
    })
}
