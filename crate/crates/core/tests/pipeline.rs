use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rpb::data::Dataset;
use rpb::hypotheses::train::TrainConfig;
use rpb::hypotheses::{Architecture, EvalMode, GaussianNetworkDistribution, HypothesisDistribution};
use rpb::recursion::{evaluate_recursive, run_recursive, split_order, GammaPolicy, RecursionConfig, StepSeeds};
use rpb::validate::ThresholdSetup;

/// Two noisy Gaussian blobs in three dimensions.
fn blobs(n: usize, seed: u64) -> Dataset {
    use rand_distr::{Distribution, Normal};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0f32, 1.0).unwrap();
    let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
    let x = Array2::from_shape_fn((n, 3), |(i, j)| {
        let centre = if labels[i] == 1 { 1.0 } else { -1.0 };
        centre * [1.0, 0.5, 0.0][j] + noise.sample(&mut rng)
    });
    Dataset::new(x, labels, 2, "blobs").unwrap()
}

fn network_setup() -> (Dataset, Dataset, HypothesisDistribution, RecursionConfig) {
    let data = blobs(800, 1);
    let test = blobs(400, 2);
    let arch = Architecture::new(vec![3, 4, 2]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pi0 = HypothesisDistribution::Network(GaussianNetworkDistribution::random_prior(arch, 0.1, &mut rng).unwrap());
    let train = TrainConfig { epochs: 3, batch_size: 50, ..TrainConfig::desk() };
    let cfg = RecursionConfig {
        steps: 3,
        gamma: GammaPolicy::Grid(vec![0.4, 0.6]),
        delta: 0.025,
        delta_prime: 0.01,
        mode: EvalMode::Sampled,
        train_first: train,
        train_rest: train,
        seed: 8,
    };
    (data, test, pi0, cfg)
}

#[test]
fn network_trace_recomputes_from_json() {
    let (data, test, pi0, cfg) = network_setup();
    let out = run_recursive(&data, Some(&test), &pi0, &cfg).unwrap();
    assert!(out.trace.identity_gap() <= 1e-12);
    let text = serde_json::to_string(&out.posteriors).unwrap();
    let reloaded: Vec<HypothesisDistribution> = serde_json::from_str(&text).unwrap();
    assert_eq!(reloaded, out.posteriors);
    let order = split_order(data.len(), StepSeeds::new(cfg.seed).split());
    let again =
        evaluate_recursive(&reloaded, &pi0, &out.gammas, &out.schedule, &data, &order, &cfg, Some(&test)).unwrap();
    assert_eq!(again, out.trace);
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let (data, test, pi0, cfg) = network_setup();
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_recursive(&data, Some(&test), &pi0, &cfg).unwrap().trace)
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn exact_and_sampled_modes_agree_on_finite_class() {
    let setup = ThresholdSetup::default();
    let data = setup.sample(3000, 4).unwrap();
    let pi0 = setup.uniform_prior().unwrap();
    let mut cfg = RecursionConfig {
        steps: 3,
        gamma: GammaPolicy::Fixed(0.5),
        delta: 0.025,
        delta_prime: 0.01,
        mode: EvalMode::Exact,
        train_first: TrainConfig::finite(),
        train_rest: TrainConfig::finite(),
        seed: 2,
    };
    let exact = run_recursive(&data, None, &pi0, &cfg).unwrap();
    cfg.mode = EvalMode::Sampled;
    let sampled = run_recursive(&data, None, &pi0, &cfg).unwrap();
    // Same posteriors; only the evaluation differs.
    assert_eq!(exact.posteriors, sampled.posteriors);
    for (e, s) in exact.trace.steps.iter().zip(&sampled.trace.steps) {
        let (a, b) = (e.empirical_loss.or(e.f_hat).unwrap(), s.empirical_loss.or(s.f_hat).unwrap());
        assert!((a - b).abs() < 0.05, "{e:?} vs {s:?}");
    }
    // Sampling pays for its estimates, so the sampled bound is looser.
    assert!(sampled.trace.final_bound() > exact.trace.final_bound());
}
