//! Desk-scale MNIST: a stratified 10000-point training subsample, one hidden
//! layer, T = 4 and γ = 1/2, next to the uninformed baseline on the same
//! data.
//!
//! cargo run --release --example mnist_rpb -- [mnist-dir] [epochs] [hidden]
//!
//! The directory must hold the four uncompressed or gzipped IDX files;
//! `RPB_MNIST_DIR` works too.

use std::path::PathBuf;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rpb::baselines::{run_baseline, BaselineConfig, BaselineMethod};
use rpb::data::{find_idx_pair, load_idx};
use rpb::hypotheses::train::TrainConfig;
use rpb::hypotheses::{Architecture, EvalMode, GaussianNetworkDistribution, HypothesisDistribution};
use rpb::recursion::{run_recursive, GammaPolicy, RecursionConfig};

fn main() -> rpb::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let dir = args
        .first()
        .map(PathBuf::from)
        .or_else(|| std::env::var_os("RPB_MNIST_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("data/mnist"));
    let epochs: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(TrainConfig::desk().epochs);
    let hidden: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(100);

    let (img, lab) = find_idx_pair(&dir, "train")?;
    let (timg, tlab) = find_idx_pair(&dir, "t10k")?;
    let data = load_idx(img, lab)?.stratified_subsample(10_000, 1)?;
    let test = load_idx(timg, tlab)?;

    let arch = Architecture::new(vec![data.dim(), hidden, data.num_classes])?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let pi0 = HypothesisDistribution::Network(GaussianNetworkDistribution::random_prior(arch, 0.03, &mut rng)?);
    let train = TrainConfig { epochs, ..TrainConfig::desk() };

    let started = Instant::now();
    let cfg = RecursionConfig {
        steps: 4,
        gamma: GammaPolicy::Fixed(0.5),
        delta: 0.025,
        delta_prime: 0.01,
        mode: EvalMode::Sampled,
        train_first: train,
        train_rest: train,
        seed: 1,
    };
    let out = run_recursive(&data, Some(&test), &pi0, &cfg)?;
    out.trace.write_csv(std::io::stdout())?;
    println!("recursive run took {:.1?}", started.elapsed());

    let started = Instant::now();
    let bcfg = BaselineConfig {
        delta: 0.025,
        delta_prime: 0.01,
        mode: EvalMode::Sampled,
        train_prior: train,
        train_posterior: train,
        seed: 1,
    };
    let unf = run_baseline(BaselineMethod::Uninformed, &data, Some(&test), &pi0, &bcfg)?;
    println!(
        "uninformed: bound {:.4}, test {:.4} ({:.1?})",
        unf.bound,
        unf.test01.unwrap_or(f64::NAN),
        started.elapsed()
    );
    Ok(())
}
