//! Split-kl versus the plain kl bound for a ternary variable with little
//! variance, and the decomposition behind it.
//!
//! cargo run --example split_kl -- [n]

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rpb::concentration::{binarify, kl_bound_upper, split_kl_upper, DiscreteSupport};

fn main() -> rpb::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(1000);
    let delta = 0.05;
    let support = DiscreteSupport::new(vec![-1.0, 0.0, 1.0])?;
    // Mostly zero: the excess loss of two similar classifiers.
    let weights = [0.05, 0.85, 0.10];
    let truth: f64 = support.points().iter().zip(weights).map(|(z, w)| z * w).sum();

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let pick = WeightedIndex::new(weights).expect("valid weights");
    let draws: Vec<f64> = (0..n).map(|_| support.points()[pick.sample(&mut rng)]).collect();

    let mut means = vec![0.0; support.k()];
    for &z in &draws {
        for (m, on) in means.iter_mut().zip(binarify(z, &support)?.indicators()) {
            *m += f64::from(u8::from(*on)) / n as f64;
        }
    }
    let split = split_kl_upper(&means, &support, n, delta)?;

    // kl bound on the rescaled variable (Z + 1)/2 ∈ [0, 1].
    let mean = draws.iter().sum::<f64>() / n as f64;
    let plain = 2.0 * kl_bound_upper((mean + 1.0) / 2.0, n, delta)? - 1.0;

    println!("n = {n}, E[Z] = {truth}, empirical mean {mean:.4}");
    println!("indicator means {means:?}");
    println!("split-kl bound {split:.4}");
    println!("kl bound on the rescaled variable {plain:.4}");
    Ok(())
}
