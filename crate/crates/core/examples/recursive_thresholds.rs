//! Recursive bound on noisy one-dimensional threshold data, with a finite
//! class of 101 threshold rules and exact posterior averages.
//!
//! cargo run --release --example recursive_thresholds -- [n] [T]

use rpb::hypotheses::train::TrainConfig;
use rpb::hypotheses::EvalMode;
use rpb::recursion::{run_recursive, GammaPolicy, RecursionConfig};
use rpb::validate::ThresholdSetup;

fn main() -> rpb::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let n = args.first().copied().unwrap_or(4000);
    let steps = args.get(1).copied().unwrap_or(4);

    let setup = ThresholdSetup::default();
    let data = setup.sample(n, 1)?;
    let test = setup.sample(10_000, 2)?;
    let pi0 = setup.uniform_prior()?;
    let cfg = RecursionConfig {
        steps,
        gamma: GammaPolicy::Fixed(0.5),
        delta: 0.025,
        delta_prime: 0.01,
        mode: EvalMode::Exact,
        train_first: TrainConfig::finite(),
        train_rest: TrainConfig::finite(),
        seed: 7,
    };
    let out = run_recursive(&data, Some(&test), &pi0, &cfg)?;
    out.trace.write_csv(std::io::stdout())?;
    let risk = setup.true_gibbs_risk(out.posteriors.last().unwrap())?;
    println!("\nchunks {:?}", out.schedule.chunk_sizes);
    println!("true risk of the final posterior {risk:.4}, bound {:.4}", out.trace.final_bound());
    Ok(())
}
