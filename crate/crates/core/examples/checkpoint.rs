//! Saves every distribution of a recursive run to JSON, reloads them and
//! recomputes the whole trace bit for bit.
//!
//! cargo run --example checkpoint -- [dir]

use std::fs;
use std::path::PathBuf;

use rpb::hypotheses::train::TrainConfig;
use rpb::hypotheses::{EvalMode, HypothesisDistribution};
use rpb::recursion::{evaluate_recursive, run_recursive, split_order, GammaPolicy, RecursionConfig, StepSeeds};
use rpb::validate::ThresholdSetup;

fn main() -> rpb::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("rpb-checkpoints"));
    fs::create_dir_all(&dir)?;

    let setup = ThresholdSetup::default();
    let data = setup.sample(2000, 1)?;
    let pi0 = setup.uniform_prior()?;
    let cfg = RecursionConfig {
        steps: 3,
        gamma: GammaPolicy::Grid(vec![0.3, 0.5, 0.7]),
        delta: 0.025,
        delta_prime: 0.01,
        mode: EvalMode::Sampled,
        train_first: TrainConfig::finite(),
        train_rest: TrainConfig::finite(),
        seed: 9,
    };
    let out = run_recursive(&data, None, &pi0, &cfg)?;

    for (t, dist) in out.posteriors.iter().enumerate() {
        fs::write(dir.join(format!("posterior_{}.json", t + 1)), serde_json::to_string(dist)?)?;
    }
    let reloaded = (1..=cfg.steps)
        .map(|t| {
            let text = fs::read_to_string(dir.join(format!("posterior_{t}.json")))?;
            Ok(serde_json::from_str::<HypothesisDistribution>(&text)?)
        })
        .collect::<rpb::Result<Vec<_>>>()?;

    let order = split_order(data.len(), StepSeeds::new(cfg.seed).split());
    let again = evaluate_recursive(&reloaded, &pi0, &out.gammas, &out.schedule, &data, &order, &cfg, None)?;
    println!("selected gammas {:?}", out.gammas);
    println!("final bound {}", out.trace.final_bound());
    println!("identical after reload: {}", again == out.trace);
    println!("checkpoints in {}", dir.display());
    Ok(())
}
