//! Uninformed, informed and informed+excess bounds next to the recursive
//! bound on synthetic threshold data.
//!
//! cargo run --release --example baselines_thresholds -- [n]

use rpb::baselines::{run_baseline, BaselineConfig, BaselineMethod};
use rpb::hypotheses::train::TrainConfig;
use rpb::hypotheses::EvalMode;
use rpb::recursion::{run_recursive, GammaPolicy, RecursionConfig};
use rpb::validate::ThresholdSetup;

fn main() -> rpb::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(4000);
    let setup = ThresholdSetup::default();
    let data = setup.sample(n, 1)?;
    let test = setup.sample(10_000, 2)?;
    let pi0 = setup.uniform_prior()?;

    let bcfg = BaselineConfig {
        delta: 0.025,
        delta_prime: 0.01,
        mode: EvalMode::Exact,
        train_prior: TrainConfig::finite(),
        train_posterior: TrainConfig::finite(),
        seed: 5,
    };
    println!("method,train01,test01,bound,true_risk");
    for m in [BaselineMethod::Uninformed, BaselineMethod::Informed, BaselineMethod::InformedExcess] {
        let r = run_baseline(m, &data, Some(&test), &pi0, &bcfg)?;
        let risk = setup.true_gibbs_risk(&r.posterior)?;
        println!("{},{:.4},{:.4},{:.4},{risk:.4}", m.tag(), r.train01, r.test01.unwrap_or(f64::NAN), r.bound);
    }
    for steps in [2, 4] {
        let cfg = RecursionConfig {
            steps,
            gamma: GammaPolicy::Fixed(0.5),
            delta: 0.025,
            delta_prime: 0.01,
            mode: EvalMode::Exact,
            train_first: TrainConfig::finite(),
            train_rest: TrainConfig::finite(),
            seed: 5,
        };
        let out = run_recursive(&data, Some(&test), &pi0, &cfg)?;
        let last = out.trace.steps.last().unwrap();
        let risk = setup.true_gibbs_risk(out.posteriors.last().unwrap())?;
        println!(
            "rpb T={steps},,{:.4},{:.4},{risk:.4}",
            last.test01.unwrap_or(f64::NAN),
            out.trace.final_bound()
        );
    }
    Ok(())
}
