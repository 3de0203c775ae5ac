//! Monte Carlo coverage of the bounds on problems with known truth, plus a
//! deliberately broken bound that the harness must flag.
//!
//! cargo run --release --example coverage -- [trials]

use rpb::concentration::DiscreteSupport;
use rpb::hypotheses::train::TrainConfig;
use rpb::recursion::GammaPolicy;
use rpb::validate::{
    coverage_kl, coverage_pb_kl, coverage_recursive, coverage_split_kl, BoundVariant, CoverageReport,
    ThresholdSetup,
};

fn main() -> rpb::Result<()> {
    let trials: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(500);
    let support = DiscreteSupport::new(vec![-0.5, 0.0, 0.5, 1.0])?;
    let weights = [0.1, 0.4, 0.4, 0.1];
    let setup = ThresholdSetup::default();
    let train = TrainConfig { epochs: 30, ..TrainConfig::finite() };

    let reports = [
        coverage_kl(0.2, 100, 0.05, trials, 1)?,
        coverage_split_kl(&support, &weights, 100, 0.05, trials, 2, BoundVariant::Correct)?,
        coverage_split_kl(&support, &weights, 100, 0.05, trials, 2, BoundVariant::NegativeControl)?,
        coverage_pb_kl(&setup, 500, 0.05, trials / 5, 3, &train)?,
        coverage_recursive(&setup, 1000, 4, 0.025, GammaPolicy::Fixed(0.5), trials / 5, 4, &train)?,
    ];
    println!("{}", CoverageReport::CSV_HEADER);
    for r in &reports {
        println!("{}", r.csv_line());
    }
    Ok(())
}
