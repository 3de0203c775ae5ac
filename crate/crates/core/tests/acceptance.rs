//! One pass/fail line per acceptance criterion.
//!
//! The MNIST checks read the IDX files from `RPB_MNIST_DIR`, falling back to
//! `<workspace>/data/mnist`; without them those two lines report SKIP.

use std::path::PathBuf;
use std::time::Instant;

use ndarray::{array, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rpb::baselines::{run_baseline, BaselineConfig, BaselineMethod};
use rpb::concentration::{bern_kl, binarify, kl_inv_upper, reconstruct, DiscreteSupport};
use rpb::data::{find_idx_pair, load_idx, Dataset};
use rpb::error::IdxError;
use rpb::hypotheses::train::{complexity_penalty, network_objective, ExcessTarget, TrainConfig};
use rpb::hypotheses::{Architecture, EvalMode, GaussianNetworkDistribution, HypothesisDistribution, SurrogateConfig};
use rpb::pacbayes::{mcallester_relaxed, pb_kl_upper, BoundInputs};
use rpb::recursion::{geometric_split, run_recursive, BoundTrace, GammaPolicy, RecursionConfig};
use rpb::validate::{coverage_recursive, coverage_split_kl, BoundVariant, ThresholdSetup};
use rpb::Error;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn kl_inverse() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut within, mut float_limited, mut bad) = (0usize, 0usize, Vec::new());
    for _ in 0..10_000 {
        let p: f64 = rng.random();
        let eps: f64 = 10f64.powf(rng.random_range(-6.0..1.0));
        let q = kl_inv_upper(p, eps).unwrap();
        let gap = (bern_kl(p, q) - eps).abs();
        if gap <= 1e-9 {
            within += 1;
        } else if bern_kl(p, q) <= eps && bern_kl(p, q.next_up()) > eps {
            // Adjacent floats straddle eps: no f64 gets closer.
            float_limited += 1;
        } else {
            bad.push((p, eps, gap));
        }
    }
    let mut boundary = 0.0f64;
    for _ in 0..1000 {
        let eps: f64 = rng.random_range(1e-6..5.0);
        boundary = boundary.max((kl_inv_upper(0.0, eps).unwrap() - (1.0 - (-eps).exp())).abs());
        boundary = boundary.max((kl_inv_upper(1.0, eps).unwrap() - 1.0).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        bad.is_empty() && boundary <= 1e-12 && secs < 5.0,
        format!(
            "{within} pairs within 1e-9, {float_limited} at f64 resolution, {} off; boundary error {boundary:.1e}; {secs:.2}s",
            bad.len()
        ),
    )
}

fn pinsker() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = f64::INFINITY;
    for _ in 0..10_000 {
        let n = rng.random_range(1..100_000);
        let b = BoundInputs::new(rng.random(), rng.random_range(0.0..500.0), n).unwrap();
        let delta = rng.random_range(1e-6..0.99);
        let f = rng.random_range(1..50);
        let diff = mcallester_relaxed(&b, delta, f).unwrap() - pb_kl_upper(&b, delta, f).unwrap();
        worst = worst.min(diff);
    }
    verdict(worst >= 0.0, format!("min(mcallester − pb-kl) = {worst:.3e} over 10^4 tuples"))
}

fn round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut failures = 0;
    let mut checked = 0;
    for _ in 0..1000 {
        let k = rng.random_range(1..10);
        let mut points: Vec<f64> = (0..=k).map(|_| rng.random_range(-5.0..5.0)).collect();
        points.sort_by(f64::total_cmp);
        points.dedup();
        let support = DiscreteSupport::new(points.clone()).unwrap();
        for &z in &points {
            checked += 1;
            if reconstruct(&binarify(z, &support).unwrap(), &support).unwrap() != z {
                failures += 1;
            }
        }
    }
    verdict(failures == 0, format!("{checked} support points, {failures} mismatches"))
}

fn split_kl_coverage() -> Outcome {
    let start = Instant::now();
    let support = DiscreteSupport::new(vec![-0.5, 0.0, 0.5, 1.0]).unwrap();
    let r = coverage_split_kl(&support, &[0.1, 0.4, 0.4, 0.1], 100, 0.05, 10_000, 4, BoundVariant::Correct).unwrap();
    let rate = r.violations as f64 / r.trials as f64;
    let secs = start.elapsed().as_secs_f64();
    verdict(
        rate <= 0.05 && secs < 30.0,
        format!("violation rate {rate} over {} trials; {secs:.1}s", r.trials),
    )
}

fn recursive_coverage() -> Outcome {
    let start = Instant::now();
    let setup = ThresholdSetup::default();
    let r = coverage_recursive(&setup, 1000, 4, 0.025, GammaPolicy::Fixed(0.5), 1000, 5, &TrainConfig::finite())
        .unwrap();
    let secs = start.elapsed().as_secs_f64();
    verdict(
        r.coverage >= 0.95 && secs < 600.0,
        format!(
            "coverage {} over {} trials, mean slack {:.4}; {secs:.1}s",
            r.coverage, r.trials, r.mean_gap
        ),
    )
}

fn recursion_config(steps: usize, gamma: GammaPolicy, mode: EvalMode, seed: u64) -> RecursionConfig {
    RecursionConfig {
        steps,
        gamma,
        delta: 0.025,
        delta_prime: 0.01,
        mode,
        train_first: TrainConfig::finite(),
        train_rest: TrainConfig::finite(),
        seed,
    }
}

fn recursion_identity(extra: &[BoundTrace]) -> Outcome {
    let setup = ThresholdSetup::default();
    let pi0 = setup.uniform_prior().unwrap();
    let mut traces: Vec<BoundTrace> = extra.to_vec();
    let mut seed = 0;
    for steps in [2, 3, 4, 6] {
        for mode in [EvalMode::Exact, EvalMode::Sampled] {
            for gamma in [GammaPolicy::Fixed(0.5), GammaPolicy::Grid(vec![0.2, 0.5, 0.8])] {
                seed += 1;
                let data = setup.sample(1500, seed).unwrap();
                let cfg = recursion_config(steps, gamma, mode, seed);
                traces.push(run_recursive(&data, None, &pi0, &cfg).unwrap().trace);
            }
        }
    }
    let worst = traces.iter().map(BoundTrace::identity_gap).fold(0.0, f64::max);
    verdict(worst <= 1e-12, format!("max |B_t − E_t − γ·B_(t−1)| = {worst:.1e} over {} runs", traces.len()))
}

fn geometric_splits() -> Outcome {
    let published: [(usize, Vec<usize>); 4] = [
        (2, vec![30000, 30000]),
        (4, vec![7500, 7500, 15000, 30000]),
        (6, vec![1875, 1875, 3750, 7500, 15000, 30000]),
        (8, vec![469, 469, 937, 1875, 3750, 7500, 15000, 30000]),
    ];
    let mismatched: Vec<usize> = published
        .iter()
        .filter(|(t, sizes)| geometric_split(60_000, *t).unwrap().chunk_sizes != *sizes)
        .map(|(t, _)| *t)
        .collect();
    verdict(mismatched.is_empty(), format!("T ∈ {{2,4,6,8}}; mismatches at {mismatched:?}"))
}

/// Central differences with h = 1e-5 on an O(1) objective carry ~1e-11 of
/// round-off, so denominators are floored at 1e-6.
fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let surrogate = SurrogateConfig::default();
    let support = DiscreteSupport::new(vec![-0.5, 0.0, 0.5, 1.0]).unwrap();
    let (mut worst, mut params_checked, mut nets) = (0.0f64, 0usize, 0usize);
    for trial in 0..40 {
        let (d, h) = (rng.random_range(2..6), rng.random_range(1..6));
        let arch = Architecture::new(vec![d, h, 2]).unwrap();
        if arch.num_params() > 50 {
            continue;
        }
        nets += 1;
        let prior = GaussianNetworkDistribution::random_prior(arch, 0.1, &mut rng).unwrap();
        let mut post = prior.clone();
        for (m, s) in post.mean.iter_mut().zip(post.log_sigma.iter_mut()) {
            *m += rng.random_range(-0.5..0.5);
            *s += rng.random_range(-0.3..0.3);
        }
        let rows = 6;
        let x = Array2::from_shape_fn((rows, d), |_| rng.random_range(-1.0..1.0));
        let y: Vec<usize> = (0..rows).map(|_| rng.random_range(0..2)).collect();
        let refs: Vec<u8> = (0..rows).map(|_| rng.random_range(0..2)).collect();
        let noise: Vec<f64> = (0..post.num_params()).map(|_| rng.random_range(-1.5..1.5)).collect();
        let penalty = complexity_penalty(500, 0.025, 4, if trial % 2 == 0 { 1.0 } else { 1.5 });
        let excess = ExcessTarget { ref_losses: &refs, scale: 0.5, support: &support };
        for target in [None, Some(&excess)] {
            let objective = |p: &GaussianNetworkDistribution| {
                network_objective(p, &prior, &x, &y, target, &penalty, &noise, &surrogate).unwrap()
            };
            let (_, gm, gs) = objective(&post);
            let step = 1e-5;
            for i in 0..post.num_params() {
                for (which, analytic) in [(0, gm[i]), (1, gs[i])] {
                    let (mut up, mut dn) = (post.clone(), post.clone());
                    let (u, v) = if which == 0 {
                        (&mut up.mean[i], &mut dn.mean[i])
                    } else {
                        (&mut up.log_sigma[i], &mut dn.log_sigma[i])
                    };
                    *u += step;
                    *v -= step;
                    let fd = (objective(&up).0 - objective(&dn).0) / (2.0 * step);
                    worst = worst.max(rel_err(analytic, fd));
                    params_checked += 1;
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst <= 1e-4 && secs < 60.0,
        format!("{nets} nets, {params_checked} partials, max relative error {worst:.2e} (denominator floor 1e-6); {secs:.1}s"),
    )
}

fn mnist_dir() -> PathBuf {
    std::env::var_os("RPB_MNIST_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"))
}

fn desk_trend(traces: &mut Vec<BoundTrace>) -> Outcome {
    let dir = mnist_dir();
    let (Ok((img, lab)), Ok((timg, tlab))) = (find_idx_pair(&dir, "train"), find_idx_pair(&dir, "t10k")) else {
        return Outcome::Skip(format!("no MNIST files in {}", dir.display()));
    };
    let start = Instant::now();
    let data = load_idx(img, lab).unwrap().stratified_subsample(10_000, 1).unwrap();
    let test = load_idx(timg, tlab).unwrap().stratified_subsample(2000, 1).unwrap();
    let arch = Architecture::new(vec![data.dim(), 100, data.num_classes]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let pi0 =
        HypothesisDistribution::Network(GaussianNetworkDistribution::random_prior(arch, 0.03, &mut rng).unwrap());
    let cfg = RecursionConfig {
        train_first: TrainConfig::desk(),
        train_rest: TrainConfig::desk(),
        ..recursion_config(4, GammaPolicy::Fixed(0.5), EvalMode::Sampled, 1)
    };
    let out = run_recursive(&data, Some(&test), &pi0, &cfg).unwrap();
    let bcfg = BaselineConfig {
        delta: 0.025,
        delta_prime: 0.01,
        mode: EvalMode::Sampled,
        train_prior: TrainConfig::desk(),
        train_posterior: TrainConfig::desk(),
        seed: 1,
    };
    let unf = run_baseline(BaselineMethod::Uninformed, &data, Some(&test), &pi0, &bcfg).unwrap();
    let b: Vec<f64> = out.trace.steps.iter().map(|s| s.b_t).collect();
    let decreasing = b.windows(2).all(|w| w[1] < w[0]);
    let last = *b.last().unwrap();
    let test01 = out.trace.steps.last().and_then(|s| s.test01).unwrap_or(f64::NAN);
    let secs = start.elapsed().as_secs_f64();
    traces.push(out.trace);
    let shown: Vec<String> = b.iter().map(|v| format!("{v:.4}")).collect();
    verdict(
        decreasing && last < 0.9 && last < unf.bound && secs < 1800.0,
        format!(
            "B_t = [{}], uninformed {:.4}, final test error {:.4}; {secs:.0}s",
            shown.join(", "),
            unf.bound,
            test01
        ),
    )
}

fn excess_identity() -> Outcome {
    let setup = ThresholdSetup::default();
    let pi0 = setup.uniform_prior().unwrap();
    let mut worst = 0.0f64;
    for seed in 0..10 {
        let data = setup.sample(800 + 37 * seed as usize, seed).unwrap();
        let cfg = BaselineConfig {
            delta: 0.025,
            delta_prime: 0.01,
            mode: EvalMode::Exact,
            train_prior: TrainConfig::finite(),
            train_posterior: TrainConfig::finite(),
            seed,
        };
        let r = run_baseline(BaselineMethod::InformedExcess, &data, None, &pi0, &cfg).unwrap();
        let e = r.excess.unwrap();
        worst = worst.max((r.empirical_loss - (e.empirical_excess + e.h_star_empirical)).abs());
    }
    verdict(worst <= 1e-12, format!("max |E_ρ[L̂] − E_ρ[Δ̂] − L̂(h*)| = {worst:.1e} over 10 runs"))
}

fn write_bytes(dir: &std::path::Path, name: &str, bytes: &[u8]) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, bytes).unwrap();
    p
}

fn idx_loader() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let ds = Dataset::new(array![[0.0f32, 1.0], [0.5, 0.25]], vec![1, 0], 2, "fixture").unwrap();
    let (img, lab) = (tmp.path().join("img"), tmp.path().join("lab"));
    rpb::data::write_idx(&ds, &img, &lab).unwrap();
    let good_img = std::fs::read(&img).unwrap();
    let good_lab = std::fs::read(&lab).unwrap();

    let mut bad_magic = good_img.clone();
    bad_magic[3] = 0x01;
    let bad_magic = write_bytes(tmp.path(), "bad_magic", &bad_magic);
    let truncated = write_bytes(tmp.path(), "truncated", &good_img[..good_img.len() - 1]);
    let mut one_label = good_lab[..9].to_vec();
    one_label[7] = 1;
    let one_label = write_bytes(tmp.path(), "one_label", &one_label);
    let missing = tmp.path().join("missing");

    let fixtures_ok = matches!(load_idx(&bad_magic, &lab), Err(Error::Idx(IdxError::BadMagic { .. })))
        && matches!(load_idx(&lab, &lab), Err(Error::Idx(IdxError::BadMagic { .. })))
        && matches!(load_idx(&truncated, &lab), Err(Error::Idx(IdxError::Truncated { .. })))
        && matches!(load_idx(&img, &one_label), Err(Error::Idx(IdxError::CountMismatch { .. })))
        && matches!(load_idx(&missing, &lab), Err(Error::Idx(IdxError::Io { .. })))
        && load_idx(&img, &lab).is_ok();

    let dir = mnist_dir();
    let Ok((img, lab)) = find_idx_pair(&dir, "train") else {
        return Outcome::Skip(format!(
            "corrupted fixtures {}; no MNIST files in {}",
            if fixtures_ok { "rejected correctly" } else { "NOT rejected correctly" },
            dir.display()
        ));
    };
    let head = std::fs::read(&img).unwrap();
    let magic_ok = head.starts_with(&[0x1f, 0x8b]) || u32::from_be_bytes(head[..4].try_into().unwrap()) == 2051;
    let lab_head = std::fs::read(&lab).unwrap();
    let lab_magic_ok =
        lab_head.starts_with(&[0x1f, 0x8b]) || u32::from_be_bytes(lab_head[..4].try_into().unwrap()) == 2049;
    let mnist = load_idx(img, lab).unwrap();
    let ok = fixtures_ok
        && magic_ok
        && lab_magic_ok
        && mnist.len() == 60_000
        && mnist.image_shape == Some((28, 28))
        && mnist.dim() == 784
        && mnist.num_classes == 10;
    verdict(
        ok,
        format!(
            "{} rows, shape {:?}, {} classes; corrupted fixtures {}",
            mnist.len(),
            mnist.image_shape,
            mnist.num_classes,
            if fixtures_ok { "rejected with distinct errors" } else { "NOT rejected correctly" }
        ),
    )
}

fn main() {
    let mut mnist_traces = Vec::new();
    let trend = desk_trend(&mut mnist_traces);
    let results = vec![
        ("kl-inverse correctness", kl_inverse()),
        ("Pinsker domination", pinsker()),
        ("binarification round trip", round_trip()),
        ("split-kl coverage", split_kl_coverage()),
        ("recursive bound coverage", recursive_coverage()),
        ("recursion identity", recursion_identity(&mnist_traces)),
        ("geometric split reproduction", geometric_splits()),
        ("gradient check", gradient_check()),
        ("desk-scale MNIST trend", trend),
        ("baseline decomposition identity", excess_identity()),
        ("IDX loader", idx_loader()),
    ];
    let mut failed = 0;
    for (name, outcome) in &results {
        match outcome {
            Outcome::Pass(d) => println!("PASS  {name}: {d}"),
            Outcome::Fail(d) => {
                failed += 1;
                println!("FAIL  {name}: {d}");
            }
            Outcome::Skip(d) => println!("SKIP  {name}: {d}"),
        }
    }
    println!("{} criteria, {failed} failed", results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
