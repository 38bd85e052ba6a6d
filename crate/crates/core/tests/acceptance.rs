//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.
//!
//! Runs as a plain binary (`harness = false`) so the lines always reach stdout.

mod common;

use std::time::{Duration, Instant};

use rand::Rng;
use swd_core::brackets::{build_brackets, sphere_covering_bound};
use swd_core::inference::{concentration_bound, rate_experiment, two_sample_test, Decision, EstimatorConfig, StatisticKind};
use swd_core::limits::{
    empirical_rootn_from_reference, ks_distance, simulate_limit_one_sample, CylinderGrid, DirectionSource, GridConfig,
    RootnStatistic,
};
use swd_core::maxsliced::{grid_gap_bound, msw1, msw1_grid, MaxSlicedConfig, PiecewiseLinear};
use swd_core::measures::{generate, DistributionSpec};
use swd_core::ot1d::{w1_1d, wp_1d, Sorted1D};
use swd_core::projections::{grid_sphere, sample_gaussian_dirs, sample_sphere, GaussianScale};
use swd_core::sliced::{c_pd, estimate_plan_inputs, plan_projections, sw_p, sw_p_pow, sw_tilde_p_pow, PlanVariant};
use swd_core::EmpiricalMeasure;

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = (&'static str, Duration, fn() -> Outcome);

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(f64::MIN_POSITIVE) || a == b
}

fn cloud(rows: Vec<Vec<f64>>) -> EmpiricalMeasure {
    EmpiricalMeasure::from_rows(&rows).unwrap()
}

fn gaussian(d: usize, n: usize, seed: u64) -> EmpiricalMeasure {
    generate(&DistributionSpec::standard_gaussian(d), n, seed).unwrap()
}

fn shifted_gaussian(mean: Vec<f64>, n: usize, seed: u64) -> EmpiricalMeasure {
    generate(&DistributionSpec::Gaussian { mean, variance: 1.0 }, n, seed).unwrap()
}

fn exact_1d_oracle() -> Outcome {
    let mut rng = common::rng(1);
    let mut worst_wp: f64 = 0.0;
    let mut worst_w1: f64 = 0.0;
    let mut failures = 0;
    for case in 0..500 {
        let n = 1 + case % 6;
        let p = [1.0, 1.5, 2.0, 3.0, 4.5][case % 5];
        let a: Vec<f64> = (0..n).map(|_| 10.0 * rng.random::<f64>() - 5.0).collect();
        let b: Vec<f64> = (0..n).map(|_| 10.0 * rng.random::<f64>() - 5.0).collect();
        let sa = Sorted1D::from_uniform(a.clone());
        let sb = Sorted1D::from_uniform(b.clone());
        let oracle = common::matching_cost_1d(&a, &b, p).powf(1.0 / p);
        let got = wp_1d(&sa, &sb, p).unwrap();
        worst_wp = worst_wp.max((got - oracle).abs() / oracle);
        let w1 = w1_1d(&sa, &sb);
        let w1q = wp_1d(&sa, &sb, 1.0).unwrap();
        worst_w1 = worst_w1.max((w1 - w1q).abs() / w1q);
        if !rel_close(got, oracle, 1e-9) || !rel_close(w1, w1q, 1e-10) {
            failures += 1;
        }
    }
    outcome(
        failures == 0,
        format!("500 instances, worst rel err wp {worst_wp:.2e}, w1 vs wp(1) {worst_w1:.2e}"),
    )
}

fn planner_coverage() -> Outcome {
    let x = cloud(vec![vec![0.0, 0.0]]);
    let y = cloud(vec![vec![3.0, 4.0]]);
    let reference = sw_p_pow(&x, &y, 1.0, &grid_sphere(2, 200_000).unwrap()).unwrap().value;
    let inputs = estimate_plan_inputs(&x, &y, 1.0, &sample_sphere(2, 16, 0).unwrap()).unwrap();
    let (epsilon, delta) = (0.05, 0.1);
    let plan = plan_projections(PlanVariant::SwPow, epsilon, delta, inputs.conservative_params()).unwrap();
    let runs = 200;
    let mut failures = 0;
    for r in 0..runs {
        let dirs = sample_sphere(2, plan.n_required as usize, 1000 + r).unwrap();
        let est = sw_p_pow(&x, &y, 1.0, &dirs).unwrap().value;
        if (est - reference).abs() > epsilon {
            failures += 1;
        }
    }
    let fraction = failures as f64 / runs as f64;
    let limit = 0.1 + 3.0 * (0.1f64 * 0.9 / 200.0).sqrt();
    outcome(
        fraction <= limit,
        format!("{} projections per run, failure fraction {fraction:.3} <= {limit:.3}", plan.n_required),
    )
}

fn gaussian_slicing_identity() -> Outcome {
    let worst = (1..=50).map(|d| (c_pd(2.0, d) - 1.0).abs()).fold(0.0, f64::max);
    let mut ok = worst <= 1e-12;
    let mut details = vec![format!("max |c(2,d) - 1| = {worst:.1e}")];
    for (case, d) in [2usize, 3, 5].into_iter().enumerate() {
        let mu = gaussian(d, 400, 10 + case as u64);
        let mut mean = vec![0.0; d];
        mean[0] = 1.0;
        let nu = generate(&DistributionSpec::Gaussian { mean, variance: 2.0 }, 300, 20 + case as u64).unwrap();
        let u = sw_p_pow(&mu, &nu, 2.0, &sample_sphere(d, 10_000, 30 + case as u64).unwrap()).unwrap();
        let g = sample_gaussian_dirs(d, 10_000, GaussianScale::InverseDim, 40 + case as u64).unwrap();
        let t = sw_tilde_p_pow(&mu, &nu, 2.0, &g).unwrap();
        let se = (u.std_error.powi(2) + t.std_error.powi(2)).sqrt();
        let z = (u.value - t.value).abs() / se;
        ok &= z <= 4.0;
        details.push(format!("d={d}: |diff|/se {z:.2}"));
    }
    outcome(ok, details.join(", "))
}

fn max_sliced_correctness() -> Outcome {
    let mut worst_excess: f64 = 0.0;
    let mut failures = 0;
    let cfg = MaxSlicedConfig::default();
    for i in 0..50u64 {
        let a = gaussian(2, 50, 2 * i);
        let b = match i % 3 {
            0 => generate(&DistributionSpec::UniformCube { dim: 2, side: 3.0 }, 50, 2 * i + 1).unwrap(),
            1 => shifted_gaussian(vec![0.5, -0.3], 50, 2 * i + 1),
            _ => gaussian(2, 50, 2 * i + 1).scaled(1.5),
        };
        let grid = msw1_grid(&a, &b, 2000).unwrap().value;
        let gap = grid_gap_bound(&a, &b, 2000).unwrap().unwrap();
        let got = msw1(&a, &b, &MaxSlicedConfig { seed: i, ..cfg }).unwrap().value;
        let err = (got - grid).abs();
        worst_excess = worst_excess.max(err - gap);
        if err > 1e-3 + gap {
            failures += 1;
        }
    }
    let m = [1.2f64, -0.9];
    let norm = (m[0] * m[0] + m[1] * m[1]).sqrt();
    let shift = msw1(&gaussian(2, 5000, 101), &shifted_gaussian(m.to_vec(), 5000, 102), &cfg).unwrap().value;
    let shift_ok = (shift - norm).abs() <= 0.05;
    outcome(
        failures == 0 && shift_ok,
        format!(
            "{failures}/50 grid disagreements (worst err - gap {worst_excess:.1e}); shift fixture {shift:.4} vs {norm:.4}"
        ),
    )
}

fn sandwich() -> Outcome {
    let mut rng = common::rng(5);
    let mut violations = 0;
    let mut count = 0;
    for case in 0..300u64 {
        let n = 1 + (case % 6) as usize;
        let d = [2, 3, 5][(case % 3) as usize];
        let a = common::random_cloud(&mut rng, n, d, 3.0);
        let b = common::random_cloud(&mut rng, n, d, 3.0);
        let exact = common::matching_cost(&a, &b, 1.0);
        let (ma, mb) = (cloud(a), cloud(b));
        let sw = sw_p(&ma, &mb, 1.0, &sample_sphere(d, 200, case).unwrap()).unwrap();
        let ms = msw1(&ma, &mb, &MaxSlicedConfig { seed: case, ..Default::default() }).unwrap().value;
        count += 1;
        if sw.value - 4.0 * sw.std_error > ms || ms > exact * (1.0 + 1e-12) + 1e-12 {
            violations += 1;
        }
    }
    outcome(violations == 0, format!("{violations} violations over {count} instances"))
}

fn rates() -> Outcome {
    let spec = DistributionSpec::standard_gaussian(3);
    let grid = [250, 500, 1000, 2000, 4000];
    let sw = rate_experiment(&spec, 100_000, &grid, 30, &EstimatorConfig::Sw1 { projections: 100, direction_seed: 7 }, 61).unwrap();
    let cfg = MaxSlicedConfig { restarts: 3, max_iters: 50, tol: 1e-7, seed: 3 };
    let ms = rate_experiment(&spec, 20_000, &grid, 30, &EstimatorConfig::Msw1(cfg), 62).unwrap();
    let ok = |s: f64| (-0.6..=-0.4).contains(&s);
    outcome(
        ok(sw.fitted_slope) && ok(ms.fitted_slope),
        format!(
            "sw1 slope {:.3} (se {:.3}), msw1 slope {:.3} (se {:.3})",
            sw.fitted_slope, sw.slope_stderr, ms.fitted_slope, ms.slope_stderr
        ),
    )
}

fn limit_law() -> Outcome {
    let reference = gaussian(2, 100_000, 71);
    let grid = CylinderGrid::build(&[&reference], &GridConfig::for_dim(2)).unwrap();
    let limit = simulate_limit_one_sample(&reference, &grid, 2000, 72).unwrap();
    let dirs = DirectionSource::Fixed(grid_sphere(2, GridConfig::for_dim(2).sphere_resolution).unwrap());
    let emp = empirical_rootn_from_reference(&reference, RootnStatistic::Sw1OneSample, 10_000, 2000, &dirs, 73).unwrap();
    let ks2 = ks_distance(&limit.draws, &emp.draws).unwrap();

    let ref1 = gaussian(1, 100_000, 74);
    let grid1 = CylinderGrid::build(&[&ref1], &GridConfig::for_dim(1)).unwrap();
    let limit1 = simulate_limit_one_sample(&ref1, &grid1, 2000, 75).unwrap();
    let sorted_ref = Sorted1D::from_uniform(ref1.points().to_vec());
    let n = 10_000;
    let mut rng = common::rng(76);
    let classical: Vec<f64> = (0..2000)
        .map(|_| {
            let sample: Vec<f64> = (0..n).map(|_| ref1.points()[rng.random_range(0..ref1.len())]).collect();
            (n as f64).sqrt() * w1_1d(&Sorted1D::from_uniform(sample), &sorted_ref)
        })
        .collect();
    let ks1 = ks_distance(&limit1.draws, &classical).unwrap();
    outcome(
        ks2 <= 0.1 && ks1 <= 0.05,
        format!(
            "d=2 KS {ks2:.4} (means {:.4} vs {:.4}), d=1 KS {ks1:.4}",
            limit.mean(),
            emp.mean()
        ),
    )
}

fn bootstrap_level_power() -> Outcome {
    let alpha = 0.05;
    let boot = 100;
    let estimators = [
        EstimatorConfig::Sw1 { projections: 50, direction_seed: 5 },
        EstimatorConfig::Msw1(MaxSlicedConfig { restarts: 3, max_iters: 50, tol: 1e-7, seed: 5 }),
    ];
    let mut ok = true;
    let mut details = Vec::new();
    for est in estimators {
        let null_runs = 500;
        let mut rejects = 0;
        for r in 0..null_runs {
            let x = gaussian(2, 200, 10_000 + 2 * r);
            let y = gaussian(2, 200, 10_001 + 2 * r);
            if two_sample_test(&x, &y, alpha, boot, &est, r).unwrap().decision == Decision::Reject {
                rejects += 1;
            }
        }
        let level = rejects as f64 / null_runs as f64;
        let alt_runs = 200;
        let mut rejects = 0;
        for r in 0..alt_runs {
            let x = gaussian(2, 200, 50_000 + 2 * r);
            let y = shifted_gaussian(vec![1.0, 0.0], 200, 50_001 + 2 * r);
            if two_sample_test(&x, &y, alpha, boot, &est, r).unwrap().decision == Decision::Reject {
                rejects += 1;
            }
        }
        let power = rejects as f64 / alt_runs as f64;
        ok &= level <= 0.08 && power >= 0.9;
        let name = match est.kind() {
            StatisticKind::Sw1 => "sw1",
            StatisticKind::Msw1 => "msw1",
        };
        details.push(format!("{name}: level {level:.3}, power {power:.3}"));
    }
    outcome(ok, details.join("; "))
}

fn brackets() -> Outcome {
    let mut ok = true;
    let mut details = Vec::new();
    for (m, eps) in [(1.0, 1.0), (1.0, 0.5), (2.0, 0.5)] {
        let set = build_brackets(m, eps).unwrap();
        let expected = 1u64 << ((2.0 * m / eps).ceil() as u32 - 1);
        let all = set.brackets().unwrap();
        let gaps_ok = all.iter().all(|b| b.gap() <= eps + 1e-12);
        ok &= set.count() == expected && all.len() as u64 == expected && gaps_ok;
        let mut rng = common::rng((m * 10.0 + eps * 100.0) as u64);
        let mut contained = 0;
        for i in 0..1000 {
            let (xs, ys) = common::random_zigzag(&mut rng, m, 7 + i % 50, i % 2 == 0);
            if set.membership(&PiecewiseLinear::new(xs, ys).unwrap()).is_ok() {
                contained += 1;
            }
        }
        ok &= contained == 1000;
        details.push(format!("(M={m}, eps={eps}): {} brackets, {contained}/1000 contained", set.count()));
    }
    ok &= sphere_covering_bound(2, 4.0).unwrap() == 4;
    outcome(ok, details.join("; "))
}

fn concentration() -> Outcome {
    let v = concentration_bound(StatisticKind::Msw1, 1000, 0.5, 1.0, 2).unwrap();
    let expected = 2.0 * (-250.0f64 / 64.0).exp();
    let mut ok = rel_close(v, expected, 1e-6);
    let s = concentration_bound(StatisticKind::Sw1, 1000, 0.5, 1.0, 2).unwrap();
    ok &= rel_close(s, 2.0 * (-62.5f64).exp(), 1e-6);
    ok &= concentration_bound(StatisticKind::Msw1, 7, 0.0, 3.0, 4).unwrap() == 2.0;
    let mut violations = 0;
    for kind in [StatisticKind::Msw1, StatisticKind::Sw1] {
        for n in [1usize, 10, 100, 1000] {
            for t in [0.0, 0.1, 0.5, 1.0, 2.0] {
                for s2 in [0.1, 1.0, 4.0] {
                    for d in [1usize, 2, 5, 10] {
                        let b = concentration_bound(kind, n, t, s2, d).unwrap();
                        violations += (concentration_bound(kind, n, t + 0.1, s2, d).unwrap() > b) as usize;
                        violations += (concentration_bound(kind, n * 2, t, s2, d).unwrap() > b) as usize;
                        violations += (concentration_bound(kind, n, t, s2 * 2.0, d).unwrap() < b) as usize;
                        violations += (concentration_bound(kind, n, t, s2, d + 1).unwrap() < b) as usize;
                    }
                }
            }
        }
    }
    ok &= violations == 0;
    outcome(ok, format!("msw1 bound {v:.6e} vs {expected:.6e}; {violations} monotonicity violations"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("1 exact 1D OT oracle", Duration::from_secs(10), exact_1d_oracle),
        ("2 planner coverage", Duration::from_secs(120), planner_coverage),
        ("3 Gaussian slicing identity", Duration::from_secs(60), gaussian_slicing_identity),
        ("4 max-sliced correctness", Duration::from_secs(180), max_sliced_correctness),
        ("5 sandwich inequality", Duration::from_secs(600), sandwich),
        ("6 rate reproduction", Duration::from_secs(600), rates),
        ("7 limit-law agreement", Duration::from_secs(900), limit_law),
        ("8 bootstrap level and power", Duration::from_secs(1200), bootstrap_level_power),
        ("9 bracket construction", Duration::from_secs(30), brackets),
        ("10 concentration calculators", Duration::from_secs(1), concentration),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut all_pass = true;
    for (name, budget, run) in criteria {
        let id = name.split(' ').next().unwrap();
        if !only.is_empty() && !only.iter().any(|o| o == id) {
            continue;
        }
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let pass = result.pass && elapsed <= budget;
        all_pass &= pass;
        println!(
            "{} criterion {name}: {} [{:.1}s of {}s]",
            if pass { "PASS" } else { "FAIL" },
            result.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    if !all_pass {
        std::process::exit(1);
    }
}
