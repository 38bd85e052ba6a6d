use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use swd_cli::report::{BracketReport, DistanceReport};
use swd_core::inference::{RateTable, TestReport};
use swd_core::measures::{generate, DistributionSpec};
use swd_core::sliced::ProjectionPlan;
use tempfile::TempDir;

fn swd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_swd")).args(args).output().expect("spawn swd")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write_file(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn write_gaussian(dir: &TempDir, name: &str, mean: Vec<f64>, n: usize, seed: u64) -> PathBuf {
    let m = generate(&DistributionSpec::Gaussian { mean, variance: 1.0 }, n, seed).unwrap();
    let text: String = m
        .rows()
        .map(|r| r.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(",") + "\n")
        .collect();
    write_file(dir, name, &text)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn identical_files_are_at_distance_zero() {
    let dir = TempDir::new().unwrap();
    let x = write_file(&dir, "x.csv", "x,y\n0,1\n2,-1\n0.5,0.5\n");
    for kind in ["sw", "sw-hat", "sw-tilde", "msw1"] {
        let mut args = vec!["--seed", "1", "distance", "--kind", kind, s(&x), s(&x)];
        if kind != "msw1" {
            args.extend(["--projections", "50"]);
        }
        let out = swd(&args);
        assert!(out.status.success(), "{kind}: {}", String::from_utf8_lossy(&out.stderr));
        let r: DistanceReport = serde_json::from_str(&stdout(&out)).unwrap();
        assert_eq!(r.value, 0.0, "{kind}");
    }
    let line = write_file(&dir, "l.csv", "1\n2\n5\n");
    let out = swd(&["distance", "--kind", "w1d", s(&line), s(&line)]);
    let r: DistanceReport = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(r.value, 0.0);
}

#[test]
fn point_masses_give_euclidean_distance() {
    let dir = TempDir::new().unwrap();
    let x = write_file(&dir, "x.csv", "0,0\n");
    let y = write_file(&dir, "y.csv", "3,4\n");
    let out = swd(&["--seed", "3", "distance", "--kind", "msw1", s(&x), s(&y)]);
    assert!(out.status.success());
    let r: DistanceReport = serde_json::from_str(&stdout(&out)).unwrap();
    assert!((r.value - 5.0).abs() <= 1e-6, "{}", r.value);
    assert_eq!(r.argmax.unwrap().len(), 2);
}

#[test]
fn planned_budget_is_echoed() {
    let dir = TempDir::new().unwrap();
    let x = write_file(&dir, "x.csv", "0,0\n");
    let y = write_file(&dir, "y.csv", "3,4\n");
    let out = swd(&["--seed", "4", "distance", "--kind", "sw", "--plan", "epsilon=0.05,delta=0.05", s(&x), s(&y)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r: DistanceReport = serde_json::from_str(&stdout(&out)).unwrap();
    let plan = r.plan.unwrap();
    assert_eq!(r.directions.unwrap().count as u64, plan.n_required);
    let again = swd_core::sliced::plan_projections(plan.variant, 0.05, 0.05, r.plan_inputs.unwrap().conservative_params()).unwrap();
    assert_eq!(again.n_required, plan.n_required);
}

#[test]
fn plan_command_prints_budget() {
    let out = swd(&["plan", "--variant", "sw-pow", "--l", "1", "--d", "5", "--epsilon", "0.1", "--delta", "0.05"]);
    assert!(out.status.success());
    let plan: ProjectionPlan = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(plan.n_required, 185);
    let out = swd(&["plan", "--variant", "sw-pow", "--d", "5", "--epsilon", "0.1", "--delta", "0.05"]);
    assert_eq!(out.status.code(), Some(2));
    let out = swd(&["plan", "--variant", "nope", "--epsilon", "0.1", "--delta", "0.05"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn brackets_command_counts() {
    let out = swd(&["brackets", "--m", "1", "--epsilon", "0.5", "--list"]);
    assert!(out.status.success());
    let r: BracketReport = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(r.count, 8);
    assert_eq!(r.brackets.unwrap().len(), 8);
    assert!(r.gaps_within_epsilon);
    assert_eq!(r.max_gap, 0.5);
    let out = swd(&["brackets", "--m", "100", "--epsilon", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn test_command_exit_codes() {
    let dir = TempDir::new().unwrap();
    let x = write_gaussian(&dir, "x.csv", vec![0.0, 0.0], 150, 1);
    let y = write_gaussian(&dir, "y.csv", vec![2.0, 0.0], 150, 2);
    let out = swd(&["--seed", "5", "test", "--statistic", "sw1", s(&x), s(&x)]);
    assert_eq!(out.status.code(), Some(0));
    let r: TestReport = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(r.statistic_value, 0.0);
    for statistic in ["sw1", "msw1"] {
        let out = swd(&["--seed", "5", "test", "--statistic", statistic, "--boot-reps", "100", s(&x), s(&y)]);
        assert_eq!(out.status.code(), Some(3), "{statistic}");
        let r: TestReport = serde_json::from_str(&stdout(&out)).unwrap();
        assert!(r.statistic_value > r.critical_value);
    }
    let out = swd(&["--seed", "5", "test", "--statistic", "sw1", "--boot-reps", "50", s(&x), s(&y)]);
    assert_eq!(out.status.code(), Some(2));
    let out = swd(&["test", "--statistic", "sw1", s(&x), s(&y)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_input_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let bad = write_file(&dir, "bad.csv", "1,2\n3,oops\n");
    let good = write_file(&dir, "good.csv", "1,2\n");
    let line = write_file(&dir, "line.csv", "1\n");
    let out = swd(&["--seed", "1", "distance", "--kind", "sw", "--projections", "10", s(&bad), s(&good)]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2, column 2"), "{err}");
    let out = swd(&["--seed", "1", "distance", "--kind", "sw", "--projections", "10", s(&good), s(&line)]);
    assert_eq!(out.status.code(), Some(2));
    let out = swd(&["distance", "--kind", "bogus", s(&good), s(&good)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn point_mass_rates_are_flagged() {
    let dir = TempDir::new().unwrap();
    let point = write_file(&dir, "p.csv", "1,1\n");
    let out = swd(&[
        "--seed", "2", "rates", "--statistic", "sw1", "--dist", "points", "--points", s(&point),
        "--reference-size", "100", "--n-grid", "10,20,40", "--reps", "10",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("\"fitted_slope\":null"), "{text}");
    let table: RateTable = serde_json::from_str(&text).unwrap();
    assert!(table.degenerate);
    assert!(table.fitted_slope.is_nan());
    assert!(table.mean_distance.iter().all(|&v| v == 0.0));
}

#[test]
fn rates_report_round_trips() {
    let out = swd(&[
        "--seed", "9", "rates", "--statistic", "sw1", "--dim", "2", "--reference-size", "2000",
        "--n-grid", "50,100,200", "--reps", "10", "--projections", "20",
    ]);
    assert!(out.status.success());
    let table: RateTable = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(table.n_grid, vec![50, 100, 200]);
    assert!(table.mean_distance.iter().all(|&v| v > 0.0));
    assert!(table.fitted_slope < 0.0);
}

#[test]
fn limits_emit_csv_draws() {
    let dir = TempDir::new().unwrap();
    let out_path = dir.path().join("draws.csv");
    let out = swd(&[
        "--seed", "6", "--out", s(&out_path), "limits", "--dim", "2", "--reference-size", "500", "--reps", "50",
        "--empirical-n", "100", "--sphere-resolution", "8",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&out_path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("limit,empirical"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 50);
    assert!(rows.iter().all(|r| r.len() == 2 && r[0] >= 0.0 && r[1] >= 0.0));
    let out = swd(&["--seed", "6", "limits", "--kind", "vs-nu", "--dim", "2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn reports_are_reproducible_and_thread_independent() {
    let dir = TempDir::new().unwrap();
    let x = write_gaussian(&dir, "x.csv", vec![0.0, 0.0, 0.0], 80, 3);
    let y = write_gaussian(&dir, "y.csv", vec![0.5, 0.0, 0.0], 90, 4);
    let runs = [
        vec!["--seed", "7", "--threads", "1", "distance", "--kind", "sw", "--projections", "200", s(&x), s(&y)],
        vec!["--seed", "7", "--threads", "3", "distance", "--kind", "sw", "--projections", "200", s(&x), s(&y)],
    ];
    let a = stdout(&swd(&runs[0]));
    let b = stdout(&swd(&runs[1]));
    assert!(!a.is_empty());
    assert_eq!(a, b);
    let t1 = stdout(&swd(&["--seed", "8", "--threads", "1", "test", "--statistic", "msw1", "--boot-reps", "100", s(&x), s(&y)]));
    let t2 = stdout(&swd(&["--seed", "8", "--threads", "2", "test", "--statistic", "msw1", "--boot-reps", "100", s(&x), s(&y)]));
    assert_eq!(t1, t2);
    let r: TestReport = serde_json::from_str(&t1).unwrap();
    assert_eq!(r.bootstrap_draws.len(), 100);
}

#[test]
fn bound_commands() {
    let out = swd(&["bound", "concentration", "--statistic", "msw1", "--n", "1000", "--t", "0.5", "--sigma2", "1", "--d", "2"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let expected = 2.0 * (-250.0f64 / 64.0).exp();
    assert!((v["bound"].as_f64().unwrap() - expected).abs() <= 1e-12 * expected);
    let out = swd(&["bound", "entropy", "--d", "2", "--delta", "1.5", "--m2", "1", "--m2pd", "1"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["integral"]["kind"], "infinite");
}
