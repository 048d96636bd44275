use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use proptest::prelude::*;
use qtherm::sweep::fmt_value;
use qtherm::{parse_problem, parse_sweep, run_analyze, run_bloch_scan, run_sweep_p};

const CASE_STUDY: &str = r#"{
  "ensemble": [
    {"probability": 0.3, "state": {"bloch": {"theta": 0.0, "phi": 0.0}}},
    {"probability": 0.7, "state": {"bloch": {"theta": 1.5707963267948966, "phi": 0.0}}}
  ],
  "operation": {"name": "dephasing", "r": 0.7071067811865476}
}"#;

fn qtherm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qtherm")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn analyze_case_study() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "case.json", CASE_STUDY);
    let out = dir.path().join("report.json");
    let run = qtherm(&["analyze", s(&spec), "-o", s(&out)]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["units"], "kT");
    assert!((report["landauer_kT"].as_f64().unwrap() + 0.15).abs() < 0.005);
    assert_eq!(format!("{:.0e}", report["epsilon_lower_kT"].as_f64().unwrap()), "7e-4");
    assert_eq!(report["verdict"]["kind"], "irreversible_off_diagonal");
    assert!(report["verdict"]["symmetries"].is_array());
    assert!(report["warnings"].is_array());
}

#[test]
fn analyze_prints_to_stdout_without_output_path() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "case.json", CASE_STUDY);
    let run = qtherm(&["analyze", s(&spec)]);
    assert!(run.status.success());
    let report: serde_json::Value = serde_json::from_slice(&run.stdout).unwrap();
    assert!(report["total_lower_kT"].is_number());
}

#[test]
fn single_signal_is_reversible() {
    let spec = parse_problem(
        r#"{"ensemble": [{"probability": 1.0, "state": {"bloch": {"theta": 0.9, "phi": 0.4}}}],
            "operation": {"name": "dephasing", "r": 0.3}}"#,
    )
    .unwrap();
    let report = run_analyze(&spec).unwrap();
    assert_eq!(report.verdict.kind.name(), "reversible_via");
    assert_eq!(report.epsilon_lower_kt, 0.0);
}

#[test]
fn kraus_operation_input() {
    let spec = parse_problem(
        r#"{"ensemble": [
              {"probability": 0.5, "state": {"matrix": [[[1, 0], [0, 0]], [[0, 0], [0, 0]]]}},
              {"probability": 0.5, "state": {"matrix": [[[0, 0], [0, 0]], [[0, 0], [1, 0]]]}}],
            "operation": {"kraus": [[[[0, 0], [1, 0]], [[1, 0], [0, 0]]]]}}"#,
    )
    .unwrap();
    let report = run_analyze(&spec).unwrap();
    assert!(report.verdict.kind.is_reversible());
    assert!(report.landauer_kt.abs() < 1e-12);
}

#[test]
fn bad_probabilities_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(
        dir.path(),
        "bad.json",
        r#"{"ensemble": [
              {"probability": 0.4, "state": {"bloch": {"theta": 0, "phi": 0}}},
              {"probability": 0.5, "state": {"bloch": {"theta": 1, "phi": 0}}}],
            "operation": {"name": "dephasing", "r": 0.5}}"#,
    );
    let run = qtherm(&["analyze", s(&spec)]);
    assert_eq!(run.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&run.stderr).contains("probabilities must sum to 1"));
}

#[test]
fn malformed_field_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(
        dir.path(),
        "bad.json",
        r#"{"ensemble": [{"probability": 1.0, "state": {"bloch": {"theta": 0, "phi": 0}}}],
            "operation": {"name": "dephasing", "r": 0.5}, "scan": {"radius_stp": 0.1}}"#,
    );
    let run = qtherm(&["analyze", s(&spec)]);
    assert_eq!(run.status.code(), Some(2));
    let err = String::from_utf8_lossy(&run.stderr);
    assert!(err.contains("scan") && err.contains("radius_stp"), "{err}");
}

#[test]
fn missing_file_exit_2() {
    assert_eq!(qtherm(&["analyze", "/nonexistent/spec.json"]).status.code(), Some(2));
}

const SWEEP: &str = r#"{"v1": {"theta": 1.5707963267948966, "phi": 3.141592653589793},
  "v2": {"theta": 0.7853981633974483, "phi": 0.0},
  "p_grid": {"start": 0.0, "stop": 1.0, "steps": 41}}"#;

#[test]
fn sweep_csv_is_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "sweep.json", SWEEP);
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    assert!(qtherm(&["sweep-p", s(&spec), "-o", s(&a)]).status.success());
    let single = Command::new(env!("CARGO_BIN_EXE_qtherm"))
        .args(["sweep-p", s(&spec), "-o", s(&b)])
        .env("QTHERM_THREADS", "1")
        .output()
        .unwrap();
    assert!(single.status.success());
    let (x, y) = (fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(x, y);
    let text = String::from_utf8(x).unwrap();
    assert!(!text.contains('\r'));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "p,landauer_kT,epsilon_kT,total_kT,verdict");
    assert_eq!(lines.len(), 42);
}

#[test]
fn bad_thread_count_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "sweep.json", SWEEP);
    let out = Command::new(env!("CARGO_BIN_EXE_qtherm"))
        .args(["sweep-p", s(&spec), "-o", s(&dir.path().join("x.csv"))])
        .env("QTHERM_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bloch_scan_csv() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(
        dir.path(),
        "scan.json",
        r#"{"v1": {"theta": 0.7853981633974483, "phi": 0.0}, "p": 0.5,
            "bloch_grid": {"polar_steps": 8, "azimuth_steps": 8}}"#,
    );
    let out = dir.path().join("scan.csv");
    assert!(qtherm(&["bloch-scan", s(&spec), "-o", s(&out)]).status.success());
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "theta,phi,feasible,epsilon_kT");
    assert_eq!(lines.len(), 65);
    // Row index 2 * 8 is theta = pi / 4, the ring of the fixed input.
    for line in &lines[17..25] {
        assert_eq!(line.split(',').nth(2), Some("1"), "{line}");
    }
}

#[test]
fn sweep_requires_output_path() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "sweep.json", SWEEP);
    assert_eq!(qtherm(&["sweep-p", s(&spec)]).status.code(), Some(2));
}

#[test]
fn verify_default_seed_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("verify.json");
    let run = qtherm(&["verify", "-o", s(&out)]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(summary["all_pass"], true);
    assert!(summary["checks"].as_array().unwrap().iter().all(|c| c["pass"] == true));
}

#[test]
fn verify_passes_for_ten_seeds() {
    for seed in 10..20 {
        let s = qtherm::run_verify(seed, false);
        let failed: Vec<_> = s.checks.iter().filter(|c| !c.pass).map(|c| (c.name, c.failures.clone())).collect();
        assert!(failed.is_empty(), "seed {seed}: {failed:?}");
    }
}

#[test]
fn corrupted_verify_exits_1_and_still_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("verify.json");
    let run = qtherm(&["verify", "--seed", "3", "--corrupt", "-o", s(&out)]);
    assert_eq!(run.status.code(), Some(1));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(summary["all_pass"], false);
    let identity = summary["checks"].as_array().unwrap().iter().find(|c| c["name"] == "energy_identity").unwrap();
    assert_eq!(identity["pass"], false);
}

fn scan_spec(theta: f64, phi: f64, p: f64, polar: usize, azimuth: usize) -> qtherm::SweepSpec {
    parse_sweep(&format!(
        r#"{{"v1": {{"theta": {theta}, "phi": {phi}}}, "p": {p},
            "bloch_grid": {{"polar_steps": {polar}, "azimuth_steps": {azimuth}}}}}"#
    ))
    .unwrap()
}

#[test]
fn endpoint_panel_is_not_the_whole_sphere() {
    let rows = run_bloch_scan(&scan_spec(FRAC_PI_4, 0.0, 0.0, 12, 24)).unwrap();
    let feasible = rows.iter().filter(|r| r.point.is_reversible()).count();
    assert!(feasible > 0 && feasible < rows.len(), "{feasible} of {}", rows.len());
}

#[test]
fn feasible_region_rotates_with_the_fixed_input() {
    let azimuth = 24;
    let shift = 5;
    let phase = 2.0 * std::f64::consts::PI * shift as f64 / azimuth as f64;
    for p in [0.3, 0.5, 0.8] {
        let base = run_bloch_scan(&scan_spec(FRAC_PI_4, 0.0, p, 12, azimuth)).unwrap();
        let turned = run_bloch_scan(&scan_spec(FRAC_PI_4, phase, p, 12, azimuth)).unwrap();
        for (n, row) in base.iter().enumerate() {
            let (i, j) = (n / azimuth, n % azimuth);
            let moved = &turned[i * azimuth + (j + shift) % azimuth];
            assert_eq!(row.point.is_reversible(), moved.point.is_reversible(), "p {p} at ({i}, {j})");
            assert!((row.point.epsilon_kt - moved.point.epsilon_kt).abs() < 1e-9);
        }
    }
}

fn sweep_spec(v1: (f64, f64), v2: (f64, f64), p: f64) -> qtherm::SweepSpec {
    parse_sweep(&format!(
        r#"{{"v1": {{"theta": {}, "phi": {}}}, "v2": {{"theta": {}, "phi": {}}},
            "p_grid": {{"start": {p}, "stop": {p}, "steps": 1}}}}"#,
        v1.0, v1.1, v2.0, v2.1
    ))
    .unwrap()
}

fn problem_spec(v1: (f64, f64), v2: (f64, f64), p: f64) -> qtherm::ProblemSpec {
    parse_problem(&format!(
        r#"{{"ensemble": [
              {{"probability": {p}, "state": {{"bloch": {{"theta": {}, "phi": {}}}}}}},
              {{"probability": {}, "state": {{"bloch": {{"theta": {}, "phi": {}}}}}}}],
            "operation": {{"name": "dephasing", "r": 0.0}}}}"#,
        v1.0,
        v1.1,
        1.0 - p,
        v2.0,
        v2.1
    ))
    .unwrap()
}

#[test]
fn single_point_sweep_matches_analyze_for_reference_pairs() {
    let v2 = (FRAC_PI_4, 0.0);
    for v1 in [(FRAC_PI_2, 0.0), (FRAC_PI_2, FRAC_PI_2), (FRAC_PI_2, std::f64::consts::PI), (0.0, 0.0)] {
        for p in [0.0, 0.25, 0.5, 0.9] {
            let row = &run_sweep_p(&sweep_spec(v1, v2, p)).unwrap()[0];
            let rep = run_analyze(&problem_spec(v1, v2, p)).unwrap();
            assert_eq!(fmt_value(row.point.total_kt), fmt_value(rep.total_lower_kt));
            assert_eq!(fmt_value(row.point.epsilon_kt), fmt_value(rep.epsilon_lower_kt));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn analyze_equals_single_point_row(
        t1 in 0.0..std::f64::consts::PI, f1 in 0.0..std::f64::consts::TAU,
        t2 in 0.0..std::f64::consts::PI, f2 in 0.0..std::f64::consts::TAU,
        p in 0.0..=1.0f64,
    ) {
        let rows = run_sweep_p(&sweep_spec((t1, f1), (t2, f2), p)).unwrap();
        prop_assert_eq!(rows.len(), 1);
        let row = &rows[0];
        match run_analyze(&problem_spec((t1, f1), (t2, f2), p)) {
            Ok(rep) => {
                prop_assert_eq!(fmt_value(row.point.landauer_kt), fmt_value(rep.landauer_kt));
                prop_assert_eq!(fmt_value(row.point.epsilon_kt), fmt_value(rep.epsilon_lower_kt));
                prop_assert_eq!(fmt_value(row.point.total_kt), fmt_value(rep.total_lower_kt));
                prop_assert_eq!(&row.point.verdict, rep.verdict.kind.name());
            }
            Err(_) => prop_assert_eq!(&row.point.verdict, qtherm::sweep::SCAN_FAILED),
        }
    }

    #[test]
    fn sweeps_are_deterministic(
        t1 in 0.0..std::f64::consts::PI, f1 in 0.0..std::f64::consts::TAU,
        t2 in 0.0..std::f64::consts::PI, f2 in 0.0..std::f64::consts::TAU,
    ) {
        let spec = parse_sweep(&format!(
            r#"{{"v1": {{"theta": {t1}, "phi": {f1}}}, "v2": {{"theta": {t2}, "phi": {f2}}},
                "p_grid": {{"start": 0.0, "stop": 1.0, "steps": 9}}}}"#
        )).unwrap();
        let a = qtherm::sweep::sweep_csv(&run_sweep_p(&spec).unwrap()).unwrap();
        let b = qtherm::sweep::sweep_csv(&run_sweep_p(&spec).unwrap()).unwrap();
        prop_assert_eq!(a, b);
    }
}
