//! Behavior tests for the `powerlin` binary: exit codes, output formats,
//! fault isolation, and report determinism.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_powerlin"))
}

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
        .display()
        .to_string()
}

fn run_args(dir: &Path, methods: &str, format: &str) -> Vec<String> {
    let out = dir.join(format!("out-{format}.txt")).display().to_string();
    vec![
        "run".into(),
        "--cases".into(),
        fixture("case14.m"),
        "--baselines".into(),
        fixture("case14.baseline.json"),
        "--methods".into(),
        methods.into(),
        "--repeat".into(),
        "0".into(),
        "--format".into(),
        format.into(),
        "--out".into(),
        out,
    ]
}

#[test]
fn validate_accepts_fixtures() {
    for case in ["case14.m", "case57.m"] {
        let out = bin().args(["validate", &fixture(case)]).output().unwrap();
        assert!(out.status.success(), "{case}: {out:?}");
        let text = String::from_utf8_lossy(&out.stdout);
        assert!(text.contains("NR converged"), "{text}");
    }
}

#[test]
fn validate_rejects_corrupted_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.m");
    let text = std::fs::read_to_string(fixture("case14.m"))
        .unwrap()
        .replace("0.05917", "0.0x917");
    std::fs::write(&path, text).unwrap();
    let out = bin().args(["validate", path.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("line"), "diagnostics should carry line numbers: {text}");
}

#[test]
fn validate_rejects_disconnected_island() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("island.m");
    // drop both feeders into bus 14 (branches 9-14 and 13-14)
    let text = std::fs::read_to_string(fixture("case14.m"))
        .unwrap()
        .replace("\t9\t14\t0.12711\t0.27038\t0\t0\t0\t0\t0\t0\t1", "\t9\t14\t0.12711\t0.27038\t0\t0\t0\t0\t0\t0\t0")
        .replace("\t13\t14\t0.17093\t0.34802\t0\t0\t0\t0\t0\t0\t1", "\t13\t14\t0.17093\t0.34802\t0\t0\t0\t0\t0\t0\t0");
    std::fs::write(&path, text).unwrap();
    let out = bin().args(["validate", path.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("disconnected"), "{text}");
}

#[test]
fn missing_baseline_path_exits_1() {
    let out = bin()
        .args([
            "run",
            "--cases",
            &fixture("case14.m"),
            "--baselines",
            "/nonexistent/baseline.json",
            "--repeat",
            "0",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("baseline not found"), "{err}");
}

#[test]
fn empty_method_selection_is_fine() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().args(run_args(dir.path(), "", "report")).output().unwrap();
    assert!(out.status.success(), "{out:?}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out-report.txt")).unwrap())
            .unwrap();
    assert_eq!(report["cells"].as_array().unwrap().len(), 0);
}

#[test]
fn csv_and_report_numeric_content_match() {
    let dir = tempfile::tempdir().unwrap();
    assert!(bin().args(run_args(dir.path(), "1,2,6", "report")).status().unwrap().success());
    assert!(bin().args(run_args(dir.path(), "1,2,6", "csv")).status().unwrap().success());
    let json = std::fs::read_to_string(dir.path().join("out-report.txt")).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("out-csv.txt")).unwrap();
    let report = powerlin_cli::report::BenchmarkReport::from_json(&json).unwrap();
    let a = report.numeric_index();
    let b = powerlin_cli::report::BenchmarkReport::numeric_index_from_csv(&csv);
    assert_eq!(a, b);
}

#[test]
fn reports_are_deterministic_up_to_timing() {
    let dir = tempfile::tempdir().unwrap();
    let args = run_args(dir.path(), "1,3,5,7", "report");
    assert!(bin().args(&args).status().unwrap().success());
    let first = std::fs::read_to_string(dir.path().join("out-report.txt")).unwrap();
    assert!(bin().args(&args).status().unwrap().success());
    let second = std::fs::read_to_string(dir.path().join("out-report.txt")).unwrap();
    let mut a = powerlin_cli::report::BenchmarkReport::from_json(&first).unwrap();
    let mut b = powerlin_cli::report::BenchmarkReport::from_json(&second).unwrap();
    a.generated_unix = 0;
    b.generated_unix = 0;
    assert_eq!(a.numeric_index(), b.numeric_index());
    assert_eq!(a.to_csv(), b.to_csv());
}

const TINY_CASE: &str = "function mpc = tiny\nmpc.version = '2';\nmpc.baseMVA = 100;\n\
    mpc.bus = [\n1 3 0 0 0 0 1 1 0 0 1 1.1 0.9;\n2 1 50 0 0 0 1 1 0 0 1 1.1 0.9;\n];\n\
    mpc.gen = [\n1 0 0 100 -100 1 100 1 300 0 0 0 0 0 0 0 0 0 0 0 0;\n];\n\
    mpc.branch = [\n1 2 0 0.2 0 0 0 0 0 0 1 -360 360;\n];\n\
    mpc.gencost = [\n2 0 0 3 0.05 20 0;\n];\n";

/// Write a tiny self-consistent (case, baseline) pair through the oracle.
fn tiny_case_with_baseline(dir: &Path) -> (PathBuf, PathBuf) {
    let case = dir.join("tiny.m");
    std::fs::write(&case, TINY_CASE).unwrap();
    let baseline = dir.join("tiny.baseline.json");
    let status = bin()
        .args([
            "oracle",
            case.to_str().unwrap(),
            "--step",
            "1e-3",
            "--out",
            baseline.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    (case, baseline)
}

#[test]
fn failed_cells_do_not_poison_others() {
    let dir = tempfile::tempdir().unwrap();
    let (case, baseline) = tiny_case_with_baseline(dir.path());
    // a p_max too small for the load makes every OPF on the copy
    // infeasible, while the baseline still satisfies the balance check
    let broken = dir.path().join("broken.m");
    std::fs::write(&broken, TINY_CASE.replace(" 1 300 0 ", " 1 30 0 ").replace("= tiny", "= broken"))
        .unwrap();
    let out = bin()
        .args([
            "run",
            "--cases",
            case.to_str().unwrap(),
            broken.to_str().unwrap(),
            "--baselines",
            baseline.to_str().unwrap(),
            baseline.to_str().unwrap(),
            "--methods",
            "1,2",
            "--repeat",
            "0",
            "--format",
            "report",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{out:?}");
    let report: serde_json::Value =
        serde_json::from_str(&String::from_utf8_lossy(&out.stdout)).unwrap();
    let cells = report["cells"].as_array().unwrap();
    assert_eq!(cells.len(), 4);
    let ok_cells = cells.iter().filter(|c| c["ok"] == true).count();
    let failed: Vec<&str> = cells
        .iter()
        .filter(|c| c["ok"] == false)
        .map(|c| c["case"].as_str().unwrap())
        .collect();
    assert_eq!(ok_cells, 2, "healthy case cells must survive");
    assert!(failed.iter().all(|c| *c == "broken"));
    for c in cells.iter().filter(|c| c["ok"] == false) {
        assert!(c["error"].as_str().unwrap().to_lowercase().contains("infeasible"));
    }
}

#[test]
fn score_subcommand_produces_radar_data() {
    let dir = tempfile::tempdir().unwrap();
    let report_path = dir.path().join("report.json");
    let status = bin()
        .args([
            "run",
            "--cases",
            &fixture("case14.m"),
            "--baselines",
            &fixture("case14.baseline.json"),
            "--methods",
            "1,2,3,4,5,6,7",
            "--repeat",
            "1",
            "--format",
            "report",
            "--out",
            report_path.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let scores_path = dir.path().join("scores.json");
    let svg_path = dir.path().join("radar.svg");
    let status = bin()
        .args([
            "score",
            "--in",
            report_path.to_str().unwrap(),
            "--out",
            scores_path.to_str().unwrap(),
            "--svg",
            svg_path.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&scores_path).unwrap()).unwrap();
    assert_eq!(doc["per_method"].as_array().unwrap().len(), 7);
    for m in doc["per_method"].as_array().unwrap() {
        for s in m["scores"].as_array().unwrap() {
            let v = s.as_f64().unwrap();
            assert!((1.0..=100.0).contains(&v), "score {v} out of range");
        }
    }
    let svg = std::fs::read_to_string(&svg_path).unwrap();
    assert_eq!(svg.matches("<polygon").count(), 7);
}

#[test]
fn score_rejects_incomplete_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let report_path = dir.path().join("report.json");
    // repeat=0 leaves zero wall times -> speed aggregate non-positive;
    // scores are skipped in the report and the score command refuses
    assert!(bin().args(run_args(dir.path(), "1,2", "report")).status().unwrap().success());
    std::fs::rename(dir.path().join("out-report.txt"), &report_path).unwrap();
    let out = bin()
        .args(["score", "--in", report_path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}

#[test]
fn oracle_refuses_large_cases() {
    let out = bin().args(["oracle", &fixture("case14.m"), "--step", "0.01"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn oracle_baseline_roundtrips_through_run() {
    // an oracle-written baseline is a valid input for `run`
    let dir = tempfile::tempdir().unwrap();
    let case = dir.path().join("toy.m");
    std::fs::write(
        &case,
        "function mpc = toy\nmpc.version = '2';\nmpc.baseMVA = 100;\n\
         mpc.bus = [\n1 3 0 0 0 0 1 1 0 0 1 1.1 0.9;\n2 1 40 8 0 0 1 1 0 0 1 1.1 0.9;\n\
         3 1 25 5 0 0 1 1 0 0 1 1.1 0.9;\n];\n\
         mpc.gen = [\n1 0 0 100 -100 1 100 1 200 0 0 0 0 0 0 0 0 0 0 0 0;\n\
         3 0 0 100 -100 1 100 1 90 0 0 0 0 0 0 0 0 0 0 0 0;\n];\n\
         mpc.branch = [\n1 2 0.01 0.1 0.02 0 0 0 0 0 1 -360 360;\n\
         2 3 0.01 0.12 0.02 0 0 0 0 0 1 -360 360;\n];\n\
         mpc.gencost = [\n2 0 0 3 0.04 20 0;\n2 0 0 3 0.07 18 0;\n];\n",
    )
    .unwrap();
    let baseline = dir.path().join("toy.baseline.json");
    assert!(bin()
        .args(["oracle", case.to_str().unwrap(), "--step", "2e-3", "--out", baseline.to_str().unwrap()])
        .status()
        .unwrap()
        .success());
    let out = bin()
        .args([
            "run",
            "--cases",
            case.to_str().unwrap(),
            "--baselines",
            baseline.to_str().unwrap(),
            "--methods",
            "1,2,3,4,5,6,7",
            "--repeat",
            "0",
            "--format",
            "report",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&String::from_utf8_lossy(&out.stdout)).unwrap();
    assert!(report["cells"].as_array().unwrap().iter().all(|c| c["ok"] == true));
}
