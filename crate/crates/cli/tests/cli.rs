use std::path::Path;
use std::process::{Command, Output};

fn pllbench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pllbench")).args(args).output().expect("spawn pllbench")
}

fn ok(args: &[&str]) -> String {
    let out = pllbench(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn synth_stats_run_sweep_report() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("blobs.jsonl");
    ok(&["synth", "--gen", "uss", "--n", "120", "--seed", "3", "--out", p(&data)]);

    let stats = ok(&["stats", p(&data)]);
    let field = |k: &str| stats.lines().find(|l| l.starts_with(k)).unwrap().split_whitespace().nth(1).unwrap().to_string();
    assert_eq!(field("n "), "120");
    assert_eq!(field("q "), "3");
    assert_eq!(field("noise_rate"), "0.0000");

    let record: serde_json::Value =
        serde_json::from_str(&ok(&["run", "--dataset", p(&data), "--alg", "proden", "--iters", "1000"])).unwrap();
    assert_eq!(record["checkpoints"].as_array().unwrap().len(), 1);
    assert_eq!(record["failed"], false);

    let runs = dir.path().join("runs");
    ok(&["sweep", "--dataset", p(&data), "--alg", "cc", "--configs", "2", "--splits", "2", "--iters", "1000", "--workers", "1", "--out", p(&runs)]);
    assert_eq!(std::fs::read_dir(&runs).unwrap().count(), 4);

    let md = ok(&["report", "--in", p(&runs)]);
    assert!(md.contains("| CC |"), "{md}");
    let csv = ok(&["report", "--in", p(&runs), "--criterion", "aa", "--format", "csv"]);
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.lines().nth(1).unwrap().starts_with("cc,aa,"));
}

#[test]
fn validate_theory_reports_json() {
    let out = ok(&["validate-theory", "--which", "thm-aa", "--n", "20000"]);
    let report: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(report["pass"], true);
}

#[test]
fn bad_input_exits_with_code_2() {
    let out = pllbench(&["stats", "/nonexistent/file.jsonl"]);
    assert_eq!(out.status.code(), Some(2));
    let out = pllbench(&["run", "--dataset", "/nonexistent/file.jsonl", "--alg", "nope"]);
    assert_eq!(out.status.code(), Some(2));
}
