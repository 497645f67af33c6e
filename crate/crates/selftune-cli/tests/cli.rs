//! End-to-end checks of the experiment runner binary: artifact shapes,
//! byte-identical reproduction, manifest round-trips, and error exits.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_selftune"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("binary runs");
    assert!(
        out.status.success(),
        "command failed: {}\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap_or_else(|e| panic!("reading {name}: {e}"))
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("selftune-cli-test-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

#[test]
fn partition_artifacts_and_determinism() {
    let dir_a = temp_dir("part-a");
    let dir_b = temp_dir("part-b");
    for dir in [&dir_a, &dir_b] {
        run_ok(&[
            "--preset",
            "partition",
            "--samples",
            "300",
            "--seed",
            "1",
            "--out",
            dir.to_str().unwrap(),
        ]);
    }
    let csv = String::from_utf8(read(&dir_a, "partition.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "x1,x2,t,subset");
    assert_eq!(lines.count(), 300 * 4);
    assert_eq!(read(&dir_a, "partition.csv"), read(&dir_b, "partition.csv"));

    // identical flags (same out dir) reproduce the manifest byte-for-byte
    let manifest_before = read(&dir_a, "manifest.json");
    run_ok(&[
        "--preset",
        "partition",
        "--samples",
        "300",
        "--seed",
        "1",
        "--out",
        dir_a.to_str().unwrap(),
    ]);
    assert_eq!(manifest_before, read(&dir_a, "manifest.json"));
}

#[test]
fn manifest_round_trip_reproduces_artifacts() {
    let dir_a = temp_dir("mrt-a");
    run_ok(&[
        "--preset",
        "simple-example",
        "--dwell",
        "25",
        "--seeds",
        "3",
        "--out",
        dir_a.to_str().unwrap(),
    ]);
    let dir_b = temp_dir("mrt-b");
    run_ok(&[
        "--config",
        dir_a.join("manifest.json").to_str().unwrap(),
        "--out",
        dir_b.to_str().unwrap(),
    ]);
    assert_eq!(read(&dir_a, "costs.csv"), read(&dir_b, "costs.csv"));
    assert_eq!(read(&dir_a, "states.csv"), read(&dir_b, "states.csv"));
}

#[test]
fn lqr50_summary_has_ratio_field() {
    let dir = temp_dir("lqr50");
    run_ok(&[
        "--preset",
        "lqr50",
        "--seed",
        "7",
        "--seeds",
        "2",
        "--out",
        dir.to_str().unwrap(),
    ]);
    let summary: serde_json::Value =
        serde_json::from_slice(&read(&dir, "summary.json")).unwrap();
    assert!(summary.get("median_ratio").is_some());
    assert_eq!(summary["instances"].as_array().unwrap().len(), 2);
    let costs = String::from_utf8(read(&dir, "costs.csv")).unwrap();
    assert!(costs.starts_with("instance,policy,total_cost,diverged,max_norm"));
    assert_eq!(costs.lines().count(), 1 + 2 * 2);
}

#[test]
fn custom_preset_runs_a_config_file() {
    let dir = temp_dir("custom");
    std::fs::create_dir_all(&dir).unwrap();
    let config = serde_json::json!({
        "preset": "custom",
        "seed": 3,
        "seeds": 2,
        "scenario": {
            "modes": [
                {"label": "A", "a": [[0.9, 0.2], [-0.1, 0.7]], "w": [[0.0, 0.0], [0.0, 0.0]]}
            ],
            "switching": {"type": "constant", "label": "A"},
            "library": [[1.0, 0.0], [0.0, 1.0]],
            "cost": {"q": [[1.0, 0.0], [0.0, 1.0]], "r_unit": 1.0,
                     "q_terminal": [[1.0, 0.0], [0.0, 1.0]]},
            "k": 1,
            "horizon": 4,
            "initial_state": {"type": "fixed", "value": [1.0, -0.5]}
        },
        "policies": [
            {"type": "fixed", "subset": [1]},
            {"type": "exact-dp"},
            {"type": "greedy-known-model"}
        ]
    });
    let config_path = dir.join("experiment.json");
    std::fs::write(&config_path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    run_ok(&[
        "--config",
        config_path.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    let summary: serde_json::Value =
        serde_json::from_slice(&read(&dir, "summary.json")).unwrap();
    let aggregates = summary["aggregates"].as_array().unwrap();
    assert_eq!(aggregates.len(), 3);
    // exact DP can only improve on the fixed architecture
    let dp_ratio = aggregates[1]["median_ratio_vs_first"].as_f64().unwrap();
    assert!(dp_ratio >= 1.0 - 1e-9);
}

#[test]
fn invalid_config_exits_nonzero_with_location() {
    let dir = temp_dir("bad");
    std::fs::create_dir_all(&dir).unwrap();
    let config_path = dir.join("bad.json");
    std::fs::write(&config_path, "{ \"preset\": \"custom\",\n  broken\n}").unwrap();
    let out = bin()
        .args(["--config", config_path.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line"), "expected a line-anchored error, got: {stderr}");
}

#[test]
fn env_var_sets_default_output_dir() {
    let dir = temp_dir("envout");
    let out = bin()
        .args(["--preset", "partition", "--samples", "10", "--seed", "2"])
        .env("SELFTUNE_OUT_DIR", dir.to_str().unwrap())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.join("partition.csv").exists());
    assert!(dir.join("manifest.json").exists());
}

#[test]
fn missing_preset_and_config_is_an_error() {
    let out = bin().output().unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("--preset") || stderr.contains("--config"));
}

#[test]
fn unknown_preset_is_rejected() {
    let out = bin().args(["--preset", "nonsense"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown preset"));
}
