use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gps_core::exact_dp::PartitionTable;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn gps(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gps")).args(args).env("GPS_WORKERS", "2").output().expect("run gps")
}

fn config(name: &str) -> String {
    configs().join(name).to_str().unwrap().to_owned()
}

#[test]
fn csv_has_comment_and_header_rows() {
    let out = gps(&["free-energy", "--config", &config("flat_boundary.json")]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    let comment = lines.next().unwrap();
    assert!(comment.starts_with("# kernel_hash=") && comment.contains(" version="), "{comment}");
    assert!(lines.next().unwrap().starts_with("h,h_eff,g,lambda1_bar,gamma_c"));
    assert!(lines.count() > 1);
}

#[test]
fn exact_with_oracle_and_dump() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("table.bin");
    let out = gps(&["exact", "--config", &config("exact_small.json"), "--oracle", "--dump", dump.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["oracle"]["pass"], true);
    let table = PartitionTable::read_dump(std::fs::File::open(&dump).unwrap()).unwrap();
    assert_eq!(table.log_z(8, 8), v["log_zc"].as_f64().unwrap());
}

#[test]
fn biophysics_match_passes() {
    let out = gps(&["match-biophysics", "--config", &config("match_biophysics.json")]);
    assert_eq!(out.status.code(), Some(0));
    let reports: Vec<serde_json::Value> = serde_json::from_slice(&out.stdout).unwrap();
    for r in &reports {
        for key in ["check_id", "params", "sizes", "measured", "claimed", "tolerance", "pass"] {
            assert!(r.get(key).is_some(), "missing {key}");
        }
    }
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"kernel\": {\"family\": \"gamma_ratio\", \"parameters\": {\"alpha\": 1.5}},\n \"colour\": 3}").unwrap();
    let out = gps(&["free-energy", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    std::fs::write(&bad, r#"{"kernel": {"family": "gamma_ratio", "parameters": {"alpha": 2.5}}, "n": 4, "m": 4, "h": 0.1}"#).unwrap();
    assert_eq!(gps(&["exact", "--config", bad.to_str().unwrap()]).status.code(), Some(2));

    let missing = dir.path().join("missing.json");
    assert_eq!(gps(&["exact", "--config", missing.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(gps(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn tolerance_failures_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("validate.json");
    std::fs::write(&cfg, r#"{"kernel": {"family": "gamma_ratio", "parameters": {"alpha": 1.5}}, "sizes": [20, 40, 60]}"#).unwrap();
    let out = gps(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let reports: Vec<serde_json::Value> = serde_json::from_slice(&out.stdout).unwrap();
    assert!(reports.iter().any(|r| r["pass"] == false));
}

#[test]
fn worker_count_does_not_change_output() {
    let args = ["sample", "--config", &config("sample_cramer.json"), "--count", "300"];
    let one = Command::new(env!("CARGO_BIN_EXE_gps")).args(args).env("GPS_WORKERS", "1").output().unwrap();
    let four = Command::new(env!("CARGO_BIN_EXE_gps")).args(args).arg("--workers").arg("4").output().unwrap();
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, four.stdout);
    assert!(String::from_utf8_lossy(&one.stdout).lines().nth(1) == Some("path_id,contact,n,m"));
}
