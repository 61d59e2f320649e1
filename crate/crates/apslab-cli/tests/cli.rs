//! End-to-end runs of the `apslab` binary.

use std::path::PathBuf;
use std::process::{Command, Output};

fn apslab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_apslab")).args(args).output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("apslab-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

#[test]
fn list_names_every_experiment() {
    let out = apslab(&["list"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 15);
    assert!(text.lines().any(|l| l.starts_with("gluing-defect")));
}

#[test]
fn verify_writes_a_report_and_exits_cleanly() {
    let dir = scratch("verify");
    let out = apslab(&["verify", "virtual-codimension", "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("PASS virtual-codimension"));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["reports"][0]["passed"], true);
    assert!(dir.join("virtual-codimension.csv").is_file());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn unknown_experiment_exits_with_code_two() {
    let dir = scratch("unknown");
    let out = apslab(&["verify", "no-such-experiment", "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn index_of_the_default_scenario_is_json() {
    let out = apslab(&["index"]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    for key in ["index", "graded_index", "fredholm", "kernel_dimension", "chirality_trace"] {
        assert!(report.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn spectrum_prints_csv_on_request() {
    let out = apslab(&["--format", "csv", "spectrum"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("mu,multiplicity,block_lambda,method"));
    assert!(text.lines().count() > 10);
}

#[test]
fn scenario_files_are_read() {
    let dir = scratch("config");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("scenario.toml");
    std::fs::write(
        &path,
        "[boundary]\nflux = 0.5\n\n[bulk]\nshape = \"finite-cylinder\"\nlength = 1.0\n\n[mass]\nkind = \"constant\"\nvalue = 0.0\n\n[[bcs]]\nkind = \"pi-v-plus\"\n\n[[bcs]]\nkind = \"pi-v-minus\"\n",
    )
    .unwrap();
    let out = apslab(&["--config", path.to_str().unwrap(), "index"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["kernel_dimension"], 0);
    std::fs::remove_dir_all(&dir).unwrap();
}
