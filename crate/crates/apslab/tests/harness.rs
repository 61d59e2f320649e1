//! Registry, report and artifact behaviour of the experiment harness.

use apslab::harness::{self, Invocation, Overrides, Parameter};
use apslab::Error;
use std::path::PathBuf;

const IDS: [&str; 15] = [
    "finite-cylinder-index",
    "finite-cylinder-spectrum",
    "closed-form-law",
    "cylinder-mass-flip",
    "domain-wall-index",
    "virtual-codimension",
    "wall-vs-constant",
    "gluing-defect",
    "spectral-gap",
    "small-time-limits",
    "heat-kernel-residuals",
    "infinite-trace-zero",
    "cutoff-trace-identity",
    "supertrace-constancy",
    "closed-mass-flip",
];

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("apslab-harness-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

#[test]
fn registry_is_complete_and_ordered() {
    let ids: Vec<&str> = harness::registry().iter().map(|e| e.id).collect();
    assert_eq!(ids, IDS);
    for e in harness::registry() {
        assert!(!e.claim.is_empty(), "{} has no claim", e.id);
        assert!(harness::find(e.id).is_ok());
    }
}

#[test]
fn unknown_ids_and_unsweepable_parameters_are_errors() {
    assert!(matches!(harness::find("no-such-experiment"), Err(Error::UnknownExperiment(_))));
    assert!(matches!(harness::run("no-such-experiment", &Overrides::default()), Err(Error::UnknownExperiment(_))));
    let err = harness::sweep(Parameter::R, &[1.0, 2.0], "finite-cylinder-index", &Overrides::default());
    assert!(matches!(err, Err(Error::NotSweepable { .. })));
    assert!("X".parse::<Parameter>().is_err());
    assert!(Overrides::default().with(Parameter::K, 2.5).is_err());
}

#[test]
fn reports_are_deterministic_and_consistent() {
    let overrides = Overrides::default();
    let first = harness::run("virtual-codimension", &overrides).unwrap();
    let second = harness::run("virtual-codimension", &overrides).unwrap();
    assert_eq!(first.len(), 1);
    assert_eq!(first[0].without_timing(), second[0].without_timing());
    for report in first.iter().chain(&second) {
        assert_eq!(report.passed, report.checks.iter().all(|c| c.passed));
        let primary = &report.checks[0];
        assert_eq!((report.left, report.right, report.residual), (primary.value, primary.target, primary.residual));
        assert!(report.checks.iter().all(|c| c.passed == (c.residual <= c.tolerance)));
    }
}

#[test]
fn overrides_reach_the_recorded_parameters() {
    let overrides = Overrides { mode_cutoff: Some(3), flux: Some(0.5), ..Overrides::default() };
    let report = &harness::run("finite-cylinder-index", &overrides).unwrap()[0];
    assert_eq!(report.parameters.numerics.mode_cutoff, 3);
    assert_eq!(report.parameters.flux, 0.5);
}

#[test]
fn sweeps_record_every_value() {
    let sweep = harness::sweep(Parameter::K, &[2.0, 3.0, 4.0], "finite-cylinder-index", &Overrides::default()).unwrap();
    assert_eq!(sweep.reports.len(), 3);
    assert_eq!(sweep.observed_orders.len(), 2);
    for (k, r) in [2, 3, 4].iter().zip(&sweep.reports) {
        assert_eq!(r.parameters.numerics.mode_cutoff, *k);
    }
    assert_eq!(sweep.all_passed, sweep.reports.iter().all(|r| r.passed));
}

#[test]
fn artifacts_have_the_documented_layout() {
    let dir = scratch("artifacts");
    let reports = harness::run("finite-cylinder-index", &Overrides::default()).unwrap();
    let sweep = harness::sweep(Parameter::K, &[2.0, 3.0], "finite-cylinder-index", &Overrides::default()).unwrap();
    let invocation = Invocation { command: "test".into(), seed: Some(7), reports, sweeps: vec![sweep] };
    harness::write_artifacts(&dir, &invocation).unwrap();

    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["seed"], 7);
    assert_eq!(json["reports"][0]["id"], "finite-cylinder-index");
    assert!(json["reports"][0]["checks"].as_array().is_some_and(|c| !c.is_empty()));
    assert!(json["reports"][0].get("tables").is_none());

    let checks = std::fs::read_to_string(dir.join("finite-cylinder-index.csv")).unwrap();
    assert!(checks.lines().count() >= 2);
    let sweep_csv = std::fs::read_to_string(dir.join("sweep-finite-cylinder-index-K.csv")).unwrap();
    assert_eq!(sweep_csv.lines().count(), 3);
    assert!(dir.join("plots").is_dir());
    std::fs::remove_dir_all(&dir).unwrap();
}
