mod common;

use std::fs;
use std::path::Path;

use multiverse::cli;
use serde_json::Value;

use multiverse::decision_space::DecisionSpace;

use common::{desk_space_24, desk_space_96, manifest};

fn call(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("multiverse").chain(args.iter().copied());
    let code = cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn ok_json(args: &[&str]) -> Value {
    let (code, out, err) = call(args);
    assert_eq!(code, 0, "{args:?} failed: {err}");
    serde_json::from_str(&out).unwrap()
}

fn error_code(args: &[&str]) -> (i32, Value) {
    let (code, out, err) = call(args);
    assert!(out.is_empty());
    (code, serde_json::from_str(&err).unwrap())
}

fn write_manifest(dir: &Path, space: DecisionSpace) -> String {
    let m = manifest(700, space, &dir.join("out"));
    let path = dir.join("manifest.json");
    fs::write(&path, m.to_json().unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn enumerate_prints_grid_sizes() {
    let v = ok_json(&["enumerate"]);
    assert_eq!(v["design_universes"], 61440);
    assert_eq!(v["eval_strategies"], 28);
    assert_eq!(v["fairness_values"], 1720320);
}

#[test]
fn init_scaffolds_a_loadable_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("proj");
    ok_json(&["init", "--out", dir.to_str().unwrap(), "--rows", "500"]);
    for f in ["manifest.json", "design_space.json", "eval_space.json", "generator.json"] {
        assert!(dir.join(f).exists(), "{f} missing");
    }
    let v = ok_json(&["enumerate", "--manifest", dir.join("manifest.json").to_str().unwrap()]);
    assert_eq!(v["fairness_values"], 1720320);
    let (code, err) = error_code(&["init", "--out", dir.to_str().unwrap()]);
    assert_eq!(code, 3);
    assert!(err["error"]["message"].as_str().unwrap().contains("already exists"));
}

#[test]
fn run_resume_analyse_and_export() {
    let tmp = tempfile::tempdir().unwrap();
    let m = write_manifest(tmp.path(), desk_space_24());
    let first = ok_json(&["run", "--manifest", &m, "--workers", "2"]);
    assert_eq!(first["new"], 24);
    assert_eq!(first["strategy_rows"], 672);
    let second = ok_json(&["run", "--manifest", &m]);
    assert_eq!(second["new"], 0);
    assert_eq!(second["resumed"], 24);

    let report = ok_json(&["importance", "--manifest", &m]);
    assert_eq!(report["method"], "exact");
    assert_eq!(report["effect_count"], 15);
    assert!(tmp.path().join("out/importance.json").exists());
    let (code, err) = error_code(&["importance", "--manifest", &m, "--method", "forest"]);
    assert_eq!(code, 4);
    assert!(err["error"]["message"].as_str().unwrap().contains("30 rows"));

    let summary = ok_json(&["summarize", "--manifest", &m]);
    assert_eq!(summary["universes"], 24);
    assert_eq!(summary["histogram"].as_array().unwrap().len(), 20);

    let (code, _) = error_code(&["stability", "--manifest", &m, "--fractions", "1.0"]);
    assert_eq!(code, 4);

    let exported = ok_json(&["export", "--manifest", &m]);
    assert_eq!(exported["universes"], 24);
    assert_eq!(exported["importance"], true);
    let bundle: Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("out/explorer.json")).unwrap()).unwrap();
    assert_eq!(bundle["universes"].as_array().unwrap().len(), 24);
    assert_eq!(bundle["importance"].as_array().unwrap().len(), 15);
}

#[test]
fn stability_writes_its_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let m = write_manifest(tmp.path(), desk_space_96());
    ok_json(&["run", "--manifest", &m, "--workers", "0"]);
    let args = [
        "stability",
        "--manifest",
        &m,
        "--fractions",
        "0.5,1.0",
        "--repetitions",
        "2",
        "--trees",
        "5",
        "--max-order",
        "1",
    ];
    let stability = ok_json(&args);
    let rows = stability["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1]["mean_pearson"], 1.0);
    let csv = fs::read_to_string(tmp.path().join("out/stability.csv")).unwrap();
    assert!(csv.starts_with("fraction,repetitions_ok,mean_pearson,sd_pearson,mean_spearman,sd_spearman\n"));
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn replicate_runs_each_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let m = write_manifest(tmp.path(), desk_space_24());
    let v = ok_json(&["replicate", "--manifest", &m, "--seeds", "1,2,3", "--max-order", "1"]);
    assert_eq!(v["runs"].as_array().unwrap().len(), 3);
    assert_eq!(v["agreement"]["pairs"].as_array().unwrap().len(), 3);
    for seed in [1, 2, 3] {
        assert!(tmp.path().join(format!("out/seed-{seed}/results.jsonl")).exists());
    }
    let (code, _) = error_code(&["replicate", "--manifest", &m, "--seeds", "1"]);
    assert_eq!(code, 3);
}

#[test]
fn failures_are_machine_readable() {
    let (code, err) = error_code(&["run", "--manifset", "x.json"]);
    assert_eq!(code, 2);
    assert_eq!(err["error"]["kind"], "usage");
    let (code, _) = error_code(&["frobnicate"]);
    assert_eq!(code, 2);

    let (code, err) = error_code(&["run", "--manifest", "/nonexistent/manifest.json"]);
    assert_eq!(code, 3);
    assert_eq!(err["error"]["kind"], "manifest");

    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("meta.json"), "{ not json").unwrap();
    let (code, err) = error_code(&["summarize", "--store", tmp.path().to_str().unwrap()]);
    assert_eq!(code, 3);
    assert_eq!(err["error"]["kind"], "store");
}
