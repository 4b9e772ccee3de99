//! Every example builds and exits successfully.

use std::path::PathBuf;
use std::process::Command;

const EXAMPLES: &[&str] = &[
    "decision_space",
    "synthetic_data",
    "train_models",
    "single_universe",
    "evaluation_spread",
    "run_multiverse",
    "decision_importance",
    "stability",
    "replication",
    "explorer_bundle",
];

fn examples_dir() -> PathBuf {
    // target/<profile>/deps/<this test> -> target/<profile>/examples
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(|p| p.parent()).unwrap().join("examples")
}

#[test]
fn all_examples_run() {
    let status = Command::new(env!("CARGO"))
        .args(["build", "--quiet", "--examples", "-p", env!("CARGO_PKG_NAME")])
        .status()
        .unwrap();
    assert!(status.success(), "examples failed to build");
    let on_disk: Vec<String> = std::fs::read_dir(concat!(env!("CARGO_MANIFEST_DIR"), "/examples"))
        .unwrap()
        .filter_map(|e| e.ok()?.path().file_stem()?.to_str().map(String::from))
        .collect();
    for name in &on_disk {
        assert!(EXAMPLES.contains(&name.as_str()), "example `{name}` is not listed");
    }
    for name in EXAMPLES {
        let out = Command::new(examples_dir().join(name)).output().unwrap();
        assert!(out.status.success(), "example `{name}` failed:\n{}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stdout.is_empty(), "example `{name}` printed nothing");
    }
}
