//! Summary statistics and the JSON bundle the explorer loads.

use multiverse::decision_space::{presets, Decision, DecisionSpace, SpaceKind};
use multiverse::report::{export_explorer_bundle, summarize, summarize_csv, ExplorerBundle};
use multiverse::runner::{
    run_multiverse, store_importance, DocRef, ImportanceMethod, ResultStore, RunContext, RunManifest, CSV_FILE,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let find =
        |name: &str| presets::design_decisions().into_iter().find(|d| d.name == name).expect("built-in decision");
    let space = DecisionSpace::new(
        SpaceKind::Design,
        vec![
            Decision::new("exclude_features", find("exclude_features").category, &["none", "race-sex"]),
            Decision::new("scale", find("scale").category, &["do-not-scale", "scale"]),
            Decision::new("encode_categorical", find("encode_categorical").category, &["one-hot", "ordinal"]),
            find("cutoff"),
        ],
    )?;
    let mut manifest = RunManifest::example(1500);
    manifest.design_space = DocRef::Inline(space);
    manifest.output_dir = dir.path().to_path_buf();
    run_multiverse(&RunContext::new(manifest)?)?;

    let store = ResultStore::load(dir.path())?;
    let summary = summarize(&store);
    assert_eq!(summary, summarize_csv(&std::fs::read_to_string(dir.path().join(CSV_FILE))?)?);
    println!("{}", serde_json::to_string_pretty(&summary)?);

    let importance = store_importance(&store, ImportanceMethod::Exact, &Default::default())?;
    let out = dir.path().join("explorer.json");
    export_explorer_bundle(&store, Some(&importance), &out)?;
    let bundle: ExplorerBundle = serde_json::from_str(&std::fs::read_to_string(&out)?)?;
    println!(
        "bundle: {} universes x {} strategies, {} effects",
        bundle.universes.len(),
        bundle.universes[0].evals.len(),
        bundle.importance.len()
    );
    Ok(())
}
