//! The same multiverse under different global seeds: do the importances agree?

use multiverse::decision_space::{presets, Decision, DecisionSpace, SpaceKind};
use multiverse::importance::ForestConfig;
use multiverse::runner::{replicate, DocRef, ImportanceMethod, RunContext, RunManifest};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let find =
        |name: &str| presets::design_decisions().into_iter().find(|d| d.name == name).expect("built-in decision");
    let space = DecisionSpace::new(
        SpaceKind::Design,
        vec![
            Decision::new("model", find("model").category, &["logreg", "gbm"]),
            Decision::new("exclude_features", find("exclude_features").category, &["none", "race-sex"]),
            find("cutoff"),
        ],
    )?;
    let mut manifest = RunManifest::example(1500);
    manifest.design_space = DocRef::Inline(space);
    manifest.output_dir = dir.path().to_path_buf();
    manifest.workers = 0;
    let ctx = RunContext::new(manifest)?;

    let report = replicate(&ctx, &[1, 2, 3], ImportanceMethod::Exact, &ForestConfig::default())?;
    for (seed, imp) in report.seeds.iter().zip(&report.importance) {
        let top = multiverse::importance::rank(imp, 1);
        println!("seed {seed}: top effect {} ({:.3})", top[0].label(), top[0].importance);
    }
    for p in &report.agreement.pairs {
        println!("runs {} and {}: pearson {:?}", p.a, p.b, p.stat.pearson);
    }
    Ok(())
}
