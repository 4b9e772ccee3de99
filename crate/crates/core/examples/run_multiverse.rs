//! A small multiverse run to disk, interrupted and resumed.

use multiverse::decision_space::{presets, Decision, DecisionSpace, SpaceKind};
use multiverse::runner::{run_multiverse_in, DocRef, ResultStore, RunContext, RunManifest, RunOptions, CSV_FILE};

fn space() -> Result<DecisionSpace, multiverse::error::Error> {
    let keep = [
        ("model", &["logreg", "rf"][..]),
        ("scale", &["do-not-scale", "scale"]),
        ("cutoff", &["raw-0.5", "quantile-0.1", "quantile-0.25"]),
    ];
    let decisions = keep
        .iter()
        .map(|(name, opts)| {
            let full = presets::design_decisions().into_iter().find(|d| d.name == *name).expect("built-in decision");
            Decision::new(*name, full.category, opts)
        })
        .collect();
    DecisionSpace::new(SpaceKind::Design, decisions)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let mut manifest = RunManifest::example(2000);
    manifest.design_space = DocRef::Inline(space()?);
    manifest.workers = 2;
    let ctx = RunContext::new(manifest)?;

    let partial = run_multiverse_in(&ctx, dir.path(), &RunOptions { max_new: Some(5) })?;
    println!("first pass:  {} new, {} still pending", partial.new, partial.pending);
    let resumed = run_multiverse_in(&ctx, dir.path(), &RunOptions::default())?;
    println!("second pass: {} new, {} resumed", resumed.new, resumed.resumed);

    let store = ResultStore::load(dir.path())?;
    println!("{} universes, statuses {:?}", store.results.len(), store.status_counts());
    for r in store.ok().take(4) {
        println!(
            "  {} {:?} -> {:.3}",
            r.id,
            r.options.values().collect::<Vec<_>>(),
            r.eq_odds_diff.unwrap_or(f64::NAN)
        );
    }
    let csv = std::fs::read_to_string(dir.path().join(CSV_FILE))?;
    println!("results.csv: {} rows of (universe, strategy)", csv.lines().count() - 1);
    Ok(())
}
