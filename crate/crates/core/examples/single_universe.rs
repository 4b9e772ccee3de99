//! One universe through the whole pipeline, evaluated under every strategy.

use std::collections::BTreeMap;

use multiverse::decision_space::Universe;
use multiverse::runner::{run_universe, RunContext, RunManifest};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ctx = RunContext::new(RunManifest::example(3000))?;
    let options: BTreeMap<String, String> = [
        ("exclude_features", "race"),
        ("exclude_subgroups", "keep-all"),
        ("scale", "scale"),
        ("preprocess_age", "quantiles-4"),
        ("preprocess_income", "none"),
        ("encode_categorical", "one-hot"),
        ("model", "gbm"),
        ("stratify_split", "target"),
        ("cutoff", "quantile-0.25"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect();
    let universe = Universe::from_assignments(&ctx.design, options, ctx.manifest.global_seed)?;
    let result = run_universe(&ctx, &universe);

    println!("universe {} -> {}", result.id, result.status.token());
    if let (Some(perf), Some(eo)) = (result.performance, result.eq_odds_diff) {
        println!("f1 {:.3}, accuracy {:.3}, equalized odds difference {eo:.3}", perf.f1, perf.accuracy);
    }
    for (e, s) in result.evals.iter().zip(&ctx.strategies) {
        let value = e.eq_odds_diff.map_or_else(|| e.status.token().to_string(), |v| format!("{v:.3}"));
        println!("  {:<60} {value}", s.id);
    }
    Ok(())
}
