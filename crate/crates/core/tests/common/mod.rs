#![allow(dead_code)]

use std::path::Path;

use multiverse::decision_space::{presets, Decision, DecisionSpace, SpaceKind};
use multiverse::runner::{DocRef, RunContext, RunManifest};

/// Restricts the built-in design decisions to the given option lists.
pub fn reduced_space(options: &[(&str, &[&str])]) -> DecisionSpace {
    let decisions = options
        .iter()
        .map(|(name, opts)| {
            let full = presets::design_decisions().into_iter().find(|d| d.name == *name).expect("known decision");
            Decision::new(*name, full.category, opts)
        })
        .collect();
    DecisionSpace::new(SpaceKind::Design, decisions).unwrap()
}

/// 4 models x 3 cutoffs x 2 x 2 x 2 = 96 universes.
pub fn desk_space_96() -> DecisionSpace {
    reduced_space(&[
        ("exclude_subgroups", &["keep-all", "drop-smallest-1"]),
        ("preprocess_age", &["none", "quantiles-3"]),
        ("model", &["logreg", "rf", "gbm", "elasticnet"]),
        ("stratify_split", &["none", "both"]),
        ("cutoff", &["raw-0.5", "quantile-0.1", "quantile-0.25"]),
    ])
}

/// 2 x 2 x 2 x 3 = 24 universes.
pub fn desk_space_24() -> DecisionSpace {
    reduced_space(&[
        ("exclude_features", &["none", "race-sex"]),
        ("scale", &["do-not-scale", "scale"]),
        ("encode_categorical", &["one-hot", "ordinal"]),
        ("cutoff", &["raw-0.5", "quantile-0.1", "quantile-0.25"]),
    ])
}

pub fn manifest(n: usize, space: DecisionSpace, out: &Path) -> RunManifest {
    let mut m = RunManifest::example(n);
    m.design_space = DocRef::Inline(space);
    m.output_dir = out.to_path_buf();
    m
}

pub fn context(n: usize, space: DecisionSpace, out: &Path) -> RunContext {
    RunContext::new(manifest(n, space, out)).unwrap()
}
