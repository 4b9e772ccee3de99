//! Decisions, their options, and the grid of universes they span.
//!
//! A [`DecisionSpace`] is an ordered list of categorical decisions. Every
//! point of its Cartesian product is a [`Universe`], identified by a digest
//! of its canonical assignment string and carrying a per-universe seed
//! derived from the run's global seed. Option tokens are opaque here; the
//! pipeline decides what they mean.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Enumeration refuses grids larger than this unless the caller raises it.
pub const DEFAULT_GRID_CAP: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Category {
    DataSelection,
    Preprocessing,
    Modeling,
    PostHoc,
    Evaluation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpaceKind {
    Design,
    Evaluation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub name: String,
    pub category: Category,
    pub options: Vec<String>,
}

impl Decision {
    pub fn new<S: Into<String>>(name: S, category: Category, options: &[&str]) -> Self {
        Decision { name: name.into(), category, options: options.iter().map(|s| s.to_string()).collect() }
    }

    pub fn option_index(&self, token: &str) -> Option<usize> {
        self.options.iter().position(|o| o == token)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DecisionSpace {
    kind: SpaceKind,
    decisions: Vec<Decision>,
}

#[derive(Deserialize)]
struct RawSpace {
    kind: SpaceKind,
    decisions: Vec<Decision>,
}

impl<'de> Deserialize<'de> for DecisionSpace {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawSpace::deserialize(d)?;
        DecisionSpace::new(raw.kind, raw.decisions).map_err(serde::de::Error::custom)
    }
}

impl DecisionSpace {
    pub fn new(kind: SpaceKind, decisions: Vec<Decision>) -> Result<Self> {
        let mut seen = HashSet::new();
        for d in &decisions {
            if d.name.is_empty() {
                return Err(Error::Space("decision name must be non-empty".into()));
            }
            if !seen.insert(d.name.as_str()) {
                return Err(Error::Space(format!("duplicate decision name `{}`", d.name)));
            }
            if d.options.is_empty() {
                return Err(Error::Space(format!("decision `{}` has no options", d.name)));
            }
            let mut opts = HashSet::new();
            for o in &d.options {
                if !opts.insert(o.as_str()) {
                    return Err(Error::Space(format!("decision `{}` lists option `{o}` twice", d.name)));
                }
            }
        }
        Ok(DecisionSpace { kind, decisions })
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn decisions(&self) -> &[Decision] {
        &self.decisions
    }

    pub fn len(&self) -> usize {
        self.decisions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decisions.is_empty()
    }

    pub fn decision(&self, name: &str) -> Option<&Decision> {
        self.decisions.iter().find(|d| d.name == name)
    }

    pub fn decision_index(&self, name: &str) -> Option<usize> {
        self.decisions.iter().position(|d| d.name == name)
    }

    pub fn option_counts(&self) -> Vec<usize> {
        self.decisions.iter().map(|d| d.options.len()).collect()
    }

    /// Product of the option counts. Saturates at `u128::MAX`, far beyond
    /// any grid that could be enumerated.
    pub fn grid_size(&self) -> u128 {
        self.decisions.iter().fold(1u128, |acc, d| acc.saturating_mul(d.options.len() as u128))
    }

    /// Decodes a grid position into option indices, first decision slowest.
    pub fn indices_at(&self, mut position: u128) -> Vec<usize> {
        let mut indices = vec![0; self.decisions.len()];
        for (slot, d) in indices.iter_mut().zip(&self.decisions).rev() {
            let k = d.options.len() as u128;
            *slot = (position % k) as usize;
            position /= k;
        }
        indices
    }

    /// Inverse of [`DecisionSpace::indices_at`].
    pub fn position_of(&self, indices: &[usize]) -> u128 {
        indices.iter().zip(&self.decisions).fold(0u128, |acc, (&i, d)| acc * d.options.len() as u128 + i as u128)
    }

    pub fn universe_at(&self, position: u128, global_seed: u64) -> Universe {
        self.universe_from_indices(self.indices_at(position), global_seed)
    }

    pub fn universe_from_indices(&self, indices: Vec<usize>, global_seed: u64) -> Universe {
        let assignments: BTreeMap<String, String> =
            self.decisions.iter().zip(&indices).map(|(d, &i)| (d.name.clone(), d.options[i].clone())).collect();
        let id = universe_id(assignments.iter().map(|(k, v)| (k.as_str(), v.as_str())));
        let seed = universe_seed(global_seed, &id);
        Universe { assignments, indices, id, seed }
    }

    /// Looks up a universe by its assignment map; fails if the map does not
    /// cover exactly this space's decisions with known options.
    pub fn universe_from_assignments(
        &self,
        assignments: &BTreeMap<String, String>,
        global_seed: u64,
    ) -> Result<Universe> {
        if assignments.len() != self.decisions.len() {
            return Err(Error::Space(format!(
                "assignment covers {} decisions, space has {}",
                assignments.len(),
                self.decisions.len()
            )));
        }
        let indices = self
            .decisions
            .iter()
            .map(|d| {
                let token = assignments
                    .get(&d.name)
                    .ok_or_else(|| Error::Space(format!("assignment lacks decision `{}`", d.name)))?;
                d.option_index(token)
                    .ok_or_else(|| Error::Space(format!("unknown option `{token}` for decision `{}`", d.name)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.universe_from_indices(indices, global_seed))
    }
}

/// Reads a decision-space document from JSON text.
pub fn parse_space(document: &str) -> Result<DecisionSpace> {
    serde_json::from_str(document).map_err(|e| Error::Space(e.to_string()))
}

pub fn load_space(path: &Path) -> Result<DecisionSpace> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Space(format!("{}: {e}", path.display())))?;
    parse_space(&text)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Universe {
    pub assignments: BTreeMap<String, String>,
    /// Option index per decision, in space order.
    pub indices: Vec<usize>,
    pub id: String,
    pub seed: u64,
}

impl Universe {
    /// The universe of `space` with the given option per decision.
    pub fn from_assignments(
        space: &DecisionSpace,
        assignments: BTreeMap<String, String>,
        global_seed: u64,
    ) -> Result<Universe> {
        if assignments.len() != space.len() {
            return Err(Error::Space(format!("{} assignments for {} decisions", assignments.len(), space.len())));
        }
        let indices = space
            .decisions()
            .iter()
            .map(|d| {
                assignments
                    .get(&d.name)
                    .and_then(|o| d.option_index(o))
                    .ok_or_else(|| Error::Space(format!("no valid option for `{}`", d.name)))
            })
            .collect::<Result<Vec<_>>>()?;
        let id = universe_id(assignments.iter().map(|(k, v)| (k.as_str(), v.as_str())));
        let seed = universe_seed(global_seed, &id);
        Ok(Universe { assignments, indices, id, seed })
    }

    pub fn option(&self, decision: &str) -> Option<&str> {
        self.assignments.get(decision).map(String::as_str)
    }
}

/// `name=option` lines sorted by decision name, joined with `\n`.
fn canonical_string<'a, I>(pairs: I) -> String
where
    I: IntoIterator<Item = (&'a str, &'a str)>,
{
    let mut pairs: Vec<(&str, &str)> = pairs.into_iter().collect();
    pairs.sort_unstable();
    pairs.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join("\n")
}

/// First 16 hex characters of the SHA-256 of the canonical assignment string.
pub fn universe_id<'a, I>(pairs: I) -> String
where
    I: IntoIterator<Item = (&'a str, &'a str)>,
{
    let digest = Sha256::digest(canonical_string(pairs).as_bytes());
    hex::encode(&digest[..8])
}

/// Low 64 bits (little-endian prefix) of SHA-256(global_seed_le || id).
pub fn universe_seed(global_seed: u64, id: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(global_seed.to_le_bytes());
    hasher.update(id.as_bytes());
    let digest = hasher.finalize();
    let mut low = [0u8; 8];
    low.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(low)
}

pub fn enumerate(space: &DecisionSpace, global_seed: u64) -> Result<Vec<Universe>> {
    enumerate_with_cap(space, global_seed, DEFAULT_GRID_CAP)
}

/// All universes in lexicographic order of option indices.
pub fn enumerate_with_cap(space: &DecisionSpace, global_seed: u64, cap: u64) -> Result<Vec<Universe>> {
    let size = space.grid_size();
    if size > cap as u128 {
        return Err(Error::GridCap { size, cap });
    }
    Ok((0..size).map(|p| space.universe_at(p, global_seed)).collect())
}

/// Uniform sample without replacement of `round(fraction * grid)` universes.
pub fn sample(space: &DecisionSpace, fraction: f64, sample_seed: u64, global_seed: u64) -> Result<Vec<Universe>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Space(format!("sample fraction {fraction} outside (0, 1]")));
    }
    let size = space.grid_size();
    if size > usize::MAX as u128 {
        return Err(Error::Space(format!("grid of {size} universes is too large to sample")));
    }
    let want = (fraction * size as f64).round();
    if want < 1.0 {
        return Err(Error::Space(format!("fraction {fraction} of {size} universes selects none")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sample_seed);
    let picked = rand::seq::index::sample(&mut rng, size as usize, want as usize);
    Ok(picked.into_iter().map(|p| space.universe_at(p as u128, global_seed)).collect())
}

/// The nine design decisions and three evaluation decisions of the
/// public-coverage case study.
pub mod presets {
    use super::*;

    pub const EXCLUDE_FEATURES: &str = "exclude_features";
    pub const EXCLUDE_SUBGROUPS: &str = "exclude_subgroups";
    pub const SCALE: &str = "scale";
    pub const PREPROCESS_AGE: &str = "preprocess_age";
    pub const PREPROCESS_INCOME: &str = "preprocess_income";
    pub const ENCODE_CATEGORICAL: &str = "encode_categorical";
    pub const MODEL: &str = "model";
    pub const STRATIFY_SPLIT: &str = "stratify_split";
    pub const CUTOFF: &str = "cutoff";

    pub const EVAL_FAIRNESS_GROUPING: &str = "eval_fairness_grouping";
    pub const EVAL_EXCLUDE_SUBGROUPS: &str = "eval_exclude_subgroups";
    pub const EVAL_ON_SUBSET: &str = "eval_on_subset";

    pub fn design_decisions() -> Vec<Decision> {
        use Category::*;
        vec![
            Decision::new(EXCLUDE_FEATURES, DataSelection, &["none", "race", "sex", "race-sex"]),
            Decision::new(
                EXCLUDE_SUBGROUPS,
                DataSelection,
                &["keep-all", "drop-smallest-1", "drop-smallest-2", "keep-largest-2", "drop-other"],
            ),
            Decision::new(SCALE, Preprocessing, &["do-not-scale", "scale"]),
            Decision::new(PREPROCESS_AGE, Preprocessing, &["none", "bins-10", "quantiles-3", "quantiles-4"]),
            Decision::new(PREPROCESS_INCOME, Preprocessing, &["none", "bins-10000", "quantiles-3", "quantiles-4"]),
            Decision::new(ENCODE_CATEGORICAL, Preprocessing, &["one-hot", "ordinal"]),
            Decision::new(MODEL, Modeling, &["logreg", "rf", "gbm", "elasticnet"]),
            Decision::new(STRATIFY_SPLIT, Modeling, &["none", "target", "protected-attribute", "both"]),
            Decision::new(CUTOFF, PostHoc, &["raw-0.5", "quantile-0.1", "quantile-0.25"]),
        ]
    }

    pub fn eval_decisions() -> Vec<Decision> {
        use Category::Evaluation;
        vec![
            Decision::new(EVAL_FAIRNESS_GROUPING, Evaluation, &["majority-minority", "separate"]),
            Decision::new(EVAL_EXCLUDE_SUBGROUPS, Evaluation, &["exclude-in-eval", "keep-in-eval"]),
            Decision::new(
                EVAL_ON_SUBSET,
                Evaluation,
                &[
                    "full",
                    "locality-largest-only",
                    "locality-most-privileged",
                    "locality-city-la",
                    "locality-city-sf",
                    "exclude-military",
                    "exclude-non-citizens",
                ],
            ),
        ]
    }

    /// The full 61440-universe design space.
    pub fn design_space() -> DecisionSpace {
        DecisionSpace::new(SpaceKind::Design, design_decisions()).expect("preset is valid")
    }

    /// The full 28-strategy evaluation space.
    pub fn eval_space() -> DecisionSpace {
        DecisionSpace::new(SpaceKind::Evaluation, eval_decisions()).expect("preset is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn universe_from_assignments_matches_the_grid() {
        let space = presets::design_space();
        let u = space.universe_at(12345, 9);
        let back = Universe::from_assignments(&space, u.assignments.clone(), 9).unwrap();
        assert_eq!(back, u);
        let mut partial = u.assignments.clone();
        partial.remove("model");
        assert!(Universe::from_assignments(&space, partial, 9).is_err());
        let mut bad = u.assignments;
        bad.insert("model".into(), "svm".into());
        assert!(Universe::from_assignments(&space, bad, 9).is_err());
    }

    fn space_with_counts(counts: &[usize]) -> DecisionSpace {
        let decisions = counts
            .iter()
            .enumerate()
            .map(|(i, &k)| Decision {
                name: format!("d{i}"),
                category: Category::Preprocessing,
                options: (0..k).map(|j| format!("o{j}")).collect(),
            })
            .collect();
        DecisionSpace::new(SpaceKind::Design, decisions).unwrap()
    }

    fn document(counts: &[usize], kind: &str) -> String {
        let decisions: Vec<serde_json::Value> = counts
            .iter()
            .enumerate()
            .map(|(i, &k)| {
                serde_json::json!({
                    "name": format!("decision_{i}"),
                    "category": if kind == "evaluation" { "evaluation" } else { "modeling" },
                    "options": (0..k).map(|j| format!("opt{j}")).collect::<Vec<_>>(),
                })
            })
            .collect();
        serde_json::json!({ "kind": kind, "decisions": decisions }).to_string()
    }

    #[test]
    fn parse_reports_grid_sizes() {
        let design = parse_space(&document(&[4, 5, 2, 4, 4, 2, 4, 4, 3], "design")).unwrap();
        assert_eq!(design.grid_size(), 61440);
        let eval = parse_space(&document(&[2, 2, 7], "evaluation")).unwrap();
        assert_eq!(eval.grid_size(), 28);
        assert_eq!(eval.kind(), SpaceKind::Evaluation);
        let single = parse_space(&document(&[1], "design")).unwrap();
        assert_eq!(single.grid_size(), 1);
    }

    #[test]
    fn parse_preserves_document_order() {
        let text = r#"{"kind":"design","decisions":[
            {"name":"zeta","category":"modeling","options":["b","a"]},
            {"name":"alpha","category":"post-hoc","options":["x"]}]}"#;
        let space = parse_space(text).unwrap();
        assert_eq!(space.decisions()[0].name, "zeta");
        assert_eq!(space.decisions()[0].options, vec!["b", "a"]);
        assert_eq!(space.decisions()[1].category, Category::PostHoc);
    }

    #[test]
    fn parse_errors() {
        let dup = r#"{"kind":"design","decisions":[
            {"name":"a","category":"modeling","options":["x"]},
            {"name":"a","category":"modeling","options":["y"]}]}"#;
        assert!(matches!(parse_space(dup), Err(Error::Space(m)) if m.contains("duplicate")));
        let empty = r#"{"kind":"design","decisions":[{"name":"a","category":"modeling","options":[]}]}"#;
        assert!(matches!(parse_space(empty), Err(Error::Space(m)) if m.contains("no options")));
        let cat = r#"{"kind":"design","decisions":[{"name":"a","category":"tuning","options":["x"]}]}"#;
        assert!(matches!(parse_space(cat), Err(Error::Space(_))));
    }

    #[test]
    fn enumerate_counts_and_order() {
        let space = space_with_counts(&[2, 3, 4]);
        let all = enumerate(&space, 7).unwrap();
        assert_eq!(all.len(), 24);
        assert_eq!(all[0].indices, vec![0, 0, 0]);
        assert_eq!(all[1].indices, vec![0, 0, 1]);
        assert_eq!(all[4].indices, vec![0, 1, 0]);
        assert_eq!(all[23].indices, vec![1, 2, 3]);
        for (p, u) in all.iter().enumerate() {
            assert_eq!(space.position_of(&u.indices), p as u128);
        }
    }

    #[test]
    fn enumerate_is_deterministic() {
        let space = space_with_counts(&[3, 3]);
        let a = enumerate(&space, 11).unwrap();
        let b = enumerate(&space, 11).unwrap();
        assert_eq!(a, b);
        let c = enumerate(&space, 12).unwrap();
        assert!(a.iter().zip(&c).all(|(x, y)| x.id == y.id && x.seed != y.seed));
    }

    #[test]
    fn enumerate_respects_cap() {
        let space = space_with_counts(&[10, 10, 10]);
        assert!(matches!(enumerate_with_cap(&space, 0, 999), Err(Error::GridCap { size: 1000, cap: 999 })));
    }

    #[test]
    fn preset_space_has_distinct_ids() {
        let space = presets::design_space();
        let all = enumerate(&space, 0).unwrap();
        assert_eq!(all.len(), 61440);
        let ids: HashSet<&str> = all.iter().map(|u| u.id.as_str()).collect();
        assert_eq!(ids.len(), 61440);
        let seeds: HashSet<u64> = all.iter().map(|u| u.seed).collect();
        assert_eq!(seeds.len(), 61440);
    }

    #[test]
    fn sample_sizes() {
        let space = presets::design_space();
        let s = sample(&space, 0.01, 3, 0).unwrap();
        assert_eq!(s.len(), 614);
        let again = sample(&space, 0.01, 3, 0).unwrap();
        assert_eq!(s, again);

        let small = space_with_counts(&[2, 3, 4]);
        let full = sample(&small, 1.0, 9, 5).unwrap();
        let mut got: Vec<String> = full.iter().map(|u| u.id.clone()).collect();
        let mut want: Vec<String> = enumerate(&small, 5).unwrap().into_iter().map(|u| u.id).collect();
        got.sort();
        want.sort();
        assert_eq!(got, want);

        assert!(sample(&small, 0.0, 1, 1).is_err());
        assert!(sample(&small, 1.5, 1, 1).is_err());
        assert!(sample(&small, 0.01, 1, 1).is_err());
    }

    #[test]
    fn id_is_order_free_and_stable() {
        let a = universe_id([("b", "2"), ("a", "1")]);
        let b = universe_id([("a", "1"), ("b", "2")]);
        assert_eq!(a, b);
        assert_eq!(a.len(), 16);
        assert_ne!(a, universe_id([("a", "1"), ("b", "3")]));
        let empty = universe_id(std::iter::empty());
        // SHA-256 of the empty string.
        assert_eq!(empty, "e3b0c44298fc1c14");
    }

    #[test]
    fn universe_from_assignments_round_trip() {
        let space = space_with_counts(&[2, 2]);
        let u = space.universe_at(3, 1);
        let back = space.universe_from_assignments(&u.assignments, 1).unwrap();
        assert_eq!(u, back);
        let mut bad = u.assignments.clone();
        bad.insert("d0".into(), "nope".into());
        assert!(space.universe_from_assignments(&bad, 1).is_err());
    }
}
