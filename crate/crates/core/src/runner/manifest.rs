use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::data::{load_csv, synthesize, GeneratorSpec, RowPredicate, Schema, TabularFrame};
use crate::decision_space::{enumerate, presets, sample, DecisionSpace, SpaceKind, Universe};
use crate::error::{Error, Result};
use crate::fairness::{enumerate_eval_strategies, EvalContext, EvalStrategy, SubsetFilter};
use crate::models::{ModelDefaults, ModelKind, ModelSpec};
use crate::pipeline::{validate_design_space, ColumnBindings, DEFAULT_TEST_FRACTION};

/// A document given inline or as a path. Paths are relative to the
/// manifest's directory; `preset:design` and `preset:eval` name the
/// built-in spaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DocRef<T> {
    Path(PathBuf),
    Inline(T),
}

impl<T: DeserializeOwned + Clone> DocRef<T> {
    fn resolve(&self, base: &Path, what: &str) -> Result<T> {
        match self {
            DocRef::Inline(v) => Ok(v.clone()),
            DocRef::Path(p) => {
                let path = base.join(p);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| Error::Manifest(format!("{what} {}: {e}", path.display())))?;
                serde_json::from_str(&text).map_err(|e| Error::Manifest(format!("{what} {}: {e}", path.display())))
            }
        }
    }
}

fn resolve_space(r: &DocRef<DecisionSpace>, base: &Path, what: &str) -> Result<DecisionSpace> {
    match r {
        DocRef::Path(p) if p.as_os_str() == "preset:design" => Ok(presets::design_space()),
        DocRef::Path(p) if p.as_os_str() == "preset:eval" => Ok(presets::eval_space()),
        other => other.resolve(base, what),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticData {
    pub spec: DocRef<GeneratorSpec>,
    #[serde(default)]
    pub seed: u64,
}

fn default_test_fraction() -> f64 {
    DEFAULT_TEST_FRACTION
}

fn default_workers() -> usize {
    1
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    /// CSV file; needs `schema`. Ignored when `synthetic` is set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticData>,
    #[serde(default)]
    pub bindings: ColumnBindings,
    pub design_space: DocRef<DecisionSpace>,
    pub eval_space: DocRef<DecisionSpace>,
    #[serde(default)]
    pub global_seed: u64,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_fraction: Option<f64>,
    #[serde(default)]
    pub sample_seed: u64,
    /// Worker threads; 0 uses every core.
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub replication_seeds: Vec<u64>,
    #[serde(default)]
    pub freeze_cutoff_on_full_test: bool,
    /// Options for design decisions that are not part of the space.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub fixed_options: BTreeMap<String, String>,
    /// Row filter for each evaluation subset option other than `full`.
    #[serde(default)]
    pub subsets: BTreeMap<String, SubsetFilter>,
    #[serde(default)]
    pub model_params: ModelDefaults,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<RunManifest> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
        let mut m: RunManifest =
            serde_json::from_str(&text).map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
        m.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(m)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Synthetic data, the built-in spaces and subset filters matching the
    /// generator's auxiliary columns.
    pub fn example(n: usize) -> RunManifest {
        RunManifest {
            dataset: None,
            schema: None,
            synthetic: Some(SyntheticData { spec: DocRef::Inline(GeneratorSpec::example(n)), seed: 0 }),
            bindings: ColumnBindings::default(),
            design_space: DocRef::Path("preset:design".into()),
            eval_space: DocRef::Path("preset:eval".into()),
            global_seed: 0,
            test_fraction: DEFAULT_TEST_FRACTION,
            sample_fraction: None,
            sample_seed: 0,
            workers: 1,
            output_dir: default_output_dir(),
            replication_seeds: vec![],
            freeze_cutoff_on_full_test: false,
            fixed_options: BTreeMap::new(),
            subsets: example_subsets(),
            model_params: ModelDefaults::default(),
            base_dir: PathBuf::new(),
        }
    }

    /// Design and evaluation spaces, without loading any data.
    pub fn spaces(&self) -> Result<(DecisionSpace, DecisionSpace)> {
        Ok((
            resolve_space(&self.design_space, &self.base_dir, "design space")?,
            resolve_space(&self.eval_space, &self.base_dir, "evaluation space")?,
        ))
    }

    pub fn output_path(&self) -> PathBuf {
        self.base_dir.join(&self.output_dir)
    }

    pub fn load_frame(&self) -> Result<TabularFrame> {
        if let Some(s) = &self.synthetic {
            let spec = s.spec.resolve(&self.base_dir, "generator spec")?;
            return synthesize(&spec, s.seed);
        }
        let (Some(data), Some(schema)) = (&self.dataset, &self.schema) else {
            return Err(Error::Manifest("manifest needs `dataset` and `schema`, or `synthetic`".into()));
        };
        let schema = Schema::load(&self.base_dir.join(schema))?;
        load_csv(&self.base_dir.join(data), &schema)
    }
}

/// Filters for the built-in evaluation subsets over the example
/// generator's columns.
pub fn example_subsets() -> BTreeMap<String, SubsetFilter> {
    let predicates = |p: RowPredicate| SubsetFilter::Predicates { predicates: vec![p] };
    [
        ("locality-largest-only", SubsetFilter::LargestCategory { column: "region".into() }),
        (
            "locality-most-privileged",
            SubsetFilter::MostPrivilegedCategory { column: "region".into(), by: Some("income".into()) },
        ),
        ("locality-city-la", predicates(RowPredicate::equals("county", "los-angeles"))),
        ("locality-city-sf", predicates(RowPredicate::equals("county", "san-francisco"))),
        ("exclude-military", predicates(RowPredicate::not_equals("military", "active"))),
        ("exclude-non-citizens", predicates(RowPredicate::not_equals("citizenship", "non-citizen"))),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

/// A manifest with its data loaded and spaces resolved.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub manifest: RunManifest,
    pub frame: TabularFrame,
    pub design: DecisionSpace,
    pub eval: DecisionSpace,
    pub strategies: Vec<EvalStrategy>,
    pub eval_ctx: EvalContext,
}

impl RunContext {
    pub fn new(manifest: RunManifest) -> Result<RunContext> {
        let frame = manifest.load_frame()?;
        RunContext::with_frame(manifest, frame)
    }

    pub fn with_frame(manifest: RunManifest, frame: TabularFrame) -> Result<RunContext> {
        let (design, eval) = manifest.spaces()?;
        if design.kind() != SpaceKind::Design {
            return Err(Error::Manifest("`design_space` must have kind `design`".into()));
        }
        validate_design_space(&design).map_err(|e| Error::Manifest(e.to_string()))?;
        if let Some(name) = manifest.fixed_options.keys().find(|k| design.decision(k).is_some()) {
            return Err(Error::Manifest(format!("`{name}` is both a design decision and a fixed option")));
        }
        if !(manifest.test_fraction > 0.0 && manifest.test_fraction < 1.0) {
            return Err(Error::Manifest(format!("test_fraction {} outside (0, 1)", manifest.test_fraction)));
        }
        let bindings = &manifest.bindings;
        for name in [bindings.race.as_ref(), bindings.sex.as_ref(), Some(&bindings.age), Some(&bindings.income)]
            .into_iter()
            .flatten()
        {
            frame.require(name).map_err(|_| Error::Manifest(format!("bound column `{name}` is not in the data")))?;
        }
        let strategies = enumerate_eval_strategies(&eval)?;
        let eval_ctx = EvalContext::new(&frame, &manifest.subsets, manifest.freeze_cutoff_on_full_test)?;
        eval_ctx.check_strategies(&strategies)?;
        for kind in ModelKind::ALL {
            ModelSpec::new(kind, &manifest.model_params).validate().map_err(|e| Error::Manifest(e.to_string()))?;
        }
        Ok(RunContext { manifest, frame, design, eval, strategies, eval_ctx })
    }

    /// The universes this manifest runs: the whole grid, or a sample.
    pub fn universes(&self) -> Result<Vec<Universe>> {
        let seed = self.manifest.global_seed;
        let mut out = match self.manifest.sample_fraction {
            None => enumerate(&self.design, seed)?,
            Some(f) => sample(&self.design, f, self.manifest.sample_seed, seed)?,
        };
        out.sort_by(|a, b| a.id.cmp(&b.id));
        Ok(out)
    }

    /// The same context under another global seed.
    pub fn with_seed(&self, global_seed: u64) -> RunContext {
        let mut c = self.clone();
        c.manifest.global_seed = global_seed;
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_manifest_round_trips() {
        let m = RunManifest::example(300);
        let text = m.to_json().unwrap();
        let back: RunManifest = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
        assert!(text.contains("\"design_space\": \"preset:design\""));
    }

    #[test]
    fn example_context_resolves() {
        let ctx = RunContext::new(RunManifest::example(400)).unwrap();
        assert_eq!(ctx.design.grid_size(), 61440);
        assert_eq!(ctx.strategies.len(), 28);
        assert_eq!(ctx.eval_ctx.subsets.len(), 7);
    }

    #[test]
    fn bad_manifests_are_refused() {
        let mut m = RunManifest::example(200);
        m.subsets.remove("locality-city-sf");
        assert!(RunContext::new(m).unwrap_err().to_string().contains("locality-city-sf"));

        let mut m = RunManifest::example(200);
        m.fixed_options.insert("model".into(), "rf".into());
        assert!(RunContext::new(m).is_err());

        let mut m = RunManifest::example(200);
        m.bindings.income = "salary".into();
        assert!(RunContext::new(m).is_err());

        let m = RunManifest { synthetic: None, ..RunManifest::example(200) };
        assert!(matches!(RunContext::new(m), Err(Error::Manifest(_))));

        let unknown = r#"{"design_space": "preset:design", "eval_space": "preset:eval", "colour": 1}"#;
        assert!(serde_json::from_str::<RunManifest>(unknown).is_err());
    }
}
