//! Runs every universe of a manifest's design space through the pipeline,
//! evaluates each trained model under every evaluation strategy, and
//! persists the results.

mod manifest;
mod store;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use manifest::{example_subsets, DocRef, RunContext, RunManifest, SyntheticData};
pub use store::{
    csv_projection, read_results, ResultStore, StoreMeta, StrategyInfo, CSV_FILE, META_FILE, RESULTS_FILE, SHARD_DIR,
    TIMINGS_FILE,
};

use crate::data::TabularFrame;
use crate::decision_space::Universe;
use crate::error::{Error, MetricError, Result};
use crate::fairness::{evaluate, EvalStrategy, Performance};
use crate::importance::{exact_fanova, forest_fanova, ForestConfig, ImportanceReport};
use crate::models::{train, ModelSpec};
use crate::pipeline::{
    apply_binning, apply_encoder, apply_scaler, exclude_features, exclude_subgroups, fit_binning, fit_encoder,
    fit_scaler, split_frame, Cutoff, PipelineConfig, Scale,
};
use crate::robustness::{replication_agreement, AgreementMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorCode {
    EmptyEvalSet,
    MetricUndefined,
    DegenerateLabels,
    StageFailure,
}

impl ErrorCode {
    pub fn token(self) -> &'static str {
        match self {
            ErrorCode::EmptyEvalSet => "empty-eval-set",
            ErrorCode::MetricUndefined => "metric-undefined",
            ErrorCode::DegenerateLabels => "degenerate-labels",
            ErrorCode::StageFailure => "stage-failure",
        }
    }

    fn of(error: &Error) -> ErrorCode {
        match error {
            Error::Metric(MetricError::EmptyEvalSet) => ErrorCode::EmptyEvalSet,
            Error::Metric(MetricError::MetricUndefined) => ErrorCode::MetricUndefined,
            Error::Metric(MetricError::DegenerateLabels) => ErrorCode::DegenerateLabels,
            _ => ErrorCode::StageFailure,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "lowercase")]
pub enum Status {
    Ok,
    Error { code: ErrorCode, stage: String, message: String },
}

impl Status {
    fn failed(stage: &str, error: &Error) -> Status {
        Status::Error { code: ErrorCode::of(error), stage: stage.into(), message: error.to_string() }
    }

    pub fn is_ok(&self) -> bool {
        matches!(self, Status::Ok)
    }

    /// `ok` or the error code.
    pub fn token(&self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::Error { code, .. } => code.token(),
        }
    }
}

/// Metrics of one universe's model under one evaluation strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyResult {
    pub strategy: String,
    pub status: Status,
    pub eq_odds_diff: Option<f64>,
    pub f1: Option<f64>,
    pub accuracy: Option<f64>,
    pub balanced_accuracy: Option<f64>,
    pub n_rows: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniverseResult {
    pub id: String,
    pub options: BTreeMap<String, String>,
    pub seed: u64,
    pub status: Status,
    /// Under the reference strategy: separate groups, full test set.
    pub performance: Option<Performance>,
    pub eq_odds_diff: Option<f64>,
    pub tpr_diff: Option<f64>,
    pub fpr_diff: Option<f64>,
    /// One entry per evaluation strategy, in grid order.
    pub evals: Vec<StrategyResult>,
    pub dropped_train_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dropped_groups: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl UniverseResult {
    pub fn strategy_values(&self) -> Vec<Option<f64>> {
        self.evals.iter().map(|e| e.eq_odds_diff).collect()
    }
}

struct Scored {
    test: TabularFrame,
    scores: Vec<f64>,
    cutoff: Cutoff,
    dropped_groups: Vec<String>,
    dropped_fraction: f64,
    warnings: Vec<String>,
}

type Staged<T> = std::result::Result<T, (&'static str, Error)>;

trait Stage<T> {
    fn at(self, stage: &'static str) -> Staged<T>;
}

impl<T> Stage<T> for Result<T> {
    fn at(self, stage: &'static str) -> Staged<T> {
        self.map_err(|e| (stage, e))
    }
}

fn run_pipeline(ctx: &RunContext, universe: &Universe) -> Staged<Scored> {
    let m = &ctx.manifest;
    let config = PipelineConfig::from_options(&universe.assignments, &m.fixed_options, m.test_fraction).at("config")?;
    let mut warnings = Vec::new();

    let features = exclude_features(&ctx.frame, config.exclude_features, &m.bindings).at("exclude_features")?;
    let (train_full, test, split) =
        split_frame(&ctx.frame, config.test_fraction, config.stratify_split, universe.seed ^ 1).at("split")?;
    warnings.extend(split.warnings);
    let (mut train_frame, exclusion) =
        exclude_subgroups(&train_full, config.exclude_subgroups, m.bindings.drop_other_category.as_deref())
            .at("exclude_subgroups")?;
    let mut test_frame = test.clone();

    let mut binned = Vec::new();
    for (column, mode) in
        [(&m.bindings.age, config.preprocess_age.bin_mode()), (&m.bindings.income, config.preprocess_income.bin_mode())]
    {
        let Some(mode) = mode else { continue };
        if !features.contains(column) {
            continue;
        }
        let spec = fit_binning(&train_frame, column, mode).at("binning")?;
        warnings.extend(spec.warnings.iter().cloned());
        train_frame = apply_binning(&spec, &train_frame).at("binning")?;
        test_frame = apply_binning(&spec, &test_frame).at("binning")?;
        binned.push(column.clone());
    }

    if config.scale == Scale::Scale {
        let numeric: Vec<String> = features
            .iter()
            .filter(|f| !binned.contains(f) && train_frame.column(f).is_some_and(|c| c.as_numeric().is_some()))
            .cloned()
            .collect();
        let params = fit_scaler(&train_frame, &numeric).at("scale")?;
        warnings.extend(params.constant_columns().map(|c| format!("column `{c}` is constant in training data")));
        train_frame = apply_scaler(&params, &train_frame).at("scale")?;
        test_frame = apply_scaler(&params, &test_frame).at("scale")?;
    }

    let encoder = fit_encoder(&train_frame, &features, config.encode_categorical).at("encode")?;
    let x_train = apply_encoder(&encoder, &train_frame).at("encode")?;
    let x_test = apply_encoder(&encoder, &test_frame).at("encode")?;

    let spec = ModelSpec::new(config.model, &m.model_params);
    let model = train(&spec, &x_train, &train_frame.target(), universe.seed ^ 2).at("train")?;
    warnings.extend(model.warnings.iter().cloned());
    let scores = model.predict_scores(&x_test).at("predict")?;
    Ok(Scored {
        test,
        scores,
        cutoff: config.cutoff,
        dropped_groups: exclusion.dropped_groups,
        dropped_fraction: exclusion.dropped_fraction,
        warnings,
    })
}

fn strategy_result(strategy: &EvalStrategy, outcome: Result<crate::fairness::MetricBundle>) -> StrategyResult {
    match outcome {
        Ok(b) => StrategyResult {
            strategy: strategy.id.clone(),
            status: Status::Ok,
            eq_odds_diff: Some(b.eq_odds_diff),
            f1: Some(b.f1),
            accuracy: Some(b.accuracy),
            balanced_accuracy: b.balanced_accuracy,
            n_rows: Some(b.n_rows),
        },
        Err(e) => StrategyResult {
            strategy: strategy.id.clone(),
            status: Status::failed("evaluate", &e),
            eq_odds_diff: None,
            f1: None,
            accuracy: None,
            balanced_accuracy: None,
            n_rows: None,
        },
    }
}

/// Trains and evaluates one universe. Failures are recorded in the result,
/// never returned.
pub fn run_universe(ctx: &RunContext, universe: &Universe) -> UniverseResult {
    let mut result = UniverseResult {
        id: universe.id.clone(),
        options: universe.assignments.clone(),
        seed: universe.seed,
        status: Status::Ok,
        performance: None,
        eq_odds_diff: None,
        tpr_diff: None,
        fpr_diff: None,
        evals: Vec::new(),
        dropped_train_fraction: None,
        dropped_groups: Vec::new(),
        warnings: Vec::new(),
    };
    let scored = match run_pipeline(ctx, universe) {
        Ok(s) => s,
        Err((stage, e)) => {
            result.status = Status::failed(stage, &e);
            result.evals = ctx
                .strategies
                .iter()
                .map(|s| StrategyResult {
                    strategy: s.id.clone(),
                    status: Status::failed(stage, &e),
                    eq_odds_diff: None,
                    f1: None,
                    accuracy: None,
                    balanced_accuracy: None,
                    n_rows: None,
                })
                .collect();
            return result;
        }
    };
    result.dropped_train_fraction = Some(scored.dropped_fraction);
    result.dropped_groups = scored.dropped_groups.clone();
    result.warnings = scored.warnings.clone();
    let eval = |s: &EvalStrategy| {
        evaluate(&scored.test, &scored.scores, scored.cutoff, s, &scored.dropped_groups, &ctx.eval_ctx)
    };
    match eval(&EvalStrategy::reference()) {
        Ok(b) => {
            result.performance =
                Some(Performance { f1: b.f1, accuracy: b.accuracy, balanced_accuracy: b.balanced_accuracy });
            result.eq_odds_diff = Some(b.eq_odds_diff);
            result.tpr_diff = b.tpr_diff;
            result.fpr_diff = b.fpr_diff;
            result.warnings.extend(b.warnings);
        }
        Err(e) => result.status = Status::failed("evaluate", &e),
    }
    result.evals = ctx.strategies.iter().map(|s| strategy_result(s, eval(s))).collect();
    result
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Stop after this many new universes (the store is still finalized,
    /// and a later run resumes from it).
    pub max_new: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub universes: usize,
    pub new: usize,
    pub resumed: usize,
    pub pending: usize,
    pub ok: usize,
    pub errors: usize,
    pub strategy_rows: usize,
}

fn store_meta(ctx: &RunContext) -> StoreMeta {
    StoreMeta {
        design: ctx.design.clone(),
        eval: ctx.eval.clone(),
        strategies: ctx
            .strategies
            .iter()
            .map(|s| StrategyInfo { id: s.id.clone(), assignments: s.assignments.clone() })
            .collect(),
        global_seed: ctx.manifest.global_seed,
        test_fraction: ctx.manifest.test_fraction,
        universes: 0,
        ok: 0,
        errors: 0,
    }
}

/// Runs the manifest's universes into its output directory.
pub fn run_multiverse(ctx: &RunContext) -> Result<RunSummary> {
    run_multiverse_in(ctx, &ctx.manifest.output_path(), &RunOptions::default())
}

/// Runs into `dir`, skipping universes already persisted there. The final
/// files depend only on the manifest, not on worker count or timing.
pub fn run_multiverse_in(ctx: &RunContext, dir: &Path, options: &RunOptions) -> Result<RunSummary> {
    std::fs::create_dir_all(dir)?;
    let meta = store_meta(ctx);
    let meta_path = dir.join(META_FILE);
    if meta_path.exists() {
        let text = std::fs::read_to_string(&meta_path)?;
        let old: StoreMeta =
            serde_json::from_str(&text).map_err(|e| Error::Store(format!("{}: {e}", meta_path.display())))?;
        if old.design != meta.design || old.eval != meta.eval || old.global_seed != meta.global_seed {
            return Err(Error::Store(format!("{} holds a run of a different manifest", dir.display())));
        }
    }
    let universes = ctx.universes()?;
    let mut persisted = store::load_persisted(dir)?;
    let wanted: std::collections::BTreeSet<&str> = universes.iter().map(|u| u.id.as_str()).collect();
    persisted.results.retain(|id, _| wanted.contains(id.as_str()));
    // fold leftovers of an interrupted run in before new shards are opened
    store::finalize(dir, meta.clone(), &persisted)?;
    let resumed = persisted.results.len();
    let mut pending: Vec<&Universe> = universes.iter().filter(|u| !persisted.results.contains_key(&u.id)).collect();
    let remaining = pending.len();
    if let Some(k) = options.max_new {
        pending.truncate(k);
    }

    let workers = if ctx.manifest.workers == 0 { rayon::current_num_threads() } else { ctx.manifest.workers };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Store(format!("cannot start {workers} workers: {e}")))?;
    let shards = store::ShardWriter::open(dir, workers)?;
    pool.install(|| {
        pending.par_iter().try_for_each(|u| {
            let start = Instant::now();
            let result = run_universe(ctx, u);
            let wall_ms = start.elapsed().as_millis() as u64;
            shards.append(rayon::current_thread_index().unwrap_or(0), &result, wall_ms)
        })
    })?;
    drop(shards);

    let persisted = store::load_persisted(dir)?;
    store::finalize(dir, meta, &persisted)?;
    let store = ResultStore::load(dir)?;
    let ok = store.ok().count();
    Ok(RunSummary {
        output_dir: dir.to_path_buf(),
        universes: store.results.len(),
        new: pending.len(),
        resumed,
        pending: remaining - pending.len(),
        ok,
        errors: store.results.len() - ok,
        strategy_rows: store.results.len() * store.meta.strategies.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImportanceMethod {
    /// Exact on a complete grid of ok universes, forest otherwise.
    #[default]
    Auto,
    Exact,
    Forest,
}

/// Decision importance for the store's study fairness metric.
pub fn store_importance(
    store: &ResultStore,
    method: ImportanceMethod,
    forest: &ForestConfig,
) -> Result<ImportanceReport> {
    let table = store.response_table()?;
    let complete = table.grid_cells() == Some(table.len());
    match method {
        ImportanceMethod::Exact => exact_fanova(&table, forest.max_order),
        ImportanceMethod::Auto if complete => exact_fanova(&table, forest.max_order),
        _ => forest_fanova(&table, forest),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationReport {
    pub seeds: Vec<u64>,
    pub runs: Vec<RunSummary>,
    pub importance: Vec<ImportanceReport>,
    pub agreement: AgreementMatrix,
}

/// Full runs differing only in the global seed, each under
/// `<output>/seed-<seed>`, with the pairwise agreement of their importances.
pub fn replicate(
    ctx: &RunContext,
    seeds: &[u64],
    method: ImportanceMethod,
    forest: &ForestConfig,
) -> Result<ReplicationReport> {
    if seeds.len() < 2 {
        return Err(Error::Manifest("replication needs at least two seeds".into()));
    }
    let mut runs = Vec::new();
    let mut importance = Vec::new();
    for &seed in seeds {
        let run_ctx = ctx.with_seed(seed);
        let dir = ctx.manifest.output_path().join(format!("seed-{seed}"));
        let summary = run_multiverse_in(&run_ctx, &dir, &RunOptions::default())?;
        importance.push(store_importance(&ResultStore::load(&dir)?, method, forest)?);
        runs.push(summary);
    }
    let agreement = replication_agreement(&importance)?;
    Ok(ReplicationReport { seeds: seeds.to_vec(), runs, importance, agreement })
}
