//! Summary statistics of a result store and the explorer bundle.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::decision_space::{presets, Decision};
use crate::error::{Error, Result};
use crate::fairness::{spread_stats, EvalStrategy, FULL_SUBSET};
use crate::importance::{rank, ImportanceReport};
use crate::robustness::pearson;
use crate::runner::{ResultStore, UniverseResult};
use crate::stats;

pub const HISTOGRAM_BINS: usize = 20;

/// The quantities a summary is computed from, one per universe.
#[derive(Debug, Clone, PartialEq)]
struct UniverseRow {
    ok: bool,
    status: String,
    eq_odds_diff: Option<f64>,
    f1: Option<f64>,
    accuracy: Option<f64>,
    balanced_accuracy: Option<f64>,
    evals: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricRange {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpreadSummary {
    /// Models with at least two defined strategy values.
    pub models: usize,
    pub mean_delta: Option<f64>,
    pub max_delta: Option<f64>,
    pub fraction_delta_one: Option<f64>,
    pub fraction_delta_at_least_0_9: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub universes: usize,
    pub ok: usize,
    /// Universe count per status token.
    pub status_counts: BTreeMap<String, usize>,
    pub eq_odds_diff: Option<MetricRange>,
    /// Counts over `[0, 1]` in equal-width bins; the last bin is closed.
    pub histogram: Vec<usize>,
    /// Pearson correlation of each performance metric with the fairness
    /// metric over ok universes; `None` when undefined.
    pub correlation_with_fairness: BTreeMap<String, Option<f64>>,
    pub spread: SpreadSummary,
}

fn histogram_bin(v: f64) -> usize {
    ((v * HISTOGRAM_BINS as f64).floor().max(0.0) as usize).min(HISTOGRAM_BINS - 1)
}

fn summarise_rows(rows: &[UniverseRow]) -> SummaryStats {
    let ok: Vec<&UniverseRow> = rows.iter().filter(|r| r.ok).collect();
    let mut status_counts = BTreeMap::new();
    for r in rows {
        *status_counts.entry(r.status.clone()).or_insert(0) += 1;
    }
    let eq: Vec<f64> = ok.iter().filter_map(|r| r.eq_odds_diff).collect();
    let eq_odds_diff = (!eq.is_empty()).then(|| MetricRange {
        min: eq.iter().copied().fold(f64::INFINITY, f64::min),
        max: eq.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean: stats::mean(&eq),
    });
    let mut histogram = vec![0; HISTOGRAM_BINS];
    for &v in &eq {
        histogram[histogram_bin(v)] += 1;
    }
    let mut correlation_with_fairness = BTreeMap::new();
    let metrics: [(&str, fn(&UniverseRow) -> Option<f64>); 3] =
        [("f1", |r| r.f1), ("accuracy", |r| r.accuracy), ("balanced_accuracy", |r| r.balanced_accuracy)];
    for (name, get) in metrics {
        let (x, y): (Vec<f64>, Vec<f64>) = ok.iter().filter_map(|r| Some((get(r)?, r.eq_odds_diff?))).unzip();
        correlation_with_fairness.insert(name.to_string(), pearson(&x, &y));
    }
    let deltas: Vec<f64> = rows.iter().filter_map(|r| spread_stats(&r.evals).ok()).map(|s| s.delta).collect();
    let fraction = |pred: fn(f64) -> bool| {
        (!deltas.is_empty()).then(|| deltas.iter().filter(|&&d| pred(d)).count() as f64 / deltas.len() as f64)
    };
    let spread = SpreadSummary {
        models: deltas.len(),
        mean_delta: (!deltas.is_empty()).then(|| stats::mean(&deltas)),
        max_delta: deltas.iter().copied().reduce(f64::max),
        fraction_delta_one: fraction(|d| d == 1.0),
        fraction_delta_at_least_0_9: fraction(|d| d >= 0.9),
    };
    SummaryStats {
        universes: rows.len(),
        ok: ok.len(),
        status_counts,
        eq_odds_diff,
        histogram,
        correlation_with_fairness,
        spread,
    }
}

fn row_of(r: &UniverseResult) -> UniverseRow {
    let perf = r.performance;
    UniverseRow {
        ok: r.status.is_ok(),
        status: r.status.token().to_string(),
        eq_odds_diff: r.eq_odds_diff,
        f1: perf.map(|p| p.f1),
        accuracy: perf.map(|p| p.accuracy),
        balanced_accuracy: perf.and_then(|p| p.balanced_accuracy),
        evals: r.strategy_values(),
    }
}

pub fn summarize(store: &ResultStore) -> SummaryStats {
    summarise_rows(&store.results.iter().map(row_of).collect::<Vec<_>>())
}

/// The same statistics from the CSV projection alone. Each universe's
/// study values are read from its reference-strategy row.
pub fn summarize_csv(text: &str) -> Result<SummaryStats> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    let col = |name: &str| header.iter().position(|h| h == name);
    let need = |name: &str| col(name).ok_or_else(|| Error::Store(format!("csv lacks column `{name}`")));
    let (id, eq, f1, acc, bacc, status) = (
        need("universe_id")?,
        need("eq_odds_diff")?,
        need("f1")?,
        need("accuracy")?,
        need("balanced_accuracy")?,
        need("status")?,
    );
    let reference = EvalStrategy::reference();
    let reference_cols: Vec<(usize, String)> = [
        (presets::EVAL_FAIRNESS_GROUPING, "separate"),
        (presets::EVAL_EXCLUDE_SUBGROUPS, "keep-in-eval"),
        (presets::EVAL_ON_SUBSET, reference.subset.as_str()),
    ]
    .into_iter()
    .filter_map(|(name, value)| col(name).map(|i| (i, value.to_string())))
    .collect();
    let num = |s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse().map(Some).map_err(|_| Error::Store(format!("bad number `{s}` in csv")))
        }
    };
    let mut by_id: BTreeMap<String, (Option<UniverseRow>, Vec<Option<f64>>)> = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let entry = by_id.entry(record[id].to_string()).or_default();
        let value = num(&record[eq])?;
        entry.1.push(value);
        if reference_cols.iter().all(|(i, v)| &record[*i] == v) {
            let ok = &record[status] == "ok";
            entry.0 = Some(UniverseRow {
                ok,
                status: String::new(),
                eq_odds_diff: value,
                f1: num(&record[f1])?,
                accuracy: num(&record[acc])?,
                balanced_accuracy: num(&record[bacc])?,
                evals: vec![],
            });
            if !ok {
                entry.0.as_mut().expect("just set").status = record[status].to_string();
            }
        }
    }
    let rows = by_id
        .into_iter()
        .map(|(id, (row, evals))| {
            let mut row = row.ok_or_else(|| Error::Store(format!("universe {id} has no reference-strategy row")))?;
            if row.ok {
                row.status = "ok".into();
            }
            row.evals = evals;
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarise_rows(&rows))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleMetrics {
    pub eq_odds_diff: Option<f64>,
    pub f1: Option<f64>,
    pub accuracy: Option<f64>,
    pub balanced_accuracy: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleEval {
    pub strategy: BTreeMap<String, String>,
    #[serde(default)]
    pub reference: bool,
    pub eq_odds_diff: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleUniverse {
    pub id: String,
    pub options: BTreeMap<String, String>,
    pub metrics: BundleMetrics,
    pub evals: Vec<BundleEval>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleEffect {
    pub subset: Vec<String>,
    pub effect_type: String,
    pub importance: f64,
    pub std_dev: f64,
}

/// Everything the explorer shows, in one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplorerBundle {
    pub decisions: Vec<Decision>,
    pub eval_decisions: Vec<Decision>,
    pub universes: Vec<BundleUniverse>,
    pub importance: Vec<BundleEffect>,
    pub summary: SummaryStats,
}

pub fn explorer_bundle(store: &ResultStore, importance: Option<&ImportanceReport>) -> Result<ExplorerBundle> {
    let meta = &store.meta;
    let names: Vec<String> = meta.design.decisions().iter().map(|d| d.name.clone()).collect();
    if let Some(report) = importance {
        if report.decisions != names {
            return Err(Error::Analysis(format!(
                "importance report covers decisions {:?}, store has {:?}",
                report.decisions, names
            )));
        }
    }
    let reference: Vec<bool> = meta
        .strategies
        .iter()
        .map(|s| {
            s.assignments.iter().all(|(k, v)| match k.as_str() {
                presets::EVAL_FAIRNESS_GROUPING => v == "separate",
                presets::EVAL_EXCLUDE_SUBGROUPS => v == "keep-in-eval",
                presets::EVAL_ON_SUBSET => v == FULL_SUBSET,
                _ => false,
            })
        })
        .collect();
    let universes = store
        .results
        .iter()
        .map(|r| BundleUniverse {
            id: r.id.clone(),
            options: r.options.clone(),
            metrics: BundleMetrics {
                eq_odds_diff: r.eq_odds_diff,
                f1: r.performance.map(|p| p.f1),
                accuracy: r.performance.map(|p| p.accuracy),
                balanced_accuracy: r.performance.and_then(|p| p.balanced_accuracy),
                status: r.status.token().to_string(),
            },
            evals: r
                .evals
                .iter()
                .zip(&meta.strategies)
                .zip(&reference)
                .map(|((e, s), &reference)| BundleEval {
                    strategy: s.assignments.clone(),
                    reference,
                    eq_odds_diff: e.eq_odds_diff,
                    status: e.status.token().to_string(),
                })
                .collect(),
        })
        .collect();
    let importance = importance
        .map(|report| {
            rank(report, report.entries.len())
                .into_iter()
                .map(|e| BundleEffect {
                    effect_type: e.effect_type(),
                    subset: e.subset,
                    importance: e.importance,
                    std_dev: e.std_dev,
                })
                .collect()
        })
        .unwrap_or_default();
    Ok(ExplorerBundle {
        decisions: meta.design.decisions().to_vec(),
        eval_decisions: meta.eval.decisions().to_vec(),
        universes,
        importance,
        summary: summarize(store),
    })
}

/// Writes the bundle as one JSON document.
pub fn export_explorer_bundle(store: &ResultStore, importance: Option<&ImportanceReport>, out: &Path) -> Result<()> {
    let bundle = explorer_bundle(store, importance)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(out, serde_json::to_string(&bundle)? + "\n")?;
    Ok(())
}
