//! Agreement between importance estimates: correlation coefficients, the
//! subsample stability experiment, and cross-seed replication.
//!
//! Importance vectors are aligned by subset key; an effect missing from one
//! report counts as importance 0.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::importance::{forest_fanova, ForestConfig, ImportanceReport, ResponseTable};
use crate::stats;

/// Product-moment correlation, or `None` when either input is constant
/// or the lengths differ or are below 2.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (mx, my) = (stats::mean(x), stats::mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if !(sxx > 0.0 && syy > 0.0) {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Ranks starting at 1, ties sharing their mean rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        i = j;
    }
    ranks
}

pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() {
        return None;
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationStat {
    /// `None` marks an undefined coefficient (constant input).
    pub pearson: Option<f64>,
    pub spearman: Option<f64>,
}

impl CorrelationStat {
    pub fn between(x: &[f64], y: &[f64]) -> CorrelationStat {
        CorrelationStat { pearson: pearson(x, y), spearman: spearman(x, y) }
    }
}

fn importance_map(report: &ImportanceReport) -> BTreeMap<Vec<String>, f64> {
    report.entries.iter().map(|e| (e.subset.clone(), e.importance)).collect()
}

/// Two importance vectors over the union of their subset keys, zero-filled.
pub fn aligned_importances(a: &ImportanceReport, b: &ImportanceReport) -> (Vec<f64>, Vec<f64>) {
    let (ma, mb) = (importance_map(a), importance_map(b));
    let keys: BTreeSet<&Vec<String>> = ma.keys().chain(mb.keys()).collect();
    keys.into_iter().map(|k| (ma.get(k).copied().unwrap_or(0.0), mb.get(k).copied().unwrap_or(0.0))).unzip()
}

pub fn compare_reports(a: &ImportanceReport, b: &ImportanceReport) -> CorrelationStat {
    let (x, y) = aligned_importances(a, b);
    CorrelationStat::between(&x, &y)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityConfig {
    pub fractions: Vec<f64>,
    pub repetitions: usize,
    pub seed: u64,
    pub forest: ForestConfig,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        StabilityConfig {
            fractions: vec![0.01, 0.05, 0.10, 0.20],
            repetitions: 50,
            seed: 0,
            forest: ForestConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub fraction: f64,
    pub sample_size: usize,
    pub repetitions: usize,
    pub repetitions_ok: usize,
    pub mean_pearson: Option<f64>,
    pub sd_pearson: Option<f64>,
    pub mean_spearman: Option<f64>,
    pub sd_spearman: Option<f64>,
    /// Every correlation pair that was computed, in repetition order.
    pub samples: Vec<CorrelationStat>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub reference: ImportanceReport,
    pub rows: Vec<StabilityRow>,
}

impl StabilityReport {
    pub fn row(&self, fraction: f64) -> Option<&StabilityRow> {
        self.rows.iter().find(|r| r.fraction == fraction)
    }

    pub fn to_csv(&self) -> String {
        fn cell(v: Option<f64>) -> String {
            v.map_or_else(String::new, |x| x.to_string())
        }
        let mut out = String::from("fraction,repetitions_ok,mean_pearson,sd_pearson,mean_spearman,sd_spearman\n");
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.fraction,
                r.repetitions_ok,
                cell(r.mean_pearson),
                cell(r.sd_pearson),
                cell(r.mean_spearman),
                cell(r.sd_spearman)
            )
            .expect("string write");
        }
        out
    }
}

fn summarise(values: impl Iterator<Item = Option<f64>>) -> (Option<f64>, Option<f64>) {
    let defined: Vec<f64> = values.flatten().collect();
    if defined.is_empty() {
        (None, None)
    } else {
        (Some(stats::mean(&defined)), Some(stats::std_dev(&defined)))
    }
}

/// Correlates forest importances on random row subsets of `table` with the
/// importances on the whole table.
///
/// Subsample `r` of fraction `i` draws its rows from stream
/// `i * repetitions + r` of the seed, keeping table order, so results do not
/// depend on scheduling. Repetitions whose forest run fails are counted and
/// excluded.
pub fn subsample_stability(table: &ResponseTable, config: &StabilityConfig) -> Result<StabilityReport> {
    if config.repetitions < 2 {
        return Err(Error::Analysis("stability needs at least 2 repetitions".into()));
    }
    if let Some(f) = config.fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
        return Err(Error::Analysis(format!("fraction {f} outside (0, 1]")));
    }
    let reference = forest_fanova(table, &config.forest)?;
    let n = table.len();
    let jobs: Vec<(usize, usize)> =
        (0..config.fractions.len()).flat_map(|i| (0..config.repetitions).map(move |r| (i, r))).collect();
    let outcomes: Vec<std::result::Result<CorrelationStat, String>> = jobs
        .par_iter()
        .map(|&(i, r)| {
            let size = stats::round_count(config.fractions[i] * n as f64).min(n);
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream((i * config.repetitions + r) as u64);
            let mut rows = index::sample(&mut rng, n, size).into_vec();
            rows.sort_unstable();
            forest_fanova(&table.take(&rows), &config.forest)
                .map(|report| compare_reports(&reference, &report))
                .map_err(|e| format!("repetition {r}: {e}"))
        })
        .collect();
    let rows = config
        .fractions
        .iter()
        .enumerate()
        .map(|(i, &fraction)| {
            let chunk = &outcomes[i * config.repetitions..(i + 1) * config.repetitions];
            let samples: Vec<CorrelationStat> = chunk.iter().filter_map(|o| o.as_ref().ok().copied()).collect();
            let failures: Vec<String> = chunk.iter().filter_map(|o| o.as_ref().err().cloned()).collect();
            let (mean_pearson, sd_pearson) = summarise(samples.iter().map(|s| s.pearson));
            let (mean_spearman, sd_spearman) = summarise(samples.iter().map(|s| s.spearman));
            StabilityRow {
                fraction,
                sample_size: stats::round_count(fraction * n as f64).min(n),
                repetitions: config.repetitions,
                repetitions_ok: samples.len(),
                mean_pearson,
                sd_pearson,
                mean_spearman,
                sd_spearman,
                samples,
                failures,
            }
        })
        .collect();
    Ok(StabilityReport { reference, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairAgreement {
    pub a: usize,
    pub b: usize,
    #[serde(flatten)]
    pub stat: CorrelationStat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementMatrix {
    pub reports: usize,
    /// Unordered pairs `a < b`.
    pub pairs: Vec<PairAgreement>,
}

impl AgreementMatrix {
    pub fn get(&self, a: usize, b: usize) -> Option<&CorrelationStat> {
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        self.pairs.iter().find(|p| p.a == a && p.b == b).map(|p| &p.stat)
    }
}

/// Pairwise agreement of reports over the same decisions and effects.
pub fn replication_agreement(reports: &[ImportanceReport]) -> Result<AgreementMatrix> {
    if reports.len() < 2 {
        return Err(Error::Analysis("replication agreement needs at least 2 reports".into()));
    }
    let keys: Vec<BTreeSet<&Vec<String>>> =
        reports.iter().map(|r| r.entries.iter().map(|e| &e.subset).collect()).collect();
    for (i, r) in reports.iter().enumerate().skip(1) {
        if r.decisions != reports[0].decisions || keys[i] != keys[0] {
            return Err(Error::Analysis(format!("report {i} has different subset keys from report 0")));
        }
    }
    let mut pairs = Vec::new();
    for a in 0..reports.len() {
        for b in a + 1..reports.len() {
            pairs.push(PairAgreement { a, b, stat: compare_reports(&reports[a], &reports[b]) });
        }
    }
    Ok(AgreementMatrix { reports: reports.len(), pairs })
}
