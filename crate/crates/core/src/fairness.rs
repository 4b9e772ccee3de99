//! Group confusion statistics, the equalized odds difference, performance
//! metrics and the evaluation strategies applied to a fixed model's scores.
//!
//! Groups whose true positive (or false positive) rate is undefined are
//! left out of that component's extremes and reported in the bundle's
//! warnings. The metric is an error only when neither component has two
//! defined groups.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{ColumnData, RowPredicate, TabularFrame};
use crate::decision_space::{enumerate, presets, DecisionSpace, SpaceKind};
use crate::error::{Error, MetricError, Result};
use crate::pipeline::{cutoff_threshold, predict_with_threshold, Cutoff};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRates {
    pub group: String,
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tpr: Option<f64>,
    pub fpr: Option<f64>,
}

impl GroupRates {
    fn from_counts(group: String, tp: u64, fp: u64, tn: u64, fn_: u64) -> GroupRates {
        let rate = |a: u64, b: u64| (a + b > 0).then(|| a as f64 / (a + b) as f64);
        GroupRates { group, tp, fp, tn, fn_, tpr: rate(tp, fn_), fpr: rate(fp, tn) }
    }
}

/// Per-group confusion counts, one entry per level in `levels` (empty
/// groups included with undefined rates).
pub fn group_rates(
    y_true: &[u8],
    y_pred: &[u8],
    groups: &[u32],
    levels: &[String],
) -> Result<Vec<GroupRates>, MetricError> {
    if y_true.len() != y_pred.len() || y_true.len() != groups.len() {
        return Err(MetricError::LengthMismatch);
    }
    let mut counts = vec![[0u64; 4]; levels.len()];
    for ((&t, &p), &g) in y_true.iter().zip(y_pred).zip(groups) {
        let slot = match (t, p) {
            (1, 1) => 0,
            (0, 1) => 1,
            (0, 0) => 2,
            _ => 3,
        };
        counts[g as usize][slot] += 1;
    }
    Ok(levels
        .iter()
        .zip(counts)
        .map(|(name, [tp, fp, tn, fn_])| GroupRates::from_counts(name.clone(), tp, fp, tn, fn_))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EqualizedOdds {
    pub value: f64,
    pub tpr_diff: Option<f64>,
    pub fpr_diff: Option<f64>,
}

fn spread(values: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = values.collect();
    if v.len() < 2 {
        return None;
    }
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    Some(max - min)
}

/// Larger of the TPR and FPR spreads (max minus min over defined groups).
pub fn equalized_odds(rates: &[GroupRates]) -> Result<EqualizedOdds, MetricError> {
    let tpr_diff = spread(rates.iter().filter_map(|r| r.tpr));
    let fpr_diff = spread(rates.iter().filter_map(|r| r.fpr));
    let value = match (tpr_diff, fpr_diff) {
        (None, None) => return Err(MetricError::MetricUndefined),
        (a, b) => a.unwrap_or(0.0).max(b.unwrap_or(0.0)),
    };
    Ok(EqualizedOdds { value, tpr_diff, fpr_diff })
}

pub fn equalized_odds_difference(rates: &[GroupRates]) -> Result<f64, MetricError> {
    equalized_odds(rates).map(|e| e.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Performance {
    pub f1: f64,
    pub accuracy: f64,
    /// Undefined when the labels contain a single class.
    pub balanced_accuracy: Option<f64>,
}

pub fn performance_metrics(y_true: &[u8], y_pred: &[u8]) -> Result<Performance, MetricError> {
    if y_true.len() != y_pred.len() {
        return Err(MetricError::LengthMismatch);
    }
    if y_true.is_empty() {
        return Err(MetricError::EmptyEvalSet);
    }
    let all = GroupRates::from_counts(String::new(), 0, 0, 0, 0);
    let r = y_true.iter().zip(y_pred).fold(all, |mut r, (&t, &p)| {
        match (t, p) {
            (1, 1) => r.tp += 1,
            (0, 1) => r.fp += 1,
            (0, 0) => r.tn += 1,
            _ => r.fn_ += 1,
        }
        r
    });
    let r = GroupRates::from_counts(r.group, r.tp, r.fp, r.tn, r.fn_);
    let f1 = if r.tp == 0 { 0.0 } else { 2.0 * r.tp as f64 / (2 * r.tp + r.fp + r.fn_) as f64 };
    let accuracy = (r.tp + r.tn) as f64 / y_true.len() as f64;
    let balanced_accuracy = r.tpr.zip(r.fpr).map(|(tpr, fpr)| (tpr + 1.0 - fpr) / 2.0);
    Ok(Performance { f1, accuracy, balanced_accuracy })
}

pub const MAJORITY_LABEL: &str = "majority";
pub const MINORITY_LABEL: &str = "minority";

/// Relabels group codes as 0 (`majority`) or 1 (everything else).
pub fn regroup_majority_minority(groups: &[u32], majority: u32) -> Vec<u32> {
    groups.iter().map(|&g| u32::from(g != majority)).collect()
}

/// Most frequent protected group, ties broken by name ascending.
pub fn majority_group(frame: &TabularFrame) -> Option<String> {
    let (levels, codes) = frame.groups();
    largest_level(levels, codes).map(|i| levels[i].clone())
}

fn largest_level(levels: &[String], codes: &[u32]) -> Option<usize> {
    let mut counts = vec![0usize; levels.len()];
    for &c in codes {
        counts[c as usize] += 1;
    }
    (0..levels.len())
        .filter(|&i| counts[i] > 0)
        .min_by(|&a, &b| counts[b].cmp(&counts[a]).then_with(|| levels[a].cmp(&levels[b])))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Grouping {
    MajorityMinority,
    Separate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalExclusion {
    ExcludeInEval,
    KeepInEval,
}

pub const FULL_SUBSET: &str = "full";

/// One combination of the evaluation decisions. Decisions absent from
/// the evaluation space take the reference value (separate grouping,
/// keep-in-eval, full test set).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalStrategy {
    pub id: String,
    pub assignments: BTreeMap<String, String>,
    pub grouping: Grouping,
    pub exclusion: EvalExclusion,
    pub subset: String,
}

impl EvalStrategy {
    pub fn reference() -> EvalStrategy {
        EvalStrategy {
            id: String::new(),
            assignments: BTreeMap::new(),
            grouping: Grouping::Separate,
            exclusion: EvalExclusion::KeepInEval,
            subset: FULL_SUBSET.into(),
        }
    }

    pub fn is_reference(&self) -> bool {
        self.grouping == Grouping::Separate && self.exclusion == EvalExclusion::KeepInEval && self.subset == FULL_SUBSET
    }
}

fn parse_token<T: for<'de> Deserialize<'de>>(decision: &str, token: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(token.into()))
        .map_err(|_| Error::Space(format!("unknown option `{token}` for `{decision}`")))
}

/// Grid of evaluation strategies in enumeration order.
pub fn enumerate_eval_strategies(space: &DecisionSpace) -> Result<Vec<EvalStrategy>> {
    if space.kind() != SpaceKind::Evaluation {
        return Err(Error::Space("evaluation strategies need an evaluation space".into()));
    }
    enumerate(space, 0)?
        .into_iter()
        .map(|u| {
            let mut s =
                EvalStrategy { id: u.id.clone(), assignments: u.assignments.clone(), ..EvalStrategy::reference() };
            for (name, token) in &u.assignments {
                match name.as_str() {
                    presets::EVAL_FAIRNESS_GROUPING => s.grouping = parse_token(name, token)?,
                    presets::EVAL_EXCLUDE_SUBGROUPS => s.exclusion = parse_token(name, token)?,
                    presets::EVAL_ON_SUBSET => s.subset = token.clone(),
                    other => return Err(Error::Space(format!("unknown evaluation decision `{other}`"))),
                }
            }
            Ok(s)
        })
        .collect()
}

/// How an evaluation subset selects test rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SubsetFilter {
    Full,
    Predicates {
        predicates: Vec<RowPredicate>,
    },
    /// Rows in the most frequent category of `column` (full dataset).
    LargestCategory {
        column: String,
    },
    /// Rows in the category of `column` with the highest mean of the
    /// numeric column `by`, or of the target when `by` is absent.
    MostPrivilegedCategory {
        column: String,
        #[serde(default)]
        by: Option<String>,
    },
}

impl SubsetFilter {
    /// Concrete predicates, with data-dependent categories chosen on `frame`.
    pub fn resolve(&self, frame: &TabularFrame) -> Result<Vec<RowPredicate>> {
        let categorical = |column: &str| {
            frame
                .require(column)?
                .as_categorical()
                .ok_or_else(|| Error::Data(format!("subset column `{column}` is not categorical")))
        };
        match self {
            SubsetFilter::Full => Ok(vec![]),
            SubsetFilter::Predicates { predicates } => {
                frame.matching_rows(predicates)?;
                Ok(predicates.clone())
            }
            SubsetFilter::LargestCategory { column } => {
                let (levels, codes) = categorical(column)?;
                let i = largest_level(levels, codes)
                    .ok_or_else(|| Error::Data(format!("subset column `{column}` is empty")))?;
                Ok(vec![RowPredicate::equals(column, &levels[i])])
            }
            SubsetFilter::MostPrivilegedCategory { column, by } => {
                let (levels, codes) = categorical(column)?;
                let values: Vec<f64> = match by {
                    Some(by) => match &frame.require(by)?.data {
                        ColumnData::Numeric(v) => v.clone(),
                        _ => return Err(Error::Data(format!("privilege column `{by}` is not numeric"))),
                    },
                    None => frame.target().into_iter().map(f64::from).collect(),
                };
                let mut sums = vec![(0.0, 0usize); levels.len()];
                for (&c, v) in codes.iter().zip(&values) {
                    sums[c as usize].0 += v;
                    sums[c as usize].1 += 1;
                }
                let best = (0..levels.len())
                    .filter(|&i| sums[i].1 > 0)
                    .map(|i| (sums[i].0 / sums[i].1 as f64, i))
                    .fold(None::<(f64, usize)>, |acc, (m, i)| match acc {
                        Some((bm, _)) if bm >= m => acc,
                        _ => Some((m, i)),
                    })
                    .ok_or_else(|| Error::Data(format!("subset column `{column}` is empty")))?;
                Ok(vec![RowPredicate::equals(column, &levels[best.1])])
            }
        }
    }
}

/// Facts about the full dataset that evaluation strategies depend on.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalContext {
    /// Resolved row predicates per subset option.
    pub subsets: BTreeMap<String, Vec<RowPredicate>>,
    pub majority: String,
    /// Threshold quantile cutoffs on the full test set instead of on the
    /// rows surviving each strategy.
    pub freeze_cutoff_on_full_test: bool,
}

impl EvalContext {
    pub fn new(
        full: &TabularFrame,
        subsets: &BTreeMap<String, SubsetFilter>,
        freeze_cutoff_on_full_test: bool,
    ) -> Result<EvalContext> {
        let mut resolved = BTreeMap::new();
        resolved.insert(FULL_SUBSET.to_string(), vec![]);
        for (name, filter) in subsets {
            resolved.insert(name.clone(), filter.resolve(full)?);
        }
        let majority = majority_group(full).ok_or_else(|| Error::Data("dataset has no rows".into()))?;
        Ok(EvalContext { subsets: resolved, majority, freeze_cutoff_on_full_test })
    }

    /// Checks that every subset option of the strategies is bound.
    pub fn check_strategies(&self, strategies: &[EvalStrategy]) -> Result<()> {
        match strategies.iter().find(|s| !self.subsets.contains_key(&s.subset)) {
            Some(s) => Err(Error::Manifest(format!("evaluation subset `{}` has no definition", s.subset))),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricBundle {
    pub eq_odds_diff: f64,
    pub tpr_diff: Option<f64>,
    pub fpr_diff: Option<f64>,
    pub f1: f64,
    pub accuracy: f64,
    pub balanced_accuracy: Option<f64>,
    pub n_rows: usize,
    pub threshold: f64,
    pub rates: Vec<GroupRates>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Metrics of fixed test-set scores under one evaluation strategy.
///
/// Steps: subset filter, then removal of groups excluded from training
/// (for `exclude-in-eval`), then the cutoff on the surviving scores, then
/// majority/minority regrouping, then the metrics. Metric failures come
/// back as [`Error::Metric`].
pub fn evaluate(
    test: &TabularFrame,
    scores: &[f64],
    cutoff: Cutoff,
    strategy: &EvalStrategy,
    train_excluded_groups: &[String],
    ctx: &EvalContext,
) -> Result<MetricBundle> {
    if scores.len() != test.n_rows() {
        return Err(MetricError::LengthMismatch.into());
    }
    let predicates = ctx
        .subsets
        .get(&strategy.subset)
        .ok_or_else(|| Error::Manifest(format!("evaluation subset `{}` has no definition", strategy.subset)))?;
    let mut rows = test.matching_rows(predicates)?;
    let (levels, codes) = test.groups();
    if strategy.exclusion == EvalExclusion::ExcludeInEval && !train_excluded_groups.is_empty() {
        rows.retain(|&r| !train_excluded_groups.contains(&levels[codes[r] as usize]));
    }
    if rows.is_empty() {
        return Err(MetricError::EmptyEvalSet.into());
    }
    let labels = test.target();
    let y_true: Vec<u8> = rows.iter().map(|&r| labels[r]).collect();
    if y_true.iter().all(|&y| y == y_true[0]) {
        return Err(MetricError::DegenerateLabels.into());
    }
    let kept_scores: Vec<f64> = rows.iter().map(|&r| scores[r]).collect();
    let threshold = if ctx.freeze_cutoff_on_full_test {
        cutoff_threshold(scores, cutoff)
    } else {
        cutoff_threshold(&kept_scores, cutoff)
    };
    let y_pred = predict_with_threshold(&kept_scores, threshold);
    let kept_groups: Vec<u32> = rows.iter().map(|&r| codes[r]).collect();
    let (group_codes, group_levels) = match strategy.grouping {
        Grouping::Separate => (kept_groups, levels.to_vec()),
        Grouping::MajorityMinority => {
            let majority = levels
                .iter()
                .position(|l| *l == ctx.majority)
                .ok_or_else(|| Error::Data(format!("majority group `{}` not in test data", ctx.majority)))?;
            (
                regroup_majority_minority(&kept_groups, majority as u32),
                vec![MAJORITY_LABEL.to_string(), MINORITY_LABEL.to_string()],
            )
        }
    };
    let rates = group_rates(&y_true, &y_pred, &group_codes, &group_levels)?;
    let eo = equalized_odds(&rates)?;
    let perf = performance_metrics(&y_true, &y_pred)?;
    let mut warnings = Vec::new();
    for r in &rates {
        if r.tp + r.fp + r.tn + r.fn_ == 0 {
            continue;
        }
        if r.tpr.is_none() {
            warnings.push(format!("group `{}` has no positives; tpr undefined", r.group));
        }
        if r.fpr.is_none() {
            warnings.push(format!("group `{}` has no negatives; fpr undefined", r.group));
        }
    }
    Ok(MetricBundle {
        eq_odds_diff: eo.value,
        tpr_diff: eo.tpr_diff,
        fpr_diff: eo.fpr_diff,
        f1: perf.f1,
        accuracy: perf.accuracy,
        balanced_accuracy: perf.balanced_accuracy,
        n_rows: rows.len(),
        threshold,
        rates,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub delta: f64,
    pub min: f64,
    pub max: f64,
    pub defined: usize,
    pub undefined: usize,
}

/// Max minus min of one model's metric over evaluation strategies.
pub fn spread_stats(values: &[Option<f64>]) -> Result<Spread> {
    let defined: Vec<f64> = values.iter().flatten().copied().collect();
    if defined.len() < 2 {
        return Err(Error::Analysis(format!("spread needs two defined values, got {}", defined.len())));
    }
    let min = defined.iter().copied().fold(f64::INFINITY, f64::min);
    let max = defined.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(Spread { delta: max - min, min, max, defined: defined.len(), undefined: values.len() - defined.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Column, Role};
    use crate::decision_space::{Category, Decision};
    use proptest::prelude::*;

    fn levels(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    /// Confusion rows for one group: `tp, fn, fp, tn` copies of each cell.
    fn cells(group: u32, tp: usize, fn_: usize, fp: usize, tn: usize) -> Vec<(u8, u8, u32)> {
        let mut v = Vec::new();
        v.extend(std::iter::repeat_n((1, 1, group), tp));
        v.extend(std::iter::repeat_n((1, 0, group), fn_));
        v.extend(std::iter::repeat_n((0, 1, group), fp));
        v.extend(std::iter::repeat_n((0, 0, group), tn));
        v
    }

    fn unzip(rows: &[(u8, u8, u32)]) -> (Vec<u8>, Vec<u8>, Vec<u32>) {
        (rows.iter().map(|r| r.0).collect(), rows.iter().map(|r| r.1).collect(), rows.iter().map(|r| r.2).collect())
    }

    #[test]
    fn hand_confusion_table() {
        let (t, p, g) = unzip(&cells(0, 8, 2, 1, 9));
        let r = group_rates(&t, &p, &g, &levels(&["a", "b"])).unwrap();
        assert_eq!((r[0].tp, r[0].fn_, r[0].fp, r[0].tn), (8, 2, 1, 9));
        assert_eq!(r[0].tpr, Some(0.8));
        assert_eq!(r[0].fpr, Some(0.1));
        assert_eq!((r[1].tp + r[1].fp + r[1].tn + r[1].fn_, r[1].tpr, r[1].fpr), (0, None, None));
        assert_eq!(group_rates(&t, &p[1..], &g, &levels(&["a"])), Err(MetricError::LengthMismatch));
    }

    #[test]
    fn two_group_metric() {
        // tpr 0.8 vs 0.5, fpr 0.1 vs 0.3
        let mut rows = cells(0, 8, 2, 1, 9);
        rows.extend(cells(1, 5, 5, 3, 7));
        let (t, p, g) = unzip(&rows);
        let r = group_rates(&t, &p, &g, &levels(&["a", "b"])).unwrap();
        let eo = equalized_odds(&r).unwrap();
        assert!((eo.value - 0.3).abs() < 1e-12);
        assert!((eo.fpr_diff.unwrap() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn metric_extremes() {
        let (t, _, g) = unzip(&[cells(0, 5, 5, 5, 5), cells(1, 5, 5, 5, 5)].concat());
        let r = group_rates(&t, &t, &g, &levels(&["a", "b"])).unwrap();
        assert_eq!(equalized_odds_difference(&r), Ok(0.0));
        assert!(r.iter().all(|r| r.tpr == Some(1.0) && r.fpr == Some(0.0)));

        let rows = [cells(0, 4, 0, 1, 3), cells(1, 2, 2, 1, 3), cells(2, 0, 4, 1, 3)].concat();
        let (t, p, g) = unzip(&rows);
        let r = group_rates(&t, &p, &g, &levels(&["a", "b", "c"])).unwrap();
        assert_eq!(equalized_odds_difference(&r), Ok(1.0));
    }

    #[test]
    fn undefined_components() {
        // only group a has positives: tpr spread undefined, fpr spread used
        let rows = [cells(0, 3, 1, 1, 3), cells(1, 0, 0, 2, 2)].concat();
        let (t, p, g) = unzip(&rows);
        let r = group_rates(&t, &p, &g, &levels(&["a", "b"])).unwrap();
        let eo = equalized_odds(&r).unwrap();
        assert_eq!(eo.tpr_diff, None);
        assert!((eo.value - 0.25).abs() < 1e-12);

        let (t, p, g) = unzip(&cells(0, 3, 1, 1, 3));
        let r = group_rates(&t, &p, &g, &levels(&["a", "b"])).unwrap();
        assert_eq!(equalized_odds(&r), Err(MetricError::MetricUndefined));
    }

    #[test]
    fn performance_hand_values() {
        let (t, p, _) = unzip(&cells(0, 2, 1, 1, 6));
        let m = performance_metrics(&t, &p).unwrap();
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert!((m.accuracy - 0.8).abs() < 1e-12);
        assert!((m.balanced_accuracy.unwrap() - (2.0 / 3.0 + 6.0 / 7.0) / 2.0).abs() < 1e-12);

        let perfect = performance_metrics(&t, &t).unwrap();
        assert_eq!((perfect.f1, perfect.accuracy, perfect.balanced_accuracy), (1.0, 1.0, Some(1.0)));

        let none = performance_metrics(&[1, 1, 0], &[0, 0, 0]).unwrap();
        assert_eq!(none.f1, 0.0);
        assert_eq!(performance_metrics(&[1, 1], &[1, 0]).unwrap().balanced_accuracy, None);
        assert_eq!(performance_metrics(&[], &[]), Err(MetricError::EmptyEvalSet));
    }

    #[test]
    fn majority_minority_relabels() {
        assert_eq!(regroup_majority_minority(&[0, 0, 1, 2], 0), vec![0, 0, 1, 1]);
        assert_eq!(regroup_majority_minority(&[0, 0], 0), vec![0, 0]);
    }

    #[test]
    fn spread_examples() {
        assert_eq!(spread_stats(&[Some(0.4); 3]).unwrap().delta, 0.0);
        assert_eq!(spread_stats(&[Some(0.0), None, Some(1.0)]).unwrap().delta, 1.0);
        let s = spread_stats(&[Some(0.2), Some(0.5), Some(0.9), None]).unwrap();
        assert!((s.delta - 0.7).abs() < 1e-12);
        assert_eq!(s.undefined, 1);
        assert!(spread_stats(&[Some(0.2), None]).is_err());
    }

    #[test]
    fn strategy_grid_sizes() {
        let space = presets::eval_space();
        let all = enumerate_eval_strategies(&space).unwrap();
        assert_eq!(all.len(), 28);
        assert_eq!(all.iter().filter(|s| s.is_reference()).count(), 1);

        let one = DecisionSpace::new(
            SpaceKind::Evaluation,
            vec![
                Decision::new(presets::EVAL_FAIRNESS_GROUPING, Category::Evaluation, &["separate"]),
                Decision::new(presets::EVAL_EXCLUDE_SUBGROUPS, Category::Evaluation, &["keep-in-eval"]),
                Decision::new(presets::EVAL_ON_SUBSET, Category::Evaluation, &["full"]),
            ],
        )
        .unwrap();
        assert_eq!(enumerate_eval_strategies(&one).unwrap().len(), 1);

        let two_by_three = DecisionSpace::new(
            SpaceKind::Evaluation,
            vec![
                Decision::new(
                    presets::EVAL_FAIRNESS_GROUPING,
                    Category::Evaluation,
                    &["majority-minority", "separate"],
                ),
                Decision::new(presets::EVAL_ON_SUBSET, Category::Evaluation, &["full", "north", "south"]),
            ],
        )
        .unwrap();
        assert_eq!(enumerate_eval_strategies(&two_by_three).unwrap().len(), 6);

        let bad = DecisionSpace::new(
            SpaceKind::Evaluation,
            vec![Decision::new(presets::EVAL_FAIRNESS_GROUPING, Category::Evaluation, &["pairwise"])],
        )
        .unwrap();
        assert!(enumerate_eval_strategies(&bad).is_err());
    }

    /// Test frame with three groups: `w` (majority) has tpr 0.5, `b` has
    /// tpr 0.8, `o` has tpr 0.2, all with fpr 0.1 and ten positives and ten
    /// negatives each. Pooled, `b` and `o` match `w` exactly.
    fn masking_fixture() -> (TabularFrame, Vec<f64>) {
        let mut group = Vec::new();
        let mut target = Vec::new();
        let mut scores = Vec::new();
        let mut region = Vec::new();
        for (name, tp) in [("w", 5), ("w", 5), ("b", 8), ("o", 2)] {
            for i in 0..10 {
                group.push(name);
                target.push(1.0);
                scores.push(if i < tp { 0.9 } else { 0.1 });
                region.push(if name == "b" { "north" } else { "south" });
            }
            for i in 0..10 {
                group.push(name);
                target.push(0.0);
                scores.push(if i < 1 { 0.9 } else { 0.1 });
                region.push(if name == "b" { "north" } else { "south" });
            }
        }
        let frame = TabularFrame::new(vec![
            Column::categorical("race", Role::Protected, &group),
            // `east` is a known region with no rows in this test set
            Column::categorical_with_levels("region", Role::Auxiliary, levels(&["east", "north", "south"]), &region)
                .unwrap(),
            Column::numeric("target", Role::Target, target),
        ])
        .unwrap();
        (frame, scores)
    }

    fn context(frame: &TabularFrame) -> EvalContext {
        let subsets = BTreeMap::from([
            (
                "north-only".to_string(),
                SubsetFilter::Predicates { predicates: vec![RowPredicate::equals("region", "north")] },
            ),
            (
                "nowhere".to_string(),
                SubsetFilter::Predicates { predicates: vec![RowPredicate::equals("region", "east")] },
            ),
            ("largest-region".to_string(), SubsetFilter::LargestCategory { column: "region".into() }),
        ]);
        EvalContext::new(frame, &subsets, false).unwrap()
    }

    fn strategy(grouping: Grouping, exclusion: EvalExclusion, subset: &str) -> EvalStrategy {
        EvalStrategy { grouping, exclusion, subset: subset.into(), ..EvalStrategy::reference() }
    }

    #[test]
    fn majority_minority_masks_minority_disparity() {
        let (frame, scores) = masking_fixture();
        let ctx = context(&frame);
        assert_eq!(ctx.majority, "w");
        let sep = evaluate(&frame, &scores, Cutoff::Raw05, &EvalStrategy::reference(), &[], &ctx).unwrap();
        let mm = strategy(Grouping::MajorityMinority, EvalExclusion::KeepInEval, FULL_SUBSET);
        let pooled = evaluate(&frame, &scores, Cutoff::Raw05, &mm, &[], &ctx).unwrap();
        assert!((sep.eq_odds_diff - 0.6).abs() < 1e-12);
        assert!(pooled.eq_odds_diff.abs() < 1e-12);
    }

    #[test]
    fn reference_strategy_matches_direct_computation() {
        let (frame, scores) = masking_fixture();
        let ctx = context(&frame);
        for cutoff in Cutoff::ALL {
            let bundle = evaluate(&frame, &scores, *cutoff, &EvalStrategy::reference(), &[], &ctx).unwrap();
            let pred = crate::pipeline::apply_cutoff(&scores, *cutoff);
            let (lv, codes) = frame.groups();
            let rates = group_rates(&frame.target(), &pred, codes, lv).unwrap();
            assert_eq!(bundle.eq_odds_diff, equalized_odds_difference(&rates).unwrap());
            assert_eq!(bundle.f1, performance_metrics(&frame.target(), &pred).unwrap().f1);
        }
    }

    #[test]
    fn strategy_errors_are_codes() {
        let (frame, scores) = masking_fixture();
        let ctx = context(&frame);
        let empty = strategy(Grouping::Separate, EvalExclusion::KeepInEval, "nowhere");
        let err = evaluate(&frame, &scores, Cutoff::Raw05, &empty, &[], &ctx).unwrap_err();
        assert!(matches!(err, Error::Metric(MetricError::EmptyEvalSet)));
        // only group b remains: a single group, metric undefined
        let north = strategy(Grouping::Separate, EvalExclusion::KeepInEval, "north-only");
        let err = evaluate(&frame, &scores, Cutoff::Raw05, &north, &[], &ctx).unwrap_err();
        assert!(matches!(err, Error::Metric(MetricError::MetricUndefined)));
        let unknown = strategy(Grouping::Separate, EvalExclusion::KeepInEval, "mars");
        assert!(matches!(evaluate(&frame, &scores, Cutoff::Raw05, &unknown, &[], &ctx), Err(Error::Manifest(_))));
    }

    #[test]
    fn exclusion_in_eval_drops_training_excluded_groups() {
        let (frame, scores) = masking_fixture();
        let ctx = context(&frame);
        let drop = vec!["o".to_string()];
        let excl = strategy(Grouping::Separate, EvalExclusion::ExcludeInEval, FULL_SUBSET);
        let bundle = evaluate(&frame, &scores, Cutoff::Raw05, &excl, &drop, &ctx).unwrap();
        assert_eq!(bundle.n_rows, 60);
        assert!((bundle.eq_odds_diff - 0.3).abs() < 1e-12);
        let keep = evaluate(&frame, &scores, Cutoff::Raw05, &EvalStrategy::reference(), &drop, &ctx).unwrap();
        assert_eq!(keep.n_rows, 80);
    }

    #[test]
    fn majority_is_stable_under_subsetting() {
        let (frame, _) = masking_fixture();
        let ctx = context(&frame);
        // in the south-only rows `w` is still the majority, in north-only it
        // is absent, yet the context keeps the full-data majority
        let largest = &ctx.subsets["largest-region"];
        assert_eq!(largest, &vec![RowPredicate::equals("region", "south")]);
        let north = frame.filter_rows(&[RowPredicate::equals("region", "north")]).unwrap();
        assert_eq!(majority_group(&north).unwrap(), "b");
        assert_eq!(ctx.majority, "w");
    }

    #[test]
    fn frozen_cutoff_uses_full_test_scores() {
        let (frame, scores) = masking_fixture();
        let mut ctx = context(&frame);
        let s = strategy(Grouping::Separate, EvalExclusion::KeepInEval, "largest-region");
        let live = evaluate(&frame, &scores, Cutoff::Quantile25, &s, &[], &ctx).unwrap();
        ctx.freeze_cutoff_on_full_test = true;
        let frozen = evaluate(&frame, &scores, Cutoff::Quantile25, &s, &[], &ctx).unwrap();
        assert_eq!(frozen.threshold, crate::pipeline::cutoff_threshold(&scores, Cutoff::Quantile25));
        assert_eq!(live.n_rows, frozen.n_rows);
    }

    /// Independent computation: max over all pairs of groups with both
    /// rates defined of the absolute rate differences.
    fn brute_force(t: &[u8], p: &[u8], g: &[u32], k: u32) -> Option<f64> {
        let rate = |grp: u32, truth: u8| {
            let idx: Vec<usize> = (0..t.len()).filter(|&i| g[i] == grp && t[i] == truth).collect();
            (!idx.is_empty()).then(|| idx.iter().filter(|&&i| p[i] == 1).count() as f64 / idx.len() as f64)
        };
        let mut best: Option<f64> = None;
        for a in 0..k {
            for b in a + 1..k {
                for truth in [0, 1] {
                    if let (Some(x), Some(y)) = (rate(a, truth), rate(b, truth)) {
                        let d = (x - y).abs();
                        best = Some(best.map_or(d, |m: f64| m.max(d)));
                    }
                }
            }
        }
        best
    }

    proptest! {
        #[test]
        fn metric_matches_brute_force(
            rows in prop::collection::vec((0u8..2, 0u8..2, 0u32..4), 1..200),
            k in 1u32..5,
        ) {
            let t: Vec<u8> = rows.iter().map(|r| r.0).collect();
            let p: Vec<u8> = rows.iter().map(|r| r.1).collect();
            let g: Vec<u32> = rows.iter().map(|r| r.2 % k).collect();
            let names: Vec<String> = (0..k).map(|i| format!("g{i}")).collect();
            let rates = group_rates(&t, &p, &g, &names).unwrap();
            match (equalized_odds_difference(&rates), brute_force(&t, &p, &g, k)) {
                (Ok(v), Some(b)) => prop_assert_eq!(v, b),
                (Err(MetricError::MetricUndefined), None) => {}
                (got, want) => prop_assert!(false, "{:?} vs {:?}", got, want),
            }
        }

        #[test]
        fn metric_ignores_group_order(
            rows in prop::collection::vec((0u8..2, 0u8..2, 0u32..3), 1..100),
        ) {
            let t: Vec<u8> = rows.iter().map(|r| r.0).collect();
            let p: Vec<u8> = rows.iter().map(|r| r.1).collect();
            let g: Vec<u32> = rows.iter().map(|r| r.2).collect();
            let rates = group_rates(&t, &p, &g, &levels(&["a", "b", "c"])).unwrap();
            let mut reversed = rates.clone();
            reversed.reverse();
            prop_assert_eq!(equalized_odds_difference(&rates), equalized_odds_difference(&reversed));
            if let Ok(v) = equalized_odds_difference(&rates) {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}
