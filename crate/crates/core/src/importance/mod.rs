//! Functional ANOVA of a metric over the decision grid.
//!
//! The response is treated as a function on the uniform product of the
//! decisions' levels. For a subset `U` of decisions the marginal `m_U`
//! averages over every other decision, and the effect `f_U` is `m_U` with
//! every lower-order effect removed. Importance of `U` is the variance of
//! `f_U` as a fraction of the total. [`exact_fanova`] computes this in
//! closed form on a complete grid; [`forest_fanova`] estimates it from a
//! regression forest fitted to a (possibly partial) table.

mod exact;
mod forest;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::decision_space::DecisionSpace;
use crate::error::{Error, Result};

pub use exact::exact_fanova;
pub use forest::{forest_fanova, ForestConfig};

/// Highest interaction order computed by default for spaces with more
/// decisions than [`FULL_ORDER_LIMIT`].
pub const DEFAULT_CAPPED_ORDER: usize = 3;
pub const FULL_ORDER_LIMIT: usize = 10;

/// Metric values keyed by each row's option indices.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseTable {
    names: Vec<String>,
    levels: Vec<usize>,
    rows: Vec<usize>,
    values: Vec<f64>,
}

impl ResponseTable {
    pub fn new(space: &DecisionSpace) -> ResponseTable {
        ResponseTable {
            names: space.decisions().iter().map(|d| d.name.clone()).collect(),
            levels: space.option_counts(),
            rows: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Table over anonymous decisions `x0, x1, ...` with the given level counts.
    pub fn with_levels(levels: &[usize]) -> ResponseTable {
        ResponseTable {
            names: (0..levels.len()).map(|j| format!("x{j}")).collect(),
            levels: levels.to_vec(),
            rows: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn push(&mut self, indices: &[usize], value: f64) -> Result<()> {
        if indices.len() != self.levels.len() || indices.iter().zip(&self.levels).any(|(&i, &k)| i >= k) {
            return Err(Error::Analysis(format!("option indices {indices:?} do not fit the space")));
        }
        if !value.is_finite() {
            return Err(Error::Analysis(format!("non-finite response {value}")));
        }
        self.rows.extend_from_slice(indices);
        self.values.push(value);
        Ok(())
    }

    /// Complete grid table of `f` in enumeration order.
    pub fn from_fn(levels: &[usize], mut f: impl FnMut(&[usize]) -> f64) -> ResponseTable {
        let mut table = ResponseTable::with_levels(levels);
        let mut idx = vec![0; levels.len()];
        loop {
            let value = f(&idx);
            table.push(&idx, value).expect("indices in range");
            if !advance(&mut idx, levels) {
                break;
            }
        }
        table
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    pub fn n_decisions(&self) -> usize {
        self.levels.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn row(&self, i: usize) -> &[usize] {
        let d = self.levels.len();
        &self.rows[i * d..(i + 1) * d]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Table restricted to the given rows, in the given order.
    pub fn take(&self, rows: &[usize]) -> ResponseTable {
        ResponseTable {
            names: self.names.clone(),
            levels: self.levels.clone(),
            rows: rows.iter().flat_map(|&r| self.row(r).iter().copied()).collect(),
            values: rows.iter().map(|&r| self.values[r]).collect(),
        }
    }

    pub fn grid_cells(&self) -> Option<usize> {
        self.levels.iter().try_fold(1usize, |acc, &k| acc.checked_mul(k))
    }
}

/// Odometer increment, last position fastest. Returns false after wrapping.
pub(crate) fn advance(idx: &mut [usize], levels: &[usize]) -> bool {
    for j in (0..idx.len()).rev() {
        idx[j] += 1;
        if idx[j] < levels[j] {
            return true;
        }
        idx[j] = 0;
    }
    false
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    Forest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceEntry {
    /// Decision names in space order.
    pub subset: Vec<String>,
    pub order: usize,
    pub importance: f64,
    pub std_dev: f64,
}

impl ImportanceEntry {
    pub fn label(&self) -> String {
        self.subset.join(" × ")
    }

    pub fn effect_type(&self) -> String {
        if self.order == 1 {
            "main".into()
        } else {
            format!("{}-way int.", self.order)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub method: Method,
    pub decisions: Vec<String>,
    pub entries: Vec<ImportanceEntry>,
    pub total_variance: f64,
    pub max_order: usize,
    pub effect_count: usize,
    /// Set when the response has no variance; every importance is then 0.
    #[serde(default)]
    pub zero_variance: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trees: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl ImportanceReport {
    pub fn get(&self, subset: &[&str]) -> Option<&ImportanceEntry> {
        self.entries
            .iter()
            .find(|e| e.subset.len() == subset.len() && subset.iter().all(|s| e.subset.iter().any(|n| n == s)))
    }

    pub fn importance(&self, subset: &[&str]) -> f64 {
        self.get(subset).map_or(0.0, |e| e.importance)
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.importance).sum()
    }

    /// CSV with columns `effect_type,subset,importance,std_dev`, ranked.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("effect_type,subset,importance,std_dev\n");
        for e in rank(self, self.entries.len()) {
            let label = e.label();
            let quoted = if label.contains([',', '"']) { format!("\"{}\"", label.replace('"', "\"\"")) } else { label };
            writeln!(out, "{},{},{},{}", e.effect_type(), quoted, e.importance, e.std_dev).expect("string write");
        }
        out
    }
}

/// Resolves the requested interaction order for `d` decisions.
pub fn resolve_max_order(d: usize, requested: Option<usize>) -> (usize, Option<String>) {
    match requested {
        Some(k) => (k.clamp(1, d.max(1)), None),
        None if d <= FULL_ORDER_LIMIT => (d, None),
        None => {
            (DEFAULT_CAPPED_ORDER, Some(format!("{d} decisions: interactions capped at order {DEFAULT_CAPPED_ORDER}")))
        }
    }
}

/// Number of subsets of size `1..=max_order` of `d` items.
pub fn effect_count(d: usize, max_order: usize) -> usize {
    let mut total = 0usize;
    let mut binom = 1usize;
    for k in 1..=max_order.min(d) {
        binom = binom * (d - k + 1) / k;
        total += binom;
    }
    total
}

/// All subsets of `0..d` with `1..=max_order` members, by size then
/// lexicographically.
pub(crate) fn subsets(d: usize, max_order: usize) -> Vec<Vec<usize>> {
    fn extend(start: usize, d: usize, k: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        for j in start..d {
            current.push(j);
            extend(j + 1, d, k, current, out);
            current.pop();
        }
    }
    let mut out = Vec::new();
    for k in 1..=max_order.min(d) {
        extend(0, d, k, &mut Vec::new(), &mut out);
    }
    out
}

/// Subtracts the mean along every axis of a row-major array. Applied to a
/// marginal `m_U`, this yields the effect `f_U`.
pub(crate) fn centre_all_axes(values: &mut [f64], shape: &[usize]) {
    let total: usize = shape.iter().product();
    debug_assert_eq!(total, values.len());
    for axis in 0..shape.len() {
        let k = shape[axis];
        let inner: usize = shape[axis + 1..].iter().product();
        let outer = total / (k * inner);
        for o in 0..outer {
            for i in 0..inner {
                let base = o * k * inner + i;
                let mean = (0..k).map(|l| values[base + l * inner]).sum::<f64>() / k as f64;
                for l in 0..k {
                    values[base + l * inner] -= mean;
                }
            }
        }
    }
}

/// Entries by importance descending; ties by order, then subset names.
pub fn rank(report: &ImportanceReport, top_k: usize) -> Vec<ImportanceEntry> {
    let mut entries = report.entries.clone();
    entries.sort_by(|a, b| {
        b.importance.total_cmp(&a.importance).then(a.order.cmp(&b.order)).then_with(|| a.subset.cmp(&b.subset))
    });
    entries.truncate(top_k);
    entries
}
