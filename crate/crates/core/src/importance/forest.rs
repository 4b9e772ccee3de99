use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    advance, centre_all_axes, effect_count, resolve_max_order, subsets, ImportanceEntry, ImportanceReport, Method,
    ResponseTable,
};
use crate::error::{Error, Result};
use crate::stats;

pub const MIN_ROWS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub trees: usize,
    /// Decisions examined per split; `None` means `round(0.7 d)`.
    pub max_features: Option<usize>,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub bootstrap: bool,
    pub seed: u64,
    pub max_order: Option<usize>,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            trees: 100,
            max_features: None,
            max_depth: None,
            min_leaf: 1,
            bootstrap: true,
            seed: 0,
            max_order: None,
        }
    }
}

/// A leaf is a box in the decision grid: a set of allowed levels per
/// decision (bit `l` of `masks[j]`) and the mean response of its rows.
#[derive(Debug, Clone)]
struct Cell {
    masks: Vec<u64>,
    value: f64,
}

struct Grower<'a> {
    table: &'a ResponseTable,
    config: &'a ForestConfig,
    budget: usize,
    order: Vec<usize>,
    cells: Vec<Cell>,
}

impl Grower<'_> {
    fn grow(&mut self, rows: Vec<usize>, masks: Vec<u64>, depth: usize, rng: &mut ChaCha8Rng) {
        let values = self.table.values();
        let n = rows.len();
        let value = rows.iter().map(|&r| values[r]).sum::<f64>() / n as f64;
        let pure = rows.iter().all(|&r| values[r] == values[rows[0]]);
        let capped = self.config.max_depth.is_some_and(|d| depth >= d);
        if pure || capped || n < 2 * self.config.min_leaf {
            self.cells.push(Cell { masks, value });
            return;
        }
        match self.best_split(&rows, rng) {
            None => self.cells.push(Cell { masks, value }),
            Some((j, level)) => {
                let (left, right): (Vec<usize>, Vec<usize>) =
                    rows.into_iter().partition(|&r| self.table.row(r)[j] == level);
                let mut left_masks = masks.clone();
                left_masks[j] = 1 << level;
                let mut right_masks = masks;
                right_masks[j] &= !(1u64 << level);
                self.grow(left, left_masks, depth + 1, rng);
                self.grow(right, right_masks, depth + 1, rng);
            }
        }
    }

    /// One level against the rest; ties go to the lower decision index,
    /// then the lower level index.
    fn best_split(&mut self, rows: &[usize], rng: &mut ChaCha8Rng) -> Option<(usize, usize)> {
        let d = self.order.len();
        let values = self.table.values();
        let n = rows.len();
        let total: f64 = rows.iter().map(|&r| values[r]).sum();
        let mut best: Option<(f64, usize, usize)> = None;
        let mut examined = 0;
        for k in 0..d {
            if examined == self.budget {
                break;
            }
            let pick = rng.random_range(k..d);
            self.order.swap(k, pick);
            let j = self.order[k];
            let levels = self.table.levels()[j];
            let mut sums = vec![0.0; levels];
            let mut counts = vec![0usize; levels];
            for &r in rows {
                let l = self.table.row(r)[j];
                sums[l] += values[r];
                counts[l] += 1;
            }
            if counts.iter().filter(|&&c| c > 0).count() < 2 {
                continue;
            }
            examined += 1;
            for l in 0..levels {
                let c = counts[l];
                if c < self.config.min_leaf || n - c < self.config.min_leaf || c == 0 || c == n {
                    continue;
                }
                let rest = total - sums[l];
                let score = sums[l] * sums[l] / c as f64 + rest * rest / (n - c) as f64;
                let better = match best {
                    None => true,
                    Some((s, bj, bl)) => score > s || (score == s && (j, l) < (bj, bl)),
                };
                if better {
                    best = Some((score, j, l));
                }
            }
        }
        best.map(|(_, j, l)| (j, l))
    }
}

fn fit_tree(table: &ResponseTable, config: &ForestConfig, budget: usize, tree: usize) -> Vec<Cell> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(tree as u64);
    let n = table.len();
    let rows: Vec<usize> =
        if config.bootstrap { (0..n).map(|_| rng.random_range(0..n)).collect() } else { (0..n).collect() };
    let masks: Vec<u64> = table.levels().iter().map(|&k| if k == 64 { u64::MAX } else { (1u64 << k) - 1 }).collect();
    let mut grower = Grower { table, config, budget, order: (0..table.n_decisions()).collect(), cells: Vec::new() };
    grower.grow(rows, masks, 0, &mut rng);
    grower.cells
}

/// Importance fractions of one tree's piecewise-constant function under
/// the uniform grid distribution, or `None` if the tree is constant.
fn tree_importances(cells: &[Cell], levels: &[usize], subsets: &[Vec<usize>]) -> Option<Vec<f64>> {
    let fracs: Vec<Vec<f64>> = cells
        .iter()
        .map(|c| c.masks.iter().zip(levels).map(|(m, &k)| m.count_ones() as f64 / k as f64).collect())
        .collect();
    let volumes: Vec<f64> = fracs.iter().map(|f| f.iter().product()).collect();
    if cells.iter().all(|c| c.value == cells[0].value) {
        return None;
    }
    let mean: f64 = cells.iter().zip(&volumes).map(|(c, v)| v * c.value).sum();
    let variance: f64 = cells.iter().zip(&volumes).map(|(c, v)| v * (c.value - mean).powi(2)).sum();
    if !(variance > 0.0) {
        return None;
    }
    Some(
        subsets
            .iter()
            .map(|u| {
                let shape: Vec<usize> = u.iter().map(|&j| levels[j]).collect();
                let mut m = vec![0.0; shape.iter().product()];
                for (cell, frac) in cells.iter().zip(&fracs) {
                    let outside: f64 = (0..levels.len()).filter(|j| !u.contains(j)).map(|j| frac[j]).product();
                    let weight = cell.value * outside;
                    let allowed: Vec<Vec<usize>> = u
                        .iter()
                        .map(|&j| (0..levels[j]).filter(|&l| cell.masks[j] & (1 << l) != 0).collect())
                        .collect();
                    let lens: Vec<usize> = allowed.iter().map(Vec::len).collect();
                    let mut pick = vec![0; u.len()];
                    loop {
                        let pos = pick.iter().enumerate().fold(0usize, |acc, (i, &p)| acc * shape[i] + allowed[i][p]);
                        m[pos] += weight;
                        if !advance(&mut pick, &lens) {
                            break;
                        }
                    }
                }
                centre_all_axes(&mut m, &shape);
                let var_u = m.iter().map(|v| v * v).sum::<f64>() / m.len() as f64;
                (var_u / variance).max(0.0)
            })
            .collect(),
    )
}

/// Forest estimate of the decomposition from a possibly partial table:
/// the mean over trees of each tree's exact decomposition, with the
/// across-tree standard deviation. Constant trees are skipped.
pub fn forest_fanova(table: &ResponseTable, config: &ForestConfig) -> Result<ImportanceReport> {
    let d = table.n_decisions();
    if table.len() < MIN_ROWS {
        return Err(Error::Analysis(format!(
            "forest decomposition needs at least {MIN_ROWS} rows, got {}",
            table.len()
        )));
    }
    if config.trees == 0 || config.min_leaf == 0 {
        return Err(Error::Analysis("forest needs at least one tree and a positive leaf size".into()));
    }
    if let Some(&k) = table.levels().iter().find(|&&k| k > 64) {
        return Err(Error::Analysis(format!("decisions with more than 64 options are unsupported ({k})")));
    }
    let values = table.values();
    if values.iter().all(|&v| v == values[0]) {
        return Err(Error::Analysis("response has zero variance".into()));
    }
    let (max_order, flag) = resolve_max_order(d, config.max_order);
    let subsets = subsets(d, max_order);
    let budget = config.max_features.unwrap_or_else(|| (0.7 * d as f64).round() as usize).clamp(1, d);
    let per_tree: Vec<Option<Vec<f64>>> = (0..config.trees)
        .into_par_iter()
        .map(|t| tree_importances(&fit_tree(table, config, budget, t), table.levels(), &subsets))
        .collect();
    let kept: Vec<Vec<f64>> = per_tree.into_iter().flatten().collect();
    if kept.is_empty() {
        return Err(Error::Analysis("every tree is constant; response has no resolvable variance".into()));
    }
    let mut warnings: Vec<String> = flag.into_iter().collect();
    if kept.len() < config.trees {
        warnings.push(format!("{} constant trees skipped", config.trees - kept.len()));
    }
    let entries = subsets
        .iter()
        .enumerate()
        .map(|(i, u)| {
            let column: Vec<f64> = kept.iter().map(|t| t[i]).collect();
            ImportanceEntry {
                subset: u.iter().map(|&j| table.names()[j].clone()).collect(),
                order: u.len(),
                importance: stats::mean(&column),
                std_dev: stats::std_dev(&column),
            }
        })
        .collect();
    Ok(ImportanceReport {
        method: Method::Forest,
        decisions: table.names().to_vec(),
        entries,
        total_variance: stats::variance(values),
        max_order,
        effect_count: effect_count(d, max_order),
        zero_variance: false,
        trees: Some(config.trees),
        warnings,
    })
}
