use rayon::prelude::*;

use super::{
    advance, centre_all_axes, effect_count, resolve_max_order, subsets, ImportanceEntry, ImportanceReport, Method,
    ResponseTable,
};
use crate::error::{Error, Result};
use crate::stats;

/// Lays the table out as a dense grid, first decision slowest.
fn dense_grid(table: &ResponseTable) -> Result<Vec<f64>> {
    let cells = table.grid_cells().ok_or_else(|| Error::Analysis("grid too large for exact decomposition".into()))?;
    let mut grid = vec![f64::NAN; cells];
    let mut seen = vec![false; cells];
    for i in 0..table.len() {
        let pos = table.row(i).iter().zip(table.levels()).fold(0usize, |acc, (&x, &k)| acc * k + x);
        if seen[pos] {
            return Err(Error::Analysis(format!("grid cell {:?} appears more than once", table.row(i))));
        }
        seen[pos] = true;
        grid[pos] = table.values()[i];
    }
    let missing = seen.iter().filter(|&&s| !s).count();
    if missing > 0 {
        return Err(Error::Analysis(format!(
            "exact decomposition needs the complete grid: {missing} of {cells} cells missing"
        )));
    }
    Ok(grid)
}

/// Mean of the grid over every decision outside `subset`.
fn marginal(grid: &[f64], levels: &[usize], subset: &[usize]) -> Vec<f64> {
    let shape: Vec<usize> = subset.iter().map(|&j| levels[j]).collect();
    let size: usize = shape.iter().product();
    let mut sums = vec![0.0; size];
    let mut idx = vec![0; levels.len()];
    for &value in grid {
        let pos = subset.iter().fold(0usize, |acc, &j| acc * levels[j] + idx[j]);
        sums[pos] += value;
        advance(&mut idx, levels);
    }
    let per_cell = (grid.len() / size) as f64;
    sums.iter_mut().for_each(|s| *s /= per_cell);
    sums
}

/// Closed-form decomposition on a complete grid. `max_order` defaults to
/// every order for up to ten decisions, else three.
pub fn exact_fanova(table: &ResponseTable, max_order: Option<usize>) -> Result<ImportanceReport> {
    let d = table.n_decisions();
    let (max_order, flag) = resolve_max_order(d, max_order);
    let grid = dense_grid(table)?;
    let total_variance = stats::variance(&grid);
    let zero_variance = grid.iter().all(|&v| v == grid[0]);
    let subsets = subsets(d, max_order);
    let entries = subsets
        .par_iter()
        .map(|u| {
            let importance = if zero_variance {
                0.0
            } else {
                let shape: Vec<usize> = u.iter().map(|&j| table.levels()[j]).collect();
                let mut effect = marginal(&grid, table.levels(), u);
                centre_all_axes(&mut effect, &shape);
                let var = effect.iter().map(|v| v * v).sum::<f64>() / effect.len() as f64;
                (var / total_variance).max(0.0)
            };
            ImportanceEntry {
                subset: u.iter().map(|&j| table.names()[j].clone()).collect(),
                order: u.len(),
                importance,
                std_dev: 0.0,
            }
        })
        .collect();
    let mut warnings: Vec<String> = flag.into_iter().collect();
    if zero_variance {
        warnings.push("response has zero variance; all importances are 0".into());
    }
    Ok(ImportanceReport {
        method: Method::Exact,
        decisions: table.names().to_vec(),
        entries,
        total_variance,
        max_order,
        effect_count: effect_count(d, max_order),
        zero_variance,
        trees: None,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Effects by the recursive definition `f_U = m_U - sum_{W < U} f_W`,
    /// each stored as a function on the full grid.
    fn recursive_importances(levels: &[usize], f: &[f64]) -> HashMap<Vec<usize>, f64> {
        let d = levels.len();
        let n = f.len();
        let cells: Vec<Vec<usize>> = {
            let mut out = Vec::new();
            let mut idx = vec![0; d];
            loop {
                out.push(idx.clone());
                if !advance(&mut idx, levels) {
                    break;
                }
            }
            out
        };
        let mean = f.iter().sum::<f64>() / n as f64;
        let var = f.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let mut effects: HashMap<Vec<usize>, Vec<f64>> = HashMap::new();
        effects.insert(vec![], vec![mean; n]);
        let mut all: Vec<Vec<usize>> =
            (1u32..(1 << d)).map(|mask| (0..d).filter(|j| mask & (1 << j) != 0).collect()).collect();
        all.sort_by_key(|u: &Vec<usize>| u.len());
        let mut out = HashMap::new();
        for u in all {
            let m: Vec<f64> = cells
                .iter()
                .map(|c| {
                    let agree: Vec<f64> =
                        (0..n).filter(|&i| u.iter().all(|&j| cells[i][j] == c[j])).map(|i| f[i]).collect();
                    agree.iter().sum::<f64>() / agree.len() as f64
                })
                .collect();
            let mut e = m;
            for (w, fw) in &effects {
                if w.len() < u.len() && w.iter().all(|j| u.contains(j)) {
                    for i in 0..n {
                        e[i] -= fw[i];
                    }
                }
            }
            let imp = e.iter().map(|v| v * v).sum::<f64>() / n as f64 / var;
            out.insert(u.clone(), imp);
            effects.insert(u, e);
        }
        out
    }

    fn random_table(levels: &[usize], seed: u64) -> ResponseTable {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ResponseTable::from_fn(levels, |_| rng.random())
    }

    #[test]
    fn matches_the_recursive_definition() {
        for (seed, levels) in [(1, vec![2, 3]), (2, vec![3, 2, 2]), (3, vec![2, 2, 2, 3])] {
            let table = random_table(&levels, seed);
            let report = exact_fanova(&table, None).unwrap();
            let oracle = recursive_importances(&levels, table.values());
            for (u, want) in oracle {
                let names: Vec<String> = u.iter().map(|j| format!("x{j}")).collect();
                let names: Vec<&str> = names.iter().map(String::as_str).collect();
                let got = report.importance(&names);
                assert!((got - want).abs() < 1e-10, "{names:?}: {got} vs {want}");
            }
            assert!((report.total() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn single_decision_response() {
        let table = ResponseTable::from_fn(&[2, 2], |c| f64::from(u8::from(c[0] == 1)));
        let r = exact_fanova(&table, None).unwrap();
        assert!((r.importance(&["x0"]) - 1.0).abs() < 1e-12);
        assert!(r.importance(&["x1"]).abs() < 1e-12);
        assert!(r.importance(&["x0", "x1"]).abs() < 1e-12);
    }

    #[test]
    fn xor_is_pure_interaction() {
        let table = ResponseTable::from_fn(&[2, 2], |c| f64::from(u8::from(c[0] != c[1])));
        let r = exact_fanova(&table, None).unwrap();
        assert!(r.importance(&["x0"]).abs() < 1e-12);
        assert!(r.importance(&["x1"]).abs() < 1e-12);
        assert!((r.importance(&["x0", "x1"]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_response_is_flagged() {
        let table = ResponseTable::from_fn(&[2, 3], |_| 0.4);
        let r = exact_fanova(&table, None).unwrap();
        assert!(r.zero_variance);
        assert!(r.entries.iter().all(|e| e.importance == 0.0));
    }

    #[test]
    fn additive_response_has_no_interaction() {
        let g = [0.3, -1.0, 2.0];
        let h = [5.0, 1.5];
        let table = ResponseTable::from_fn(&[3, 2, 2], |c| g[c[0]] + h[c[1]]);
        let r = exact_fanova(&table, None).unwrap();
        assert!(r.importance(&["x0", "x1"]).abs() < 1e-9);
        // adding an irrelevant decision to the explaining set adds nothing
        assert!(r.importance(&["x0", "x2"]).abs() < 1e-9);
        assert!(r.importance(&["x0", "x1", "x2"]).abs() < 1e-9);
        assert!((r.importance(&["x0"]) + r.importance(&["x1"]) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn nine_binary_decisions_give_511_effects() {
        let table = random_table(&[2; 9], 9);
        let r = exact_fanova(&table, Some(9)).unwrap();
        assert_eq!(r.entries.len(), 511);
        assert_eq!(r.effect_count, 511);
        assert!((r.total() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn incomplete_or_duplicated_grids_are_refused() {
        let full = random_table(&[2, 3], 4);
        let partial = full.take(&[0, 1, 2, 3, 4]);
        assert!(exact_fanova(&partial, None).unwrap_err().to_string().contains("1 of 6 cells missing"));
        let dup = full.take(&[0, 1, 2, 3, 4, 4]);
        assert!(exact_fanova(&dup, None).is_err());
    }

    #[test]
    fn row_order_is_irrelevant() {
        let full = random_table(&[3, 2, 2], 5);
        let reversed: Vec<usize> = (0..full.len()).rev().collect();
        assert_eq!(exact_fanova(&full, None).unwrap(), exact_fanova(&full.take(&reversed), None).unwrap());
    }
}
