use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::matrix::FeatureMatrix;

/// Growth limits for a single tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Non-constant features examined per split; `None` examines all.
    pub max_features: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum Node {
    Leaf {
        value: f64,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Binary regression tree minimizing squared error. On 0/1 targets the
/// weighted Gini impurity is twice the squared error, so the same splits
/// serve classification forests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

struct Candidate {
    score: f64,
    feature: usize,
    threshold: f64,
}

impl Candidate {
    /// Higher score wins; ties go to the lower feature, then threshold.
    fn beats(&self, other: &Candidate) -> bool {
        (self.score, std::cmp::Reverse(self.feature)) > (other.score, std::cmp::Reverse(other.feature))
            || (self.score == other.score && self.feature == other.feature && self.threshold < other.threshold)
    }
}

impl Tree {
    /// Grows a tree on `rows` (a multiset; bootstrap duplicates allowed).
    pub fn fit<R: Rng>(x: &FeatureMatrix, targets: &[f64], rows: &[usize], params: &TreeParams, rng: &mut R) -> Tree {
        let mut tree = Tree { nodes: Vec::new() };
        let mut buffer = Vec::with_capacity(rows.len());
        let mut features: Vec<usize> = (0..x.n_cols()).collect();
        tree.grow(x, targets, rows.to_vec(), 0, params, rng, &mut buffer, &mut features);
        tree
    }

    #[allow(clippy::too_many_arguments)]
    fn grow<R: Rng>(
        &mut self,
        x: &FeatureMatrix,
        targets: &[f64],
        rows: Vec<usize>,
        depth: usize,
        params: &TreeParams,
        rng: &mut R,
        buffer: &mut Vec<(f64, f64)>,
        features: &mut [usize],
    ) -> usize {
        let id = self.nodes.len();
        let n = rows.len();
        let value = if n == 0 { 0.0 } else { rows.iter().map(|&r| targets[r]).sum::<f64>() / n as f64 };
        self.nodes.push(Node::Leaf { value });
        let pure = rows.iter().all(|&r| targets[r] == targets[rows[0]]);
        if n == 0 || pure || params.max_depth.is_some_and(|d| depth >= d) || n < 2 * params.min_leaf {
            return id;
        }
        let Some(best) = best_split(x, targets, &rows, params, rng, buffer, features) else {
            return id;
        };
        let (left, right): (Vec<usize>, Vec<usize>) =
            rows.into_iter().partition(|&r| x.get(r, best.feature) <= best.threshold);
        let left_id = self.grow(x, targets, left, depth + 1, params, rng, buffer, features);
        let right_id = self.grow(x, targets, right, depth + 1, params, rng, buffer, features);
        self.nodes[id] =
            Node::Split { feature: best.feature, threshold: best.threshold, left: left_id, right: right_id };
        id
    }

    pub fn leaf_of(&self, row: &[f64]) -> usize {
        let mut i = 0;
        while let Node::Split { feature, threshold, left, right } = self.nodes[i] {
            i = if row[feature] <= threshold { left } else { right };
        }
        i
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        match self.nodes[self.leaf_of(row)] {
            Node::Leaf { value } => value,
            Node::Split { .. } => unreachable!("leaf_of returns a leaf"),
        }
    }

    pub fn set_leaf_value(&mut self, leaf: usize, value: f64) {
        if let Node::Leaf { value: v } = &mut self.nodes[leaf] {
            *v = value;
        }
    }

    pub fn leaves(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().enumerate().filter(|(_, n)| matches!(n, Node::Leaf { .. })).map(|(i, _)| i)
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Features are drawn without replacement until `max_features` non-constant
/// ones have been examined or none remain.
fn best_split<R: Rng>(
    x: &FeatureMatrix,
    targets: &[f64],
    rows: &[usize],
    params: &TreeParams,
    rng: &mut R,
    buffer: &mut Vec<(f64, f64)>,
    features: &mut [usize],
) -> Option<Candidate> {
    let p = features.len();
    let budget = params.max_features.unwrap_or(p).min(p);
    let sample = budget < p;
    if !sample {
        features.sort_unstable();
    }
    let n = rows.len();
    let total: f64 = rows.iter().map(|&r| targets[r]).sum();
    let mut best: Option<Candidate> = None;
    let mut examined = 0;
    for k in 0..p {
        if examined == budget {
            break;
        }
        if sample {
            let pick = rng.random_range(k..p);
            features.swap(k, pick);
        }
        let feature = features[k];
        buffer.clear();
        buffer.extend(rows.iter().map(|&r| (x.get(r, feature), targets[r])));
        buffer.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        if buffer[0].0 == buffer[n - 1].0 {
            continue;
        }
        examined += 1;
        let mut left_sum = 0.0;
        for i in 0..n - 1 {
            left_sum += buffer[i].1;
            let (lo, hi) = (buffer[i].0, buffer[i + 1].0);
            let n_left = i + 1;
            if lo == hi || n_left < params.min_leaf || n - n_left < params.min_leaf {
                continue;
            }
            let right_sum = total - left_sum;
            let score = left_sum * left_sum / n_left as f64 + right_sum * right_sum / (n - n_left) as f64;
            let mid = 0.5 * (lo + hi);
            let threshold = if mid < hi { mid } else { lo };
            let candidate = Candidate { score, feature, threshold };
            if best.as_ref().is_none_or(|b| candidate.beats(b)) {
                best = Some(candidate);
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn matrix(rows: &[Vec<f64>]) -> FeatureMatrix {
        let names = (0..rows[0].len()).map(|j| format!("f{j}")).collect();
        FeatureMatrix::from_rows(names, rows).unwrap()
    }

    fn params(max_depth: Option<usize>) -> TreeParams {
        TreeParams { max_depth, min_leaf: 1, max_features: None }
    }

    #[test]
    fn fits_a_step_function_exactly() {
        let x = matrix(&(0..10).map(|i| vec![f64::from(i)]).collect::<Vec<_>>());
        let y: Vec<f64> = (0..10).map(|i| if i < 4 { 0.0 } else { 1.0 }).collect();
        let rows: Vec<usize> = (0..10).collect();
        let tree = Tree::fit(&x, &y, &rows, &params(None), &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(tree.nodes.len(), 3);
        match tree.nodes[0] {
            Node::Split { feature, threshold, .. } => {
                assert_eq!(feature, 0);
                assert_eq!(threshold, 3.5);
            }
            _ => panic!("root should split"),
        }
        for i in 0..10 {
            assert_eq!(tree.predict(x.row(i)), y[i]);
        }
    }

    #[test]
    fn ties_prefer_the_lowest_feature() {
        // both columns separate the labels equally well
        let x = matrix(&[vec![0.0, 0.0], vec![0.0, 0.0], vec![1.0, 1.0], vec![1.0, 1.0]]);
        let y = vec![0.0, 0.0, 1.0, 1.0];
        let tree = Tree::fit(&x, &y, &[0, 1, 2, 3], &params(None), &mut ChaCha8Rng::seed_from_u64(0));
        assert!(matches!(tree.nodes[0], Node::Split { feature: 0, .. }));
    }

    #[test]
    fn depth_and_leaf_limits_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rows: Vec<Vec<f64>> = (0..200).map(|_| vec![rng.random(), rng.random(), rng.random()]).collect();
        let y: Vec<f64> = rows.iter().map(|r| f64::from(u8::from(r[0] + r[1] > 1.0))).collect();
        let x = matrix(&rows);
        let idx: Vec<usize> = (0..200).collect();
        let tree =
            Tree::fit(&x, &y, &idx, &TreeParams { max_depth: Some(3), min_leaf: 5, max_features: None }, &mut rng);
        assert!(tree.depth() <= 3);
        let mut counts = vec![0; tree.nodes.len()];
        for i in 0..200 {
            counts[tree.leaf_of(x.row(i))] += 1;
        }
        for leaf in tree.leaves() {
            assert!(counts[leaf] >= 5);
        }
    }

    #[test]
    fn constant_features_give_a_leaf() {
        let x = matrix(&[vec![1.0], vec![1.0], vec![1.0]]);
        let tree = Tree::fit(&x, &[0.0, 1.0, 1.0], &[0, 1, 2], &params(None), &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(tree.nodes, vec![Node::Leaf { value: 2.0 / 3.0 }]);
    }

    #[test]
    fn sampling_skips_constant_features() {
        // only the last of five columns varies; with one feature per split the
        // tree must still find it
        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![0.0, 0.0, 0.0, 0.0, f64::from(i)]).collect();
        let y: Vec<f64> = (0..8).map(|i| f64::from(u8::from(i >= 4))).collect();
        let idx: Vec<usize> = (0..8).collect();
        for seed in 0..20 {
            let tree = Tree::fit(
                &matrix(&rows),
                &y,
                &idx,
                &TreeParams { max_depth: None, min_leaf: 1, max_features: Some(1) },
                &mut ChaCha8Rng::seed_from_u64(seed),
            );
            assert!(matches!(tree.nodes[0], Node::Split { feature: 4, .. }));
        }
    }
}
