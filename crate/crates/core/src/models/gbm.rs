use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::tree::{Tree, TreeParams};
use super::{sigmoid, Fitted, GbmParams};
use crate::matrix::FeatureMatrix;

/// Gradient boosting on log-loss: each stage fits a squared-error tree to
/// the residuals `y - p`, then replaces every leaf value by the one-step
/// Newton update `sum(r) / sum(p (1 - p))` over its rows.
pub(super) fn fit(x: &FeatureMatrix, y: &[u8], params: &GbmParams) -> Fitted {
    let n = y.len();
    let rate = y.iter().map(|&v| f64::from(v)).sum::<f64>() / n as f64;
    let base_score = (rate / (1.0 - rate)).ln();
    let mut raw = vec![base_score; n];
    let rows: Vec<usize> = (0..n).collect();
    let tree_params = TreeParams { max_depth: Some(params.max_depth), min_leaf: params.min_leaf, max_features: None };
    // every feature is examined at every split, so the generator is unused
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut trees = Vec::with_capacity(params.stages);
    for _ in 0..params.stages {
        let probs: Vec<f64> = raw.iter().map(|&f| sigmoid(f)).collect();
        let residuals: Vec<f64> = y.iter().zip(&probs).map(|(&t, &p)| f64::from(t) - p).collect();
        let mut tree = Tree::fit(x, &residuals, &rows, &tree_params, &mut rng);
        let leaf_of: Vec<usize> = (0..n).map(|i| tree.leaf_of(x.row(i))).collect();
        let mut num = vec![0.0; tree.nodes.len()];
        let mut den = vec![0.0; tree.nodes.len()];
        for i in 0..n {
            num[leaf_of[i]] += residuals[i];
            den[leaf_of[i]] += probs[i] * (1.0 - probs[i]);
        }
        let leaves: Vec<usize> = tree.leaves().collect();
        for leaf in leaves {
            let value = if den[leaf] < 1e-150 { 0.0 } else { num[leaf] / den[leaf] };
            tree.set_leaf_value(leaf, value);
        }
        for i in 0..n {
            raw[i] += params.learning_rate * tree.predict(x.row(i));
        }
        trees.push(tree);
    }
    Fitted::Boosted { base_score, learning_rate: params.learning_rate, trees }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn training_loss_decreases_with_stages() {
        let rows: Vec<Vec<f64>> = (0..60).map(|i| vec![f64::from(i % 12), f64::from(i % 5)]).collect();
        let y: Vec<u8> = (0..60).map(|i| u8::from((i % 12) > 6 || i % 5 == 0)).collect();
        let x = FeatureMatrix::from_rows(vec!["a".into(), "b".into()], &rows).unwrap();
        let loss = |stages: usize| {
            let Fitted::Boosted { base_score, learning_rate, trees } =
                fit(&x, &y, &GbmParams { stages, ..Default::default() })
            else {
                unreachable!()
            };
            (0..60)
                .map(|i| {
                    let f = base_score + learning_rate * trees.iter().map(|t| t.predict(x.row(i))).sum::<f64>();
                    let p = sigmoid(f);
                    -(f64::from(y[i]) * p.ln() + (1.0 - f64::from(y[i])) * (1.0 - p).ln())
                })
                .sum::<f64>()
        };
        let (l0, l5, l50) = (loss(0), loss(5), loss(50));
        assert!(l5 < l0 && l50 < l5, "{l0} {l5} {l50}");
    }
}
