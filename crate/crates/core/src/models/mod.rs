//! Binary classifiers producing probability scores.
//!
//! Hyperparameters default to fixed values and can be overridden per kind
//! in the run manifest. Training on single-class labels yields a constant
//! model at the empirical rate, with a warning, rather than an error.

mod gbm;
mod linear;
mod tree;

use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

pub use linear::{fit_penalized_logistic, LinearFit, PenalizedLogistic};
pub use tree::{Node, Tree, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Logreg,
    Elasticnet,
    Rf,
    Gbm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Logreg, ModelKind::Rf, ModelKind::Gbm, ModelKind::Elasticnet];

    pub fn token(self) -> &'static str {
        match self {
            ModelKind::Logreg => "logreg",
            ModelKind::Elasticnet => "elasticnet",
            ModelKind::Rf => "rf",
            ModelKind::Gbm => "gbm",
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logreg" => Ok(ModelKind::Logreg),
            "elasticnet" => Ok(ModelKind::Elasticnet),
            "rf" => Ok(ModelKind::Rf),
            "gbm" => Ok(ModelKind::Gbm),
            other => Err(Error::Pipeline(format!("unknown model option `{other}`"))),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.token())
    }
}

/// L2-penalized logistic regression: `sum(logloss) + l2/2 * |w|^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticParams {
    pub l2: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LogisticParams {
    fn default() -> Self {
        LogisticParams { l2: 1.0, tol: 1e-6, max_iter: 1000 }
    }
}

/// Elastic-net logistic regression:
/// `mean(logloss) + alpha * (l1_ratio * |w|_1 + (1 - l1_ratio)/2 * |w|^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ElasticNetParams {
    pub alpha: f64,
    pub l1_ratio: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ElasticNetParams {
    fn default() -> Self {
        ElasticNetParams { alpha: 1e-4, l1_ratio: 0.5, tol: 1e-6, max_iter: 1000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub trees: usize,
    /// Features tried per split; `None` means `floor(sqrt(p))`.
    pub max_features: Option<usize>,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams { trees: 100, max_features: None, max_depth: None, min_leaf: 1, bootstrap: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbmParams {
    pub stages: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for GbmParams {
    fn default() -> Self {
        GbmParams { stages: 100, learning_rate: 0.1, max_depth: 3, min_leaf: 1 }
    }
}

/// Hyperparameters for every kind; the manifest may override any subset.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelDefaults {
    pub logreg: LogisticParams,
    pub elasticnet: ElasticNetParams,
    pub rf: ForestParams,
    pub gbm: GbmParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelSpec {
    Logreg(LogisticParams),
    Elasticnet(ElasticNetParams),
    Rf(ForestParams),
    Gbm(GbmParams),
}

impl ModelSpec {
    pub fn new(kind: ModelKind, defaults: &ModelDefaults) -> ModelSpec {
        match kind {
            ModelKind::Logreg => ModelSpec::Logreg(defaults.logreg),
            ModelKind::Elasticnet => ModelSpec::Elasticnet(defaults.elasticnet),
            ModelKind::Rf => ModelSpec::Rf(defaults.rf),
            ModelKind::Gbm => ModelSpec::Gbm(defaults.gbm),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::Logreg(_) => ModelKind::Logreg,
            ModelSpec::Elasticnet(_) => ModelKind::Elasticnet,
            ModelSpec::Rf(_) => ModelKind::Rf,
            ModelSpec::Gbm(_) => ModelKind::Gbm,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Model(m.to_string()));
        match self {
            ModelSpec::Logreg(p) if !(p.l2 >= 0.0 && p.tol > 0.0 && p.max_iter > 0) => bad("invalid logreg parameters"),
            ModelSpec::Elasticnet(p)
                if !(p.alpha >= 0.0 && (0.0..=1.0).contains(&p.l1_ratio) && p.tol > 0.0 && p.max_iter > 0) =>
            {
                bad("invalid elasticnet parameters")
            }
            ModelSpec::Rf(p) if p.trees == 0 || p.min_leaf == 0 || p.max_features == Some(0) => {
                bad("invalid random forest parameters")
            }
            ModelSpec::Gbm(p) if !(p.learning_rate > 0.0) || p.min_leaf == 0 => bad("invalid gbm parameters"),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Fitted {
    Linear { coef: Vec<f64>, intercept: f64 },
    Forest { trees: Vec<Tree> },
    Boosted { base_score: f64, learning_rate: f64, trees: Vec<Tree> },
    Constant { probability: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub kind: ModelKind,
    pub features: Vec<String>,
    pub fitted: Fitted,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn train(spec: &ModelSpec, x: &FeatureMatrix, y: &[u8], seed: u64) -> Result<TrainedModel> {
    spec.validate()?;
    let n = x.n_rows();
    if y.len() != n {
        return Err(Error::Model(format!("{} labels for {n} rows", y.len())));
    }
    if n < 10 {
        return Err(Error::Model(format!("need at least 10 training rows, got {n}")));
    }
    if x.n_cols() == 0 {
        return Err(Error::Model("no feature columns".into()));
    }
    if y.iter().any(|&v| v > 1) {
        return Err(Error::Model("labels must be 0/1".into()));
    }
    let features = x.names().to_vec();
    let positives = y.iter().filter(|&&v| v == 1).count();
    if positives == 0 || positives == n {
        let probability = positives as f64 / n as f64;
        return Ok(TrainedModel {
            kind: spec.kind(),
            features,
            fitted: Fitted::Constant { probability },
            warnings: vec![format!("single-class training labels; constant score {probability}")],
        });
    }

    let mut warnings = Vec::new();
    let fitted = match spec {
        ModelSpec::Logreg(p) => {
            let objective = PenalizedLogistic { loss_scale: 1.0, l1: 0.0, l2: p.l2 };
            linear_fit(objective, x, y, p.tol, p.max_iter, &mut warnings)
        }
        ModelSpec::Elasticnet(p) => {
            let objective = PenalizedLogistic {
                loss_scale: 1.0 / n as f64,
                l1: p.alpha * p.l1_ratio,
                l2: p.alpha * (1.0 - p.l1_ratio),
            };
            linear_fit(objective, x, y, p.tol, p.max_iter, &mut warnings)
        }
        ModelSpec::Rf(p) => {
            let targets: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p_features = x.n_cols();
            let mtry =
                p.max_features.unwrap_or_else(|| ((p_features as f64).sqrt().floor() as usize).max(1)).min(p_features);
            let params = TreeParams { max_depth: p.max_depth, min_leaf: p.min_leaf, max_features: Some(mtry) };
            let trees = (0..p.trees)
                .map(|_| {
                    let rows: Vec<usize> = if p.bootstrap {
                        use rand::Rng;
                        (0..n).map(|_| rng.random_range(0..n)).collect()
                    } else {
                        (0..n).collect()
                    };
                    Tree::fit(x, &targets, &rows, &params, &mut rng)
                })
                .collect();
            Fitted::Forest { trees }
        }
        ModelSpec::Gbm(p) => gbm::fit(x, y, p),
    };
    Ok(TrainedModel { kind: spec.kind(), features, fitted, warnings })
}

fn linear_fit(
    objective: PenalizedLogistic,
    x: &FeatureMatrix,
    y: &[u8],
    tol: f64,
    max_iter: usize,
    warnings: &mut Vec<String>,
) -> Fitted {
    let fit = fit_penalized_logistic(&objective, x, y, tol, max_iter);
    if !fit.converged {
        warnings.push(format!("optimizer reached the iteration cap of {max_iter}"));
    }
    Fitted::Linear { coef: fit.coef, intercept: fit.intercept }
}

impl TrainedModel {
    pub fn predict_scores(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        if x.names() != self.features.as_slice() {
            return Err(Error::Model(format!(
                "feature mismatch: model expects {:?}, got {:?}",
                self.features,
                x.names()
            )));
        }
        let scores = (0..x.n_rows()).map(|i| {
            let row = x.row(i);
            match &self.fitted {
                Fitted::Constant { probability } => *probability,
                Fitted::Linear { coef, intercept } => {
                    sigmoid(intercept + coef.iter().zip(row).map(|(w, v)| w * v).sum::<f64>())
                }
                Fitted::Forest { trees } => trees.iter().map(|t| t.predict(row)).sum::<f64>() / trees.len() as f64,
                Fitted::Boosted { base_score, learning_rate, trees } => {
                    sigmoid(base_score + learning_rate * trees.iter().map(|t| t.predict(row)).sum::<f64>())
                }
            }
        });
        Ok(scores.map(|s| s.clamp(0.0, 1.0)).collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
