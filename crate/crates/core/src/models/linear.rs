use nalgebra::{DMatrix, DVector};

use super::sigmoid;
use crate::matrix::FeatureMatrix;

/// `loss_scale * sum(logloss) + l1 * |w|_1 + l2 / 2 * |w|^2`, intercept
/// unpenalized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenalizedLogistic {
    pub loss_scale: f64,
    pub l1: f64,
    pub l2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub coef: Vec<f64>,
    pub intercept: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// `log(1 + exp(z)) - y z`, stable for large `|z|`.
fn logloss(z: f64, y: u8) -> f64 {
    let softplus = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
    softplus - f64::from(y) * z
}

impl PenalizedLogistic {
    pub fn objective(&self, x: &FeatureMatrix, y: &[u8], coef: &[f64], intercept: f64) -> f64 {
        let loss: f64 = (0..x.n_rows()).map(|i| logloss(intercept + dot(coef, x.row(i)), y[i])).sum();
        let l1: f64 = coef.iter().map(|w| w.abs()).sum();
        let l2: f64 = coef.iter().map(|w| w * w).sum();
        self.loss_scale * loss + self.l1 * l1 + 0.5 * self.l2 * l2
    }

    /// Gradient of the smooth part, as `(d/d coef, d/d intercept)`.
    pub fn smooth_gradient(&self, x: &FeatureMatrix, y: &[u8], coef: &[f64], intercept: f64) -> (Vec<f64>, f64) {
        let mut g: Vec<f64> = coef.iter().map(|w| self.l2 * w).collect();
        let mut g0 = 0.0;
        for i in 0..x.n_rows() {
            let row = x.row(i);
            let r = self.loss_scale * (sigmoid(intercept + dot(coef, row)) - f64::from(y[i]));
            g0 += r;
            for (gj, v) in g.iter_mut().zip(row) {
                *gj += r * v;
            }
        }
        (g, g0)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Column-centred copy of `x` with a leading intercept column. Centering
/// only shifts the unpenalized intercept, so the optimum is unchanged.
struct Centred {
    design: DMatrix<f64>,
    means: Vec<f64>,
}

fn centre(x: &FeatureMatrix) -> Centred {
    let (n, p) = (x.n_rows(), x.n_cols());
    let means: Vec<f64> = (0..p).map(|j| crate::stats::mean(&x.column(j))).collect();
    let design = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { x.get(i, j - 1) - means[j - 1] });
    Centred { design, means }
}

struct Problem<'a> {
    obj: &'a PenalizedLogistic,
    design: &'a DMatrix<f64>,
    y: &'a [u8],
}

impl Problem<'_> {
    fn value(&self, theta: &DVector<f64>) -> f64 {
        let z = self.design * theta;
        let loss: f64 = z.iter().zip(self.y).map(|(&z, &y)| logloss(z, y)).sum();
        let w = theta.rows(1, theta.len() - 1);
        self.obj.loss_scale * loss + self.obj.l1 * w.abs().sum() + 0.5 * self.obj.l2 * w.norm_squared()
    }

    fn l1_norm(theta: &DVector<f64>) -> f64 {
        theta.rows(1, theta.len() - 1).abs().sum()
    }

    /// Gradient and Hessian of the smooth part.
    fn derivatives(&self, theta: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let z = self.design * theta;
        let s = self.obj.loss_scale;
        let resid =
            DVector::from_iterator(z.len(), z.iter().zip(self.y).map(|(&z, &y)| s * (sigmoid(z) - f64::from(y))));
        let weights: Vec<f64> = z
            .iter()
            .map(|&z| {
                let p = sigmoid(z);
                s * p * (1.0 - p)
            })
            .collect();
        let mut grad = self.design.tr_mul(&resid);
        let mut weighted = self.design.clone();
        for (i, mut row) in weighted.row_iter_mut().enumerate() {
            row *= weights[i];
        }
        let mut hess = self.design.tr_mul(&weighted);
        for j in 1..theta.len() {
            grad[j] += self.obj.l2 * theta[j];
            hess[(j, j)] += self.obj.l2;
        }
        (grad, hess)
    }
}

/// Newton step solved by Cholesky after symmetric diagonal scaling, with
/// escalating ridge jitter when the Hessian is numerically singular.
fn newton_direction(grad: &DVector<f64>, hess: &DMatrix<f64>) -> DVector<f64> {
    let k = grad.len();
    let d = DVector::from_iterator(
        k,
        (0..k).map(|j| {
            let h = hess[(j, j)];
            if h > 0.0 {
                1.0 / h.sqrt()
            } else {
                1.0
            }
        }),
    );
    let scaled = DMatrix::from_fn(k, k, |i, j| hess[(i, j)] * d[i] * d[j]);
    let rhs = grad.component_mul(&d);
    let mut jitter = 0.0;
    loop {
        let mut m = scaled.clone();
        for j in 0..k {
            m[(j, j)] += jitter;
        }
        if let Some(chol) = m.cholesky() {
            return -chol.solve(&rhs).component_mul(&d);
        }
        jitter = if jitter == 0.0 { 1e-12 } else { jitter * 10.0 };
    }
}

/// Minimizes the quadratic model `g'd + d'Hd/2 + l1 |w + d_w|_1` by cyclic
/// coordinate descent.
fn proximal_direction(grad: &DVector<f64>, hess: &DMatrix<f64>, theta: &DVector<f64>, l1: f64) -> DVector<f64> {
    let k = grad.len();
    let mut delta: DVector<f64> = DVector::zeros(k);
    let mut h_delta: DVector<f64> = DVector::zeros(k);
    for _ in 0..10_000 {
        let mut max_change: f64 = 0.0;
        let mut max_coord: f64 = 0.0;
        for j in 0..k {
            let a = hess[(j, j)];
            if a <= 0.0 {
                continue;
            }
            let c = grad[j] + h_delta[j] - a * delta[j];
            let old = delta[j];
            let new = if j == 0 {
                -c / a
            } else {
                let u = a * theta[j] - c;
                u.signum() * (u.abs() - l1).max(0.0) / a - theta[j]
            };
            let step = new - old;
            if step != 0.0 {
                delta[j] = new;
                h_delta.axpy(step, &hess.column(j), 1.0);
                max_change = max_change.max(step.abs());
            }
            max_coord = max_coord.max((theta[j] + new).abs());
        }
        if max_change <= 1e-13 * max_coord.max(1.0) {
            break;
        }
    }
    delta
}

/// Proximal Newton with backtracking line search. With `l1 == 0` each step
/// is an exact damped Newton step. Iteration stops once the predicted
/// decrease falls below `tol`; that final step is still taken.
pub fn fit_penalized_logistic(
    obj: &PenalizedLogistic,
    x: &FeatureMatrix,
    y: &[u8],
    tol: f64,
    max_iter: usize,
) -> LinearFit {
    let p = x.n_cols();
    let Centred { design, means } = centre(x);
    let problem = Problem { obj, design: &design, y };
    let mut theta = DVector::zeros(p + 1);
    let rate = y.iter().map(|&v| f64::from(v)).sum::<f64>() / y.len() as f64;
    if rate > 0.0 && rate < 1.0 {
        theta[0] = (rate / (1.0 - rate)).ln();
    }
    let mut value = problem.value(&theta);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let (grad, hess) = problem.derivatives(&theta);
        let delta = if obj.l1 > 0.0 {
            proximal_direction(&grad, &hess, &theta, obj.l1)
        } else {
            newton_direction(&grad, &hess)
        };
        let trial_l1 = |t: &DVector<f64>| obj.l1 * Problem::l1_norm(t);
        let predicted = grad.dot(&delta) + trial_l1(&(&theta + &delta)) - trial_l1(&theta);
        let done = -predicted / 2.0 < tol;
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let candidate = &theta + &delta * step;
            let cand_value = problem.value(&candidate);
            if cand_value <= value + 1e-4 * step * predicted || (done && cand_value <= value) {
                theta = candidate;
                value = cand_value;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if done || !accepted {
            converged = true;
            break;
        }
    }
    let coef: Vec<f64> = theta.iter().skip(1).copied().collect();
    let intercept = theta[0] - dot(&coef, &means);
    LinearFit { coef, intercept, iterations, converged }
}
