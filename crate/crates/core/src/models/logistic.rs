//! L2-regularized logistic regression on standardized features, minimized
//! with L-BFGS.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::scaler::Scaler;
use super::sigmoid;
use super::tree::Matrix;
use crate::tabular::Dataset;

const HISTORY: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub scaler: Scaler,
    /// Coefficients in standardized feature space.
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl LogisticModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        let mut z = self.intercept;
        for j in 0..x.len() {
            z += self.weights[j] * (x[j] - self.scaler.mean[j]) / self.scaler.scale[j];
        }
        z
    }

    pub fn probability(&self, x: &[f64]) -> f64 {
        sigmoid(self.decision(x))
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Mean logistic loss plus `‖w‖² / (2·C·n)` and its gradient.
/// `theta` holds the p weights followed by the (unpenalized) intercept.
pub fn objective(x: Matrix<'_>, y: &[u8], c: f64, theta: &[f64]) -> (f64, Vec<f64>) {
    let (n, p) = (y.len(), x.n_cols);
    let nf = n as f64;
    let (w, b) = (&theta[..p], theta[p]);
    let mut loss = 0.0;
    let mut grad = vec![0.0; p + 1];
    for i in 0..n {
        let row = &x.data[i * p..(i + 1) * p];
        let z = b + row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
        let yi = f64::from(y[i]);
        loss += softplus(z) - yi * z;
        let r = sigmoid(z) - yi;
        for j in 0..p {
            grad[j] += r * row[j];
        }
        grad[p] += r;
    }
    let reg = 1.0 / (c * nf);
    let mut obj = loss / nf;
    for j in 0..p {
        obj += 0.5 * reg * w[j] * w[j];
        grad[j] = grad[j] / nf + reg * w[j];
    }
    grad[p] /= nf;
    (obj, grad)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn fit(train: &Dataset, c: f64, max_iter: usize, tol: f64) -> LogisticModel {
    let scaler = Scaler::fit(train);
    let z = scaler.transform_all(train);
    let x = Matrix::new(&z, train.n_features());
    let theta = minimize(|t| objective(x, train.y(), c, t), train.n_features() + 1, max_iter, tol);
    let p = train.n_features();
    LogisticModel {
        scaler,
        weights: theta[..p].to_vec(),
        intercept: theta[p],
    }
}

/// L-BFGS with backtracking Armijo line search; stops when the gradient
/// norm drops below `tol` or after `max_iter` iterations.
fn minimize<F>(f: F, dim: usize, max_iter: usize, tol: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let mut x = vec![0.0; dim];
    let (mut fx, mut g) = f(&x);
    let mut hist: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(HISTORY);

    for _ in 0..max_iter {
        if norm(&g) < tol {
            break;
        }
        // two-loop recursion
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, yv, rho) in hist.iter().rev() {
            let a = rho * dot(s, &q);
            for k in 0..dim {
                q[k] -= a * yv[k];
            }
            alphas.push(a);
        }
        if let Some((s, yv, _)) = hist.back() {
            let gamma = dot(s, yv) / dot(yv, yv);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for ((s, yv, rho), a) in hist.iter().zip(alphas.into_iter().rev()) {
            let bcoef = rho * dot(yv, &q);
            for k in 0..dim {
                q[k] += s[k] * (a - bcoef);
            }
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&g, &dir);
        if slope >= 0.0 {
            // not a descent direction; restart from steepest descent
            hist.clear();
            dir = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let cand: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + step * d).collect();
            let (fc, gc) = f(&cand);
            if fc <= fx + 1e-4 * step * slope {
                accepted = Some((cand, fc, gc));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fn_, gn)) = accepted else {
            break;
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &yv);
        if sy > 1e-12 * norm(&s) * norm(&yv) {
            if hist.len() == HISTORY {
                hist.pop_front();
            }
            hist.push_back((s, yv, 1.0 / sy));
        }
        x = xn;
        fx = fn_;
        g = gn;
    }
    x
}
