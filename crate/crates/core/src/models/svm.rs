//! Soft-margin kernel SVM trained by sequential minimal optimization on the
//! dual, with second-order working-set selection.

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scaler::Scaler;
use super::KernelKind;
use crate::tabular::Dataset;

const TAU: f64 = 1e-12;
/// Kernel-row cache budget in f64 entries (~256 MiB).
const CACHE_ENTRIES: usize = 32 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub kind: KernelKind,
    pub gamma: f64,
    /// Only used by the polynomial kernel; `gamma` is unused by the linear one.
    pub degree: u32,
}

impl Kernel {
    pub fn new(kind: KernelKind, gamma: f64, degree: u32) -> Self {
        Kernel { kind, gamma, degree }
    }

    #[inline]
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.kind {
            KernelKind::Linear => dot(a, b),
            KernelKind::Rbf => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-self.gamma * d2).exp()
            }
            KernelKind::Poly => (self.gamma * dot(a, b) + 1.0).powi(self.degree as i32),
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub scaler: Scaler,
    pub kernel: Kernel,
    /// Standardized support vectors, row-major.
    pub support: Vec<f64>,
    /// `alpha_i * y_i` per support vector, with y in {-1, +1}.
    pub coef: Vec<f64>,
    pub bias: f64,
}

impl SvmModel {
    pub fn margin(&self, x: &[f64]) -> f64 {
        let z = self.scaler.transform(x);
        let p = z.len();
        let mut f = self.bias;
        for (sv, c) in self.support.chunks_exact(p).zip(&self.coef) {
            f += c * self.kernel.eval(sv, &z);
        }
        f
    }

    pub fn n_support(&self) -> usize {
        self.coef.len()
    }
}

/// Raw dual solution, exposed for KKT checks.
#[derive(Debug, Clone)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    /// Gradient of the dual objective, `(Q alpha)_i - 1`.
    pub gradient: Vec<f64>,
    /// Decision function is `sum_j alpha_j y_j K(x_j, x) - rho`.
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
}

struct QMatrix<'a> {
    z: &'a [f64],
    p: usize,
    y: &'a [f64],
    kernel: Kernel,
    cache: HashMap<usize, Arc<Vec<f64>>>,
    order: VecDeque<usize>,
    capacity: usize,
}

impl<'a> QMatrix<'a> {
    fn row_of(&self, i: usize) -> &[f64] {
        &self.z[i * self.p..(i + 1) * self.p]
    }

    /// Row i of `Q_ij = y_i y_j K(x_i, x_j)`.
    fn row(&mut self, i: usize) -> Arc<Vec<f64>> {
        if let Some(r) = self.cache.get(&i) {
            return Arc::clone(r);
        }
        let n = self.y.len();
        let xi = self.row_of(i).to_vec();
        let yi = self.y[i];
        let compute = |j: usize| yi * self.y[j] * self.kernel.eval(&xi, self.row_of(j));
        let row: Vec<f64> = if n > 2048 {
            (0..n).into_par_iter().map(compute).collect()
        } else {
            (0..n).map(compute).collect()
        };
        let row = Arc::new(row);
        if self.order.len() >= self.capacity {
            if let Some(old) = self.order.pop_front() {
                self.cache.remove(&old);
            }
        }
        self.order.push_back(i);
        self.cache.insert(i, Arc::clone(&row));
        row
    }
}

/// Solves `min ½ αᵀQα − Σα` s.t. `0 ≤ α ≤ C`, `yᵀα = 0`. `z` is row-major with
/// `p` columns; `y` has entries ±1.
pub fn solve_dual(
    z: &[f64],
    p: usize,
    y: &[f64],
    kernel: Kernel,
    c: f64,
    tol: f64,
    max_iter: usize,
) -> DualSolution {
    let n = y.len();
    let mut q = QMatrix {
        z,
        p,
        y,
        kernel,
        cache: HashMap::new(),
        order: VecDeque::new(),
        capacity: (CACHE_ENTRIES / n.max(1)).clamp(2, n.max(2)),
    };
    let qd: Vec<f64> = (0..n)
        .map(|i| kernel.eval(q.row_of(i), q.row_of(i)))
        .collect();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let upper = |a: f64| a >= c;
    let lower = |a: f64| a <= 0.0;

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        // i: maximal violator in I_up
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..n {
            let v = -y[t] * grad[t];
            let in_up = if y[t] > 0.0 { !upper(alpha[t]) } else { !lower(alpha[t]) };
            if in_up && v >= gmax {
                gmax = v;
                i_sel = t;
            }
        }
        if i_sel == usize::MAX {
            converged = true;
            break;
        }
        let i = i_sel;
        let qi = q.row(i);

        // j: second-order choice in I_low
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = usize::MAX;
        let mut obj_min = f64::INFINITY;
        for t in 0..n {
            let in_low = if y[t] > 0.0 { !lower(alpha[t]) } else { !upper(alpha[t]) };
            if !in_low {
                continue;
            }
            let v = y[t] * grad[t];
            if v >= gmax2 {
                gmax2 = v;
            }
            let grad_diff = gmax + v;
            if grad_diff > 0.0 {
                let mut quad = qd[i] + qd[t] - 2.0 * y[i] * y[t] * qi[t];
                if quad <= 0.0 {
                    quad = TAU;
                }
                let obj = -(grad_diff * grad_diff) / quad;
                if obj <= obj_min {
                    obj_min = obj;
                    j_sel = t;
                }
            }
        }
        if gmax + gmax2 < tol || j_sel == usize::MAX {
            converged = true;
            break;
        }
        let j = j_sel;
        let qj = q.row(j);
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let mut quad = qd[i] + qd[j] + 2.0 * qi[j];
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = qd[i] + qd[j] - 2.0 * qi[j];
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for k in 0..n {
            grad[k] += qi[k] * di + qj[k] * dj;
        }
    }

    // rho: mean over free vectors, else midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut sum_free) = (0usize, 0.0);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if upper(alpha[t]) {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if lower(alpha[t]) {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum_free += yg;
        }
    }
    let rho = if free > 0 {
        sum_free / free as f64
    } else {
        0.5 * (ub + lb)
    };
    DualSolution {
        alpha,
        gradient: grad,
        rho,
        iterations,
        converged,
    }
}

pub(crate) fn fit(train: &Dataset, kernel: Kernel, c: f64, tol: f64, max_passes: usize) -> SvmModel {
    let scaler = Scaler::fit(train);
    let z = scaler.transform_all(train);
    let p = train.n_features();
    let y: Vec<f64> = train
        .y()
        .iter()
        .map(|&v| if v == 1 { 1.0 } else { -1.0 })
        .collect();
    let n = y.len();
    let max_iter = max_passes.saturating_mul(n.max(100));
    let sol = solve_dual(&z, p, &y, kernel, c, tol, max_iter);
    if !sol.converged {
        log::warn!(
            "SMO stopped after {} iterations without reaching tolerance {tol}",
            sol.iterations
        );
    }
    let mut support = Vec::new();
    let mut coef = Vec::new();
    for i in 0..n {
        if sol.alpha[i] > 0.0 {
            support.extend_from_slice(&z[i * p..(i + 1) * p]);
            coef.push(sol.alpha[i] * y[i]);
        }
    }
    SvmModel {
        scaler,
        kernel,
        support,
        coef,
        bias: -sol.rho,
    }
}
