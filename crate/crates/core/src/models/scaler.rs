use serde::{Deserialize, Serialize};

use crate::tabular::Dataset;

/// Per-feature standardization fitted on training rows. Constant features
/// keep scale 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Scaler {
    pub fn fit(ds: &Dataset) -> Self {
        let (n, p) = (ds.n_rows() as f64, ds.n_features());
        let mut mean = vec![0.0; p];
        for r in ds.rows() {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; p];
        for r in ds.rows() {
            for j in 0..p {
                var[j] += (r[j] - mean[j]).powi(2);
            }
        }
        let scale = var
            .into_iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s > 0.0 && s.is_finite() {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Scaler { mean, scale }
    }

    pub fn identity(p: usize) -> Self {
        Scaler {
            mean: vec![0.0; p],
            scale: vec![1.0; p],
        }
    }

    pub fn transform_into(&self, row: &[f64], out: &mut [f64]) {
        for j in 0..row.len() {
            out[j] = (row[j] - self.mean[j]) / self.scale[j];
        }
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; row.len()];
        self.transform_into(row, &mut out);
        out
    }

    /// Standardizes a whole dataset into a row-major buffer.
    pub fn transform_all(&self, ds: &Dataset) -> Vec<f64> {
        let p = ds.n_features();
        let mut out = vec![0.0; ds.n_rows() * p];
        for (r, o) in ds.rows().zip(out.chunks_exact_mut(p)) {
            self.transform_into(r, o);
        }
        out
    }
}
