//! Second-order gradient boosting on the logistic loss.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::sigmoid;
use super::tree::{GrowParams, Grower, Matrix, Objective, Stats, Tree};
use crate::seed;
use crate::tabular::Dataset;

/// Splits must leave at least this much hessian on each side.
const MIN_CHILD_WEIGHT: f64 = 1.0;

/// Additive log-odds model. Leaf values already include shrinkage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedModel {
    pub base_score: f64,
    pub trees: Vec<Tree>,
    pub n_features: usize,
}

impl BoostedModel {
    pub fn log_odds(&self, x: &[f64]) -> f64 {
        self.base_score + self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    pub fn probability(&self, x: &[f64]) -> f64 {
        sigmoid(self.log_odds(x))
    }
}

pub(crate) struct BoostParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub subsample: f64,
    pub lambda: f64,
    pub seed: u64,
}

pub(crate) fn fit(train: &Dataset, p: BoostParams) -> BoostedModel {
    fit_with_trace(train, p, |_, _| {})
}

/// Like [`fit`], calling `on_round(round, margins)` after every round.
pub(crate) fn fit_with_trace(
    train: &Dataset,
    p: BoostParams,
    mut on_round: impl FnMut(usize, &[f64]),
) -> BoostedModel {
    let n = train.n_rows();
    let [neg, pos] = train.class_counts();
    let base_score = (pos as f64 / neg as f64).ln();
    let x = Matrix::new(train.x(), train.n_features());
    let y = train.y();
    let mut margin = vec![base_score; n];
    let mut stats: Vec<Stats> = vec![[0.0; 3]; n];
    let rows = ((p.subsample * n as f64).round() as usize).clamp(1, n);
    let objective = Objective::Newton {
        lambda: p.lambda,
        min_child_weight: MIN_CHILD_WEIGHT,
    };
    let params = GrowParams {
        max_depth: Some(p.max_depth),
        min_samples_split: 2,
        min_samples_leaf: 1,
        features_per_split: None,
    };

    let mut trees = Vec::with_capacity(p.n_estimators);
    for round in 0..p.n_estimators {
        for i in 0..n {
            let prob = sigmoid(margin[i]);
            let h = (prob * (1.0 - prob)).max(1e-16);
            stats[i] = [1.0, prob - f64::from(y[i]), h];
        }
        let samples = if rows == n {
            (0..n).collect()
        } else {
            let mut rng = seed::rng(seed::derive_index(p.seed, round as u64));
            let mut s = index::sample(&mut rng, n, rows).into_vec();
            s.sort_unstable();
            s
        };
        let mut tree = Grower {
            x,
            stats: &stats,
            objective,
            params,
        }
        .grow(samples, None);
        tree.scale_values(p.learning_rate);
        for (i, m) in margin.iter_mut().enumerate() {
            *m += tree.predict(&train.x()[i * x.n_cols..(i + 1) * x.n_cols]);
        }
        trees.push(tree);
        on_round(round, &margin);
    }
    BoostedModel {
        base_score,
        trees,
        n_features: train.n_features(),
    }
}
