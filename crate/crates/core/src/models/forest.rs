use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{class_stats, regression_stats, GrowParams, Grower, Matrix, Objective, Tree};
use super::Criterion;
use crate::seed;
use crate::tabular::Dataset;

/// Bagged classification trees; the score is the mean of the member trees'
/// positive-class fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
    pub n_features: usize,
}

impl ForestModel {
    pub fn probability(&self, x: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict(x)).sum();
        sum / self.trees.len() as f64
    }
}

pub(crate) struct ForestParams {
    pub n_estimators: usize,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub features_per_split: usize,
    pub seed: u64,
}

fn criterion_objective(c: Criterion) -> Objective {
    match c {
        Criterion::Gini => Objective::Gini,
        Criterion::Entropy => Objective::Entropy,
    }
}

pub(crate) fn fit_classification_tree(
    train: &Dataset,
    criterion: Criterion,
    max_depth: Option<usize>,
    min_samples_split: usize,
    min_samples_leaf: usize,
) -> Tree {
    let stats = class_stats(train.y());
    Grower {
        x: Matrix::new(train.x(), train.n_features()),
        stats: &stats,
        objective: criterion_objective(criterion),
        params: GrowParams {
            max_depth,
            min_samples_split,
            min_samples_leaf,
            features_per_split: None,
        },
    }
    .grow((0..train.n_rows()).collect(), None)
}

fn bootstrap(n: usize, rng: &mut impl Rng) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// Trees are grown in parallel; tree `t` draws from its own stream derived
/// from `(seed, t)`, so the result does not depend on scheduling.
pub(crate) fn fit_forest(train: &Dataset, p: ForestParams) -> ForestModel {
    let stats = class_stats(train.y());
    let grower = Grower {
        x: Matrix::new(train.x(), train.n_features()),
        stats: &stats,
        objective: Objective::Gini,
        params: GrowParams {
            max_depth: p.max_depth,
            min_samples_split: p.min_samples_split,
            min_samples_leaf: p.min_samples_leaf,
            features_per_split: Some(p.features_per_split),
        },
    };
    let n = train.n_rows();
    let trees = (0..p.n_estimators)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::rng(seed::derive_index(p.seed, t as u64));
            let samples = bootstrap(n, &mut rng);
            grower.grow(samples, Some(&mut rng))
        })
        .collect();
    ForestModel {
        trees,
        n_features: train.n_features(),
    }
}

/// Bagged variance-reduction regression trees over every covariate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionForest {
    pub trees: Vec<Tree>,
    pub n_features: usize,
}

impl RegressionForest {
    /// `x` is row-major with `n_features` columns; `target[i]` belongs to row i.
    pub fn fit(
        x: &[f64],
        n_features: usize,
        target: &[f64],
        n_trees: usize,
        max_depth: Option<usize>,
        seed: u64,
    ) -> Self {
        let stats = regression_stats(target);
        let grower = Grower {
            x: Matrix::new(x, n_features),
            stats: &stats,
            objective: Objective::Variance,
            params: GrowParams {
                max_depth,
                min_samples_split: 2,
                min_samples_leaf: 1,
                features_per_split: None,
            },
        };
        let n = target.len();
        let trees = (0..n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = seed::rng(seed::derive_index(seed, t as u64));
                grower.grow(bootstrap(n, &mut rng), None)
            })
            .collect();
        RegressionForest { trees, n_features }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noisy(n: usize) -> Dataset {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let t = i as f64;
                vec![(t * 0.61).sin(), (t * 0.23).cos(), (t * 0.07) % 1.0]
            })
            .collect();
        let y = rows.iter().map(|r| u8::from(r[0] + 0.5 * r[1] > 0.2)).collect();
        Dataset::unnamed(&rows, y).unwrap()
    }

    #[test]
    fn forest_is_deterministic_and_averages_trees() {
        let ds = noisy(120);
        let params = || ForestParams {
            n_estimators: 9,
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            features_per_split: 1,
            seed: 5,
        };
        let a = fit_forest(&ds, params());
        let b = fit_forest(&ds, params());
        assert_eq!(a, b);
        for r in ds.rows() {
            let mean = a.trees.iter().map(|t| t.predict(r)).sum::<f64>() / 9.0;
            assert_eq!(a.probability(r), mean);
        }
    }

    #[test]
    fn regression_forest_fits_a_line() {
        let x: Vec<f64> = (0..200).map(|i| i as f64 / 10.0).collect();
        let target: Vec<f64> = x.iter().map(|v| 3.0 * v).collect();
        let f = RegressionForest::fit(&x, 1, &target, 20, None, 1);
        for probe in [2.05, 7.33, 15.0] {
            assert!((f.predict(&[probe]) - 3.0 * probe).abs() < 0.5);
        }
    }
}
