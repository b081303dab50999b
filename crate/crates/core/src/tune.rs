//! Randomized hyperparameter search scored by stratified k-fold accuracy.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::cross_val_accuracy;
use crate::models::{Criterion, Family, FeaturesPerSplit, HyperParams, KernelKind};
use crate::seed;
use crate::tabular::Dataset;

/// Stratified k-fold assignment: each class is shuffled and dealt round-robin
/// over the folds. Returns `(train, validation)` index lists, both sorted.
pub fn stratified_kfold(y: &[u8], folds: usize, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    let [neg, pos] = [0u8, 1].map(|c| y.iter().filter(|&&v| v == c).count());
    let smallest = neg.min(pos);
    if folds < 2 || smallest < folds {
        return Err(Error::TooFewSamplesForFolds { folds, smallest });
    }
    let mut rng = seed::rng(seed);
    let mut assignment = vec![0usize; y.len()];
    for class in 0..2u8 {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        idx.shuffle(&mut rng);
        // offset so that the larger remainders of the two classes land in different folds
        let offset = if class == 1 { neg % folds } else { 0 };
        for (k, i) in idx.into_iter().enumerate() {
            assignment[i] = (k + offset) % folds;
        }
    }
    Ok((0..folds)
        .map(|f| {
            let (val, train): (Vec<usize>, Vec<usize>) =
                (0..y.len()).partition(|&i| assignment[i] == f);
            (train, val)
        })
        .collect())
}

/// Finite candidate lists per hyperparameter for one family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SearchSpace {
    LogisticRegression {
        #[serde(rename = "C")]
        c: Vec<f64>,
    },
    DecisionTree {
        criterion: Vec<Criterion>,
        max_depth: Vec<Option<usize>>,
        min_samples_split: Vec<usize>,
        min_samples_leaf: Vec<usize>,
    },
    RandomForest {
        n_estimators: Vec<usize>,
        max_depth: Vec<Option<usize>>,
        min_samples_split: Vec<usize>,
        min_samples_leaf: Vec<usize>,
    },
    GradientBoosting {
        n_estimators: Vec<usize>,
        max_depth: Vec<usize>,
        learning_rate: Vec<f64>,
        subsample: Vec<f64>,
    },
    Svm {
        kernel: Vec<KernelKind>,
        #[serde(rename = "C")]
        c: Vec<f64>,
        gamma: Vec<f64>,
        degree: Vec<u32>,
    },
}

fn product<A: Clone, B: Clone>(a: &[A], b: &[B]) -> Vec<(A, B)> {
    a.iter()
        .flat_map(|x| b.iter().map(move |y| (x.clone(), y.clone())))
        .collect()
}

impl SearchSpace {
    /// Default grid per family; every best configuration reported for the
    /// three resampling strategies is a member.
    pub fn default_for(family: Family) -> Self {
        match family {
            Family::LogisticRegression => SearchSpace::LogisticRegression {
                c: vec![0.01, 0.1, 1.0, 10.0],
            },
            Family::DecisionTree => SearchSpace::DecisionTree {
                criterion: vec![Criterion::Gini, Criterion::Entropy],
                max_depth: vec![None, Some(3), Some(5), Some(7), Some(10), Some(20)],
                min_samples_split: vec![2, 5, 10],
                min_samples_leaf: vec![1, 2, 4],
            },
            Family::RandomForest => SearchSpace::RandomForest {
                n_estimators: vec![10, 50, 100],
                max_depth: vec![None, Some(10), Some(20)],
                min_samples_split: vec![2, 5, 10],
                min_samples_leaf: vec![1, 2, 4],
            },
            Family::GradientBoosting => SearchSpace::GradientBoosting {
                n_estimators: vec![50, 100],
                max_depth: vec![3, 5, 7],
                learning_rate: vec![0.01, 0.1, 0.3],
                subsample: vec![0.8, 1.0],
            },
            Family::Svm => SearchSpace::Svm {
                kernel: vec![KernelKind::Linear, KernelKind::Rbf],
                c: vec![0.1, 1.0, 10.0],
                gamma: vec![0.1, 1.0, 10.0],
                degree: vec![3],
            },
        }
    }

    pub fn family(&self) -> Family {
        match self {
            SearchSpace::LogisticRegression { .. } => Family::LogisticRegression,
            SearchSpace::DecisionTree { .. } => Family::DecisionTree,
            SearchSpace::RandomForest { .. } => Family::RandomForest,
            SearchSpace::GradientBoosting { .. } => Family::GradientBoosting,
            SearchSpace::Svm { .. } => Family::Svm,
        }
    }

    /// Every configuration, in lexicographic order of the candidate lists.
    /// Stochastic families receive `seed`.
    pub fn configurations(&self, seed: u64) -> Result<Vec<HyperParams>> {
        let configs: Vec<HyperParams> = match self {
            SearchSpace::LogisticRegression { c } => {
                c.iter().map(|&c| HyperParams::logistic(c)).collect()
            }
            SearchSpace::DecisionTree {
                criterion,
                max_depth,
                min_samples_split,
                min_samples_leaf,
            } => product(&product(criterion, max_depth), &product(min_samples_split, min_samples_leaf))
                .into_iter()
                .map(|((cr, d), (s, l))| HyperParams::decision_tree(cr, d, s, l))
                .collect(),
            SearchSpace::RandomForest {
                n_estimators,
                max_depth,
                min_samples_split,
                min_samples_leaf,
            } => product(&product(n_estimators, max_depth), &product(min_samples_split, min_samples_leaf))
                .into_iter()
                .map(|((n, d), (s, l))| HyperParams::RandomForest {
                    n_estimators: n,
                    max_depth: d,
                    min_samples_split: s,
                    min_samples_leaf: l,
                    features_per_split: FeaturesPerSplit::Sqrt,
                    seed,
                })
                .collect(),
            SearchSpace::GradientBoosting {
                n_estimators,
                max_depth,
                learning_rate,
                subsample,
            } => product(&product(n_estimators, max_depth), &product(learning_rate, subsample))
                .into_iter()
                .map(|((n, d), (lr, ss))| HyperParams::gradient_boosting(n, d, lr, ss, seed))
                .collect(),
            SearchSpace::Svm {
                kernel,
                c,
                gamma,
                degree,
            } => product(&product(kernel, c), &product(gamma, degree))
                .into_iter()
                .map(|((k, c), (g, d))| HyperParams::svm(k, c, g, d))
                .collect(),
        };
        if configs.is_empty() {
            return Err(Error::InvalidSearchSpace(format!(
                "{} space has an empty candidate list",
                self.family()
            )));
        }
        for c in &configs {
            c.validate()?;
        }
        Ok(configs)
    }

    pub fn size(&self) -> usize {
        self.configurations(0).map_or(0, |c| c.len())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateResult {
    /// Position in sampling order.
    pub index: usize,
    pub params: HyperParams,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub candidates: Vec<CandidateResult>,
    /// Index into `candidates`.
    pub best: usize,
    pub folds: usize,
    pub seed: u64,
}

impl CvResult {
    pub fn best_params(&self) -> &HyperParams {
        &self.candidates[self.best].params
    }

    /// One row per (candidate, fold) plus a `mean` row per candidate.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["candidate", "fold", "accuracy", "params"])?;
        for c in &self.candidates {
            let params = serde_json::to_string(&c.params)?;
            for (f, acc) in c.fold_accuracies.iter().enumerate() {
                w.write_record([c.index.to_string(), f.to_string(), acc.to_string(), params.clone()])?;
            }
            w.write_record([c.index.to_string(), "mean".into(), c.mean_accuracy.to_string(), params])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Samples `n_iter` configurations (without replacement while the space
/// allows, with replacement beyond that) and scores each by stratified k-fold
/// mean accuracy. The best is the first candidate with the highest mean.
pub fn randomized_search(
    space: &SearchSpace,
    train: &Dataset,
    n_iter: usize,
    folds: usize,
    seed: u64,
) -> Result<CvResult> {
    if n_iter == 0 {
        return Err(Error::InvalidSearchSpace("n_iter must be >= 1".into()));
    }
    let [neg, pos] = train.class_counts();
    if folds < 2 || neg.min(pos) < folds {
        return Err(Error::TooFewSamplesForFolds {
            folds,
            smallest: neg.min(pos),
        });
    }
    let model_seed = seed::derive(seed, "search-model");
    let configs = space.configurations(model_seed)?;
    let mut rng = seed::rng(seed::derive(seed, "search-sample"));
    let picks: Vec<usize> = if n_iter <= configs.len() {
        let mut idx: Vec<usize> = (0..configs.len()).collect();
        idx.shuffle(&mut rng);
        idx.truncate(n_iter);
        idx
    } else {
        (0..n_iter).map(|_| rng.random_range(0..configs.len())).collect()
    };
    let cv_seed = seed::derive(seed, "search-folds");
    let candidates = picks
        .par_iter()
        .enumerate()
        .map(|(index, &k)| {
            let params = configs[k].clone();
            let cv = cross_val_accuracy(&params, train, folds, cv_seed)?;
            Ok(CandidateResult {
                index,
                params,
                fold_accuracies: cv.fold_accuracies,
                mean_accuracy: cv.mean,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = candidates
        .iter()
        .enumerate()
        .fold(0, |b, (i, c)| if c.mean_accuracy > candidates[b].mean_accuracy { i } else { b });
    Ok(CvResult {
        candidates,
        best,
        folds,
        seed,
    })
}
