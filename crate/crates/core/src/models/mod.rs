//! Five classifier families behind one fit / predict / score contract.

mod boosting;
pub mod forest;
pub mod logistic;
mod scaler;
pub mod svm;
pub mod tree;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tabular::Dataset;

pub use boosting::BoostedModel;
pub use forest::ForestModel;
pub use logistic::LogisticModel;
pub use scaler::Scaler;
pub use svm::{Kernel, SvmModel};
pub use tree::{Node, Tree};

pub const MODEL_FORMAT: &str = "strokekit.model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    LogisticRegression,
    DecisionTree,
    RandomForest,
    GradientBoosting,
    Svm,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::RandomForest,
        Family::Svm,
        Family::LogisticRegression,
        Family::DecisionTree,
        Family::GradientBoosting,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::LogisticRegression => "logistic_regression",
            Family::DecisionTree => "decision_tree",
            Family::RandomForest => "random_forest",
            Family::GradientBoosting => "gradient_boosting",
            Family::Svm => "svm",
        }
    }

    pub fn is_tree_family(self) -> bool {
        matches!(
            self,
            Family::DecisionTree | Family::RandomForest | Family::GradientBoosting
        )
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "logistic_regression" | "logreg" => Family::LogisticRegression,
            "decision_tree" | "dt" => Family::DecisionTree,
            "random_forest" | "rf" => Family::RandomForest,
            "gradient_boosting" | "xgboost" | "xgb" => Family::GradientBoosting,
            "svm" => Family::Svm,
            other => return Err(Error::Config(format!("unknown model family `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Gini,
    Entropy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Penalty {
    L2,
}

/// Features drawn at each forest split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeaturesPerSplit {
    /// `floor(sqrt(p))`, at least 1.
    #[default]
    Sqrt,
    All,
    Fixed(usize),
}

impl FeaturesPerSplit {
    pub fn resolve(self, p: usize) -> usize {
        match self {
            FeaturesPerSplit::Sqrt => ((p as f64).sqrt().floor() as usize).max(1),
            FeaturesPerSplit::All => p,
            FeaturesPerSplit::Fixed(k) => k.clamp(1, p),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Linear,
    Rbf,
    Poly,
}

fn default_max_iter() -> usize {
    1000
}
fn default_logistic_tol() -> f64 {
    1e-6
}
fn default_lambda() -> f64 {
    1.0
}
fn default_svm_tol() -> f64 {
    1e-3
}
fn default_max_passes() -> usize {
    100
}
fn default_degree() -> u32 {
    3
}
fn default_penalty() -> Penalty {
    Penalty::L2
}

/// Hyperparameters, one variant per family. `C` follows the
/// inverse-regularization convention (larger means weaker penalty).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum HyperParams {
    LogisticRegression {
        #[serde(rename = "C")]
        c: f64,
        #[serde(default = "default_penalty")]
        penalty: Penalty,
        #[serde(default = "default_max_iter")]
        max_iter: usize,
        #[serde(default = "default_logistic_tol")]
        tol: f64,
    },
    DecisionTree {
        criterion: Criterion,
        max_depth: Option<usize>,
        min_samples_split: usize,
        min_samples_leaf: usize,
    },
    RandomForest {
        n_estimators: usize,
        max_depth: Option<usize>,
        min_samples_split: usize,
        min_samples_leaf: usize,
        #[serde(default)]
        features_per_split: FeaturesPerSplit,
        #[serde(default)]
        seed: u64,
    },
    GradientBoosting {
        n_estimators: usize,
        max_depth: usize,
        learning_rate: f64,
        subsample: f64,
        #[serde(default = "default_lambda")]
        lambda: f64,
        #[serde(default)]
        seed: u64,
    },
    Svm {
        kernel: KernelKind,
        #[serde(rename = "C")]
        c: f64,
        gamma: f64,
        #[serde(default = "default_degree")]
        degree: u32,
        #[serde(default = "default_svm_tol")]
        tol: f64,
        #[serde(default = "default_max_passes")]
        max_passes: usize,
    },
}

impl HyperParams {
    pub fn logistic(c: f64) -> Self {
        HyperParams::LogisticRegression {
            c,
            penalty: Penalty::L2,
            max_iter: default_max_iter(),
            tol: default_logistic_tol(),
        }
    }

    pub fn decision_tree(
        criterion: Criterion,
        max_depth: Option<usize>,
        min_samples_split: usize,
        min_samples_leaf: usize,
    ) -> Self {
        HyperParams::DecisionTree {
            criterion,
            max_depth,
            min_samples_split,
            min_samples_leaf,
        }
    }

    pub fn random_forest(
        n_estimators: usize,
        max_depth: Option<usize>,
        min_samples_split: usize,
        min_samples_leaf: usize,
        seed: u64,
    ) -> Self {
        HyperParams::RandomForest {
            n_estimators,
            max_depth,
            min_samples_split,
            min_samples_leaf,
            features_per_split: FeaturesPerSplit::Sqrt,
            seed,
        }
    }

    pub fn gradient_boosting(
        n_estimators: usize,
        max_depth: usize,
        learning_rate: f64,
        subsample: f64,
        seed: u64,
    ) -> Self {
        HyperParams::GradientBoosting {
            n_estimators,
            max_depth,
            learning_rate,
            subsample,
            lambda: default_lambda(),
            seed,
        }
    }

    pub fn svm(kernel: KernelKind, c: f64, gamma: f64, degree: u32) -> Self {
        HyperParams::Svm {
            kernel,
            c,
            gamma,
            degree,
            tol: default_svm_tol(),
            max_passes: default_max_passes(),
        }
    }

    pub fn family(&self) -> Family {
        match self {
            HyperParams::LogisticRegression { .. } => Family::LogisticRegression,
            HyperParams::DecisionTree { .. } => Family::DecisionTree,
            HyperParams::RandomForest { .. } => Family::RandomForest,
            HyperParams::GradientBoosting { .. } => Family::GradientBoosting,
            HyperParams::Svm { .. } => Family::Svm,
        }
    }

    /// Replaces the seed of stochastic families; others are returned as is.
    pub fn with_seed(mut self, new_seed: u64) -> Self {
        match &mut self {
            HyperParams::RandomForest { seed, .. } | HyperParams::GradientBoosting { seed, .. } => {
                *seed = new_seed
            }
            _ => {}
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidHyperParams(m.to_string()));
        let positive = |v: f64| v.is_finite() && v > 0.0;
        match *self {
            HyperParams::LogisticRegression { c, max_iter, tol, .. } => {
                if !positive(c) || !positive(tol) || max_iter == 0 {
                    return bad("logistic regression needs C > 0, tol > 0, max_iter >= 1");
                }
            }
            HyperParams::DecisionTree {
                max_depth,
                min_samples_split,
                min_samples_leaf,
                ..
            } => {
                if max_depth == Some(0) || min_samples_split == 0 || min_samples_leaf == 0 {
                    return bad("tree counts must be >= 1");
                }
            }
            HyperParams::RandomForest {
                n_estimators,
                max_depth,
                min_samples_split,
                min_samples_leaf,
                features_per_split,
                ..
            } => {
                if n_estimators == 0
                    || max_depth == Some(0)
                    || min_samples_split == 0
                    || min_samples_leaf == 0
                    || features_per_split == FeaturesPerSplit::Fixed(0)
                {
                    return bad("forest counts must be >= 1");
                }
            }
            HyperParams::GradientBoosting {
                n_estimators,
                max_depth,
                learning_rate,
                subsample,
                lambda,
                ..
            } => {
                if n_estimators == 0 || max_depth == 0 {
                    return bad("boosting counts must be >= 1");
                }
                if !(learning_rate > 0.0 && learning_rate <= 1.0) {
                    return bad("learning_rate must lie in (0, 1]");
                }
                if !(subsample > 0.0 && subsample <= 1.0) {
                    return bad("subsample must lie in (0, 1]");
                }
                if !(lambda >= 0.0 && lambda.is_finite()) {
                    return bad("lambda must be non-negative");
                }
            }
            HyperParams::Svm {
                c,
                gamma,
                degree,
                tol,
                max_passes,
                ..
            } => {
                if !positive(c) || !positive(gamma) || !positive(tol) {
                    return bad("SVM needs C, gamma, tol > 0");
                }
                if degree == 0 || max_passes == 0 {
                    return bad("SVM degree and max_passes must be >= 1");
                }
            }
        }
        Ok(())
    }
}

/// Fitted classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum TrainedModel {
    LogisticRegression(LogisticModel),
    DecisionTree(TreeModel),
    RandomForest(ForestModel),
    GradientBoosting(BoostedModel),
    Svm(SvmModel),
}

/// Single CART classifier; leaves hold the positive-class fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub tree: Tree,
    pub n_features: usize,
}

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    format: String,
    version: u32,
    n_features: usize,
    model: TrainedModel,
}

fn check_training_set(train: &Dataset) -> Result<()> {
    let [neg, pos] = train.class_counts();
    if neg == 0 || pos == 0 {
        return Err(Error::SingleClassTrainingSet);
    }
    if let Some(i) = train.x().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteFeature {
            row: i / train.n_features(),
            feature: i % train.n_features(),
        });
    }
    Ok(())
}

pub fn fit(params: &HyperParams, train: &Dataset) -> Result<TrainedModel> {
    params.validate()?;
    check_training_set(train)?;
    Ok(match *params {
        HyperParams::LogisticRegression { c, max_iter, tol, .. } => {
            TrainedModel::LogisticRegression(logistic::fit(train, c, max_iter, tol))
        }
        HyperParams::DecisionTree {
            criterion,
            max_depth,
            min_samples_split,
            min_samples_leaf,
        } => TrainedModel::DecisionTree(TreeModel {
            tree: forest::fit_classification_tree(
                train,
                criterion,
                max_depth,
                min_samples_split,
                min_samples_leaf,
            ),
            n_features: train.n_features(),
        }),
        HyperParams::RandomForest {
            n_estimators,
            max_depth,
            min_samples_split,
            min_samples_leaf,
            features_per_split,
            seed,
        } => TrainedModel::RandomForest(forest::fit_forest(
            train,
            forest::ForestParams {
                n_estimators,
                max_depth,
                min_samples_split,
                min_samples_leaf,
                features_per_split: features_per_split.resolve(train.n_features()),
                seed,
            },
        )),
        HyperParams::GradientBoosting {
            n_estimators,
            max_depth,
            learning_rate,
            subsample,
            lambda,
            seed,
        } => TrainedModel::GradientBoosting(boosting::fit(
            train,
            boosting::BoostParams {
                n_estimators,
                max_depth,
                learning_rate,
                subsample,
                lambda,
                seed,
            },
        )),
        HyperParams::Svm {
            kernel,
            c,
            gamma,
            degree,
            tol,
            max_passes,
        } => {
            let kernel = Kernel::new(kernel, gamma, degree);
            TrainedModel::Svm(svm::fit(train, kernel, c, tol, max_passes))
        }
    })
}

impl TrainedModel {
    pub fn family(&self) -> Family {
        match self {
            TrainedModel::LogisticRegression(_) => Family::LogisticRegression,
            TrainedModel::DecisionTree(_) => Family::DecisionTree,
            TrainedModel::RandomForest(_) => Family::RandomForest,
            TrainedModel::GradientBoosting(_) => Family::GradientBoosting,
            TrainedModel::Svm(_) => Family::Svm,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            TrainedModel::LogisticRegression(m) => m.weights.len(),
            TrainedModel::DecisionTree(m) => m.n_features,
            TrainedModel::RandomForest(m) => m.n_features,
            TrainedModel::GradientBoosting(m) => m.n_features,
            TrainedModel::Svm(m) => m.scaler.mean.len(),
        }
    }

    fn check_row(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                actual: x.len(),
            });
        }
        if let Some(j) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteFeature { row: 0, feature: j });
        }
        Ok(())
    }

    /// Positive-class score: a probability for every family except SVM,
    /// which returns its signed margin.
    pub fn score_positive(&self, x: &[f64]) -> Result<f64> {
        self.check_row(x)?;
        Ok(self.score_unchecked(x))
    }

    pub(crate) fn score_unchecked(&self, x: &[f64]) -> f64 {
        match self {
            TrainedModel::LogisticRegression(m) => m.probability(x),
            TrainedModel::DecisionTree(m) => m.tree.predict(x),
            TrainedModel::RandomForest(m) => m.probability(x),
            TrainedModel::GradientBoosting(m) => m.probability(x),
            TrainedModel::Svm(m) => m.margin(x),
        }
    }

    /// Score threshold separating the classes: 0.5 for probabilities, 0 for
    /// the SVM margin. Ties go to class 1.
    pub fn threshold(&self) -> f64 {
        match self {
            TrainedModel::Svm(_) => 0.0,
            _ => 0.5,
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<u8> {
        Ok(u8::from(self.score_positive(x)? >= self.threshold()))
    }

    pub fn predict_dataset(&self, ds: &Dataset) -> Result<Vec<u8>> {
        if ds.n_features() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                actual: ds.n_features(),
            });
        }
        let t = self.threshold();
        Ok(ds
            .rows()
            .map(|r| u8::from(self.score_unchecked(r) >= t))
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = ModelDocument {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            n_features: self.n_features(),
            model: self.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(s)?;
        if doc.format != MODEL_FORMAT || doc.version != MODEL_VERSION {
            return Err(Error::Config(format!(
                "unsupported model document {} v{}",
                doc.format, doc.version
            )));
        }
        if doc.model.n_features() != doc.n_features {
            return Err(Error::Config("model document feature count mismatch".into()));
        }
        Ok(doc.model)
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
