//! Feature attribution for tree-family models: impurity (gain) importance and
//! exact path-dependent TreeSHAP.
//!
//! SHAP values are expressed in each family's additive output space:
//! probability for the decision tree and the forest, log-odds for boosting.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Tree, TrainedModel};
use crate::tabular::{Dataset, AGE_INDEX};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceVector {
    pub feature_names: Vec<String>,
    /// Non-negative, summing to 1 whenever the model has a split.
    pub weights: Vec<f64>,
}

impl ImportanceVector {
    pub fn argmax(&self) -> Option<usize> {
        self.weights
            .iter()
            .enumerate()
            .fold(None, |best: Option<(usize, f64)>, (j, &w)| match best {
                Some((_, bw)) if bw >= w => best,
                _ => Some((j, w)),
            })
            .map(|b| b.0)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["feature", "importance"])?;
        for (name, v) in self.feature_names.iter().zip(&self.weights) {
            w.write_record([name.as_str(), &v.to_string()])?;
        }
        csv_string(w)
    }
}

fn csv_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Trees of a tree-family model plus how their outputs combine.
struct Ensemble<'a> {
    trees: &'a [Tree],
    /// Forests average; everything else sums.
    average: bool,
    offset: f64,
    output: OutputSpace,
}

fn ensemble(m: &TrainedModel) -> Result<Ensemble<'_>> {
    Ok(match m {
        TrainedModel::DecisionTree(t) => Ensemble {
            trees: std::slice::from_ref(&t.tree),
            average: false,
            offset: 0.0,
            output: OutputSpace::Probability,
        },
        TrainedModel::RandomForest(f) => Ensemble {
            trees: &f.trees,
            average: true,
            offset: 0.0,
            output: OutputSpace::Probability,
        },
        TrainedModel::GradientBoosting(b) => Ensemble {
            trees: &b.trees,
            average: false,
            offset: b.base_score,
            output: OutputSpace::LogOdds,
        },
        other => return Err(Error::UnsupportedFamily(other.family().to_string())),
    })
}

/// Gain-weighted split importance summed over every tree, normalized to 1.
pub fn impurity_importance(m: &TrainedModel, feature_names: &[String]) -> Result<ImportanceVector> {
    let e = ensemble(m)?;
    let p = m.n_features();
    if feature_names.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            actual: feature_names.len(),
        });
    }
    let mut weights = vec![0.0; p];
    for tree in e.trees {
        for node in tree.split_nodes() {
            weights[node.feature] += node.gain.max(0.0);
        }
    }
    let total: f64 = weights.iter().sum();
    if total > 0.0 {
        weights.iter_mut().for_each(|w| *w /= total);
    }
    Ok(ImportanceVector {
        feature_names: feature_names.to_vec(),
        weights,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputSpace {
    Probability,
    LogOdds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub phi: Vec<f64>,
    pub base_value: f64,
    pub output: OutputSpace,
}

impl Attribution {
    pub fn total(&self) -> f64 {
        self.base_value + self.phi.iter().sum::<f64>()
    }
}

/// Cover-weighted mean leaf value.
pub fn expected_value(tree: &Tree) -> f64 {
    let root = tree.nodes[0].cover;
    tree.nodes
        .iter()
        .filter(|n| n.is_leaf())
        .map(|n| n.value * n.cover / root)
        .sum()
}

/// The additive output that attributions explain: probability for trees and
/// forests, log-odds for boosting.
pub fn raw_output(m: &TrainedModel, x: &[f64]) -> Result<f64> {
    match m {
        TrainedModel::GradientBoosting(b) => {
            m.score_positive(x)?;
            Ok(b.log_odds(x))
        }
        TrainedModel::DecisionTree(_) | TrainedModel::RandomForest(_) => m.score_positive(x),
        other => Err(Error::UnsupportedFamily(other.family().to_string())),
    }
}

#[derive(Debug, Clone, Copy)]
struct PathElement {
    feature: usize,
    zero_fraction: f64,
    one_fraction: f64,
    weight: f64,
}

const NO_FEATURE: usize = usize::MAX;

fn extend_path(path: &mut Vec<PathElement>, zero_fraction: f64, one_fraction: f64, feature: usize) {
    let depth = path.len();
    path.push(PathElement {
        feature,
        zero_fraction,
        one_fraction,
        weight: if depth == 0 { 1.0 } else { 0.0 },
    });
    let d1 = (depth + 1) as f64;
    for i in (0..depth).rev() {
        path[i + 1].weight += one_fraction * path[i].weight * (i + 1) as f64 / d1;
        path[i].weight = zero_fraction * path[i].weight * (depth - i) as f64 / d1;
    }
}

fn unwind_path(path: &mut Vec<PathElement>, index: usize) {
    let depth = path.len() - 1;
    let PathElement {
        zero_fraction,
        one_fraction,
        ..
    } = path[index];
    let d1 = (depth + 1) as f64;
    let mut next = path[depth].weight;
    for i in (0..depth).rev() {
        if one_fraction != 0.0 {
            let tmp = path[i].weight;
            path[i].weight = next * d1 / ((i + 1) as f64 * one_fraction);
            next = tmp - path[i].weight * zero_fraction * (depth - i) as f64 / d1;
        } else {
            path[i].weight = path[i].weight * d1 / (zero_fraction * (depth - i) as f64);
        }
    }
    for i in index..depth {
        path[i].feature = path[i + 1].feature;
        path[i].zero_fraction = path[i + 1].zero_fraction;
        path[i].one_fraction = path[i + 1].one_fraction;
    }
    path.pop();
}

fn unwound_path_sum(path: &[PathElement], index: usize) -> f64 {
    let depth = path.len() - 1;
    let PathElement {
        zero_fraction,
        one_fraction,
        ..
    } = path[index];
    let d1 = (depth + 1) as f64;
    let mut next = path[depth].weight;
    let mut total = 0.0;
    for i in (0..depth).rev() {
        if one_fraction != 0.0 {
            let tmp = next * d1 / ((i + 1) as f64 * one_fraction);
            total += tmp;
            next = path[i].weight - tmp * zero_fraction * (depth - i) as f64 / d1;
        } else {
            total += path[i].weight * d1 / (zero_fraction * (depth - i) as f64);
        }
    }
    total
}

fn recurse(
    tree: &Tree,
    x: &[f64],
    phi: &mut [f64],
    node: usize,
    mut path: Vec<PathElement>,
    zero_fraction: f64,
    one_fraction: f64,
    feature: usize,
) {
    extend_path(&mut path, zero_fraction, one_fraction, feature);
    let n = &tree.nodes[node];
    let Some((left, right)) = n.children else {
        for i in 1..path.len() {
            let w = unwound_path_sum(&path, i);
            let e = path[i];
            phi[e.feature] += w * (e.one_fraction - e.zero_fraction) * n.value;
        }
        return;
    };
    let (hot, cold) = if x[n.feature] <= n.threshold {
        (left, right)
    } else {
        (right, left)
    };
    let (mut incoming_zero, mut incoming_one) = (1.0, 1.0);
    if let Some(k) = (1..path.len()).find(|&k| path[k].feature == n.feature) {
        incoming_zero = path[k].zero_fraction;
        incoming_one = path[k].one_fraction;
        unwind_path(&mut path, k);
    }
    let cover = n.cover;
    let hot_frac = tree.nodes[hot].cover / cover;
    let cold_frac = tree.nodes[cold].cover / cover;
    recurse(
        tree,
        x,
        phi,
        hot,
        path.clone(),
        hot_frac * incoming_zero,
        incoming_one,
        n.feature,
    );
    recurse(tree, x, phi, cold, path, cold_frac * incoming_zero, 0.0, n.feature);
}

/// Path-dependent SHAP values of a single tree for row `x`.
pub fn tree_shap_single(tree: &Tree, x: &[f64], n_features: usize) -> Vec<f64> {
    let mut phi = vec![0.0; n_features];
    recurse(tree, x, &mut phi, 0, Vec::new(), 1.0, 1.0, NO_FEATURE);
    phi
}

pub fn tree_shap(m: &TrainedModel, x: &[f64]) -> Result<Attribution> {
    let e = ensemble(m)?;
    if x.len() != m.n_features() {
        return Err(Error::DimensionMismatch {
            expected: m.n_features(),
            actual: x.len(),
        });
    }
    let p = x.len();
    let mut phi = vec![0.0; p];
    let mut base = 0.0;
    for tree in e.trees {
        let t = tree_shap_single(tree, x, p);
        for j in 0..p {
            phi[j] += t[j];
        }
        base += expected_value(tree);
    }
    if e.average {
        let k = e.trees.len() as f64;
        phi.iter_mut().for_each(|v| *v /= k);
        base /= k;
    }
    Ok(Attribution {
        phi,
        base_value: e.offset + base,
        output: e.output,
    })
}

/// Everything behind a SHAP summary (beeswarm) plot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapSummary {
    pub feature_names: Vec<String>,
    pub output: OutputSpace,
    /// Row indices into the explained dataset.
    pub rows: Vec<usize>,
    /// Per explained row, the feature values and their SHAP values.
    pub values: Vec<Vec<f64>>,
    pub phi: Vec<Vec<f64>>,
    pub base_values: Vec<f64>,
    pub mean_abs_phi: Vec<f64>,
    /// Feature indices by descending mean |phi|; ties keep feature order.
    pub ranking: Vec<usize>,
}

impl ShapSummary {
    /// 1-based rank of a feature.
    pub fn rank_of(&self, name: &str) -> Option<usize> {
        let j = self.feature_names.iter().position(|n| n == name)?;
        self.ranking.iter().position(|&r| r == j).map(|r| r + 1)
    }

    /// Long-format CSV: feature, row_index, feature_value, phi.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["feature", "row_index", "feature_value", "phi"])?;
        for (j, name) in self.feature_names.iter().enumerate() {
            for (k, &row) in self.rows.iter().enumerate() {
                w.write_record([
                    name.clone(),
                    row.to_string(),
                    self.values[k][j].to_string(),
                    self.phi[k][j].to_string(),
                ])?;
            }
        }
        csv_string(w)
    }

    pub fn ranking_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["feature", "mean_abs_phi"])?;
        for &j in &self.ranking {
            w.write_record([self.feature_names[j].clone(), self.mean_abs_phi[j].to_string()])?;
        }
        csv_string(w)
    }
}

pub fn shap_summary(m: &TrainedModel, ds: &Dataset) -> Result<ShapSummary> {
    let rows: Vec<usize> = (0..ds.n_rows()).collect();
    shap_summary_rows(m, ds, &rows)
}

/// Summary over a subset of rows of `ds`.
pub fn shap_summary_rows(m: &TrainedModel, ds: &Dataset, rows: &[usize]) -> Result<ShapSummary> {
    let output = ensemble(m)?.output;
    let attributions = rows
        .par_iter()
        .map(|&i| tree_shap(m, ds.row(i)))
        .collect::<Result<Vec<_>>>()?;
    let p = ds.n_features();
    let mut mean_abs = vec![0.0; p];
    for a in &attributions {
        for j in 0..p {
            mean_abs[j] += a.phi[j].abs();
        }
    }
    if !rows.is_empty() {
        mean_abs.iter_mut().for_each(|v| *v /= rows.len() as f64);
    }
    let mut ranking: Vec<usize> = (0..p).collect();
    ranking.sort_by(|&a, &b| mean_abs[b].total_cmp(&mean_abs[a]).then(a.cmp(&b)));
    Ok(ShapSummary {
        feature_names: ds.feature_names().to_vec(),
        output,
        rows: rows.to_vec(),
        values: rows.iter().map(|&i| ds.row(i).to_vec()).collect(),
        base_values: attributions.iter().map(|a| a.base_value).collect(),
        phi: attributions.into_iter().map(|a| a.phi).collect(),
        mean_abs_phi: mean_abs,
        ranking,
    })
}

/// Rows whose age (canonical feature 1) lies in `[age_min, age_max]`.
pub fn subgroup_filter(ds: &Dataset, age_min: f64, age_max: f64) -> Result<Dataset> {
    if ds.n_features() <= AGE_INDEX {
        return Err(Error::DimensionMismatch {
            expected: AGE_INDEX + 1,
            actual: ds.n_features(),
        });
    }
    let keep: Vec<usize> = (0..ds.n_rows())
        .filter(|&i| {
            let age = ds.value(i, AGE_INDEX);
            age >= age_min && age <= age_max
        })
        .collect();
    if keep.is_empty() {
        return Err(Error::EmptySubgroup {
            min: age_min,
            max: age_max,
        });
    }
    Ok(ds.select(&keep))
}
