//! Class-imbalance correction: random oversampling, random undersampling and
//! SMOTE.
//!
//! Minority and majority are determined from the input counts (ties mean the
//! data is already balanced). Row values are never modified; new rows are
//! appended after the originals.

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::tabular::Dataset;

fn default_ratio() -> f64 {
    1.0
}
fn default_k() -> usize {
    5
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    None,
    Oversample,
    Undersample,
    Smote,
}

/// Config section, e.g. `{ "strategy": "smote", "k": 5, "target_ratio": 1.0, "seed": 42 }`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResampleStrategy {
    pub strategy: StrategyKind,
    /// SMOTE neighbour count.
    #[serde(default = "default_k")]
    pub k: usize,
    /// Minority:majority ratio after resampling.
    #[serde(default = "default_ratio")]
    pub target_ratio: f64,
    #[serde(default)]
    pub seed: u64,
}

impl ResampleStrategy {
    pub fn new(strategy: StrategyKind, seed: u64) -> Self {
        ResampleStrategy {
            strategy,
            k: default_k(),
            target_ratio: default_ratio(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("SMOTE k must be >= 1".into()));
        }
        if !(self.target_ratio > 0.0 && self.target_ratio <= 1.0) {
            return Err(Error::Config(format!(
                "target_ratio {} outside (0, 1]",
                self.target_ratio
            )));
        }
        Ok(())
    }
}

/// Applies the strategy's technique.
pub fn apply(ds: &Dataset, strategy: &ResampleStrategy) -> Result<Dataset> {
    match strategy.strategy {
        StrategyKind::None => Ok(ds.clone()),
        StrategyKind::Oversample => random_oversample(ds, strategy),
        StrategyKind::Undersample => random_undersample(ds, strategy),
        StrategyKind::Smote => smote(ds, strategy),
    }
}

struct Classes {
    minority: u8,
    minority_idx: Vec<usize>,
    majority_count: usize,
}

fn classes(ds: &Dataset) -> Result<Classes> {
    let [neg, pos] = ds.class_counts();
    if neg == 0 || pos == 0 {
        return Err(Error::DegenerateClass(format!(
            "resampling needs both classes ({neg} negative, {pos} positive)"
        )));
    }
    let minority = u8::from(pos < neg);
    Ok(Classes {
        minority,
        minority_idx: ds.class_indices(minority),
        majority_count: neg.max(pos),
    })
}

fn target_minority(c: &Classes, ratio: f64) -> usize {
    (ratio * c.majority_count as f64).round() as usize
}

/// Duplicates minority rows drawn uniformly with replacement until the
/// minority reaches `round(target_ratio × majority)`.
pub fn random_oversample(ds: &Dataset, strategy: &ResampleStrategy) -> Result<Dataset> {
    strategy.validate()?;
    let c = classes(ds)?;
    let target = target_minority(&c, strategy.target_ratio);
    let extra = target.saturating_sub(c.minority_idx.len());
    let mut rng = seed::rng(strategy.seed);
    let mut out = ds.clone();
    for _ in 0..extra {
        let src = c.minority_idx[rng.random_range(0..c.minority_idx.len())];
        out.push_row(ds.row(src), c.minority);
    }
    Ok(out)
}

/// Keeps `round(minority / target_ratio)` majority rows drawn without
/// replacement; surviving rows keep their original order.
pub fn random_undersample(ds: &Dataset, strategy: &ResampleStrategy) -> Result<Dataset> {
    strategy.validate()?;
    let c = classes(ds)?;
    let majority = 1 - c.minority;
    let keep = ((c.minority_idx.len() as f64 / strategy.target_ratio).round() as usize)
        .min(c.majority_count);
    let majority_idx = ds.class_indices(majority);
    let mut rng = seed::rng(strategy.seed);
    let mut kept: Vec<usize> = index::sample(&mut rng, majority_idx.len(), keep)
        .into_iter()
        .map(|k| majority_idx[k])
        .chain(c.minority_idx.iter().copied())
        .collect();
    kept.sort_unstable();
    Ok(ds.select(&kept))
}

/// Provenance of one synthetic SMOTE row: `row = x[base] + u (x[neighbor] − x[base])`,
/// indices into the input dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSample {
    pub base: usize,
    pub neighbor: usize,
    pub u: f64,
}

#[derive(Debug, Clone)]
pub struct SmoteOutput {
    pub dataset: Dataset,
    /// One entry per appended row, in order.
    pub synthetic: Vec<SyntheticSample>,
}

pub fn smote(ds: &Dataset, strategy: &ResampleStrategy) -> Result<Dataset> {
    smote_detailed(ds, strategy, |rng| rng.random::<f64>()).map(|o| o.dataset)
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `k` nearest minority neighbours (Euclidean, ties by index) of each
/// minority row, as positions into `members`.
fn nearest_neighbors(ds: &Dataset, members: &[usize], k: usize) -> Vec<Vec<usize>> {
    use rayon::prelude::*;
    members
        .par_iter()
        .enumerate()
        .map(|(a, &i)| {
            let mut d: Vec<(f64, usize)> = members
                .iter()
                .enumerate()
                .filter(|&(b, _)| b != a)
                .map(|(b, &j)| (squared_distance(ds.row(i), ds.row(j)), b))
                .collect();
            d.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            d.truncate(k);
            d.into_iter().map(|(_, b)| b).collect()
        })
        .collect()
}

/// SMOTE with a caller-supplied draw for the interpolation weight `u`.
pub fn smote_detailed<F>(ds: &Dataset, strategy: &ResampleStrategy, mut draw_u: F) -> Result<SmoteOutput>
where
    F: FnMut(&mut ChaCha8Rng) -> f64,
{
    strategy.validate()?;
    let c = classes(ds)?;
    let k = strategy.k;
    if c.minority_idx.len() <= k {
        return Err(Error::TooFewMinoritySamples {
            needed: k + 1,
            found: c.minority_idx.len(),
        });
    }
    let target = target_minority(&c, strategy.target_ratio);
    let count = target.saturating_sub(c.minority_idx.len());
    let neighbors = nearest_neighbors(ds, &c.minority_idx, k);
    let mut rng = seed::rng(strategy.seed);
    let mut out = ds.clone();
    let mut synthetic = Vec::with_capacity(count);
    let mut row = vec![0.0; ds.n_features()];
    for _ in 0..count {
        let a = rng.random_range(0..c.minority_idx.len());
        let b = neighbors[a][rng.random_range(0..k)];
        let u = draw_u(&mut rng);
        let (base, neighbor) = (c.minority_idx[a], c.minority_idx[b]);
        let (x, xn) = (ds.row(base), ds.row(neighbor));
        for j in 0..row.len() {
            row[j] = x[j] + u * (xn[j] - x[j]);
        }
        out.push_row(&row, c.minority);
        synthetic.push(SyntheticSample { base, neighbor, u });
    }
    Ok(SmoteOutput {
        dataset: out,
        synthetic,
    })
}
