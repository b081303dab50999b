//! Binary decision trees and the greedy grower shared by the CART classifier,
//! the random forest, the regression forest used for imputation, and the
//! second-order boosting rounds.

use rand::seq::index;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// One node of a fitted tree. Rows with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub feature: usize,
    pub threshold: f64,
    /// `(left, right)` child indices; `None` for leaves.
    pub children: Option<(usize, usize)>,
    /// Leaf output (positive-class fraction, regression mean, or boosting
    /// weight). Internal nodes keep the value they would have as a leaf.
    pub value: f64,
    /// Number of training samples (with bootstrap multiplicity) that reached
    /// the node.
    pub cover: f64,
    /// Objective improvement of the split; 0 for leaves.
    pub gain: f64,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }

    pub fn leaf(value: f64, cover: f64) -> Self {
        Node {
            feature: 0,
            threshold: 0.0,
            children: None,
            value,
            cover,
            gain: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    /// Arena; the root is `nodes[0]`.
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_index(&self, row: &[f64]) -> usize {
        let mut i = 0;
        while let Some((l, r)) = self.nodes[i].children {
            let n = &self.nodes[i];
            i = if row[n.feature] <= n.threshold { l } else { r };
        }
        i
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        self.nodes[self.leaf_index(row)].value
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match t.nodes[i].children {
                None => 0,
                Some((l, r)) => 1 + go(t, l).max(go(t, r)),
            }
        }
        go(self, 0)
    }

    pub fn split_nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| !n.is_leaf())
    }

    /// Scales every node value (boosting shrinkage).
    pub(crate) fn scale_values(&mut self, factor: f64) {
        for n in &mut self.nodes {
            n.value *= factor;
        }
    }
}

/// Borrowed row-major matrix.
#[derive(Debug, Clone, Copy)]
pub struct Matrix<'a> {
    pub data: &'a [f64],
    pub n_cols: usize,
}

impl<'a> Matrix<'a> {
    pub fn new(data: &'a [f64], n_cols: usize) -> Self {
        debug_assert!(n_cols > 0 && data.len() % n_cols == 0);
        Matrix { data, n_cols }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n_cols + col]
    }

    pub fn n_rows(&self) -> usize {
        self.data.len() / self.n_cols
    }
}

/// Split criterion. Per-sample statistics are additive triples
/// `[count, a, b]`; the meaning of `a`/`b` depends on the objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Objective {
    /// `a` = label (0/1).
    Gini,
    /// `a` = label (0/1).
    Entropy,
    /// `a` = target, `b` = target².
    Variance,
    /// `a` = gradient, `b` = hessian.
    Newton { lambda: f64, min_child_weight: f64 },
}

pub(crate) type Stats = [f64; 3];

#[inline]
fn add(acc: &mut Stats, s: &Stats) {
    acc[0] += s[0];
    acc[1] += s[1];
    acc[2] += s[2];
}

#[inline]
fn diff(a: &Stats, b: &Stats) -> Stats {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn gini(pos_fraction: f64) -> f64 {
    1.0 - pos_fraction * pos_fraction - (1.0 - pos_fraction) * (1.0 - pos_fraction)
}

pub fn entropy(pos_fraction: f64) -> f64 {
    let h = |p: f64| if p > 0.0 { -p * p.log2() } else { 0.0 };
    h(pos_fraction) + h(1.0 - pos_fraction)
}

impl Objective {
    /// Node score; the gain of a split is `score(L) + score(R) − score(P)`.
    /// For impurity criteria this is `−count × impurity`, so gains are
    /// count-weighted impurity decreases.
    #[inline]
    fn score(&self, s: &Stats) -> f64 {
        match *self {
            Objective::Gini => {
                let (n, pos) = (s[0], s[1]);
                if n <= 0.0 {
                    0.0
                } else {
                    -n * gini(pos / n)
                }
            }
            Objective::Entropy => {
                let (n, pos) = (s[0], s[1]);
                if n <= 0.0 {
                    0.0
                } else {
                    -n * entropy(pos / n)
                }
            }
            Objective::Variance => {
                let (n, sum, sumsq) = (s[0], s[1], s[2]);
                if n <= 0.0 {
                    0.0
                } else {
                    -(sumsq - sum * sum / n)
                }
            }
            Objective::Newton { lambda, .. } => 0.5 * s[1] * s[1] / (s[2] + lambda),
        }
    }

    fn leaf_value(&self, s: &Stats) -> f64 {
        match *self {
            Objective::Gini | Objective::Entropy | Objective::Variance => {
                if s[0] > 0.0 {
                    s[1] / s[0]
                } else {
                    0.0
                }
            }
            Objective::Newton { lambda, .. } => -s[1] / (s[2] + lambda),
        }
    }

    fn is_pure(&self, s: &Stats) -> bool {
        match *self {
            Objective::Gini | Objective::Entropy => s[1] <= 0.0 || s[1] >= s[0],
            Objective::Variance => {
                let sse = s[2] - s[1] * s[1] / s[0];
                sse <= f64::EPSILON * s[2].abs().max(1.0)
            }
            Objective::Newton { .. } => false,
        }
    }

    fn child_ok(&self, s: &Stats, min_leaf: f64) -> bool {
        if s[0] < min_leaf {
            return false;
        }
        match *self {
            Objective::Newton {
                min_child_weight, ..
            } => s[2] >= min_child_weight,
            _ => true,
        }
    }

    fn accepts(&self, gain: f64) -> bool {
        match self {
            // Impurity decreases are non-negative for concave impurities, so
            // zero-gain splits of impure nodes are taken, as CART does.
            Objective::Newton { .. } => gain > 0.0,
            _ => gain.is_finite(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct GrowParams {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    /// Features drawn per node; `None` scans every feature.
    pub features_per_split: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

pub(crate) struct Grower<'a> {
    pub x: Matrix<'a>,
    /// Indexed by row of `x`.
    pub stats: &'a [Stats],
    pub objective: Objective,
    pub params: GrowParams,
}

impl<'a> Grower<'a> {
    /// Grows a tree on `samples` (row indices; repeats allowed).
    pub fn grow(&self, samples: Vec<usize>, mut rng: Option<&mut ChaCha8Rng>) -> Tree {
        let mut nodes = Vec::new();
        self.grow_node(samples, 0, &mut nodes, &mut rng);
        Tree { nodes }
    }

    fn total(&self, samples: &[usize]) -> Stats {
        let mut acc = [0.0; 3];
        for &i in samples {
            add(&mut acc, &self.stats[i]);
        }
        acc
    }

    fn grow_node(
        &self,
        samples: Vec<usize>,
        depth: usize,
        nodes: &mut Vec<Node>,
        rng: &mut Option<&mut ChaCha8Rng>,
    ) -> usize {
        let total = self.total(&samples);
        let id = nodes.len();
        nodes.push(Node::leaf(self.objective.leaf_value(&total), total[0]));

        let depth_ok = self.params.max_depth.is_none_or(|d| depth < d);
        if !depth_ok
            || samples.len() < self.params.min_samples_split.max(2)
            || self.objective.is_pure(&total)
        {
            return id;
        }

        let features = self.candidate_features(rng);
        let Some(split) = self.best_split(&samples, &total, &features) else {
            return id;
        };
        if !self.objective.accepts(split.gain) {
            return id;
        }

        let (left, right): (Vec<usize>, Vec<usize>) = samples
            .iter()
            .partition(|&&i| self.x.get(i, split.feature) <= split.threshold);
        drop(samples);
        let l = self.grow_node(left, depth + 1, nodes, rng);
        let r = self.grow_node(right, depth + 1, nodes, rng);
        let node = &mut nodes[id];
        node.feature = split.feature;
        node.threshold = split.threshold;
        node.children = Some((l, r));
        node.gain = split.gain;
        id
    }

    fn candidate_features(&self, rng: &mut Option<&mut ChaCha8Rng>) -> Vec<usize> {
        let p = self.x.n_cols;
        match (self.params.features_per_split, rng.as_deref_mut()) {
            (Some(k), Some(rng)) if k < p => {
                let mut f = index::sample(rng, p, k.max(1)).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..p).collect(),
        }
    }

    /// Best split over `features`, scanning thresholds at midpoints of
    /// consecutive distinct values. Ties keep the earliest (feature,
    /// threshold) candidate.
    pub fn best_split(&self, samples: &[usize], total: &Stats, features: &[usize]) -> Option<Split> {
        let parent_score = self.objective.score(total);
        let min_leaf = self.params.min_samples_leaf.max(1) as f64;
        let mut best: Option<Split> = None;
        let mut order: Vec<(f64, usize)> = Vec::with_capacity(samples.len());
        for &f in features {
            order.clear();
            order.extend(samples.iter().map(|&i| (self.x.get(i, f), i)));
            order.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            let mut left = [0.0; 3];
            for k in 1..order.len() {
                add(&mut left, &self.stats[order[k - 1].1]);
                let (lo, hi) = (order[k - 1].0, order[k].0);
                if lo == hi {
                    continue;
                }
                let right = diff(total, &left);
                if !self.objective.child_ok(&left, min_leaf)
                    || !self.objective.child_ok(&right, min_leaf)
                {
                    continue;
                }
                let gain =
                    self.objective.score(&left) + self.objective.score(&right) - parent_score;
                if best.is_none_or(|b| gain > b.gain) {
                    let mut threshold = 0.5 * (lo + hi);
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some(Split {
                        feature: f,
                        threshold,
                        gain,
                    });
                }
            }
        }
        best
    }
}

/// Per-sample stats for classification objectives.
pub(crate) fn class_stats(y: &[u8]) -> Vec<Stats> {
    y.iter().map(|&v| [1.0, f64::from(v), 0.0]).collect()
}

pub(crate) fn regression_stats(target: &[f64]) -> Vec<Stats> {
    target.iter().map(|&t| [1.0, t, t * t]).collect()
}
