//! Shared fixtures: a synthetic stand-in for the stroke CSV and independent
//! reference implementations used as test oracles.
#![allow(dead_code)]

pub mod checks;
mod synthetic;

pub use synthetic::*;

use strokekit::models::{Node, Tree};

/// k nearest neighbours of `rows[i]` among `rows` (excluding i), by
/// Euclidean distance with ties broken by index. Membership is decided by
/// counting strictly better candidates rather than by sorting.
pub fn knn_oracle(rows: &[Vec<f64>], i: usize, k: usize) -> Vec<usize> {
    let d = |j: usize| -> f64 {
        rows[i]
            .iter()
            .zip(&rows[j])
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    };
    (0..rows.len())
        .filter(|&j| j != i)
        .filter(|&j| {
            let dj = d(j);
            let better = (0..rows.len())
                .filter(|&m| m != i && m != j)
                .filter(|&m| {
                    let dm = d(m);
                    dm < dj || (dm == dj && m < j)
                })
                .count();
            better < k
        })
        .collect()
}

/// Cover-weighted conditional expectation of a tree's output given that only
/// the features in `known` are observed at `x`.
pub fn conditional_expectation(tree: &Tree, node: usize, x: &[f64], known: &[bool]) -> f64 {
    let n: &Node = &tree.nodes[node];
    match n.children {
        None => n.value,
        Some((l, r)) => {
            if known[n.feature] {
                let next = if x[n.feature] <= n.threshold { l } else { r };
                conditional_expectation(tree, next, x, known)
            } else {
                let (cl, cr) = (tree.nodes[l].cover, tree.nodes[r].cover);
                (cl * conditional_expectation(tree, l, x, known) + cr * conditional_expectation(tree, r, x, known))
                    / (cl + cr)
            }
        }
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Exact Shapley values by enumerating every coalition.
pub fn shapley_oracle(tree: &Tree, x: &[f64], p: usize) -> Vec<f64> {
    let mut phi = vec![0.0; p];
    for i in 0..p {
        for mask in 0u32..(1 << p) {
            if mask & (1 << i) != 0 {
                continue;
            }
            let size = mask.count_ones() as usize;
            let w = factorial(size) * factorial(p - size - 1) / factorial(p);
            let mut known: Vec<bool> = (0..p).map(|j| mask & (1 << j) != 0).collect();
            let without = conditional_expectation(tree, 0, x, &known);
            known[i] = true;
            let with = conditional_expectation(tree, 0, x, &known);
            phi[i] += w * (with - without);
        }
    }
    phi
}

/// Random tree with at most `depth` levels over `p` features, covers
/// consistent with a parent's total.
pub fn random_tree(g: &mut Gen, p: usize, depth: usize) -> Tree {
    fn build(g: &mut Gen, p: usize, depth: usize, cover: f64, nodes: &mut Vec<Node>) -> usize {
        let id = nodes.len();
        nodes.push(Node::leaf(g.unit() * 2.0 - 1.0, cover));
        if depth == 0 || cover < 2.0 || g.chance(0.2) {
            return id;
        }
        let left_cover = 1.0 + (g.unit() * (cover - 2.0)).round();
        let feature = g.below(p);
        let threshold = (g.unit() * 4.0).round() / 4.0;
        let l = build(g, p, depth - 1, left_cover, nodes);
        let r = build(g, p, depth - 1, cover - left_cover, nodes);
        let node = &mut nodes[id];
        node.feature = feature;
        node.threshold = threshold;
        node.children = Some((l, r));
        node.gain = 1.0;
        id
    }
    let mut nodes = Vec::new();
    let cover = 8.0 + g.below(60) as f64;
    build(g, p, depth, cover, &mut nodes);
    Tree { nodes }
}

/// Counting oracle for the binary metrics: per-class (precision, recall,
/// f1, support), written directly from the definitions.
pub fn metrics_oracle(y_true: &[u8], y_pred: &[u8]) -> [(f64, f64, f64, usize); 2] {
    let mut out = [(0.0, 0.0, 0.0, 0); 2];
    for class in 0..2u8 {
        let mut tp = 0;
        let mut predicted = 0;
        let mut actual = 0;
        for k in 0..y_true.len() {
            if y_pred[k] == class {
                predicted += 1;
            }
            if y_true[k] == class {
                actual += 1;
                if y_pred[k] == class {
                    tp += 1;
                }
            }
        }
        let precision = if predicted == 0 { 0.0 } else { tp as f64 / predicted as f64 };
        let recall = if actual == 0 { 0.0 } else { tp as f64 / actual as f64 };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        out[class as usize] = (precision, recall, f1, actual);
    }
    out
}

fn gini_mass(y: &[u8], idx: &[usize]) -> f64 {
    let n = idx.len() as f64;
    if n == 0.0 {
        return 0.0;
    }
    let pos = idx.iter().filter(|&&i| y[i] == 1).count() as f64;
    let q = pos / n;
    n * (1.0 - q * q - (1.0 - q) * (1.0 - q))
}

/// Weighted Gini decrease of splitting all rows on `rows[.][f] <= t`.
pub fn root_gini_gain(rows: &[Vec<f64>], y: &[u8], f: usize, t: f64) -> f64 {
    let all: Vec<usize> = (0..rows.len()).collect();
    let (l, r): (Vec<usize>, Vec<usize>) = all.iter().partition(|&&i| rows[i][f] <= t);
    gini_mass(y, &all) - gini_mass(y, &l) - gini_mass(y, &r)
}

/// Best weighted Gini decrease over every (feature, midpoint) candidate,
/// `None` if no feature has two distinct values.
pub fn best_root_gini_gain(rows: &[Vec<f64>], y: &[u8]) -> Option<f64> {
    let mut best: Option<f64> = None;
    for f in 0..rows[0].len() {
        let mut vals: Vec<f64> = rows.iter().map(|r| r[f]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let gain = root_gini_gain(rows, y, f, 0.5 * (w[0] + w[1]));
            best = Some(best.map_or(gain, |b: f64| b.max(gain)));
        }
    }
    best
}
