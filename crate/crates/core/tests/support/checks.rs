//! Property checks shared by the property suite and the acceptance report.
//! Each check panics with a description on the first violation.

use strokekit::eval::{confusion, report};
use strokekit::explain::{raw_output, tree_shap};
use strokekit::models::logistic::objective;
use strokekit::models::tree::Matrix;
use strokekit::models::{fit, Criterion, HyperParams, KernelKind, TrainedModel, TreeModel};
use strokekit::resample::{smote_detailed, ResampleStrategy, StrategyKind};
use strokekit::tabular::Dataset;

use super::*;

pub fn random_dataset(g: &mut Gen, n: usize, p: usize, pos_rate: f64) -> Dataset {
    loop {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|_| (g.unit() * 10.0).round() / 2.0).collect())
            .collect();
        let y: Vec<u8> = rows
            .iter()
            .map(|r| u8::from(g.chance(pos_rate) || r[0] > 4.0 && g.chance(0.5)))
            .collect();
        let ds = Dataset::unnamed(&rows, y).unwrap();
        let [a, b] = ds.class_counts();
        if a >= 6 && b >= 6 {
            return ds;
        }
    }
}

pub fn trained(family: &str, ds: &Dataset, seed: u64) -> TrainedModel {
    let params = match family {
        "dt" => HyperParams::decision_tree(Criterion::Entropy, Some(6), 2, 1),
        "rf" => HyperParams::random_forest(15, Some(8), 2, 1, seed),
        "gb" => HyperParams::gradient_boosting(20, 3, 0.3, 0.8, seed),
        "svm" => HyperParams::svm(KernelKind::Rbf, 1.0, 0.5, 3),
        _ => HyperParams::logistic(1.0),
    };
    fit(&params, ds).unwrap()
}

pub fn logistic_gradient_matches_central_differences() {
    let mut g = Gen::new(17);
    for _ in 0..20 {
        let n = 5 + g.below(30);
        let p = 1 + g.below(5);
        let x: Vec<f64> = (0..n * p).map(|_| g.normal()).collect();
        let y: Vec<u8> = (0..n).map(|_| u8::from(g.chance(0.5))).collect();
        let c = 10f64.powf(g.unit() * 4.0 - 2.0);
        let theta: Vec<f64> = (0..=p).map(|_| g.normal()).collect();
        let (_, grad) = objective(Matrix::new(&x, p), &y, c, &theta);
        for j in 0..=p {
            let h = 1e-5;
            let mut plus = theta.clone();
            let mut minus = theta.clone();
            plus[j] += h;
            minus[j] -= h;
            let fd = (objective(Matrix::new(&x, p), &y, c, &plus).0
                - objective(Matrix::new(&x, p), &y, c, &minus).0)
                / (2.0 * h);
            let rel = (fd - grad[j]).abs() / grad[j].abs().max(1e-8);
            assert!(rel < 1e-5 || (fd - grad[j]).abs() < 1e-10, "coordinate {j}: {fd} vs {}", grad[j]);
        }
    }
}

pub fn cart_root_split_matches_exhaustive_oracle() {
    let grid = [0.0, 1.0, 2.0];
    let cells: Vec<([f64; 2], u8)> = grid
        .iter()
        .flat_map(|&a| grid.iter().flat_map(move |&b| [0u8, 1].map(|y| ([a, b], y))))
        .collect();
    let mut checked = 0;
    for n in 2..=4usize {
        let mut idx = vec![0usize; n];
        loop {
            let rows: Vec<Vec<f64>> = idx.iter().map(|&k| cells[k].0.to_vec()).collect();
            let y: Vec<u8> = idx.iter().map(|&k| cells[k].1).collect();
            if y.contains(&0) && y.contains(&1) {
                let ds = Dataset::unnamed(&rows, y.clone()).unwrap();
                let m = fit(&HyperParams::decision_tree(Criterion::Gini, Some(2), 2, 1), &ds).unwrap();
                let TrainedModel::DecisionTree(TreeModel { tree, .. }) = &m else { unreachable!() };
                let root = &tree.nodes[0];
                match best_root_gini_gain(&rows, &y) {
                    None => assert!(root.is_leaf()),
                    Some(best) => {
                        assert!(!root.is_leaf(), "{rows:?} {y:?}");
                        let got = root_gini_gain(&rows, &y, root.feature, root.threshold);
                        assert!((got - best).abs() < 1e-12, "{rows:?} {y:?}: {got} vs {best}");
                        assert!((root.gain - best).abs() < 1e-12);
                    }
                }
                checked += 1;
            }
            // odometer over all row tuples
            let mut d = 0;
            while d < n {
                idx[d] += 1;
                if idx[d] < cells.len() {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
            if d == n {
                break;
            }
        }
    }
    assert!(checked > 50_000);
}

pub fn metrics_match_counting_oracle() {
    let mut g = Gen::new(41);
    for _ in 0..1000 {
        let n = 1 + g.below(60);
        let bias = g.unit();
        let y_true: Vec<u8> = (0..n).map(|_| u8::from(g.chance(bias))).collect();
        let y_pred: Vec<u8> = (0..n).map(|_| u8::from(g.chance(bias))).collect();
        let r = report(&confusion(&y_true, &y_pred).unwrap());
        let o = metrics_oracle(&y_true, &y_pred);
        for c in 0..2 {
            let m = r.classes[c];
            assert_eq!((m.precision, m.recall, m.f1, m.support), o[c]);
            assert!((m.f1 * (m.precision + m.recall) - 2.0 * m.precision * m.recall).abs() <= 1e-12);
        }
        let correct = y_true.iter().zip(&y_pred).filter(|(a, b)| a == b).count();
        assert_eq!(r.accuracy, correct as f64 / n as f64);
        let w = [o[0].3 as f64 / n as f64, o[1].3 as f64 / n as f64];
        assert!((r.weighted_avg.f1 - (w[0] * o[0].2 + w[1] * o[1].2)).abs() <= 1e-15);
        assert!((r.macro_avg.recall - 0.5 * (o[0].1 + o[1].1)).abs() <= 1e-15);
    }
}

pub fn tree_shap_matches_subset_oracle() {
    let mut g = Gen::new(47);
    let mut trees = 0;
    for p in 1..=3 {
        for depth in 1..=3 {
            for _ in 0..10 {
                let tree = random_tree(&mut g, p, depth);
                let m = TrainedModel::DecisionTree(TreeModel { tree: tree.clone(), n_features: p });
                for _ in 0..50 {
                    let x: Vec<f64> = (0..p).map(|_| g.unit()).collect();
                    let a = tree_shap(&m, &x).unwrap();
                    let o = shapley_oracle(&tree, &x, p);
                    for j in 0..p {
                        assert!((a.phi[j] - o[j]).abs() < 1e-9, "{:?} vs {o:?}", a.phi);
                    }
                    assert!((a.total() - tree.predict(&x)).abs() < 1e-9);
                }
                trees += 1;
            }
        }
    }
    assert_eq!(trees, 90);
}

pub fn tree_shap_local_accuracy_on_fitted_models() {
    let mut g = Gen::new(59);
    let ds = random_dataset(&mut g, 400, 5, 0.3);
    for f in ["dt", "rf", "gb"] {
        let m = trained(f, &ds, 1);
        for i in 0..200 {
            let x = ds.row(i);
            let a = tree_shap(&m, x).unwrap();
            assert!((a.total() - raw_output(&m, x).unwrap()).abs() < 1e-6, "{f} row {i}");
        }
    }
}

pub fn fitted_models_are_deterministic() {
    let mut g = Gen::new(31);
    let ds = random_dataset(&mut g, 200, 4, 0.3);
    for f in ["dt", "rf", "gb", "svm", "lr"] {
        let a = trained(f, &ds, 3).to_json().unwrap();
        assert_eq!(a, trained(f, &ds, 3).to_json().unwrap(), "{f}");
    }
    assert_ne!(trained("rf", &ds, 3), trained("rf", &ds, 4));
}

/// Geometry and neighbour validity of every synthetic row. Returns the
/// number of synthetic rows checked.
pub fn smote_check(seed: u64, n: usize, k: usize, p: usize) -> usize {
    let mut g = Gen::new(seed);
    let ds = random_dataset(&mut g, n, p, 0.15);
    let mut s = ResampleStrategy::new(StrategyKind::Smote, seed);
    s.k = k;
    let minority = u8::from(ds.class_counts()[1] < ds.class_counts()[0]);
    let members = ds.class_indices(minority);
    if members.len() <= k {
        return 0;
    }
    let out = smote_detailed(&ds, &s, |r| rand::Rng::random::<f64>(r)).unwrap();
    let member_rows: Vec<Vec<f64>> = members.iter().map(|&i| ds.row(i).to_vec()).collect();
    for (t, syn) in out.synthetic.iter().enumerate() {
        let row = out.dataset.row(ds.n_rows() + t);
        assert!((0.0..1.0).contains(&syn.u));
        let (x, xn) = (ds.row(syn.base), ds.row(syn.neighbor));
        for j in 0..p {
            assert!((row[j] - (x[j] + syn.u * (xn[j] - x[j]))).abs() <= 1e-9, "collinearity");
            let (lo, hi) = (x[j].min(xn[j]), x[j].max(xn[j]));
            assert!(row[j] >= lo - 1e-9 && row[j] <= hi + 1e-9, "betweenness");
        }
        let a = members.iter().position(|&i| i == syn.base).unwrap();
        let b = members.iter().position(|&i| i == syn.neighbor).unwrap();
        assert!(knn_oracle(&member_rows, a, k).contains(&b), "neighbour not among the {k} nearest");
        assert_eq!(out.dataset.y()[ds.n_rows() + t], minority);
    }
    assert_eq!(out.dataset.select(&(0..ds.n_rows()).collect::<Vec<_>>()), ds);
    let [a, b] = out.dataset.class_counts();
    assert_eq!(a, b);
    out.synthetic.len()
}
