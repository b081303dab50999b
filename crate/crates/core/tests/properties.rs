mod support;

use proptest::prelude::*;
use strokekit::eval::{confusion, report};
use strokekit::explain::{impurity_importance, tree_shap, tree_shap_single};
use strokekit::impute::{self, ImputerConfig};
use strokekit::models::svm::{solve_dual, Kernel};
use strokekit::models::{fit, Criterion, ForestModel, HyperParams, KernelKind, TrainedModel, TreeModel};
use strokekit::resample::{apply, ResampleStrategy, StrategyKind};
use strokekit::tabular::{
    class_balance, stratified_split, summarize, Dataset, EncodedTable, FeatureKind, FeatureSummary, Schema,
};
use strokekit::tune::stratified_kfold;
use support::*;
use support::checks::{self, random_dataset, trained};


// ---------------------------------------------------------------- tabular

#[test]
fn encoding_round_trips_every_category() {
    let schema = Schema::stroke();
    for spec in schema.features.iter().chain(std::iter::once(&schema.label)) {
        let codes: Vec<u32> = spec.encoding().iter().map(|e| e.1).collect();
        assert_eq!(codes, (0..codes.len() as u32).collect::<Vec<_>>(), "{}", spec.name());
        for (cat, code) in spec.encoding() {
            assert_eq!(spec.encode(cat), Some(*code));
            assert_eq!(spec.decode(*code), Some(cat.as_str()));
        }
    }
}

fn oracle_summary(values: &[f64]) -> (f64, f64, f64, f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    // order statistic by rank counting
    let kth = |k: usize| -> f64 {
        *values
            .iter()
            .find(|&&v| {
                let below = values.iter().filter(|&&w| w < v).count();
                let equal = values.iter().filter(|&&w| w == v).count();
                below <= k && k < below + equal
            })
            .unwrap()
    };
    let median = if n % 2 == 1 {
        kth(n / 2)
    } else {
        (kth(n / 2 - 1) + kth(n / 2)) / 2.0
    };
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (mean, median, var.sqrt(), min, max)
}

fn assert_summary(s: &FeatureSummary, values: &[f64]) {
    let (mean, median, std, min, max) = oracle_summary(values);
    assert_eq!(s.count, values.len());
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + b.abs());
    assert!(close(s.mean, mean), "mean {} vs {}", s.mean, mean);
    assert_eq!(s.median, median);
    assert!(close(s.std, std), "std {} vs {}", s.std, std);
    assert_eq!((s.min, s.max), (min, max));
}

#[test]
fn summary_matches_oracle_on_1000_tables() {
    let mut g = Gen::new(11);
    for _ in 0..1000 {
        let n = 2 + g.below(40);
        let p = 1 + g.below(4);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|j| if j == 0 { g.below(2) as f64 } else { (g.normal() * 100.0).round() / 10.0 }).collect())
            .collect();
        let mut y: Vec<u8> = (0..n).map(|_| u8::from(g.chance(0.3))).collect();
        y[0] = 0;
        y[1] = 1;
        let ds = Dataset::unnamed(&rows, y.clone()).unwrap();
        let rep = summarize(&ds, true);
        for j in 0..p {
            let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            let f = &rep.features[j];
            assert_summary(&f.overall, &col);
            for class in 0..2u8 {
                let sub: Vec<f64> = (0..n).filter(|&i| y[i] == class).map(|i| col[i]).collect();
                assert_summary(&f.by_class.as_ref().unwrap()[class as usize], &sub);
            }
        }
    }
}

proptest! {
    #[test]
    fn split_preserves_prevalence(neg in 5usize..300, pos in 5usize..60, frac in 0.1f64..0.5, seed in any::<u64>()) {
        let rows: Vec<Vec<f64>> = (0..neg + pos).map(|i| vec![i as f64]).collect();
        let y: Vec<u8> = (0..neg + pos).map(|i| u8::from(i >= neg)).collect();
        let ds = Dataset::unnamed(&rows, y).unwrap();
        if let Ok((train, test)) = stratified_split(&ds, frac, seed) {
            let full = class_balance(&ds).positive_fraction;
            let t = class_balance(&test).positive_fraction;
            prop_assert!((t - full).abs() <= 1.0 / test.n_rows() as f64);
            prop_assert_eq!(train.n_rows() + test.n_rows(), ds.n_rows());
            let mut all: Vec<f64> = train.x().iter().chain(test.x()).copied().collect();
            all.sort_by(f64::total_cmp);
            prop_assert_eq!(all, ds.x().to_vec());
        }
    }

    #[test]
    fn class_balance_is_permutation_invariant(y in proptest::collection::vec(0u8..2, 1..100), seed in any::<u64>()) {
        let rows: Vec<Vec<f64>> = (0..y.len()).map(|i| vec![i as f64]).collect();
        let ds = Dataset::unnamed(&rows, y.clone()).unwrap();
        let mut g = Gen::new(seed);
        let mut perm: Vec<usize> = (0..y.len()).collect();
        for i in (1..perm.len()).rev() {
            perm.swap(i, g.below(i + 1));
        }
        prop_assert_eq!(class_balance(&ds), class_balance(&ds.select(&perm)));
    }
}

// ---------------------------------------------------------------- impute

fn linear_table(g: &mut Gen, n: usize, missing_frac: f64) -> (EncodedTable, Vec<f64>) {
    let mut truth = Vec::new();
    let rows: Vec<Vec<Option<f64>>> = (0..n)
        .map(|_| {
            let age = 20.0 + g.unit() * 60.0;
            truth.push(2.0 * age);
            let bmi = if g.chance(missing_frac) { None } else { Some(2.0 * age) };
            vec![Some(age), Some(g.below(2) as f64), bmi]
        })
        .collect();
    let t = EncodedTable::new(
        vec!["age".into(), "flag".into(), "bmi".into()],
        vec![FeatureKind::Numeric, FeatureKind::Binary, FeatureKind::Numeric],
        rows,
    )
    .unwrap();
    (t, truth)
}

#[test]
fn imputer_recovers_linear_relation() {
    let mut g = Gen::new(5);
    let (table, truth) = linear_table(&mut g, 400, 0.1);
    let cfg = ImputerConfig {
        seed: 3,
        ..ImputerConfig::default()
    };
    let (out, fitted) = impute::fit_transform(&table, &cfg).unwrap();
    assert!(fitted.rounds <= cfg.max_rounds);
    let observed: Vec<f64> = (0..table.n_rows()).filter_map(|i| table.get(i, 2)).collect();
    let (lo, hi) = (
        observed.iter().copied().fold(f64::INFINITY, f64::min),
        observed.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    );
    let mut imputed = 0;
    for i in 0..table.n_rows() {
        for j in 0..3 {
            if let Some(v) = table.get(i, j) {
                assert_eq!(out.get(i, j).unwrap().to_bits(), v.to_bits());
            }
        }
        if table.get(i, 2).is_none() {
            imputed += 1;
            let v = out.get(i, 2).unwrap();
            assert!((lo..=hi).contains(&v));
            assert!((v - truth[i]).abs() <= 0.05 * truth[i], "row {i}: {v} vs {}", truth[i]);
        }
    }
    assert!(imputed > 20);
    assert_eq!(impute::fit_transform(&table, &cfg).unwrap().0, out);

    let (fresh, truth) = linear_table(&mut g, 100, 0.3);
    let done = impute::transform(&fitted, &fresh).unwrap();
    for i in 0..fresh.n_rows() {
        match fresh.get(i, 2) {
            Some(v) => assert_eq!(done.get(i, 2), Some(v)),
            None => {
                let v = done.get(i, 2).unwrap();
                assert!((v - truth[i]).abs() <= 0.05 * truth[i], "row {i}: {v} vs {}", truth[i]);
            }
        }
    }
}

// ---------------------------------------------------------------- resample

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn smote_geometry_and_neighbours(seed in any::<u64>(), n in 40usize..500, k in 1usize..7, p in 1usize..5) {
        checks::smote_check(seed, n, k, p);
    }

    #[test]
    fn resamplers_hit_target_counts(seed in any::<u64>(), neg in 20usize..200, pos in 8usize..20, ratio in 0.2f64..1.0) {
        let rows: Vec<Vec<f64>> = (0..neg + pos).map(|i| vec![i as f64, (i % 3) as f64]).collect();
        let y: Vec<u8> = (0..neg + pos).map(|i| u8::from(i >= neg)).collect();
        let ds = Dataset::unnamed(&rows, y).unwrap();
        for kind in [StrategyKind::Oversample, StrategyKind::Undersample, StrategyKind::Smote] {
            let mut s = ResampleStrategy::new(kind, seed);
            s.target_ratio = ratio;
            let out = apply(&ds, &s).unwrap();
            let [n0, n1] = out.class_counts();
            match kind {
                StrategyKind::Undersample => {
                    prop_assert_eq!(n1, pos);
                    prop_assert_eq!(n0, ((pos as f64 / ratio).round() as usize).min(neg));
                }
                _ => {
                    prop_assert_eq!(n0, neg);
                    prop_assert_eq!(n1, ((ratio * neg as f64).round() as usize).max(pos));
                }
            }
            // every original row survives untouched or is dropped, never altered
            for r in out.rows().take(if kind == StrategyKind::Undersample { out.n_rows() } else { ds.n_rows() }) {
                prop_assert!(ds.rows().any(|o| o == r));
            }
        }
    }
}

// ---------------------------------------------------------------- models



#[test]
fn svm_dual_satisfies_kkt() {
    let mut g = Gen::new(23);
    for trial in 0..12 {
        let n = 10 + g.below(50);
        let p = 1 + g.below(3);
        let z: Vec<f64> = (0..n * p).map(|_| g.normal()).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| if z[i * p] + 0.5 * g.normal() > 0.0 { 1.0 } else { -1.0 })
            .collect();
        if !y.contains(&1.0) || !y.contains(&-1.0) {
            continue;
        }
        let kind = [KernelKind::Linear, KernelKind::Rbf, KernelKind::Poly][trial % 3];
        let kernel = Kernel::new(kind, 0.5, 2);
        let c = [0.1, 1.0, 10.0][trial % 3];
        let tol = 1e-3;
        let sol = solve_dual(&z, p, &y, kernel, c, tol, 1_000_000);
        assert!(sol.converged);
        let balance: f64 = sol.alpha.iter().zip(&y).map(|(a, y)| a * y).sum();
        assert!(balance.abs() < 1e-9);
        for i in 0..n {
            let a = sol.alpha[i];
            assert!((0.0..=c).contains(&a));
            let f: f64 = (0..n)
                .map(|j| sol.alpha[j] * y[j] * kernel.eval(&z[i * p..(i + 1) * p], &z[j * p..(j + 1) * p]))
                .sum::<f64>()
                - sol.rho;
            let slack = y[i] * f - 1.0;
            let violation = if a <= 0.0 {
                (-slack).max(0.0)
            } else if a >= c {
                slack.max(0.0)
            } else {
                slack.abs()
            };
            assert!(violation <= tol + 1e-9, "trial {trial} row {i}: {violation}");
        }
    }
}



#[test]
fn forest_score_is_mean_of_trees() {
    let mut g = Gen::new(37);
    let ds = random_dataset(&mut g, 150, 3, 0.3);
    let TrainedModel::RandomForest(f) = trained("rf", &ds, 9) else { unreachable!() };
    for row in ds.rows() {
        let mean = f.trees.iter().map(|t| t.predict(row)).sum::<f64>() / f.trees.len() as f64;
        assert_eq!(f.probability(row), mean);
    }
    let single = TrainedModel::DecisionTree(TreeModel { tree: f.trees[0].clone(), n_features: 3 });
    let copies = TrainedModel::RandomForest(ForestModel { trees: vec![f.trees[0].clone(); 4], n_features: 3 });
    let names: Vec<String> = ds.feature_names().to_vec();
    for row in ds.rows() {
        assert_eq!(single.predict(row).unwrap(), copies.predict(row).unwrap());
    }
    let (a, b) = (
        impurity_importance(&single, &names).unwrap(),
        impurity_importance(&copies, &names).unwrap(),
    );
    for (x, y) in a.weights.iter().zip(&b.weights) {
        assert!((x - y).abs() < 1e-12);
    }
}

// ---------------------------------------------------------------- eval


proptest! {
    #[test]
    fn metrics_are_permutation_invariant(pairs in proptest::collection::vec((0u8..2, 0u8..2), 1..80), seed in any::<u64>()) {
        let (t, p): (Vec<u8>, Vec<u8>) = pairs.iter().copied().unzip();
        let mut g = Gen::new(seed);
        let mut perm: Vec<usize> = (0..t.len()).collect();
        for i in (1..perm.len()).rev() {
            perm.swap(i, g.below(i + 1));
        }
        let tp: Vec<u8> = perm.iter().map(|&i| t[i]).collect();
        let pp: Vec<u8> = perm.iter().map(|&i| p[i]).collect();
        prop_assert_eq!(report(&confusion(&t, &p).unwrap()), report(&confusion(&tp, &pp).unwrap()));
    }
}

// ---------------------------------------------------------------- tune

#[test]
fn kfold_partitions_exhaustively() {
    let mut g = Gen::new(43);
    for n in 4..=200usize {
        let y: Vec<u8> = (0..n).map(|i| u8::from(i % 2 == 0 || g.chance(0.2))).collect();
        for folds in 2..=5 {
            let smallest = [0u8, 1].map(|c| y.iter().filter(|&&v| v == c).count()).into_iter().min().unwrap();
            let Ok(splits) = stratified_kfold(&y, folds, n as u64) else {
                assert!(smallest < folds);
                continue;
            };
            let mut seen = vec![0usize; n];
            for (train, val) in &splits {
                assert_eq!(train.len() + val.len(), n);
                for &i in val {
                    seen[i] += 1;
                }
                assert!(train.iter().all(|i| !val.contains(i)));
            }
            assert!(seen.iter().all(|&s| s == 1));
            for c in 0..2u8 {
                let sizes: Vec<usize> = splits.iter().map(|(_, v)| v.iter().filter(|&&i| y[i] == c).count()).collect();
                assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            }
        }
    }
}

// ---------------------------------------------------------------- explain


#[test]
fn tree_shap_symmetry_for_exchangeable_features() {
    // x0 and x1 play identical roles: both must exceed 0.5 for the high leaf
    let mut g = Gen::new(53);
    let rows: Vec<Vec<f64>> = (0..400).map(|_| vec![g.below(2) as f64, g.below(2) as f64]).collect();
    let y: Vec<u8> = rows.iter().map(|r| u8::from(r[0] == 1.0 && r[1] == 1.0)).collect();
    let ds = Dataset::unnamed(&rows, y).unwrap();
    let m = fit(&HyperParams::decision_tree(Criterion::Gini, None, 2, 1), &ds).unwrap();
    for x in [[1.0, 1.0], [0.0, 0.0]] {
        let a = tree_shap(&m, &x).unwrap();
        let o = shapley_oracle(&match &m { TrainedModel::DecisionTree(t) => t.tree.clone(), _ => unreachable!() }, &x, 2);
        assert!((a.phi[0] - o[0]).abs() < 1e-9 && (a.phi[1] - o[1]).abs() < 1e-9);
    }
}


#[test]
fn ensemble_attribution_is_sum_of_tree_attributions() {
    let mut g = Gen::new(61);
    let ds = random_dataset(&mut g, 120, 3, 0.3);
    let m = trained("gb", &ds, 2);
    let TrainedModel::GradientBoosting(b) = &m else { unreachable!() };
    for i in 0..20 {
        let x = ds.row(i);
        let mut sum = vec![0.0; 3];
        for t in &b.trees {
            let phi = tree_shap_single(t, x, 3);
            for j in 0..3 {
                sum[j] += phi[j];
            }
        }
        let got = tree_shap(&m, x).unwrap().phi;
        assert_eq!(got.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), sum.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }
}

#[test]
fn unused_feature_has_zero_attribution_and_importance() {
    let mut g = Gen::new(67);
    let rows: Vec<Vec<f64>> = (0..200).map(|_| vec![g.unit(), 7.0, g.unit()]).collect();
    let y: Vec<u8> = rows.iter().map(|r| u8::from(r[0] + r[2] > 1.0)).collect();
    let ds = Dataset::unnamed(&rows, y).unwrap();
    for f in ["dt", "rf", "gb"] {
        let m = trained(f, &ds, 5);
        let imp = impurity_importance(&m, ds.feature_names()).unwrap();
        assert_eq!(imp.weights[1], 0.0);
        assert!((imp.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let summary = strokekit::explain::shap_summary(&m, &ds).unwrap();
        assert_eq!(summary.mean_abs_phi[1], 0.0);
        assert_eq!(summary.ranking[2], 1);
        let mut rev: Vec<usize> = (0..ds.n_rows()).rev().collect();
        rev.rotate_left(17);
        assert_eq!(strokekit::explain::shap_summary(&m, &ds.select(&rev)).unwrap().ranking, summary.ranking);
    }
}

// ---------------------------------------------------------------- shared checks

#[test]
fn logistic_gradient_matches_central_differences() {
    checks::logistic_gradient_matches_central_differences();
}

#[test]
fn cart_root_split_matches_exhaustive_oracle() {
    checks::cart_root_split_matches_exhaustive_oracle();
}

#[test]
fn metrics_match_counting_oracle() {
    checks::metrics_match_counting_oracle();
}

#[test]
fn tree_shap_matches_subset_oracle() {
    checks::tree_shap_matches_subset_oracle();
}

#[test]
fn tree_shap_local_accuracy_on_fitted_models() {
    checks::tree_shap_local_accuracy_on_fitted_models();
}

#[test]
fn fitted_models_are_deterministic() {
    checks::fitted_models_are_deterministic();
}
