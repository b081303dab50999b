//! End-to-end runs on a synthetic file with the stroke schema.

mod support;

use std::collections::BTreeMap;
use std::path::Path;

use strokekit::models::Family;
use strokekit::pipeline::{
    self, exit_code, PipelineConfig, PipelineMode, SearchConfig, Strategy, Subgroup,
};
use strokekit::resample::StrategyKind;
use strokekit::tabular::Schema;
use strokekit::{Error, HyperParams};

fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in walk(dir) {
        let rel = entry.strip_prefix(dir).unwrap().display().to_string();
        out.insert(rel, std::fs::read(&entry).unwrap());
    }
    out
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut files = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            files.extend(walk(&p));
        } else {
            files.push(p);
        }
    }
    files
}

fn rf_config(data: &Path, out: &Path, mode: PipelineMode, seed: u64) -> PipelineConfig {
    let mut cfg = PipelineConfig::new(data, HyperParams::random_forest(30, None, 2, 1, 0));
    cfg.mode = mode;
    cfg.resample.strategy = StrategyKind::Oversample;
    cfg.output_dir = out.to_path_buf();
    cfg.seed = seed;
    cfg.shap_rows = 40;
    cfg
}

#[test]
fn inspect_reports_counts_of_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let csv = support::synthetic_stroke_csv(800, 2);
    let data = dir.path().join("d.csv");
    std::fs::write(&data, &csv).unwrap();
    let rep = pipeline::inspect(&data, &Schema::stroke()).unwrap();
    let lines: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rep.rows, 800);
    assert_eq!(rep.columns, 11);
    let na = lines.iter().filter(|l| l.contains("N/A")).count();
    let bmi = rep.missing.iter().find(|m| m.column == "bmi").unwrap();
    assert_eq!(bmi.count, na);
    assert!(rep.missing.iter().filter(|m| m.column != "bmi").all(|m| m.count == 0));
    let pos = lines.iter().filter(|l| l.ends_with(",1")).count();
    assert_eq!(rep.class_balance.positive, pos);
    let glucose = rep.summary.feature("avg_glucose_level").unwrap().by_class.as_ref().unwrap();
    assert!(glucose[1].mean > glucose[0].mean);
    let json: serde_json::Value = serde_json::from_str(&rep.to_json().unwrap()).unwrap();
    assert_eq!(json["rows"], 800);
    assert!(json["summary"]["bmi"]["1"]["median"].is_number());
}

#[test]
fn identical_configs_give_byte_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let data = support::write_synthetic(dir.path(), 700, 3);
    for mode in [PipelineMode::PaperProtocol, PipelineMode::LeakFree] {
        let a = dir.path().join(format!("{mode:?}-a"));
        let b = dir.path().join(format!("{mode:?}-b"));
        pipeline::run_pipeline(&rf_config(&data, &a, mode, 9)).unwrap();
        pipeline::run_pipeline(&rf_config(&data, &b, mode, 9)).unwrap();
        let (fa, fb) = (read_dir(&a), read_dir(&b));
        assert_eq!(fa.keys().collect::<Vec<_>>(), fb.keys().collect::<Vec<_>>());
        for name in [
            "summary.csv",
            "report_random_forest_oversample.json",
            "importance_random_forest.csv",
            "shap_random_forest.csv",
            "shap_ranking_random_forest.csv",
            "model_random_forest.json",
        ] {
            assert!(fa.contains_key(name), "{name} missing");
        }
        assert_eq!(fa, fb);

        let c = dir.path().join(format!("{mode:?}-c"));
        pipeline::run_pipeline(&rf_config(&data, &c, mode, 10)).unwrap();
        assert_ne!(fa["model_random_forest.json"], read_dir(&c)["model_random_forest.json"]);
    }
}

#[test]
fn leak_free_never_fits_on_test_rows() {
    let dir = tempfile::tempdir().unwrap();
    let data = support::write_synthetic(dir.path(), 600, 4);
    for seed in 0..3 {
        let a = pipeline::execute(&rf_config(&data, dir.path(), PipelineMode::LeakFree, seed)).unwrap();
        let audit = &a.audit;
        assert!(!audit.test_rows.is_empty());
        for r in &audit.test_rows {
            assert!(audit.imputer_rows.binary_search(r).is_err());
            assert!(audit.resample_rows.binary_search(r).is_err());
        }
        assert_eq!(audit.imputer_rows.len() + audit.test_rows.len(), 600);
        // resampling touched the training rows only: the test set keeps the raw prevalence
        let [neg, pos] = a.test.class_counts();
        assert!(pos < neg);
    }
}

#[test]
fn paper_protocol_inflates_oversampled_forest_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let data = support::write_synthetic(dir.path(), 1200, 5);
    let mut wins = 0;
    for seed in 0..5 {
        let paper = pipeline::execute(&rf_config(&data, dir.path(), PipelineMode::PaperProtocol, seed)).unwrap();
        let clean = pipeline::execute(&rf_config(&data, dir.path(), PipelineMode::LeakFree, seed)).unwrap();
        if paper.report.test.accuracy > clean.report.test.accuracy {
            wins += 1;
        }
    }
    assert!(wins >= 4, "paper protocol won {wins}/5");
}

#[test]
fn search_writes_cv_table() {
    let dir = tempfile::tempdir().unwrap();
    let data = support::write_synthetic(dir.path(), 500, 6);
    let mut cfg = rf_config(&data, &dir.path().join("out"), PipelineMode::LeakFree, 1);
    cfg.params = None;
    cfg.search = Some(SearchConfig {
        n_iter: 3,
        folds: 3,
        ..SearchConfig::for_family(Family::DecisionTree)
    });
    let a = pipeline::run_pipeline(&cfg).unwrap();
    let cv = a.cv.as_ref().unwrap();
    assert_eq!(cv.candidates.len(), 3);
    assert_eq!(a.report.params, *cv.best_params());
    let text = std::fs::read_to_string(dir.path().join("out/cv_decision_tree.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 3 * 3 + 3);
}

#[test]
fn subgroup_rerun_emits_its_own_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let data = support::write_synthetic(dir.path(), 1500, 7);
    let out = dir.path().join("out");
    let mut cfg = PipelineConfig::new(&data, HyperParams::gradient_boosting(30, 3, 0.3, 0.8, 0));
    cfg.mode = PipelineMode::PaperProtocol;
    cfg.resample.strategy = StrategyKind::Oversample;
    cfg.subgroup = Some(Subgroup {
        age_min: 65.0,
        age_max: 80.0,
    });
    cfg.output_dir = out.clone();
    cfg.shap_rows = 50;
    let a = pipeline::run_pipeline(&cfg).unwrap();
    let g = a.subgroup.as_ref().unwrap();
    assert!(g.shap.as_ref().unwrap().values.iter().all(|r| (65.0..=80.0).contains(&r[1])));
    for name in [
        "report_gradient_boosting_oversample_subgroup.json",
        "shap_gradient_boosting_subgroup.csv",
        "importance_gradient_boosting_subgroup.csv",
    ] {
        assert!(out.join(name).exists(), "{name}");
    }
    let shap = a.shap.as_ref().unwrap();
    assert_eq!(shap.output, strokekit::explain::OutputSpace::LogOdds);
    assert_eq!(shap.rank_of("age"), Some(1));
}

#[test]
fn failures_name_the_stage_and_write_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.csv");
    let good = support::synthetic_stroke_csv(100, 8);
    std::fs::write(&data, good.replace("avg_glucose_level", "glucose")).unwrap();
    let out = dir.path().join("out");
    let cfg = rf_config(&data, &out, PipelineMode::LeakFree, 0);
    let err = pipeline::run_pipeline(&cfg).unwrap_err();
    assert!(matches!(&err, Error::Stage { stage: "ingest", .. }), "{err}");
    assert!(matches!(err.root(), Error::MissingColumn(c) if c == "avg_glucose_level"));
    assert_eq!(exit_code(&err), 2);
    assert!(!out.exists());

    // a single positive row cannot be split into train and test
    let one_pos: String = good
        .lines()
        .enumerate()
        .map(|(i, l)| {
            if i > 1 && l.ends_with(",1") {
                format!("{},0\n", &l[..l.len() - 2])
            } else {
                format!("{l}\n")
            }
        })
        .collect();
    std::fs::write(&data, one_pos).unwrap();
    let err = pipeline::run_pipeline(&cfg).unwrap_err();
    assert_eq!(exit_code(&err), 2, "{err}");

    let mut bad = cfg.clone();
    bad.test_fraction = 1.5;
    assert_eq!(exit_code(&pipeline::run_pipeline(&bad).unwrap_err()), 1);
    assert!(!out.exists());
}

#[test]
fn matrix_runs_every_cell_and_records_failures() {
    let dir = tempfile::tempdir().unwrap();
    let data = support::write_synthetic(dir.path(), 400, 9);
    let out = dir.path().join("matrix");
    let mut base = rf_config(&data, &out, PipelineMode::PaperProtocol, 2);
    base.shap_rows = 10;
    // k above the minority count makes every SMOTE cell fail
    base.resample.k = 1000;
    let families = [Family::DecisionTree, Family::LogisticRegression, Family::GradientBoosting];
    let rep = pipeline::run_matrix(&base, &Strategy::ALL, &families).unwrap();
    assert_eq!(rep.cells.len(), 9);
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 10);
    for c in &rep.cells {
        assert_eq!(c.outcome.is_err(), c.strategy == Strategy::Smote, "{:?} {:?}", c.family, c.strategy);
    }
    assert!(out.join("decision_tree_oversample/report_decision_tree_oversample.json").exists());
    assert!(!out.join("decision_tree_smote").exists());
    assert!(summary.lines().filter(|l| l.contains(",error,")).count() == 3);
}
