//! End-to-end runs: ingest, encode, impute, resample, split, optional search,
//! final fit, test report, importance and SHAP summary, optional age-subgroup
//! rerun.
//!
//! Two orderings exist. `PaperProtocol` imputes and resamples the full table
//! before the stratified split, so duplicated or synthetic minority rows can
//! land on both sides of the split. `LeakFree` splits first, fits the imputer
//! on the training rows only and resamples the training rows only.
//!
//! Every stochastic stage draws its seed from the master seed and a fixed
//! stage tag (see [`crate::seed::derive`]); seeds written in nested config
//! sections are overridden.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{confusion, report, ClassificationReport};
use crate::explain::{impurity_importance, shap_summary_rows, subgroup_filter, ImportanceVector, ShapSummary};
use crate::impute::{self, ImputerConfig};
use crate::models::{fit, Criterion, Family, HyperParams, KernelKind, TrainedModel};
use crate::resample::{self, ResampleStrategy, StrategyKind};
use crate::seed;
use crate::tabular::{
    self, class_balance_labels, load_csv, stratified_split_indices, ClassBalance, Dataset, Schema,
    SummaryReport,
};
use crate::tune::{randomized_search, CvResult, SearchSpace};

/// The three imbalance corrections compared in the reproduction matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Oversample,
    Undersample,
    Smote,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Oversample, Strategy::Undersample, Strategy::Smote];

    pub fn kind(self) -> StrategyKind {
        match self {
            Strategy::Oversample => StrategyKind::Oversample,
            Strategy::Undersample => StrategyKind::Undersample,
            Strategy::Smote => StrategyKind::Smote,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Oversample => "oversample",
            Strategy::Undersample => "undersample",
            Strategy::Smote => "smote",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "oversample" | "oversampling" => Ok(Strategy::Oversample),
            "undersample" | "undersampling" => Ok(Strategy::Undersample),
            "smote" => Ok(Strategy::Smote),
            _ => Err(Error::Config(format!("unknown strategy `{s}`"))),
        }
    }
}

fn kind_name(kind: StrategyKind) -> &'static str {
    match kind {
        StrategyKind::None => "none",
        StrategyKind::Oversample => "oversample",
        StrategyKind::Undersample => "undersample",
        StrategyKind::Smote => "smote",
    }
}

/// Best configuration reported per family and strategy. Stochastic
/// families get seed 0; runs replace it with a derived seed.
pub fn reference_params(family: Family, strategy: Strategy) -> HyperParams {
    use Strategy::*;
    match (family, strategy) {
        (Family::RandomForest, Undersample) => HyperParams::random_forest(10, Some(20), 5, 2, 0),
        (Family::RandomForest, _) => HyperParams::random_forest(100, None, 2, 1, 0),
        (Family::Svm, Undersample) => HyperParams::svm(KernelKind::Linear, 0.1, 1.0, 3),
        (Family::Svm, _) => HyperParams::svm(KernelKind::Rbf, 10.0, 10.0, 3),
        (Family::LogisticRegression, Undersample) => HyperParams::logistic(0.1),
        (Family::LogisticRegression, Smote) => HyperParams::logistic(10.0),
        (Family::LogisticRegression, Oversample) => HyperParams::logistic(1.0),
        (Family::DecisionTree, Undersample) => {
            HyperParams::decision_tree(Criterion::Entropy, Some(5), 2, 1)
        }
        (Family::DecisionTree, _) => HyperParams::decision_tree(Criterion::Entropy, Some(10), 10, 4),
        (Family::GradientBoosting, Undersample) => HyperParams::gradient_boosting(100, 7, 0.01, 0.8, 0),
        (Family::GradientBoosting, _) => HyperParams::gradient_boosting(100, 3, 0.3, 0.8, 0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineMode {
    PaperProtocol,
    LeakFree,
}

impl PipelineMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PipelineMode::PaperProtocol => "paper_protocol",
            PipelineMode::LeakFree => "leak_free",
        }
    }
}

impl FromStr for PipelineMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "paper" | "paper_protocol" => Ok(PipelineMode::PaperProtocol),
            "leakfree" | "leak_free" => Ok(PipelineMode::LeakFree),
            _ => Err(Error::Config(format!("unknown mode `{s}` (expected paper or leakfree)"))),
        }
    }
}

fn default_n_iter() -> usize {
    20
}
fn default_folds() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Defaults to the family's built-in grid.
    #[serde(default)]
    pub space: Option<SearchSpace>,
    /// Required when `space` is absent.
    #[serde(default)]
    pub family: Option<Family>,
    #[serde(default = "default_n_iter")]
    pub n_iter: usize,
    #[serde(default = "default_folds")]
    pub folds: usize,
}

impl SearchConfig {
    pub fn for_family(family: Family) -> Self {
        SearchConfig {
            space: None,
            family: Some(family),
            n_iter: default_n_iter(),
            folds: default_folds(),
        }
    }

    pub fn resolved_space(&self) -> Result<SearchSpace> {
        match (&self.space, self.family) {
            (Some(space), Some(f)) if space.family() != f => Err(Error::Config(format!(
                "search family `{f}` disagrees with space family `{}`",
                space.family()
            ))),
            (Some(space), _) => Ok(space.clone()),
            (None, Some(f)) => Ok(SearchSpace::default_for(f)),
            (None, None) => Err(Error::Config("search needs a `space` or a `family`".into())),
        }
    }

    pub fn family(&self) -> Result<Family> {
        Ok(self.resolved_space()?.family())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Subgroup {
    pub age_min: f64,
    pub age_max: f64,
}

fn default_schema() -> String {
    "stroke".into()
}
fn default_mode() -> PipelineMode {
    PipelineMode::LeakFree
}
fn default_test_fraction() -> f64 {
    0.2
}
fn default_resample() -> ResampleStrategy {
    ResampleStrategy::new(StrategyKind::None, 0)
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}
fn default_shap_rows() -> usize {
    200
}

/// One JSON document describing a run. Exactly one of `params` and `search`
/// must be set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub data: PathBuf,
    #[serde(default = "default_schema")]
    pub schema: String,
    #[serde(default = "default_mode")]
    pub mode: PipelineMode,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default)]
    pub imputer: ImputerConfig,
    #[serde(default = "default_resample")]
    pub resample: ResampleStrategy,
    #[serde(default)]
    pub params: Option<HyperParams>,
    #[serde(default)]
    pub search: Option<SearchConfig>,
    #[serde(default)]
    pub subgroup: Option<Subgroup>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Matrix cell concurrency; `None` means one per core.
    #[serde(default)]
    pub workers: Option<usize>,
    /// Test rows explained in the SHAP summary; 0 means all of them.
    #[serde(default = "default_shap_rows")]
    pub shap_rows: usize,
}

impl PipelineConfig {
    pub fn new(data: impl Into<PathBuf>, params: HyperParams) -> Self {
        PipelineConfig {
            data: data.into(),
            schema: default_schema(),
            mode: default_mode(),
            test_fraction: default_test_fraction(),
            imputer: ImputerConfig::default(),
            resample: default_resample(),
            params: Some(params),
            search: None,
            subgroup: None,
            output_dir: default_output(),
            seed: 0,
            workers: None,
            shap_rows: default_shap_rows(),
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: PipelineConfig =
            serde_json::from_str(s).map_err(|e| Error::Config(format!("invalid config: {e}")))?;
        Ok(cfg)
    }

    /// Reads a config file; relative `data` and `output_dir` paths resolve
    /// against the config file's directory.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        if let Some(dir) = path.parent() {
            if cfg.data.is_relative() {
                cfg.data = dir.join(&cfg.data);
            }
            if cfg.output_dir.is_relative() {
                cfg.output_dir = dir.join(&cfg.output_dir);
            }
        }
        Ok(cfg)
    }

    pub fn schema(&self) -> Result<Schema> {
        match self.schema.as_str() {
            "stroke" => Ok(Schema::stroke()),
            other => Err(Error::Config(format!("unknown schema `{other}`"))),
        }
    }

    pub fn family(&self) -> Result<Family> {
        match (&self.params, &self.search) {
            (Some(p), None) => Ok(p.family()),
            (None, Some(s)) => s.family(),
            _ => Err(Error::Config(
                "exactly one of `params` and `search` must be given".into(),
            )),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.schema()?;
        self.family()?;
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config(format!(
                "test_fraction {} outside (0, 1)",
                self.test_fraction
            )));
        }
        self.imputer.validate()?;
        self.resample.validate()?;
        if let Some(p) = &self.params {
            p.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        if let Some(s) = &self.search {
            let space = s.resolved_space()?;
            if s.n_iter == 0 || s.folds < 2 {
                return Err(Error::Config("search needs n_iter >= 1 and folds >= 2".into()));
            }
            space.configurations(0).map_err(|e| Error::Config(e.to_string()))?;
        }
        if let Some(g) = self.subgroup {
            if !(g.age_min <= g.age_max) {
                return Err(Error::Config(format!(
                    "subgroup bounds [{}, {}] are empty",
                    g.age_min, g.age_max
                )));
            }
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be >= 1".into()));
        }
        Ok(())
    }

    pub fn strategy_name(&self) -> &'static str {
        kind_name(self.resample.strategy)
    }
}

/// Seeds of the stochastic stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StageSeeds {
    pub split: u64,
    pub impute: u64,
    pub resample: u64,
    pub search: u64,
    pub model: u64,
    pub shap_rows: u64,
}

impl StageSeeds {
    pub fn from_master(master: u64) -> Self {
        StageSeeds {
            split: seed::derive(master, "split"),
            impute: seed::derive(master, "impute"),
            resample: seed::derive(master, "resample"),
            search: seed::derive(master, "search"),
            model: seed::derive(master, "model"),
            shap_rows: seed::derive(master, "shap-rows"),
        }
    }
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        e @ Error::Stage { .. } => e,
        e => Error::Stage {
            stage: name,
            source: Box::new(e),
        },
    })
}

/// Exit code for the command-line front end: 1 config, 2 data, 3 training.
pub fn exit_code(e: &Error) -> i32 {
    if let Error::Stage { stage: "config", .. } = e {
        return 1;
    }
    match e.root() {
        Error::Config(_)
        | Error::Json(_)
        | Error::InvalidHyperParams(_)
        | Error::InvalidSearchSpace(_)
        | Error::UnsupportedFamily(_) => 1,
        Error::Io { .. }
        | Error::Csv(_)
        | Error::MissingColumn(_)
        | Error::DuplicateColumn(_)
        | Error::UnparsableCell { .. }
        | Error::UnknownCategory { .. }
        | Error::InvalidDataset(_)
        | Error::DegenerateClass(_)
        | Error::NoObservedValues(_)
        | Error::NonNumericMissing(_)
        | Error::SchemaMismatch(_)
        | Error::TooFewMinoritySamples { .. }
        | Error::TooFewSamplesForFolds { .. }
        | Error::EmptySubgroup { .. } => 2,
        Error::SingleClassTrainingSet
        | Error::NonFiniteFeature { .. }
        | Error::DimensionMismatch { .. }
        | Error::LengthMismatch(..) => 3,
        Error::Stage { .. } => unreachable!("root skips stage wrappers"),
    }
}

/// Row provenance of a run, for leakage audits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitAudit {
    /// Rows of the encoded table, or of the resampled table in paper
    /// protocol, that form the test set.
    pub test_rows: Vec<usize>,
    /// Encoded-table rows whose values entered imputer fitting.
    pub imputer_rows: Vec<usize>,
    /// Encoded-table rows that entered resampling.
    pub resample_rows: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub model: Family,
    pub strategy: &'static str,
    pub mode: PipelineMode,
    pub seed: u64,
    pub params: HyperParams,
    pub train_class_counts: [usize; 2],
    pub test_class_counts: [usize; 2],
    pub imputer_rounds: usize,
    pub test: ClassificationReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subgroup: Option<SubgroupReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubgroupReport {
    pub bounds: Subgroup,
    pub train_class_counts: [usize; 2],
    pub test_class_counts: [usize; 2],
    pub test: ClassificationReport,
}

#[derive(Debug, Clone)]
pub struct SubgroupArtifacts {
    pub model: TrainedModel,
    pub report: SubgroupReport,
    pub importance: Option<ImportanceVector>,
    pub shap: Option<ShapSummary>,
}

/// In-memory result of a run; [`RunArtifacts::write`] persists it.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub report: RunReport,
    pub model: TrainedModel,
    pub cv: Option<CvResult>,
    pub importance: Option<ImportanceVector>,
    pub shap: Option<ShapSummary>,
    pub subgroup: Option<SubgroupArtifacts>,
    pub audit: SplitAudit,
    pub train: Dataset,
    pub test: Dataset,
}

pub const SUMMARY_HEADER: [&str; 13] = [
    "model",
    "strategy",
    "mode",
    "status",
    "accuracy",
    "weighted_precision",
    "weighted_recall",
    "weighted_f1",
    "positive_precision",
    "positive_recall",
    "positive_f1",
    "test_rows",
    "error",
];

fn summary_record(model: &str, strategy: &str, mode: PipelineMode, r: std::result::Result<&ClassificationReport, &str>) -> Vec<String> {
    let mut rec = vec![model.to_string(), strategy.to_string(), mode.as_str().to_string()];
    match r {
        Ok(rep) => {
            let pos = rep.classes[1];
            rec.push("ok".into());
            for v in [
                rep.accuracy,
                rep.weighted_avg.precision,
                rep.weighted_avg.recall,
                rep.weighted_avg.f1,
                pos.precision,
                pos.recall,
                pos.f1,
            ] {
                rec.push(v.to_string());
            }
            rec.push(rep.confusion.total().to_string());
            rec.push(String::new());
        }
        Err(msg) => {
            rec.push("error".into());
            rec.extend(std::iter::repeat_n(String::new(), 8));
            rec.push(msg.to_string());
        }
    }
    rec
}

fn csv_bytes(records: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SUMMARY_HEADER)?;
    for r in records {
        w.write_record(r)?;
    }
    w.into_inner().map_err(|e| Error::Config(e.to_string()))
}

impl RunArtifacts {
    pub fn model_name(&self) -> &'static str {
        self.report.model.as_str()
    }

    /// File name and contents of every artifact, in a fixed order.
    pub fn files(&self) -> Result<Vec<(String, Vec<u8>)>> {
        let m = self.model_name();
        let s = self.report.strategy;
        let mut out = vec![(
            "summary.csv".to_string(),
            csv_bytes(&[summary_record(m, s, self.report.mode, Ok(&self.report.test))])?,
        )];
        let mut json = serde_json::to_string_pretty(&self.report)?;
        json.push('\n');
        out.push((format!("report_{m}_{s}.json"), json.into_bytes()));
        out.push((format!("report_{m}_{s}.txt"), self.report.test.to_text().into_bytes()));
        out.push((format!("model_{m}.json"), self.model.to_json()?.into_bytes()));
        if let Some(cv) = &self.cv {
            out.push((format!("cv_{m}.csv"), cv.to_csv()?.into_bytes()));
        }
        push_explanations(&mut out, m, "", self.importance.as_ref(), self.shap.as_ref())?;
        if let Some(g) = &self.subgroup {
            let mut json = serde_json::to_string_pretty(&g.report)?;
            json.push('\n');
            out.push((format!("report_{m}_{s}_subgroup.json"), json.into_bytes()));
            out.push((format!("model_{m}_subgroup.json"), g.model.to_json()?.into_bytes()));
            push_explanations(&mut out, m, "_subgroup", g.importance.as_ref(), g.shap.as_ref())?;
        }
        Ok(out)
    }

    /// Writes every artifact into `dir`. If any write fails, files already
    /// written by this call are removed.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        write_files(dir, &self.files()?)
    }
}

fn push_explanations(
    out: &mut Vec<(String, Vec<u8>)>,
    m: &str,
    suffix: &str,
    importance: Option<&ImportanceVector>,
    shap: Option<&ShapSummary>,
) -> Result<()> {
    if let Some(imp) = importance {
        out.push((format!("importance_{m}{suffix}.csv"), imp.to_csv()?.into_bytes()));
    }
    if let Some(s) = shap {
        out.push((format!("shap_{m}{suffix}.csv"), s.to_csv()?.into_bytes()));
        out.push((format!("shap_ranking_{m}{suffix}.csv"), s.ranking_csv()?.into_bytes()));
    }
    Ok(())
}

fn write_files(dir: &Path, files: &[(String, Vec<u8>)]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let mut written = Vec::new();
    for (name, bytes) in files {
        let path = dir.join(name);
        if let Err(e) = std::fs::write(&path, bytes) {
            for p in &written {
                let _ = std::fs::remove_file(p);
            }
            return Err(Error::io(path.display().to_string(), e));
        }
        written.push(path);
    }
    Ok(written)
}

/// Prepared train/test data, before model fitting.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub train: Dataset,
    pub test: Dataset,
    pub imputer_rounds: usize,
    pub audit: SplitAudit,
}

/// Ingest, encode, impute, resample and split according to the mode.
pub fn prepare(cfg: &PipelineConfig) -> Result<PreparedData> {
    let seeds = StageSeeds::from_master(cfg.seed);
    let schema = stage("config", cfg.schema())?;
    let raw = stage("ingest", load_csv(&cfg.data, &schema))?;
    let (table, labels) = stage("encode", tabular::encode(&raw, &schema))?;
    let imputer = ImputerConfig {
        seed: seeds.impute,
        ..cfg.imputer
    };
    let strategy = ResampleStrategy {
        seed: seeds.resample,
        ..cfg.resample
    };
    let all: Vec<usize> = (0..table.n_rows()).collect();
    match cfg.mode {
        PipelineMode::PaperProtocol => {
            let (completed, fitted) = stage("impute", impute::fit_transform(&table, &imputer))?;
            let ds = stage("encode", completed.to_dataset(&labels))?;
            let resampled = stage("resample", resample::apply(&ds, &strategy))?;
            let (train_idx, test_idx) = stage(
                "split",
                stratified_split_indices(resampled.y(), cfg.test_fraction, seeds.split),
            )?;
            Ok(PreparedData {
                train: resampled.select(&train_idx),
                test: resampled.select(&test_idx),
                imputer_rounds: fitted.rounds,
                audit: SplitAudit {
                    test_rows: test_idx,
                    imputer_rows: all.clone(),
                    resample_rows: all,
                },
            })
        }
        PipelineMode::LeakFree => {
            let (train_idx, test_idx) =
                stage("split", stratified_split_indices(&labels, cfg.test_fraction, seeds.split))?;
            let train_table = table.select_rows(&train_idx);
            let test_table = table.select_rows(&test_idx);
            let train_labels: Vec<u8> = train_idx.iter().map(|&i| labels[i]).collect();
            let test_labels: Vec<u8> = test_idx.iter().map(|&i| labels[i]).collect();
            let (train_completed, fitted) =
                stage("impute", impute::fit_transform(&train_table, &imputer))?;
            let test_completed = stage("impute", impute::transform(&fitted, &test_table))?;
            let train = stage("encode", train_completed.to_dataset(&train_labels))?;
            let test = stage("encode", test_completed.to_dataset(&test_labels))?;
            let train = stage("resample", resample::apply(&train, &strategy))?;
            Ok(PreparedData {
                train,
                test,
                imputer_rounds: fitted.rounds,
                audit: SplitAudit {
                    test_rows: test_idx,
                    imputer_rows: train_idx.clone(),
                    resample_rows: train_idx,
                },
            })
        }
    }
}

fn shap_rows(n: usize, cap: usize, seed: u64) -> Vec<usize> {
    if cap == 0 || n <= cap {
        return (0..n).collect();
    }
    let mut rows = rand::seq::index::sample(&mut seed::rng(seed), n, cap).into_vec();
    rows.sort_unstable();
    rows
}

struct Explained {
    importance: Option<ImportanceVector>,
    shap: Option<ShapSummary>,
}

fn explain_model(model: &TrainedModel, test: &Dataset, cap: usize, seed: u64) -> Result<Explained> {
    if !model.family().is_tree_family() {
        return Ok(Explained {
            importance: None,
            shap: None,
        });
    }
    let importance = impurity_importance(model, test.feature_names())?;
    let rows = shap_rows(test.n_rows(), cap, seed);
    let shap = shap_summary_rows(model, test, &rows)?;
    Ok(Explained {
        importance: Some(importance),
        shap: Some(shap),
    })
}

fn evaluate(model: &TrainedModel, test: &Dataset) -> Result<ClassificationReport> {
    let pred = model.predict_dataset(test)?;
    Ok(report(&confusion(test.y(), &pred)?))
}

/// Runs every stage and keeps the artifacts in memory.
pub fn execute(cfg: &PipelineConfig) -> Result<RunArtifacts> {
    stage("config", cfg.validate())?;
    let seeds = StageSeeds::from_master(cfg.seed);
    let data = prepare(cfg)?;
    log::info!(
        "{} / {} / {}: train {:?}, test {:?}",
        cfg.family()?,
        cfg.strategy_name(),
        cfg.mode.as_str(),
        data.train.class_counts(),
        data.test.class_counts()
    );

    let (params, cv) = match (&cfg.params, &cfg.search) {
        (Some(p), _) => (p.clone(), None),
        (None, Some(s)) => {
            let space = stage("config", s.resolved_space())?;
            let cv = stage(
                "search",
                randomized_search(&space, &data.train, s.n_iter, s.folds, seeds.search),
            )?;
            (cv.best_params().clone(), Some(cv))
        }
        (None, None) => unreachable!("validated above"),
    };
    let params = params.with_seed(seeds.model);
    let model = stage("fit", fit(&params, &data.train))?;
    let test_report = stage("evaluate", evaluate(&model, &data.test))?;
    let explained = stage("explain", explain_model(&model, &data.test, cfg.shap_rows, seeds.shap_rows))?;

    let subgroup = match cfg.subgroup {
        None => None,
        Some(bounds) => {
            let train = stage("subgroup", subgroup_filter(&data.train, bounds.age_min, bounds.age_max))?;
            let test = stage("subgroup", subgroup_filter(&data.test, bounds.age_min, bounds.age_max))?;
            let model = stage("subgroup", fit(&params, &train))?;
            let test_report = stage("subgroup", evaluate(&model, &test))?;
            let ex = stage("subgroup", explain_model(&model, &test, cfg.shap_rows, seeds.shap_rows))?;
            Some(SubgroupArtifacts {
                model,
                report: SubgroupReport {
                    bounds,
                    train_class_counts: train.class_counts(),
                    test_class_counts: test.class_counts(),
                    test: test_report,
                },
                importance: ex.importance,
                shap: ex.shap,
            })
        }
    };

    Ok(RunArtifacts {
        report: RunReport {
            model: model.family(),
            strategy: cfg.strategy_name(),
            mode: cfg.mode,
            seed: cfg.seed,
            params,
            train_class_counts: data.train.class_counts(),
            test_class_counts: data.test.class_counts(),
            imputer_rounds: data.imputer_rounds,
            test: test_report,
            subgroup: subgroup.as_ref().map(|g| g.report.clone()),
        },
        model,
        cv,
        importance: explained.importance,
        shap: explained.shap,
        subgroup,
        audit: data.audit,
        train: data.train,
        test: data.test,
    })
}

/// Runs the pipeline and writes its artifacts into `cfg.output_dir`. Nothing
/// is written unless every stage succeeds.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunArtifacts> {
    let artifacts = execute(cfg)?;
    stage("write", artifacts.write(&cfg.output_dir))?;
    Ok(artifacts)
}

/// Runs the data stages and the randomized search only, then writes
/// `cv_<model>.csv`. A config with explicit parameters searches the default
/// space of their family.
pub fn tune_only(cfg: &PipelineConfig) -> Result<CvResult> {
    let mut cfg = cfg.clone();
    if let Some(p) = cfg.params.take() {
        cfg.search.get_or_insert_with(|| SearchConfig::for_family(p.family()));
    }
    stage("config", cfg.validate())?;
    let search = cfg.search.as_ref().expect("validated above");
    let space = stage("config", search.resolved_space())?;
    let data = prepare(&cfg)?;
    let seeds = StageSeeds::from_master(cfg.seed);
    let cv = stage(
        "search",
        randomized_search(&space, &data.train, search.n_iter, search.folds, seeds.search),
    )?;
    let name = space.family().as_str();
    stage(
        "write",
        write_files(&cfg.output_dir, &[(format!("cv_{name}.csv"), cv.to_csv()?.into_bytes())]),
    )?;
    Ok(cv)
}

/// Explanations of one model on the prepared test set.
#[derive(Debug, Clone)]
pub struct ExplainArtifacts {
    pub model: TrainedModel,
    pub importance: ImportanceVector,
    pub shap: ShapSummary,
}

/// Computes impurity importance and the SHAP summary on the test split of
/// `cfg`. `model` is used as given when present, otherwise it is fitted as in
/// [`execute`]. Writes `importance_<model>.csv`, `shap_<model>.csv` and
/// `shap_ranking_<model>.csv`.
pub fn explain_only(cfg: &PipelineConfig, model: Option<TrainedModel>) -> Result<ExplainArtifacts> {
    let seeds = StageSeeds::from_master(cfg.seed);
    let params = match (&model, &cfg.params) {
        (Some(_), _) => None,
        (None, Some(p)) => {
            stage("config", cfg.validate())?;
            Some(p.clone())
        }
        (None, None) => {
            return stage(
                "config",
                Err(Error::Config("explain needs explicit params or a fitted model".into())),
            )
        }
    };
    let family = model.as_ref().map_or_else(|| params.as_ref().expect("set above").family(), |m| m.family());
    if !family.is_tree_family() {
        return stage("config", Err(Error::UnsupportedFamily(family.as_str().into())));
    }
    let data = prepare(cfg)?;
    let model = match model {
        Some(m) => m,
        None => stage("fit", fit(&params.expect("set above").with_seed(seeds.model), &data.train))?,
    };
    let ex = stage("explain", explain_model(&model, &data.test, cfg.shap_rows, seeds.shap_rows))?;
    let (importance, shap) = (ex.importance.expect("tree family"), ex.shap.expect("tree family"));
    let mut files = Vec::new();
    push_explanations(&mut files, family.as_str(), "", Some(&importance), Some(&shap))?;
    stage("write", write_files(&cfg.output_dir, &files))?;
    Ok(ExplainArtifacts { model, importance, shap })
}

#[derive(Debug, Clone)]
pub struct MatrixCell {
    pub family: Family,
    pub strategy: Strategy,
    pub outcome: std::result::Result<RunReport, String>,
}

#[derive(Debug, Clone)]
pub struct MatrixReport {
    pub mode: PipelineMode,
    pub cells: Vec<MatrixCell>,
}

impl MatrixReport {
    pub fn cell(&self, family: Family, strategy: Strategy) -> Option<&MatrixCell> {
        self.cells
            .iter()
            .find(|c| c.family == family && c.strategy == strategy)
    }

    pub fn summary_csv(&self) -> Result<Vec<u8>> {
        let records: Vec<Vec<String>> = self
            .cells
            .iter()
            .map(|c| {
                summary_record(
                    c.family.as_str(),
                    c.strategy.as_str(),
                    self.mode,
                    c.outcome.as_ref().map(|r| &r.test).map_err(|e| e.as_str()),
                )
            })
            .collect();
        csv_bytes(&records)
    }
}

/// Config of one matrix cell derived from the base config: the cell's
/// strategy, and either the search over the family's default space (if the
/// base config searches) or the reference parameters.
pub fn cell_config(base: &PipelineConfig, family: Family, strategy: Strategy) -> PipelineConfig {
    let mut cfg = base.clone();
    cfg.resample.strategy = strategy.kind();
    match &base.search {
        Some(s) => {
            cfg.params = None;
            cfg.search = Some(SearchConfig {
                space: None,
                family: Some(family),
                ..s.clone()
            });
        }
        None => {
            cfg.params = Some(reference_params(family, strategy));
            cfg.search = None;
        }
    }
    cfg.output_dir = base
        .output_dir
        .join(format!("{}_{}", family.as_str(), strategy.as_str()));
    cfg
}

/// Runs the full family × strategy product. Cells run concurrently, each
/// writes into its own subdirectory; a failing cell is recorded and the rest
/// continue. `summary.csv` goes to the base output directory.
pub fn run_matrix(base: &PipelineConfig, strategies: &[Strategy], families: &[Family]) -> Result<MatrixReport> {
    if strategies.is_empty() || families.is_empty() {
        return Err(Error::Config("matrix needs at least one strategy and one family".into()));
    }
    let mut check = base.clone();
    if check.params.is_none() && check.search.is_none() {
        check.params = Some(reference_params(families[0], strategies[0]));
    }
    if let Some(s) = &mut check.search {
        s.space = None;
        s.family = Some(families[0]);
    }
    stage("config", check.validate())?;
    let cells: Vec<(Family, Strategy)> = families
        .iter()
        .flat_map(|&f| strategies.iter().map(move |&s| (f, s)))
        .collect();
    let workers = base.workers.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let results: Vec<MatrixCell> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(family, strategy)| {
                let cfg = cell_config(base, family, strategy);
                let outcome = run_pipeline(&cfg).map(|a| a.report).map_err(|e| {
                    log::error!("{family} / {strategy}: {e}");
                    e.to_string()
                });
                if outcome.is_ok() {
                    log::info!("{family} / {strategy}: done");
                }
                MatrixCell {
                    family,
                    strategy,
                    outcome,
                }
            })
            .collect()
    });
    let report = MatrixReport {
        mode: base.mode,
        cells: results,
    };
    stage(
        "write",
        write_files(&base.output_dir, &[("summary.csv".to_string(), report.summary_csv()?)]),
    )?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ColumnMissing {
    pub column: String,
    pub count: usize,
}

/// Exploratory summary of the raw file, before imputation.
#[derive(Debug, Clone, Serialize)]
pub struct InspectReport {
    pub rows: usize,
    pub columns: usize,
    /// Missing cells per column, in schema order.
    pub missing: Vec<ColumnMissing>,
    pub class_balance: ClassBalance,
    pub summary: SummaryReport,
}

impl InspectReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "rows: {}\ncolumns: {}\nclass balance: {} negative, {} positive ({:.2}% positive)\nmissing cells:\n",
            self.rows,
            self.columns,
            self.class_balance.negative,
            self.class_balance.positive,
            100.0 * self.class_balance.positive_fraction
        );
        for m in &self.missing {
            let pct = 100.0 * m.count as f64 / self.rows.max(1) as f64;
            out.push_str(&format!("  {:<20} {:>6} ({pct:.2}%)\n", m.column, m.count));
        }
        out.push_str("\nper-class means (0 / 1):\n");
        for f in &self.summary.features {
            if let Some([a, b]) = &f.by_class {
                out.push_str(&format!("  {:<20} {:>10.4} {:>10.4}\n", f.name, a.mean, b.mean));
            }
        }
        out
    }
}

pub fn inspect(data: &Path, schema: &Schema) -> Result<InspectReport> {
    let raw = stage("ingest", load_csv(data, schema))?;
    let (table, labels) = stage("encode", tabular::encode(&raw, schema))?;
    let missing = (0..table.n_cols())
        .map(|j| ColumnMissing {
            column: table.names()[j].clone(),
            count: table.missing_count(j),
        })
        .collect();
    Ok(InspectReport {
        rows: table.n_rows(),
        columns: raw.columns.len(),
        missing,
        class_balance: class_balance_labels(&labels),
        summary: tabular::summarize_table(&table, &labels, true),
    })
}
