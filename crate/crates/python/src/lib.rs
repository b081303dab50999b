use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyIOError, PyValueError};
use pyo3::prelude::*;

use strokekit::explain::{impurity_importance, shap_summary};
use strokekit::impute::{self, ImputerConfig};
use strokekit::models;
use strokekit::pipeline::{self, PipelineConfig};
use strokekit::resample::{ResampleStrategy, StrategyKind};
use strokekit::tabular::{self, Schema};

create_exception!(strokekit_py, TrainingError, PyException);

fn to_py(e: strokekit::Error) -> PyErr {
    let msg = e.to_string();
    match pipeline::exit_code(&e) {
        1 => PyValueError::new_err(msg),
        3 => TrainingError::new_err(msg),
        _ if matches!(e.root(), strokekit::Error::Io { .. }) => PyIOError::new_err(msg),
        _ => PyValueError::new_err(msg),
    }
}

fn json_to_py<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

fn py_to_json(py: Python<'_>, obj: &Bound<'_, PyAny>) -> PyResult<String> {
    if let Ok(s) = obj.extract::<String>() {
        return Ok(s);
    }
    py.import("json")?.call_method1("dumps", (obj,))?.extract()
}

fn ser<T: serde::Serialize>(value: &T) -> PyResult<String> {
    serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Encoded, complete feature matrix with binary labels.
#[pyclass(module = "strokekit_py", frozen)]
struct Dataset {
    inner: tabular::Dataset,
}

#[pymethods]
impl Dataset {
    #[new]
    #[pyo3(signature = (rows, labels, feature_names=None))]
    fn new(rows: Vec<Vec<f64>>, labels: Vec<u8>, feature_names: Option<Vec<String>>) -> PyResult<Self> {
        let inner = match feature_names {
            Some(names) => tabular::Dataset::from_rows(&rows, labels, names),
            None => tabular::Dataset::unnamed(&rows, labels),
        }
        .map_err(to_py)?;
        Ok(Dataset { inner })
    }

    #[getter]
    fn n_rows(&self) -> usize {
        self.inner.n_rows()
    }

    #[getter]
    fn n_features(&self) -> usize {
        self.inner.n_features()
    }

    #[getter]
    fn feature_names(&self) -> Vec<String> {
        self.inner.feature_names().to_vec()
    }

    #[getter]
    fn labels(&self) -> Vec<u8> {
        self.inner.y().to_vec()
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        self.inner.rows().map(<[f64]>::to_vec).collect()
    }

    /// `[negatives, positives]`.
    fn class_counts(&self) -> [usize; 2] {
        self.inner.class_counts()
    }

    fn summary<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let text = tabular::summarize(&self.inner, true).to_json().map_err(to_py)?;
        json_to_py(py, &text)
    }

    fn __len__(&self) -> usize {
        self.inner.n_rows()
    }

    fn __repr__(&self) -> String {
        let [neg, pos] = self.inner.class_counts();
        format!("Dataset(rows={}, features={}, positives={pos}, negatives={neg})", self.inner.n_rows(), self.inner.n_features())
    }
}

/// A fitted model of any family.
#[pyclass(module = "strokekit_py", frozen)]
struct Model {
    inner: models::TrainedModel,
}

#[pymethods]
impl Model {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Model {
            inner: models::TrainedModel::from_json(text).map_err(to_py)?,
        })
    }

    #[getter]
    fn family(&self) -> &'static str {
        self.inner.family().as_str()
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(to_py)
    }

    fn predict(&self, ds: &Dataset) -> PyResult<Vec<u8>> {
        self.inner.predict_dataset(&ds.inner).map_err(to_py)
    }

    /// Positive-class probability (decision value for SVM).
    fn score_positive(&self, ds: &Dataset) -> PyResult<Vec<f64>> {
        ds.inner.rows().map(|x| self.inner.score_positive(x).map_err(to_py)).collect()
    }

    /// Classification report on `ds` as a dict.
    fn evaluate<'py>(&self, py: Python<'py>, ds: &Dataset) -> PyResult<Bound<'py, PyAny>> {
        let pred = self.inner.predict_dataset(&ds.inner).map_err(to_py)?;
        let cm = strokekit::eval::confusion(ds.inner.y(), &pred).map_err(to_py)?;
        json_to_py(py, &ser(&strokekit::eval::report(&cm))?)
    }

    /// Normalized impurity importance keyed by feature name.
    fn importance(&self, feature_names: Vec<String>) -> PyResult<Vec<(String, f64)>> {
        let imp = impurity_importance(&self.inner, &feature_names).map_err(to_py)?;
        Ok(imp.feature_names.into_iter().zip(imp.weights).collect())
    }

    /// Per-row SHAP values, base values and mean |phi| ranking over `ds`.
    fn shap<'py>(&self, py: Python<'py>, ds: &Dataset) -> PyResult<Bound<'py, PyAny>> {
        let model = &self.inner;
        let data = &ds.inner;
        let summary = py.detach(|| shap_summary(model, data)).map_err(to_py)?;
        json_to_py(py, &ser(&summary)?)
    }

    fn __repr__(&self) -> String {
        format!("Model(family={:?}, features={})", self.inner.family().as_str(), self.inner.n_features())
    }
}

/// Reads the stroke CSV, encodes it and fills missing cells by iterative
/// imputation.
#[pyfunction]
#[pyo3(signature = (path, seed=0))]
fn load_dataset(py: Python<'_>, path: PathBuf, seed: u64) -> PyResult<Dataset> {
    py.detach(|| {
        let schema = Schema::stroke();
        let raw = tabular::load_csv(&path, &schema)?;
        let (table, labels) = tabular::encode(&raw, &schema)?;
        let cfg = ImputerConfig {
            seed,
            ..ImputerConfig::default()
        };
        let (complete, _) = impute::fit_transform(&table, &cfg)?;
        complete.to_dataset(&labels)
    })
    .map(|inner| Dataset { inner })
    .map_err(to_py)
}

/// Row and column counts, missingness, class balance and per-class summaries.
#[pyfunction]
fn inspect<'py>(py: Python<'py>, path: PathBuf) -> PyResult<Bound<'py, PyAny>> {
    let report = pipeline::inspect(&path, &Schema::stroke()).map_err(to_py)?;
    json_to_py(py, &report.to_json().map_err(to_py)?)
}

#[pyfunction]
fn class_balance<'py>(py: Python<'py>, ds: &Dataset) -> PyResult<Bound<'py, PyAny>> {
    json_to_py(py, &ser(&tabular::class_balance(&ds.inner))?)
}

#[pyfunction]
#[pyo3(signature = (ds, test_fraction=0.2, seed=0))]
fn stratified_split(ds: &Dataset, test_fraction: f64, seed: u64) -> PyResult<(Dataset, Dataset)> {
    let (train, test) = tabular::stratified_split(&ds.inner, test_fraction, seed).map_err(to_py)?;
    Ok((Dataset { inner: train }, Dataset { inner: test }))
}

/// `strategy` is one of `oversample`, `undersample`, `smote`, `none`.
#[pyfunction]
#[pyo3(signature = (ds, strategy, seed=0, k=5, target_ratio=1.0))]
fn resample(ds: &Dataset, strategy: &str, seed: u64, k: usize, target_ratio: f64) -> PyResult<Dataset> {
    let kind: StrategyKind =
        serde_json::from_value(serde_json::Value::String(strategy.to_ascii_lowercase()))
            .map_err(|_| PyValueError::new_err(format!("unknown strategy `{strategy}`")))?;
    let mut s = ResampleStrategy::new(kind, seed);
    s.k = k;
    s.target_ratio = target_ratio;
    Ok(Dataset {
        inner: strokekit::resample::apply(&ds.inner, &s).map_err(to_py)?,
    })
}

/// Fits a model; `params` is a dict or JSON string tagged by `family`.
#[pyfunction]
fn fit(py: Python<'_>, params: &Bound<'_, PyAny>, ds: &Dataset) -> PyResult<Model> {
    let json = py_to_json(py, params)?;
    let params: models::HyperParams =
        serde_json::from_str(&json).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let data = &ds.inner;
    let inner = py.detach(|| models::fit(&params, data)).map_err(to_py)?;
    Ok(Model { inner })
}

/// Hyperparameters reported for a family and resampling strategy.
#[pyfunction]
fn reference_params<'py>(py: Python<'py>, family: &str, strategy: &str) -> PyResult<Bound<'py, PyAny>> {
    let f: models::Family = family.parse().map_err(to_py)?;
    let s: pipeline::Strategy = strategy.parse().map_err(to_py)?;
    json_to_py(py, &ser(&pipeline::reference_params(f, s))?)
}

/// Runs the full pipeline and writes its artifacts; returns the run report.
/// `config` is a dict or JSON string in the CLI's config format.
#[pyfunction]
fn run_pipeline<'py>(py: Python<'py>, config: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
    let cfg = PipelineConfig::from_json(&py_to_json(py, config)?).map_err(to_py)?;
    let artifacts = py.detach(|| pipeline::run_pipeline(&cfg)).map_err(to_py)?;
    json_to_py(py, &ser(&artifacts.report)?)
}

#[pymodule]
fn strokekit_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Dataset>()?;
    m.add_class::<Model>()?;
    m.add("TrainingError", m.py().get_type::<TrainingError>())?;
    m.add_function(wrap_pyfunction!(load_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(inspect, m)?)?;
    m.add_function(wrap_pyfunction!(class_balance, m)?)?;
    m.add_function(wrap_pyfunction!(stratified_split, m)?)?;
    m.add_function(wrap_pyfunction!(resample, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(reference_params, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    Ok(())
}
