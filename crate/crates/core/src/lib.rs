//! Tabular binary classification toolkit built around an imbalanced clinical
//! dataset: CSV ingestion and encoding, iterative imputation, class
//! resampling, five classifier families, randomized search, metrics, and
//! tree attribution (impurity importance and path-dependent TreeSHAP).
//!
//! The [`pipeline`] module wires the stages together; every other module is
//! usable on its own.

pub mod error;
pub mod eval;
pub mod explain;
pub mod impute;
pub mod models;
pub mod pipeline;
pub mod resample;
pub mod seed;
pub mod tabular;
pub mod tune;

pub use error::{Error, Result};
pub use models::{HyperParams, TrainedModel};
pub use tabular::Dataset;
