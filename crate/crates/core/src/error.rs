use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    // tabular
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("duplicate column `{0}`")]
    DuplicateColumn(String),
    #[error("cannot parse cell at row {row}, column `{column}`: {value:?}")]
    UnparsableCell {
        row: usize,
        column: String,
        value: String,
    },
    #[error("unknown category {value:?} in column `{column}`")]
    UnknownCategory { column: String, value: String },
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("a class would be empty: {0}")]
    DegenerateClass(String),

    // impute
    #[error("column `{0}` has no observed values")]
    NoObservedValues(String),
    #[error("missing values in non-numeric column `{0}`")]
    NonNumericMissing(String),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    // resample
    #[error("SMOTE needs at least {needed} minority samples, found {found}")]
    TooFewMinoritySamples { needed: usize, found: usize },

    // models
    #[error("training set contains a single class")]
    SingleClassTrainingSet,
    #[error("non-finite feature value at row {row}, feature {feature}")]
    NonFiniteFeature { row: usize, feature: usize },
    #[error("expected {expected} features, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperParams(String),

    // tune / eval
    #[error("too few samples for {folds} folds: smallest class has {smallest}")]
    TooFewSamplesForFolds { folds: usize, smallest: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("invalid search space: {0}")]
    InvalidSearchSpace(String),

    // explain
    #[error("operation not supported for model family `{0}`")]
    UnsupportedFamily(String),
    #[error("no rows with age in [{min}, {max}]")]
    EmptySubgroup { min: f64, max: f64 },

    // pipeline
    #[error("config error: {0}")]
    Config(String),
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Innermost error, skipping stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}
