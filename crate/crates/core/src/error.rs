use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        actual: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{name} = {value} is out of range ({expected})")]
    OutOfRange {
        name: String,
        value: String,
        expected: &'static str,
    },

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("infeasible budget: N = {budget}, f = {fraction}, stage {stage}")]
    InfeasibleBudget {
        budget: usize,
        fraction: f64,
        stage: usize,
    },

    #[error("budget overflow: charging {requested} units with {remaining} remaining")]
    BudgetOverflow { requested: usize, remaining: usize },

    #[error("empty dataset")]
    EmptyData,

    #[error("class {class} has {available} samples, {required} required")]
    InsufficientClassSamples {
        class: usize,
        available: usize,
        required: usize,
    },

    #[error("bad magic: expected {expected:#010x}, found {found:#010x}")]
    BadMagic { expected: u32, found: u32 },

    #[error("truncated IDX data: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("IDX data has {0} trailing bytes")]
    TrailingBytes(usize),

    #[error("image/label count mismatch: {images} images, {labels} labels")]
    CountMismatch { images: usize, labels: usize },

    #[error("config line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },

    #[error("config line {line}: cannot parse `{value}` for `{key}`")]
    BadValue {
        line: usize,
        key: String,
        value: String,
    },

    #[error("config line {line}: expected key=value, found `{text}`")]
    Syntax { line: usize, text: String },

    #[error("missing dataset path: {0}")]
    MissingDatasetPath(&'static str),

    #[error("non-finite value for metric `{0}`")]
    NonFinite(String),

    #[error("empty hyperparameter grid")]
    EmptyGrid,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(
        context: &'static str,
        expected: impl ToString,
        actual: impl ToString,
    ) -> Self {
        Error::ShapeMismatch {
            context,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
