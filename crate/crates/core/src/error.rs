use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("bad magic bytes {found:?}, expected \"EMB1\"")]
    BadMagic { found: [u8; 4] },

    #[error("truncated payload: expected {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },

    #[error("unexpected trailing data: expected {expected} bytes, found {actual}")]
    TrailingBytes { expected: usize, actual: usize },

    #[error("reserved header field must be 0, found {0}")]
    ReservedField(u32),

    #[error("label {label} at row {row} is out of range for {class_count} classes")]
    LabelOutOfRange {
        row: usize,
        label: u32,
        class_count: usize,
    },

    #[error("non-finite feature value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("class {0} has no samples")]
    EmptyClass(usize),

    #[error("need at least {needed} {what}, got {got}")]
    TooSmall {
        what: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("missing column {0:?}")]
    MissingColumn(String),

    #[error("non-numeric value {value:?} in column {column:?} at data row {row}")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("all samples share a single class")]
    SingleClass,

    #[error("class {0} has a single sample, variance undefined")]
    SingletonClass(usize),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("duplicate truth key {0}")]
    DuplicateKey(String),

    #[error("accuracy {accuracy} for {key} outside (0, 100]")]
    AccuracyOutOfRange { key: String, accuracy: f64 },

    #[error("model {0:?} not found in truth table")]
    MissingModel(String),

    #[error("unpaired report for metric {metric}, dataset {dataset}")]
    UnpairedReport { metric: String, dataset: String },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerical routines rather than of the input data.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Numeric(_))
    }
}
