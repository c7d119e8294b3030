use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: row {row}: expected {expected} columns, found {found}")]
    RaggedRow {
        path: PathBuf,
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("{path}: row {row}, column {column}: cannot parse {value:?} as {expected}")]
    BadCell {
        path: PathBuf,
        row: usize,
        column: usize,
        value: String,
        expected: &'static str,
    },

    #[error("{path}: {message}")]
    BadFile { path: PathBuf, message: String },

    #[error("image dimension mismatch: {first} is {first_dims:?} but {second} is {second_dims:?}")]
    ImageDimensionMismatch {
        first: PathBuf,
        first_dims: (usize, usize),
        second: PathBuf,
        second_dims: (usize, usize),
    },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dataset is already centered")]
    AlreadyCentered,

    #[error(
        "class {class} has {size} samples, too few for a stratified split at fraction {fraction}"
    )]
    ClassTooSmall {
        class: u32,
        size: usize,
        fraction: f64,
    },

    #[error("degenerate line: squared direction norm {norm_sq:e} is below {threshold:e}")]
    DegenerateLine { norm_sq: f64, threshold: f64 },

    #[error("{0}")]
    Numerical(String),

    #[error("no valid candidate lines for nearest-line classification")]
    NoValidLines,

    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("repeat {repeat} failed: {source}")]
    Repeat {
        repeat: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed JSON in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 for I/O failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 2,
            Error::Repeat { source, .. } => source.exit_code(),
            _ => 1,
        }
    }
}
