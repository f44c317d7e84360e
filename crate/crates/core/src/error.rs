use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("column `{0}` not found in header")]
    MissingColumn(String),
    #[error("parse error at line {line}, column `{column}`: {value:?}")]
    Parse {
        line: usize,
        column: String,
        value: String,
    },
    #[error("label at line {line} is {value:?}, expected 0 or 1")]
    NonBinaryLabel { line: usize, value: String },
    #[error("dataset has no rows")]
    EmptyDataset,
    #[error("class {class} has {count} rows, at least 2 required")]
    DegenerateClass { class: u8, count: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("no rows of class {0} left to compute fences on")]
    EmptyClassSubset(u8),
    #[error("k = {k} requires more than {k} candidate rows, found {available}")]
    KTooLarge { k: usize, available: usize },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("length mismatch: {left} labels vs {right} scores")]
    LengthMismatch { left: usize, right: usize },
    #[error("both classes must be present")]
    SingleClass,
    #[error("model format error at line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
