use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("trust-region radius must be positive, got {0}")]
    InvalidRadius(f64),

    #[error("interpolation set is empty")]
    EmptySet,

    #[error("interpolation points coincide with the center; no usable displacement")]
    DegenerateGeometry,

    #[error("class `{0}` is empty")]
    EmptyClass(&'static str),

    #[error("score variance is zero along this direction")]
    DegenerateDirection,

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("class `{class}` has {size} examples, fewer than the {folds} folds requested")]
    ClassTooSmall {
        class: &'static str,
        size: usize,
        folds: usize,
    },

    #[error("requested {requested} examples from class `{class}` which has {available}")]
    OversizedSample {
        class: &'static str,
        requested: usize,
        available: usize,
    },

    #[error("invalid search box: {0}")]
    InvalidBox(String),

    #[error("objective evaluation failed: {0}")]
    Evaluation(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
