use thiserror::Error;

/// Errors raised by the toolbox.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum EdmError {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("distance matrix has a negative entry {value} at ({row}, {col})")]
    NegativeDistance { row: usize, col: usize, value: f64 },

    #[error("mask entry at ({row}, {col}) is {value}, expected 0 or 1")]
    InvalidMask { row: usize, col: usize, value: f64 },

    #[error("{what} must be at least {min}, got {value}")]
    TooSmall { what: &'static str, min: usize, value: usize },

    #[error("{what} = {value} is out of range [{lo}, {hi}]")]
    OutOfRange {
        what: &'static str,
        value: usize,
        lo: usize,
        hi: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("observation mask has no observed entries")]
    EmptyMask,

    #[error("wall normal must have unit length, got norm {0}")]
    NonUnitNormal(f64),

    #[error("image source coincides with the loudspeaker; wall is undefined")]
    DegenerateImageSource,

    #[error("no candidate echoes left after windowing at microphone {0}")]
    NoCandidates(usize),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for EdmError {
    fn from(e: std::io::Error) -> Self {
        EdmError::Io(e.to_string())
    }
}

impl From<csv::Error> for EdmError {
    fn from(e: csv::Error) -> Self {
        EdmError::Parse(e.to_string())
    }
}

impl From<serde_json::Error> for EdmError {
    fn from(e: serde_json::Error) -> Self {
        EdmError::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, EdmError>;
