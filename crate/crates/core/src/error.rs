use thiserror::Error;

/// Errors produced by the segmentation toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum MuscleError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("segment {start}..={end} has no feasible value")]
    InfeasibleSegment { start: usize, end: usize },

    #[error("critical value table mismatch: {0}")]
    TableMismatch(String),

    #[error("calibration cache line {line}: {message}")]
    CacheParse { line: usize, message: String },

    #[error("calibration cache conflict for m = {m}: stored {stored}, computed {computed}")]
    CacheConflict { m: usize, stored: f64, computed: f64 },

    #[error("data line {line}: {message}")]
    DataParse { line: usize, message: String },
}

impl MuscleError {
    pub(crate) fn invalid_input(msg: impl Into<String>) -> Self {
        MuscleError::InvalidInput(msg.into())
    }

    pub(crate) fn invalid_query(msg: impl Into<String>) -> Self {
        MuscleError::InvalidQuery(msg.into())
    }

    /// Message without the variant prefix.
    pub(crate) fn detail(&self) -> String {
        match self {
            MuscleError::InvalidInput(m) | MuscleError::InvalidQuery(m) => m.clone(),
            other => other.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, MuscleError>;
