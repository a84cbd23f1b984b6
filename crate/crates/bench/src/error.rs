use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Planner(#[from] fdit::FditError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unknown planner `{0}` (expected `fdit` or `spherical`)")]
    UnknownPlanner(String),

    #[error(
        "unknown environment `{0}` (expected `dw`, `rr`, `free` or a path to an environment file)"
    )]
    UnknownEnvironment(String),

    #[error("invalid benchmark spec: {0}")]
    Spec(String),

    #[error("no records to summarize")]
    EmptyInput,

    #[error("line {line}: {reason}")]
    Record { line: usize, reason: String },

    #[error("projection axes ({0}, {1}) are not two distinct axes below dimension {2}")]
    BadAxes(usize, usize, usize),

    #[error("output error: {0}")]
    Output(#[from] std::io::Error),
}

impl BenchError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        BenchError::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the error stems from bad user input rather than a failure
    /// while running.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            BenchError::UnknownPlanner(_)
                | BenchError::UnknownEnvironment(_)
                | BenchError::Spec(_)
                | BenchError::BadAxes(..)
                | BenchError::Planner(fdit::FditError::Config(_))
                | BenchError::Planner(fdit::FditError::InvalidParameter { .. })
                | BenchError::Planner(fdit::FditError::DimensionTooSmall(_))
                | BenchError::Planner(fdit::FditError::DimensionMismatch { .. })
        )
    }
}

pub type Result<T> = std::result::Result<T, BenchError>;
