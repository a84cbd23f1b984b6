use thiserror::Error;

/// Errors raised by the planning library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FditError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("sample count must be at least 2 (got {0})")]
    TooFewSamples(usize),

    #[error("incumbent cost {c_best} is below the focal distance {c_min}")]
    CostBelowFocalDistance { c_best: f64, c_min: f64 },

    #[error("coincident charges at distance {0:e}")]
    CoincidentCharges(f64),

    #[error("gaps overlap: [{a_lo}, {a_hi}] and [{b_lo}, {b_hi}]")]
    OverlappingGaps {
        a_lo: f64,
        a_hi: f64,
        b_lo: f64,
        b_hi: f64,
    },

    #[error("could not place obstacle {index} after {attempts} attempts")]
    PlacementFailed { index: usize, attempts: usize },

    #[error("goal vertex is not connected to the root")]
    DisconnectedGoal,

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, FditError>;

impl From<std::io::Error> for FditError {
    fn from(e: std::io::Error) -> Self {
        FditError::Io(e.to_string())
    }
}

pub(crate) fn invalid_param(name: &'static str, reason: impl Into<String>) -> FditError {
    FditError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
