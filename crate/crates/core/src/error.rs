use thiserror::Error;

/// Errors surfaced by the estimation library and experiment harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: String, got: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("gain estimate singular at tap ({k}, {l}): |denominator| = {magnitude:e}")]
    GainSingular { k: usize, l: usize, magnitude: f64 },

    #[error("leakage undefined at tap ({k}, {l}): peak magnitude is zero")]
    UndefinedLeakage { k: usize, l: usize },

    #[error("reference channel has zero energy")]
    ZeroReference,

    #[error("linear solver failed: {0}")]
    Solver(String),

    #[error("unsupported constellation order {0} (expected 4 or 16)")]
    UnsupportedOrder(usize),

    #[error("dense effective matrix needs MN <= {limit}, got {size}")]
    MatrixTooLarge { size: usize, limit: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dimension(expected: impl ToString, got: impl ToString) -> Self {
        Error::Dimension {
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }
}
