use thiserror::Error;

/// Errors raised while building, assembling, solving or analysing a coupled model.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("element {element}: non-positive Jacobian determinant {det:e}")]
    InvertedElement { element: usize, det: f64 },

    #[error("unknown face set `{0}`")]
    UnknownFaceSet(String),

    #[error("interface face set `{0}` is empty or has zero area")]
    DegenerateInterface(String),

    #[error("degenerate face (element {element}, local face {face}): metric determinant {det:e}")]
    DegenerateFace {
        element: usize,
        face: usize,
        det: f64,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("constraint block is rank deficient: rank {rank} < 6, singular values {singular_values:?}, deficient row space {deficient_rows:?}")]
    RankDeficient {
        rank: usize,
        singular_values: Vec<f64>,
        deficient_rows: Vec<[f64; 6]>,
    },

    #[error("well-posedness violation: factorization found {zero_pivots} zero pivot(s)")]
    Singular { zero_pivots: usize },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not positive definite ({0})")]
    NotPositiveDefinite(&'static str),

    #[error("iteration did not converge: {0}")]
    NoConvergence(String),

    #[error("config key `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidArgument {
        name,
        reason: reason.into(),
    }
}
