use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("invalid observation: {0}")]
    InvalidObservation(String),
    #[error("unsupported merge: {0}")]
    UnsupportedMerge(String),
    #[error("corrupt snapshot at byte {offset}: {reason}")]
    CorruptSnapshot { offset: u64, reason: String },
    #[error("insufficient data: need at least {need} observations, have {have}")]
    InsufficientData { need: u64, have: u64 },
    #[error("degenerate moments: every feature has (near-)zero variance")]
    DegenerateMoments,
    #[error("singular system: {0}")]
    SingularSystem(String),
    #[error("rank-1 update breakdown: denominator {0:e} at or below threshold")]
    Breakdown(f64),
    #[error("iteration diverged (non-finite coefficients) with step size {eta}")]
    Diverged { eta: f64 },
    #[error("invalid sparsity: requested {requested}, only {available} features available")]
    InvalidSparsity { requested: usize, available: usize },
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),
    #[error("bound inapplicable: {0}")]
    BoundInapplicable(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code class: 1 for numeric failures, 2 for input errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::SingularSystem(_)
            | Error::Breakdown(_)
            | Error::Diverged { .. }
            | Error::DegenerateMoments
            | Error::BoundInapplicable(_) => 1,
            _ => 2,
        }
    }
}
