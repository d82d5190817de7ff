use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dimension {requested} exceeds the maximum of {max}")]
    DimensionOverflow { requested: usize, max: usize },

    #[error("matrix exponential failed: {0}")]
    ExpmFailure(String),

    #[error("trace collapsed to {trace:e} at t = {t}")]
    TraceCollapse { t: f64, trace: f64 },

    #[error("non-finite entry in density matrix at t = {t}")]
    NonFinite { t: f64 },

    #[error("expectation value has imaginary residue {residue:e}")]
    NonReal { residue: f64 },

    #[error("empty trace")]
    EmptyTrace,

    #[error("non-uniform sampling at sample {index}")]
    NonUniformSampling { index: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("rank-deficient design matrix (reciprocal condition {rcond:e})")]
    RankDeficient { rcond: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
