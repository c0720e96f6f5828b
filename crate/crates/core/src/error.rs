use crate::ode::SolveStats;

/// Errors raised anywhere in the library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("{op}: zero denominator")]
    Singular { op: &'static str },

    #[error("Taylor order mismatch: {left} vs {right}")]
    OrderMismatch { left: usize, right: usize },

    #[error("unsupported operation `{0}`")]
    Unsupported(String),

    #[error("non-finite dynamics at t = {t}")]
    NonFinite { t: f64 },

    #[error("step limit of {max_steps} exceeded at t = {t}")]
    MaxStepsExceeded {
        t: f64,
        max_steps: usize,
        stats: SolveStats,
    },

    #[error("expected a scalar output, got shape {0:?}")]
    NonScalar(Vec<usize>),

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("example {index}: {source}")]
    Example { index: usize, source: Box<Error> },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::Invalid(msg.into())
}
