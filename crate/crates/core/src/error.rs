//! Error type shared by all modules.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, QkdError>;

#[derive(Debug, Error)]
pub enum QkdError {
    #[error("dimension {0} is not supported; d must be at least 2")]
    InvalidDimension(usize),

    #[error("error rate Q={q} outside the valid domain for d={d}, {mubs} bases: {reason}")]
    InvalidErrorRate {
        d: usize,
        mubs: u8,
        q: f64,
        reason: String,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error(
        "degenerate eigenvalues: phase gap {gap:.3e} below 1e-9 for a {dim}-dimensional operator; \
         the numerical eigenbasis is not canonical"
    )]
    DegenerateEigenvalues { dim: usize, gap: f64 },

    #[error("support violation: {weight:.3e} of the first state lies outside the second state's support")]
    SupportViolation { weight: f64 },

    #[error("session yielded {got} sifted estimation symbols; at least {needed} required")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl QkdError {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        QkdError::Io {
            path: path.into(),
            source,
        }
    }
}
