use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {found}")]
    DimensionMismatch { context: &'static str, expected: usize, found: usize },
    #[error("{context}: matrix is not square ({rows}x{cols})")]
    NotSquare { context: &'static str, rows: usize, cols: usize },
    #[error("{context}: matrix is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { context: &'static str, deviation: f64 },
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("invalid layout: {0}")]
    InvalidLayout(String),
    #[error("slot {slot} out of range for a layout with {len} factors")]
    SlotOutOfRange { slot: usize, len: usize },
    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },
    #[error("unsupported model: {0}")]
    UnsupportedModel(String),
    #[error("quadrature did not converge: last relative change {last_change:e} after {steps} steps")]
    QuadratureNotConverged { steps: usize, last_change: f64 },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument { name, reason: reason.into() }
    }
}
