//! Error type shared across the crate.

use thiserror::Error;

/// Errors raised by spdgeo operations.
#[derive(Debug, Error)]
pub enum Error {
    /// Operands have incompatible dimensions.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    /// An input matrix fails a structural validation (orthogonality,
    /// skew-symmetry, positivity, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// An enumeration or search would exceed the configured cap.
    #[error("cap exceeded: {0}")]
    CapExceeded(String),
    /// A numerical computation failed or an internal identity that should hold
    /// to working precision was violated.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
