//! Error type shared by all modules.

use thiserror::Error;

/// Library-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Operator dimensions do not match the operation's requirements.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// An input failed a structural validity check (Hermiticity,
    /// positivity, normalization, parameter range).
    #[error("validation: {0}")]
    Validation(String),

    /// Two results that must agree numerically do not; the message carries
    /// the observed discrepancy.
    #[error("numerical diagnostic: {0}")]
    Numerical(String),

    /// The antisymmetrized composition vanished (Pauli exclusion).
    #[error("Pauli exclusion: {0}")]
    PauliExclusion(String),

    /// The requested operation is not defined for the given configuration.
    #[error("unsupported: {0}")]
    Unsupported(String),
}
