use thiserror::Error;

/// Errors raised by the library. Every variant is a caller error; nothing here is
/// retryable.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("modulus {0} is not prime")]
    NotPrime(u32),

    #[error("invalid ambient dimension: {0}")]
    InvalidDimension(String),

    #[error("residue {value} out of range for p = {p}")]
    ResidueOutOfRange { value: u32, p: u32 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("ambient parameters differ: {0}")]
    AmbientMismatch(String),

    #[error("size guard exceeded: {0}")]
    TooLarge(String),

    #[error("arithmetic overflow: {0}")]
    Overflow(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("{0} is not a power of p = {1}")]
    NotAPower(u64, u32),

    #[error("malformed family document: {0}")]
    Family(String),
}

pub type Result<T> = std::result::Result<T, Error>;
