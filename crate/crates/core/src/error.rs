use thiserror::Error;

/// Errors raised by the arithmetic layers and the model builders.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("precision-zero divisor")]
    PrecisionZeroDivisor,
    #[error("mixed primes {0} and {1}")]
    MixedPrime(u32, u32),
    #[error("non-composable: {0}")]
    NonComposable(String),
    #[error("not divisible by t")]
    NotDivisibleByT,
    #[error("obstructed at degree {0}")]
    Obstructed(i64),
    #[error("insufficient truncation: {0}")]
    InsufficientTruncation(String),
    #[error("inconclusive at this truncation: {0}")]
    Inconclusive(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, Error>;
