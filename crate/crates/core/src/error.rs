use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("argument {value} outside the domain of {op}: {reason}")]
    Domain {
        op: &'static str,
        value: String,
        reason: &'static str,
    },

    #[error("coefficient table has {available} entries but {required} are needed")]
    TableTooShort { required: usize, available: usize },

    #[error("missing Hecke eigenvalue for prime {0}")]
    MissingPrime(u64),

    #[error("character is not primitive (modulus {modulus}, conductor {conductor})")]
    NotPrimitive { modulus: u64, conductor: u64 },

    #[error("gamma function pole at {0}")]
    Pole(String),

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("resource budget exceeded: {0}")]
    Budget(String),

    #[error("integer overflow: {0}")]
    Overflow(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
