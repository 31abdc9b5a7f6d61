use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("ring size mismatch: {0} vs {1}")]
    SizeMismatch(usize, usize),
    #[error("ordering violated between parts {index} and {} (site/location {at})", index + 1)]
    OrderViolated { index: usize, at: String },
    #[error("mass ordering violated: first argument carries {first}, second carries {second}")]
    MassOrder { first: String, second: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("enumeration too large: {0}")]
    TooLarge(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("internal invariant broken: {0}")]
    Internal(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
