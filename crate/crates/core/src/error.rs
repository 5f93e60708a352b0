use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("symbol {value} outside alphabet of size 2^{k}")]
    Alphabet { value: u64, k: u32 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("index out of range: {0}")]
    Range(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("attack not applicable: {0}")]
    Attack(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
