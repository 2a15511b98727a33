use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("privacy budget exhausted: spent ({spent_epsilon}, {spent_delta}) of ({total_epsilon}, {total_delta})")]
    BudgetExhausted {
        spent_epsilon: f64,
        spent_delta: f64,
        total_epsilon: f64,
        total_delta: f64,
    },
    #[error("insufficient tokens: balance {balance}, requested {requested}")]
    InsufficientTokens { balance: u64, requested: u64 },
    #[error("credible set would become empty")]
    EmptyCredibleSet,
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
