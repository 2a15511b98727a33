pub type Result<T> = std::result::Result<T, SimError>;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Config(Vec<String>),
    #[error("credible set shrank to {0} parties; at least 2 are needed to continue")]
    CredibleSetTooSmall(usize),
    #[error("malformed trace: {0}")]
    Trace(String),
    #[error(transparent)]
    Core(#[from] fairdl_core::Error),
    #[error(transparent)]
    Ledger(#[from] fairdl_ledger::LedgerError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
