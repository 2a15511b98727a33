use fairdl_core::PartyId;

use crate::transaction::OrderRef;

pub type Result<T> = std::result::Result<T, LedgerError>;

#[derive(Debug, thiserror::Error)]
pub enum LedgerError {
    #[error("party {0} is already registered")]
    DuplicateParty(PartyId),
    #[error("party {0} is not registered")]
    UnknownParty(PartyId),
    #[error("genesis needs at least 2 registrations, got {0}")]
    TooFewParties(usize),
    #[error("{party} holds {balance} tokens but {requested} were requested")]
    InsufficientBalance {
        party: PartyId,
        balance: u64,
        requested: u64,
    },
    #[error("signature does not verify for {0}")]
    BadSignature(PartyId),
    #[error("no purchase order at {0}")]
    UnknownOrder(OrderRef),
    #[error("order {0} is no longer open")]
    OrderClosed(OrderRef),
    #[error("order {order} asks for {expected} gradients, got {found}")]
    CountMismatch {
        order: OrderRef,
        expected: usize,
        found: usize,
    },
    #[error("{0} is not a party to this order")]
    NotParty(PartyId),
    #[error("payload {0} not found in the store")]
    MissingPayload(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("cryptographic failure: {0}")]
    Crypto(&'static str),
    #[error("malformed record: {0}")]
    Malformed(String),
    #[error(transparent)]
    Core(#[from] fairdl_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
