//! Append-only ledger for the gradient market: signed transactions in
//! hash-chained blocks, escrowed purchase orders, hybrid-encrypted gradient
//! payloads in a content-addressed store, and audit-driven punishment.

pub mod chain;
pub mod envelope;
pub mod error;
pub mod keys;
pub mod ledger;
pub mod store;
pub mod transaction;

pub use chain::{
    check_chain, dump_chain, parse_chain, replay_balances, verify_chain, verify_dump, Balances, Block, ZERO_HASH,
};
pub use envelope::{decode_update, encode_update, seal, EncryptedPayload, FreshKey};
pub use error::{LedgerError, Result};
pub use keys::KeyPair;
pub use ledger::{leader_for, registration, Ledger, Order, OrderStatus};
pub use store::PayloadStore;
pub use transaction::{OrderRef, Transaction, TxKind};
