use std::fmt;

use ed25519_dalek::{Signature, VerifyingKey};
use fairdl_core::PartyId;
use serde::{Deserialize, Serialize};

use crate::error::{LedgerError, Result};
use crate::keys::KeyPair;

/// Pointer to a transaction: block index and position inside the block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct OrderRef {
    pub block: u64,
    pub tx: u32,
}

impl fmt::Display for OrderRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.block, self.tx)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TxKind {
    Register {
        party: PartyId,
        verifying_key: String,
        encryption_key: String,
        tokens: u64,
    },
    PurchaseOrder {
        buyer: PartyId,
        seller: PartyId,
        count: u64,
        tokens: u64,
        /// Buyer's encryption key for the payload envelope.
        buyer_key: String,
    },
    Fulfillment {
        order: OrderRef,
        count: u64,
        payload_hash: String,
    },
    Punishment {
        order: OrderRef,
        offender: PartyId,
        beneficiary: PartyId,
        fine: u64,
        reason: String,
    },
    /// Plain transfer, or an escrow release back to the buyer when `order` is set.
    TokenTransfer {
        from: PartyId,
        to: PartyId,
        amount: u64,
        order: Option<OrderRef>,
    },
}

impl TxKind {
    pub fn name(&self) -> &'static str {
        match self {
            TxKind::Register { .. } => "register",
            TxKind::PurchaseOrder { .. } => "purchase_order",
            TxKind::Fulfillment { .. } => "fulfillment",
            TxKind::Punishment { .. } => "punishment",
            TxKind::TokenTransfer { .. } => "token_transfer",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transaction {
    pub author: PartyId,
    pub kind: TxKind,
    /// Ed25519 signature over [`Transaction::signing_bytes`], lowercase hex.
    pub signature: String,
}

#[derive(Serialize)]
struct Unsigned<'a> {
    author: PartyId,
    kind: &'a TxKind,
}

impl Transaction {
    pub fn signing_bytes(author: PartyId, kind: &TxKind) -> Vec<u8> {
        serde_json::to_vec(&Unsigned { author, kind }).expect("transaction serializes")
    }

    pub fn sign(author: PartyId, kind: TxKind, keys: &KeyPair) -> Self {
        let sig = keys.sign(&Self::signing_bytes(author, &kind));
        Self {
            author,
            kind,
            signature: hex::encode(sig.to_bytes()),
        }
    }

    pub fn verify(&self, key: &VerifyingKey) -> Result<()> {
        let bytes: [u8; 64] = hex::decode(&self.signature)
            .ok()
            .and_then(|b| b.try_into().ok())
            .ok_or(LedgerError::BadSignature(self.author))?;
        // Non-canonical hex (upper case) would decode to the same bytes.
        if hex::encode(bytes) != self.signature {
            return Err(LedgerError::BadSignature(self.author));
        }
        key.verify_strict(
            &Self::signing_bytes(self.author, &self.kind),
            &Signature::from_bytes(&bytes),
        )
        .map_err(|_| LedgerError::BadSignature(self.author))
    }
}
