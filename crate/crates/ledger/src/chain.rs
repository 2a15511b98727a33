//! Blocks, hash chaining, verification and the text dump.

use std::collections::BTreeMap;

use ed25519_dalek::VerifyingKey;
use fairdl_core::PartyId;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{LedgerError, Result};
use crate::keys::parse_verifying_key;
use crate::transaction::{OrderRef, Transaction, TxKind};

pub const ZERO_HASH: &str = "0000000000000000000000000000000000000000000000000000000000000000";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Block {
    pub index: u64,
    pub prev_hash: String,
    pub leader: PartyId,
    pub transactions: Vec<Transaction>,
    pub hash: String,
}

#[derive(Serialize)]
struct Header<'a> {
    index: u64,
    prev_hash: &'a str,
    leader: PartyId,
    transactions: &'a [Transaction],
}

impl Block {
    pub fn compute_hash(index: u64, prev_hash: &str, leader: PartyId, transactions: &[Transaction]) -> String {
        let bytes = serde_json::to_vec(&Header {
            index,
            prev_hash,
            leader,
            transactions,
        })
        .expect("block serializes");
        hex::encode(Sha256::digest(bytes))
    }

    pub fn seal(index: u64, prev_hash: String, leader: PartyId, transactions: Vec<Transaction>) -> Self {
        let hash = Self::compute_hash(index, &prev_hash, leader, &transactions);
        Self {
            index,
            prev_hash,
            leader,
            transactions,
            hash,
        }
    }

    pub fn hash_matches(&self) -> bool {
        Self::compute_hash(self.index, &self.prev_hash, self.leader, &self.transactions) == self.hash
    }
}

/// Checks the links first, then every signature against the keys
/// registered so far. Registrations must be signed by the key they register.
pub fn check_chain(blocks: &[Block]) -> Result<()> {
    let mut prev = ZERO_HASH;
    for (i, b) in blocks.iter().enumerate() {
        if b.index != i as u64 || b.prev_hash != prev || !b.hash_matches() {
            return Err(LedgerError::Malformed(format!("block {i} does not link")));
        }
        prev = &b.hash;
    }
    let mut keys: BTreeMap<PartyId, VerifyingKey> = BTreeMap::new();
    for b in blocks {
        for tx in &b.transactions {
            if let TxKind::Register {
                party,
                verifying_key,
                ..
            } = &tx.kind
            {
                if *party != tx.author || keys.contains_key(party) {
                    return Err(LedgerError::DuplicateParty(*party));
                }
                let key = parse_verifying_key(verifying_key)?;
                tx.verify(&key)?;
                keys.insert(*party, key);
            } else {
                let key = keys.get(&tx.author).ok_or(LedgerError::UnknownParty(tx.author))?;
                tx.verify(key)?;
            }
        }
    }
    Ok(())
}

pub fn verify_chain(blocks: &[Block]) -> bool {
    check_chain(blocks).is_ok()
}

/// One compact JSON block per line.
pub fn dump_chain(blocks: &[Block]) -> String {
    let mut out = String::new();
    for b in blocks {
        out.push_str(&serde_json::to_string(b).expect("block serializes"));
        out.push('\n');
    }
    out
}

pub fn parse_chain(text: &str) -> Result<Vec<Block>> {
    text.lines()
        .filter(|l| !l.is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| LedgerError::Malformed(e.to_string())))
        .collect()
}

/// Verifies a dump as text: it must parse, be in canonical form (so that no
/// byte can change without changing the chain), and verify.
pub fn verify_dump(text: &str) -> bool {
    match parse_chain(text) {
        Ok(blocks) => dump_chain(&blocks) == text && verify_chain(&blocks),
        Err(_) => false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Escrow {
    buyer: PartyId,
    seller: PartyId,
    tokens: u64,
    open: bool,
}

/// Token balances implied by the chain, with escrow still held per order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Balances {
    pub available: BTreeMap<PartyId, u64>,
    pub escrowed: BTreeMap<OrderRef, u64>,
}

impl Balances {
    pub fn total(&self) -> u64 {
        self.available.values().sum::<u64>() + self.escrowed.values().sum::<u64>()
    }
}

/// Replays every token movement and rejects any overdraft.
pub fn replay_balances(blocks: &[Block]) -> Result<Balances> {
    let mut available: BTreeMap<PartyId, u64> = BTreeMap::new();
    let mut orders: BTreeMap<OrderRef, Escrow> = BTreeMap::new();
    fn debit(av: &mut BTreeMap<PartyId, u64>, p: PartyId, amount: u64) -> Result<()> {
        let bal = av.get_mut(&p).ok_or(LedgerError::UnknownParty(p))?;
        if *bal < amount {
            return Err(LedgerError::InsufficientBalance {
                party: p,
                balance: *bal,
                requested: amount,
            });
        }
        *bal -= amount;
        Ok(())
    }
    fn credit(av: &mut BTreeMap<PartyId, u64>, p: PartyId, amount: u64) -> Result<()> {
        *av.get_mut(&p).ok_or(LedgerError::UnknownParty(p))? += amount;
        Ok(())
    }
    for b in blocks {
        for (t, tx) in b.transactions.iter().enumerate() {
            let here = OrderRef {
                block: b.index,
                tx: t as u32,
            };
            match &tx.kind {
                TxKind::Register { party, tokens, .. } => {
                    if available.insert(*party, *tokens).is_some() {
                        return Err(LedgerError::DuplicateParty(*party));
                    }
                }
                TxKind::PurchaseOrder {
                    buyer,
                    seller,
                    tokens,
                    ..
                } => {
                    debit(&mut available, *buyer, *tokens)?;
                    orders.insert(
                        here,
                        Escrow {
                            buyer: *buyer,
                            seller: *seller,
                            tokens: *tokens,
                            open: true,
                        },
                    );
                }
                TxKind::Fulfillment { order, .. } => {
                    let e = orders.get_mut(order).ok_or(LedgerError::UnknownOrder(*order))?;
                    if !e.open {
                        return Err(LedgerError::OrderClosed(*order));
                    }
                    e.open = false;
                    let (seller, tokens) = (e.seller, e.tokens);
                    credit(&mut available, seller, tokens)?;
                }
                TxKind::TokenTransfer {
                    from,
                    to,
                    amount,
                    order: Some(order),
                } => {
                    let e = orders.get_mut(order).ok_or(LedgerError::UnknownOrder(*order))?;
                    if !e.open || e.buyer != *from || e.buyer != *to || e.tokens != *amount {
                        return Err(LedgerError::OrderClosed(*order));
                    }
                    e.open = false;
                    credit(&mut available, *to, *amount)?;
                }
                TxKind::TokenTransfer {
                    from,
                    to,
                    amount,
                    order: None,
                } => {
                    debit(&mut available, *from, *amount)?;
                    credit(&mut available, *to, *amount)?;
                }
                TxKind::Punishment {
                    offender,
                    beneficiary,
                    fine,
                    ..
                } => {
                    debit(&mut available, *offender, *fine)?;
                    credit(&mut available, *beneficiary, *fine)?;
                }
            }
        }
    }
    let escrowed = orders
        .into_iter()
        .filter(|(_, e)| e.open)
        .map(|(r, e)| (r, e.tokens))
        .collect();
    Ok(Balances {
        available,
        escrowed,
    })
}
