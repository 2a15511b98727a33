//! The in-process ledger all parties submit to.
//!
//! Submissions are checked against the registered keys and current balances,
//! queued into the open block, and sealed once per round by the leader.
//! Orders still open at sealing time expire and their escrow goes back to
//! the buyer.

use std::collections::BTreeMap;

use ed25519_dalek::VerifyingKey;
use fairdl_core::numerics::SparseUpdate;
use fairdl_core::{PartyId, Scalar};
use rand::{CryptoRng, RngCore};
use x25519_dalek::PublicKey;

use crate::chain::{Block, ZERO_HASH};
use crate::envelope::{decode_update, encode_update, seal, EncryptedPayload, FreshKey};
use crate::error::{LedgerError, Result};
use crate::keys::{parse_encryption_key, parse_verifying_key, KeyPair};
use crate::store::PayloadStore;
use crate::transaction::{OrderRef, Transaction, TxKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OrderStatus {
    Open,
    Fulfilled { payload_hash: String },
    Expired,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Order {
    pub buyer: PartyId,
    pub seller: PartyId,
    pub count: u64,
    pub tokens: u64,
    pub buyer_key: PublicKey,
    pub status: OrderStatus,
}

#[derive(Debug, Clone, Copy)]
struct Member {
    verifying: VerifyingKey,
}

/// Signed registration for `party`, ready for the genesis block.
pub fn registration(party: PartyId, keys: &KeyPair, tokens: u64) -> Transaction {
    Transaction::sign(
        party,
        TxKind::Register {
            party,
            verifying_key: hex::encode(keys.verifying_key().as_bytes()),
            encryption_key: hex::encode(keys.encryption_public().as_bytes()),
            tokens,
        },
        keys,
    )
}

#[derive(Debug)]
pub struct Ledger {
    blocks: Vec<Block>,
    pending: Vec<Transaction>,
    members: BTreeMap<PartyId, Member>,
    balances: BTreeMap<PartyId, u64>,
    orders: BTreeMap<OrderRef, Order>,
    store: PayloadStore,
    fine_per_gradient: u64,
}

impl Ledger {
    /// Seals the genesis block from self-signed registrations.
    pub fn genesis(registrations: Vec<Transaction>) -> Result<Self> {
        if registrations.len() < 2 {
            return Err(LedgerError::TooFewParties(registrations.len()));
        }
        let mut ledger = Self {
            blocks: Vec::new(),
            pending: Vec::new(),
            members: BTreeMap::new(),
            balances: BTreeMap::new(),
            orders: BTreeMap::new(),
            store: PayloadStore::new(),
            fine_per_gradient: 1,
        };
        let leader = registrations[0].author;
        for tx in registrations {
            if !matches!(tx.kind, TxKind::Register { .. }) {
                return Err(LedgerError::InvalidArgument(format!(
                    "genesis holds registrations only, got {}",
                    tx.kind.name()
                )));
            }
            ledger.append(tx)?;
        }
        let txs = std::mem::take(&mut ledger.pending);
        ledger.blocks.push(Block::seal(0, ZERO_HASH.to_string(), leader, txs));
        Ok(ledger)
    }

    /// Convenience over [`Ledger::genesis`] for locally held keys.
    pub fn create_genesis(parties: &[(PartyId, &KeyPair, u64)]) -> Result<Self> {
        Self::genesis(
            parties
                .iter()
                .map(|&(p, k, t)| registration(p, k, t))
                .collect(),
        )
    }

    /// Tokens fined per ordered gradient when an audit finds fault.
    pub fn set_fine_per_gradient(&mut self, fine: u64) {
        self.fine_per_gradient = fine;
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn into_blocks(self) -> Vec<Block> {
        self.blocks
    }

    pub fn pending(&self) -> &[Transaction] {
        &self.pending
    }

    pub fn store(&self) -> &PayloadStore {
        &self.store
    }

    pub fn order(&self, r: OrderRef) -> Option<&Order> {
        self.orders.get(&r)
    }

    pub fn balance(&self, p: PartyId) -> Option<u64> {
        self.balances.get(&p).copied()
    }

    pub fn balances(&self) -> &BTreeMap<PartyId, u64> {
        &self.balances
    }

    pub fn escrowed(&self) -> u64 {
        self.orders
            .values()
            .filter(|o| o.status == OrderStatus::Open)
            .map(|o| o.tokens)
            .sum()
    }

    /// Available plus escrowed tokens; constant after genesis except for joins.
    pub fn total_tokens(&self) -> u64 {
        self.balances.values().sum::<u64>() + self.escrowed()
    }

    pub fn is_registered(&self, p: PartyId) -> bool {
        self.members.contains_key(&p)
    }

    fn next_ref(&self) -> OrderRef {
        OrderRef {
            block: self.blocks.len() as u64,
            tx: self.pending.len() as u32,
        }
    }

    fn available(&self, p: PartyId) -> Result<u64> {
        self.balance(p).ok_or(LedgerError::UnknownParty(p))
    }

    fn require_funds(&self, p: PartyId, amount: u64) -> Result<()> {
        let balance = self.available(p)?;
        if balance < amount {
            return Err(LedgerError::InsufficientBalance {
                party: p,
                balance,
                requested: amount,
            });
        }
        Ok(())
    }

    /// Validates `tx` against keys, balances and orders, then applies it.
    /// Nothing changes when an error is returned.
    pub fn append(&mut self, tx: Transaction) -> Result<OrderRef> {
        let here = self.next_ref();
        match &tx.kind {
            TxKind::Register {
                party,
                verifying_key,
                encryption_key,
                tokens,
            } => {
                if self.members.contains_key(party) {
                    return Err(LedgerError::DuplicateParty(*party));
                }
                if *party != tx.author {
                    return Err(LedgerError::BadSignature(tx.author));
                }
                let verifying = parse_verifying_key(verifying_key)?;
                parse_encryption_key(encryption_key)?;
                tx.verify(&verifying)?;
                self.members.insert(*party, Member { verifying });
                self.balances.insert(*party, *tokens);
            }
            kind => {
                let member = self
                    .members
                    .get(&tx.author)
                    .ok_or(LedgerError::UnknownParty(tx.author))?;
                tx.verify(&member.verifying)?;
                self.apply(tx.author, kind, here)?;
            }
        }
        self.pending.push(tx);
        Ok(here)
    }

    fn apply(&mut self, author: PartyId, kind: &TxKind, here: OrderRef) -> Result<()> {
        match kind {
            TxKind::Register { .. } => unreachable!("handled by append"),
            TxKind::PurchaseOrder {
                buyer,
                seller,
                count,
                tokens,
                buyer_key,
            } => {
                if author != *buyer {
                    return Err(LedgerError::NotParty(author));
                }
                if !self.is_registered(*seller) {
                    return Err(LedgerError::UnknownParty(*seller));
                }
                if buyer == seller || *count == 0 {
                    return Err(LedgerError::InvalidArgument(
                        "an order needs a distinct seller and a positive count".into(),
                    ));
                }
                let buyer_key = parse_encryption_key(buyer_key)?;
                self.require_funds(*buyer, *tokens)?;
                *self.balances.get_mut(buyer).expect("checked") -= tokens;
                self.orders.insert(
                    here,
                    Order {
                        buyer: *buyer,
                        seller: *seller,
                        count: *count,
                        tokens: *tokens,
                        buyer_key,
                        status: OrderStatus::Open,
                    },
                );
            }
            TxKind::Fulfillment {
                order,
                count,
                payload_hash,
            } => {
                let o = self.orders.get(order).ok_or(LedgerError::UnknownOrder(*order))?;
                if o.seller != author {
                    return Err(LedgerError::NotParty(author));
                }
                if o.status != OrderStatus::Open {
                    return Err(LedgerError::OrderClosed(*order));
                }
                if o.count != *count {
                    return Err(LedgerError::CountMismatch {
                        order: *order,
                        expected: o.count as usize,
                        found: *count as usize,
                    });
                }
                self.store.get(payload_hash)?;
                let (seller, tokens) = (o.seller, o.tokens);
                self.orders.get_mut(order).expect("checked").status = OrderStatus::Fulfilled {
                    payload_hash: payload_hash.clone(),
                };
                *self.balances.get_mut(&seller).expect("registered") += tokens;
            }
            TxKind::TokenTransfer {
                from,
                to,
                amount,
                order: Some(order),
            } => {
                let o = self.orders.get(order).ok_or(LedgerError::UnknownOrder(*order))?;
                if o.status != OrderStatus::Open {
                    return Err(LedgerError::OrderClosed(*order));
                }
                if o.buyer != *from || o.buyer != *to || o.tokens != *amount {
                    return Err(LedgerError::InvalidArgument("refund must return the escrow to its buyer".into()));
                }
                self.orders.get_mut(order).expect("checked").status = OrderStatus::Expired;
                *self.balances.get_mut(to).expect("registered") += amount;
            }
            TxKind::TokenTransfer {
                from,
                to,
                amount,
                order: None,
            } => {
                if author != *from {
                    return Err(LedgerError::NotParty(author));
                }
                if !self.is_registered(*to) {
                    return Err(LedgerError::UnknownParty(*to));
                }
                self.require_funds(*from, *amount)?;
                *self.balances.get_mut(from).expect("checked") -= amount;
                *self.balances.get_mut(to).expect("registered") += amount;
            }
            TxKind::Punishment {
                order,
                offender,
                beneficiary,
                fine,
                ..
            } => {
                let o = self.orders.get(order).ok_or(LedgerError::UnknownOrder(*order))?;
                let parties = [o.buyer, o.seller];
                if !parties.contains(offender) || !parties.contains(beneficiary) || offender == beneficiary {
                    return Err(LedgerError::InvalidArgument(
                        "punishment must move tokens between the order's parties".into(),
                    ));
                }
                self.require_funds(*offender, *fine)?;
                *self.balances.get_mut(offender).expect("checked") -= fine;
                *self.balances.get_mut(beneficiary).expect("registered") += fine;
            }
        }
        Ok(())
    }

    /// Adds a registration to the open block (a party joining mid-run).
    pub fn register(&mut self, party: PartyId, keys: &KeyPair, tokens: u64) -> Result<OrderRef> {
        self.append(registration(party, keys, tokens))
    }

    /// Escrows `tokens` for `count` gradients from `seller`.
    pub fn submit_purchase_order(
        &mut self,
        buyer: PartyId,
        keys: &KeyPair,
        seller: PartyId,
        count: u64,
        tokens: u64,
    ) -> Result<OrderRef> {
        let kind = TxKind::PurchaseOrder {
            buyer,
            seller,
            count,
            tokens,
            buyer_key: hex::encode(keys.encryption_public().as_bytes()),
        };
        self.append(Transaction::sign(buyer, kind, keys))
    }

    /// Encrypts `update` for the buyer, publishes the payload and records the
    /// fulfillment, which releases the escrow to the seller.
    pub fn fulfill_order<T: Scalar, R: RngCore + CryptoRng>(
        &mut self,
        seller: PartyId,
        keys: &KeyPair,
        order: OrderRef,
        update: &SparseUpdate<T>,
        rng: &mut R,
    ) -> Result<(OrderRef, EncryptedPayload, FreshKey)> {
        let o = self.orders.get(&order).ok_or(LedgerError::UnknownOrder(order))?;
        if o.status != OrderStatus::Open {
            return Err(LedgerError::OrderClosed(order));
        }
        if o.count != update.len() as u64 {
            return Err(LedgerError::CountMismatch {
                order,
                expected: o.count as usize,
                found: update.len(),
            });
        }
        let (payload, fsk) = seal(&encode_update(update), &o.buyer_key, rng)?;
        let payload_hash = payload.hash_hex();
        let kind = TxKind::Fulfillment {
            order,
            count: update.len() as u64,
            payload_hash,
        };
        let tx = Transaction::sign(seller, kind, keys);
        // Publish first so the fulfillment can check the payload exists.
        let mut store = self.store.clone();
        self.store.put(&payload);
        match self.append(tx) {
            Ok(r) => Ok((r, payload, fsk)),
            Err(e) => {
                std::mem::swap(&mut self.store, &mut store);
                Err(e)
            }
        }
    }

    /// Fetches and decrypts the gradients delivered for `order`.
    pub fn receive<T: Scalar>(&self, order: OrderRef, keys: &KeyPair) -> Result<SparseUpdate<T>> {
        let o = self.orders.get(&order).ok_or(LedgerError::UnknownOrder(order))?;
        let OrderStatus::Fulfilled { payload_hash } = &o.status else {
            return Err(LedgerError::OrderClosed(order));
        };
        decode_update(&self.store.get(payload_hash)?.open(keys)?)
    }

    /// Settles a dispute over `order`. The seller reveals the gradients it
    /// claims to have sent and the fresh key; `auditor` re-encrypts them under
    /// the recorded parameters. A match means the accusing buyer lied; a
    /// mismatch means the seller shipped something else. The side at fault
    /// pays the fine (capped by its balance) to the other side.
    pub fn audit_and_punish<T: Scalar>(
        &mut self,
        auditor: PartyId,
        keys: &KeyPair,
        order: OrderRef,
        revealed: &SparseUpdate<T>,
        fsk: &FreshKey,
    ) -> Result<Option<OrderRef>> {
        let o = self.orders.get(&order).ok_or(LedgerError::UnknownOrder(order))?;
        let OrderStatus::Fulfilled { payload_hash } = &o.status else {
            return Err(LedgerError::OrderClosed(order));
        };
        let stored = self.store.get(payload_hash)?;
        let honest = stored.reseal(&encode_update(revealed), fsk)?.hash_hex() == *payload_hash;
        let (offender, beneficiary, reason) = if honest {
            (o.buyer, o.seller, "false accusation")
        } else {
            (o.seller, o.buyer, "payload does not match revealed gradients")
        };
        let fine = (self.fine_per_gradient.saturating_mul(o.count)).min(self.available(offender)?);
        if fine == 0 {
            return Ok(None);
        }
        let kind = TxKind::Punishment {
            order,
            offender,
            beneficiary,
            fine,
            reason: reason.to_string(),
        };
        self.append(Transaction::sign(auditor, kind, keys)).map(Some)
    }

    /// Moves tokens between parties outside any order.
    pub fn transfer(&mut self, from: PartyId, keys: &KeyPair, to: PartyId, amount: u64) -> Result<OrderRef> {
        let kind = TxKind::TokenTransfer {
            from,
            to,
            amount,
            order: None,
        };
        self.append(Transaction::sign(from, kind, keys))
    }

    /// Refunds every open order, then seals the open block.
    pub fn seal_block(&mut self, leader: PartyId, keys: &KeyPair) -> Result<&Block> {
        let open: Vec<(OrderRef, PartyId, u64)> = self
            .orders
            .iter()
            .filter(|(_, o)| o.status == OrderStatus::Open)
            .map(|(r, o)| (*r, o.buyer, o.tokens))
            .collect();
        for (order, buyer, tokens) in open {
            let kind = TxKind::TokenTransfer {
                from: buyer,
                to: buyer,
                amount: tokens,
                order: Some(order),
            };
            self.append(Transaction::sign(leader, kind, keys))?;
        }
        let prev = self.blocks.last().map_or(ZERO_HASH.to_string(), |b| b.hash.clone());
        let txs = std::mem::take(&mut self.pending);
        self.blocks.push(Block::seal(self.blocks.len() as u64, prev, leader, txs));
        Ok(self.blocks.last().expect("just pushed"))
    }
}

/// Round-robin leader for a round among the given parties.
pub fn leader_for(round: u64, parties: &[PartyId]) -> Option<PartyId> {
    if parties.is_empty() {
        None
    } else {
        Some(parties[(round % parties.len() as u64) as usize])
    }
}
