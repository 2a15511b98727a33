use fairdl_core::credibility::init_tokens;
use fairdl_core::numerics::SparseUpdate;
use fairdl_core::PartyId;
use fairdl_ledger::{
    dump_chain, parse_chain, registration, replay_balances, verify_chain, verify_dump, KeyPair, Ledger, LedgerError,
    OrderStatus, PayloadStore, Transaction, TxKind,
};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn parties(n: usize, seed: u64) -> (Vec<PartyId>, Vec<KeyPair>) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let ids = (0..n).map(PartyId::from).collect();
    let keys = (0..n).map(|_| KeyPair::generate(&mut rng)).collect();
    (ids, keys)
}

fn ledger_with(n: usize, tokens: u64) -> (Vec<PartyId>, Vec<KeyPair>, Ledger) {
    let (ids, keys) = parties(n, 42);
    let regs: Vec<_> = ids.iter().zip(&keys).map(|(&p, k)| (p, k, tokens)).collect();
    let ledger = Ledger::create_genesis(&regs).unwrap();
    (ids, keys, ledger)
}

fn update(k: usize) -> SparseUpdate<f64> {
    SparseUpdate::new(1000, (0..k).map(|i| (i * 3, 0.01 * i as f64 - 0.2)).collect()).unwrap()
}

#[test]
fn genesis_holds_initial_balances() {
    let tokens = init_tokens(0.1, 1000, 4).unwrap();
    let (ids, _, ledger) = ledger_with(4, tokens);
    assert_eq!(ledger.blocks().len(), 1);
    let g = &ledger.blocks()[0];
    assert_eq!(g.index, 0);
    assert_eq!(g.prev_hash, fairdl_ledger::ZERO_HASH);
    assert_eq!(g.transactions.len(), 4);
    for p in ids {
        assert_eq!(ledger.balance(p), Some(300));
    }
    assert!(verify_chain(ledger.blocks()));
}

#[test]
fn genesis_guards() {
    let (ids, keys) = parties(2, 1);
    let dup = vec![registration(ids[0], &keys[0], 5), registration(ids[0], &keys[1], 5)];
    assert!(matches!(Ledger::genesis(dup), Err(LedgerError::DuplicateParty(_))));
    let one = vec![registration(ids[0], &keys[0], 5)];
    assert!(matches!(Ledger::genesis(one), Err(LedgerError::TooFewParties(1))));
}

#[test]
fn order_escrow_and_fulfillment() {
    let (ids, keys, mut ledger) = ledger_with(3, 300);
    let mut rng = ChaCha20Rng::seed_from_u64(9);
    let order = ledger.submit_purchase_order(ids[0], &keys[0], ids[1], 30, 30).unwrap();
    assert_eq!(ledger.balance(ids[0]), Some(270));
    assert_eq!(ledger.escrowed(), 30);

    let u = update(30);
    let (_, payload, _) = ledger.fulfill_order(ids[1], &keys[1], order, &u, &mut rng).unwrap();
    assert_eq!(ledger.balance(ids[1]), Some(330));
    assert_eq!(ledger.escrowed(), 0);
    assert_eq!(ledger.receive::<f64>(order, &keys[0]).unwrap(), u);
    assert!(ledger.receive::<f64>(order, &keys[2]).is_err());

    let recorded = ledger
        .pending()
        .iter()
        .find_map(|tx| match &tx.kind {
            TxKind::Fulfillment { payload_hash, .. } => Some(payload_hash.clone()),
            _ => None,
        })
        .unwrap();
    assert_eq!(recorded, payload.hash_hex());
    assert_eq!(ledger.store().get(&recorded).unwrap(), payload);

    // Second fulfillment of the same order.
    assert!(matches!(
        ledger.fulfill_order(ids[1], &keys[1], order, &u, &mut rng),
        Err(LedgerError::OrderClosed(_))
    ));
    assert_eq!(ledger.total_tokens(), 900);
}

#[test]
fn order_guards() {
    let (ids, keys, mut ledger) = ledger_with(2, 10);
    assert!(matches!(
        ledger.submit_purchase_order(ids[0], &keys[0], ids[1], 30, 30),
        Err(LedgerError::InsufficientBalance { .. })
    ));
    // Signed with someone else's key.
    assert!(matches!(
        ledger.submit_purchase_order(ids[0], &keys[1], ids[1], 5, 5),
        Err(LedgerError::BadSignature(_))
    ));
    assert_eq!(ledger.balance(ids[0]), Some(10));

    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let order = ledger.submit_purchase_order(ids[0], &keys[0], ids[1], 5, 5).unwrap();
    assert!(matches!(
        ledger.fulfill_order(ids[1], &keys[1], order, &update(4), &mut rng),
        Err(LedgerError::CountMismatch { .. })
    ));
    // Tampered signature on an otherwise valid transfer.
    let mut tx = Transaction::sign(
        ids[1],
        TxKind::TokenTransfer {
            from: ids[1],
            to: ids[0],
            amount: 1,
            order: None,
        },
        &keys[1],
    );
    tx.signature.replace_range(0..2, if tx.signature.starts_with("00") { "01" } else { "00" });
    assert!(matches!(ledger.append(tx), Err(LedgerError::BadSignature(_))));
}

#[test]
fn open_orders_expire_at_seal() {
    let (ids, keys, mut ledger) = ledger_with(3, 100);
    let order = ledger.submit_purchase_order(ids[0], &keys[0], ids[2], 10, 10).unwrap();
    ledger.seal_block(ids[1], &keys[1]).unwrap();
    assert_eq!(ledger.order(order).unwrap().status, OrderStatus::Expired);
    assert_eq!(ledger.balance(ids[0]), Some(100));
    assert!(verify_chain(ledger.blocks()));
    let replay = replay_balances(ledger.blocks()).unwrap();
    assert_eq!(&replay.available, ledger.balances());
    assert!(replay.escrowed.is_empty());
}

#[test]
fn audits_fine_the_side_at_fault() {
    let (ids, keys, mut ledger) = ledger_with(3, 100);
    let mut rng = ChaCha20Rng::seed_from_u64(3);

    // Honest seller, lying buyer.
    let order = ledger.submit_purchase_order(ids[0], &keys[0], ids[1], 10, 10).unwrap();
    let u = update(10);
    let (_, _, fsk) = ledger.fulfill_order(ids[1], &keys[1], order, &u, &mut rng).unwrap();
    let p = ledger.audit_and_punish(ids[2], &keys[2], order, &u, &fsk).unwrap();
    assert!(p.is_some());
    assert_eq!(ledger.balance(ids[0]), Some(80));
    assert_eq!(ledger.balance(ids[1]), Some(120));

    // Seller shipped something other than what it reveals.
    let order = ledger.submit_purchase_order(ids[0], &keys[0], ids[1], 10, 10).unwrap();
    let garbage = SparseUpdate::new(1000, (0..10).map(|i| (i, 9.0)).collect()).unwrap();
    let (_, _, fsk) = ledger.fulfill_order(ids[1], &keys[1], order, &garbage, &mut rng).unwrap();
    ledger.audit_and_punish(ids[2], &keys[2], order, &u, &fsk).unwrap().unwrap();
    assert_eq!(ledger.balance(ids[0]), Some(80));
    assert_eq!(ledger.balance(ids[1]), Some(120));
    assert_eq!(ledger.total_tokens(), 300);

    ledger.seal_block(ids[0], &keys[0]).unwrap();
    assert!(verify_chain(ledger.blocks()));
    assert_eq!(replay_balances(ledger.blocks()).unwrap().total(), 300);
}

#[test]
fn tampering_breaks_verification() {
    let (ids, keys, mut ledger) = ledger_with(3, 100);
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    for round in 0..3u64 {
        let o = ledger.submit_purchase_order(ids[0], &keys[0], ids[1], 3, 3).unwrap();
        ledger.fulfill_order(ids[1], &keys[1], o, &update(3), &mut rng).unwrap();
        ledger.seal_block(ids[(round % 3) as usize], &keys[(round % 3) as usize]).unwrap();
    }
    let blocks = ledger.blocks().to_vec();
    assert!(verify_chain(&blocks));

    let mut flipped = blocks.clone();
    for tx in &mut flipped[2].transactions {
        if let TxKind::Fulfillment { payload_hash, .. } = &mut tx.kind {
            let c = if payload_hash.starts_with('0') { "1" } else { "0" };
            payload_hash.replace_range(0..1, c);
        }
    }
    assert!(!verify_chain(&flipped));

    let mut reordered = blocks.clone();
    reordered.swap(1, 2);
    assert!(!verify_chain(&reordered));

    let text = dump_chain(&blocks);
    assert!(verify_dump(&text));
    assert_eq!(dump_chain(&parse_chain(&text).unwrap()), text);
    let upper = text.replacen(&blocks[1].transactions[0].signature[..8], &blocks[1].transactions[0].signature[..8].to_uppercase(), 1);
    if upper != text {
        assert!(!verify_dump(&upper));
    }
}

#[test]
fn payload_store_round_trips_through_files() {
    let (ids, keys, mut ledger) = ledger_with(2, 50);
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let o = ledger.submit_purchase_order(ids[0], &keys[0], ids[1], 4, 4).unwrap();
    ledger.fulfill_order(ids[1], &keys[1], o, &update(4), &mut rng).unwrap();
    let dir = tempfile::tempdir().unwrap();
    ledger.store().write_dir(dir.path()).unwrap();
    let back = PayloadStore::read_dir(dir.path()).unwrap();
    assert_eq!(&back, ledger.store());
}

#[test]
fn registration_mid_run() {
    let (ids, keys, mut ledger) = ledger_with(2, 50);
    let (_, more) = parties(1, 77);
    ledger.register(PartyId(2), &more[0], 50).unwrap();
    assert!(ledger.register(PartyId(2), &more[0], 50).is_err());
    ledger.seal_block(ids[0], &keys[0]).unwrap();
    assert!(verify_chain(ledger.blocks()));
    assert_eq!(ledger.total_tokens(), 150);
}
