use std::collections::BTreeMap;

use fairdl_core::credibility::{
    consensus_exclude, credibility_update, default_threshold, download_allocation, init_credibility, majority_vote,
    normalize_and_screen, supplement, CredibleSet, LabelMatrix,
};
use fairdl_core::PartyId;

fn ids(n: usize) -> Vec<PartyId> {
    (0..n).map(PartyId::from).collect()
}

#[test]
fn majority_ties_go_to_the_smallest_label() {
    let m = LabelMatrix::from_rows(ids(4), &[vec![3, 3, 1, 1], vec![2, 2, 2, 0], vec![0, 1, 2, 3]]).unwrap();
    assert_eq!(majority_vote(&m), vec![1, 2, 0]);
}

#[test]
fn a_random_labeller_is_reported_by_everyone_and_removed() {
    // Three parties agree on every sample, party 3 never does.
    let rows: Vec<Vec<usize>> = (0..10).map(|k| vec![k % 3, k % 3, k % 3, (k + 1) % 3]).collect();
    let m = LabelMatrix::from_rows(ids(4), &rows).unwrap();
    let threshold = default_threshold::<f64>(4);
    let mut reports = BTreeMap::new();
    for owner in ids(4) {
        let raw: BTreeMap<PartyId, f64> = init_credibility(&m, owner);
        let (list, flagged) = normalize_and_screen(owner, &raw, threshold);
        if owner != PartyId(3) {
            assert!(list.get(PartyId(3)).unwrap() < threshold);
        }
        reports.insert(owner, flagged);
    }
    let out = consensus_exclude(&reports, &CredibleSet::new(ids(4))).unwrap();
    assert_eq!(out.removed, vec![PartyId(3)]);
    assert_eq!(out.credible.len(), 3);
}

#[test]
fn half_the_votes_is_not_enough() {
    let mut reports = BTreeMap::new();
    reports.insert(PartyId(0), vec![PartyId(3)]);
    reports.insert(PartyId(1), vec![PartyId(3)]);
    let out = consensus_exclude(&reports, &CredibleSet::new(ids(4))).unwrap();
    assert!(out.removed.is_empty());
}

#[test]
fn credibility_moves_halfway_to_the_sigmoid() {
    // Equal accuracy with and without a peer is neutral.
    assert!((credibility_update(0.2f64, 0.7, 0.7) - 0.35).abs() < 1e-12);
    // A helpful peer pulls credibility up, a harmful one down.
    assert!(credibility_update(0.3f64, 0.8, 0.6) > 0.3);
    assert!(credibility_update(0.3f64, 0.6, 0.8) < 0.3);
}

#[test]
fn downloads_respect_the_sellers_cap() {
    assert_eq!(download_allocation(0.5, 100, 0.1, 1000), 50);
    assert_eq!(download_allocation(0.5, 1000, 0.1, 1000), 100);
    assert_eq!(download_allocation(0.0, 1000, 0.1, 1000), 0);
}

#[test]
fn supplement_fills_the_gap_up_to_spare_capacity() {
    let p = ids(3);
    let received: BTreeMap<_, _> = p.iter().map(|&q| (q, 2)).collect();
    let caps: BTreeMap<_, _> = [(p[0], 3), (p[1], 20), (p[2], 20)].into_iter().collect();
    let cred: BTreeMap<_, f64> = [(p[0], 0.6), (p[1], 0.2), (p[2], 0.2)].into_iter().collect();
    let extra = supplement(16, &received, &caps, &cred);
    // Party 0 caps at one extra; the other nine split evenly with the odd one to the lower id.
    assert_eq!(extra.get(&p[0]), Some(&1));
    assert_eq!(extra.get(&p[1]), Some(&5));
    assert_eq!(extra.get(&p[2]), Some(&4));
    assert_eq!(extra.values().sum::<u64>(), 10);
}
