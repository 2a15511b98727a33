//! Mutual credibility and token bookkeeping.
//!
//! Initialisation: every party labels every other party's released samples;
//! the releaser compares each peer's labels against the majority vote and
//! normalizes the match rates into its private credibility list. Update
//! rounds: credibility moves toward a sigmoid of the leave-one-out accuracy
//! ratio, downloads are split by credibility, and peers whose normalized
//! credibility falls below the threshold are reported. A strict majority of
//! reports removes a party from the credible set.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::PartyId;
use crate::scalar::Scalar;

/// Slope of the credibility sigmoid.
pub const SIGMOID_SLOPE: f64 = 15.0;

/// Floors a nonnegative real count, absorbing representation error
/// (`0.3 * 10` is 2.9999999999999996 in binary).
pub fn floor_count(x: f64) -> u64 {
    if x <= 0.0 {
        return 0;
    }
    (x + 1e-9 * x.max(1.0)).floor() as u64
}

/// Initial tokens: `floor(lambda * |w| * (n - 1))`.
pub fn init_tokens(sharing_level: f64, param_count: usize, n: usize) -> Result<u64> {
    if n < 2 {
        return Err(Error::invalid(format!("need at least 2 parties, got {n}")));
    }
    if !(sharing_level >= 0.0) {
        return Err(Error::invalid("sharing level must be nonnegative"));
    }
    Ok(floor_count(sharing_level * param_count as f64 * (n - 1) as f64))
}

/// Default report threshold `(1 / n) * (2 / 3)`.
pub fn default_threshold<T: Scalar>(n: usize) -> T {
    T::lit(2.0 / 3.0) / T::from_count(n)
}

/// Predicted labels for one party's release: one row per sample, one column per party.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelMatrix {
    parties: Vec<PartyId>,
    rows: usize,
    labels: Vec<usize>,
}

impl LabelMatrix {
    /// `columns[k]` holds the labels predicted by `parties[k]`.
    pub fn from_columns(parties: Vec<PartyId>, columns: Vec<Vec<usize>>) -> Result<Self> {
        if parties.len() != columns.len() {
            return Err(Error::DimensionMismatch {
                context: "label matrix columns",
                expected: parties.len(),
                found: columns.len(),
            });
        }
        let rows = columns.first().map_or(0, Vec::len);
        if let Some(bad) = columns.iter().find(|c| c.len() != rows) {
            return Err(Error::DimensionMismatch {
                context: "label matrix rows",
                expected: rows,
                found: bad.len(),
            });
        }
        let distinct: BTreeSet<_> = parties.iter().collect();
        if distinct.len() != parties.len() {
            return Err(Error::invalid("duplicate party column"));
        }
        let mut labels = vec![0; rows * parties.len()];
        for (k, col) in columns.iter().enumerate() {
            for (r, &l) in col.iter().enumerate() {
                labels[r * parties.len() + k] = l;
            }
        }
        Ok(Self {
            parties,
            rows,
            labels,
        })
    }

    pub fn from_rows(parties: Vec<PartyId>, rows: &[Vec<usize>]) -> Result<Self> {
        let cols = parties.len();
        let mut columns = vec![Vec::with_capacity(rows.len()); cols];
        for row in rows {
            if row.len() != cols {
                return Err(Error::DimensionMismatch {
                    context: "label matrix row",
                    expected: cols,
                    found: row.len(),
                });
            }
            for (k, &l) in row.iter().enumerate() {
                columns[k].push(l);
            }
        }
        Self::from_columns(parties, columns)
    }

    pub fn parties(&self) -> &[PartyId] {
        &self.parties
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn row(&self, r: usize) -> &[usize] {
        let n = self.parties.len();
        &self.labels[r * n..(r + 1) * n]
    }

    pub fn column(&self, party: PartyId) -> Option<Vec<usize>> {
        let k = self.parties.iter().position(|&p| p == party)?;
        Some((0..self.rows).map(|r| self.row(r)[k]).collect())
    }
}

/// Most frequent label per row; ties go to the smallest label.
pub fn majority_vote(matrix: &LabelMatrix) -> Vec<usize> {
    (0..matrix.rows())
        .map(|r| {
            let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
            for &l in matrix.row(r) {
                *counts.entry(l).or_default() += 1;
            }
            // BTreeMap iterates labels ascending; keep the first maximum.
            let mut best = (0, 0);
            for (label, count) in counts {
                if count > best.1 {
                    best = (label, count);
                }
            }
            best.0
        })
        .collect()
}

/// Raw initial credibility `m_j / u` for every column except `owner`'s.
pub fn init_credibility<T: Scalar>(matrix: &LabelMatrix, owner: PartyId) -> BTreeMap<PartyId, T> {
    let majority = majority_vote(matrix);
    let u = matrix.rows();
    matrix
        .parties()
        .iter()
        .enumerate()
        .filter(|(_, &p)| p != owner)
        .map(|(k, &p)| {
            let matches = majority
                .iter()
                .enumerate()
                .filter(|(r, &m)| matrix.row(*r)[k] == m)
                .count();
            let value = if u == 0 {
                T::zero()
            } else {
                T::from_count(matches) / T::from_count(u)
            };
            (p, value)
        })
        .collect()
}

/// One party's private view of its peers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CredibilityList<T> {
    owner: PartyId,
    values: BTreeMap<PartyId, T>,
    threshold: T,
}

impl<T: Scalar> CredibilityList<T> {
    pub fn owner(&self) -> PartyId {
        self.owner
    }

    pub fn threshold(&self) -> T {
        self.threshold
    }

    pub fn get(&self, peer: PartyId) -> Option<T> {
        self.values.get(&peer).copied()
    }

    pub fn values(&self) -> &BTreeMap<PartyId, T> {
        &self.values
    }

    pub fn peers(&self) -> impl Iterator<Item = PartyId> + '_ {
        self.values.keys().copied()
    }

    pub fn sum(&self) -> T {
        self.values.values().copied().sum()
    }

    /// Drops banned peers and renormalizes the rest. Returns the new reports.
    pub fn retain_and_renormalize(&mut self, credible: &CredibleSet) -> Vec<PartyId> {
        let raw: BTreeMap<PartyId, T> = self
            .values
            .iter()
            .filter(|(p, _)| credible.contains(**p))
            .map(|(&p, &v)| (p, v))
            .collect();
        let (list, reports) = normalize_and_screen(self.owner, &raw, self.threshold);
        *self = list;
        reports
    }

    /// Replaces the values with `raw`, normalizes and screens.
    pub fn replace_and_renormalize(&mut self, raw: BTreeMap<PartyId, T>) -> Vec<PartyId> {
        let (list, reports) = normalize_and_screen(self.owner, &raw, self.threshold);
        *self = list;
        reports
    }
}

/// Divides raw credibilities by their sum and reports every peer whose
/// normalized value falls below `threshold`. An all-zero map reports every
/// peer and leaves the owner with an empty list.
pub fn normalize_and_screen<T: Scalar>(
    owner: PartyId,
    raw: &BTreeMap<PartyId, T>,
    threshold: T,
) -> (CredibilityList<T>, Vec<PartyId>) {
    let total: T = raw
        .iter()
        .filter(|(&p, _)| p != owner)
        .map(|(_, &v)| v)
        .sum();
    if !(total > T::zero()) {
        let reports = raw.keys().copied().filter(|&p| p != owner).collect();
        return (
            CredibilityList {
                owner,
                values: BTreeMap::new(),
                threshold,
            },
            reports,
        );
    }
    let values: BTreeMap<PartyId, T> = raw
        .iter()
        .filter(|(&p, _)| p != owner)
        .map(|(&p, &v)| (p, v / total))
        .collect();
    let reports = values
        .iter()
        .filter(|(_, &v)| v < threshold)
        .map(|(&p, _)| p)
        .collect();
    (
        CredibilityList {
            owner,
            values,
            threshold,
        },
        reports,
    )
}

/// Parties still trusted by the majority.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CredibleSet(BTreeSet<PartyId>);

impl CredibleSet {
    pub fn new(parties: impl IntoIterator<Item = PartyId>) -> Self {
        Self(parties.into_iter().collect())
    }

    pub fn contains(&self, p: PartyId) -> bool {
        self.0.contains(&p)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = PartyId> + '_ {
        self.0.iter().copied()
    }

    pub fn others(&self, me: PartyId) -> impl Iterator<Item = PartyId> + '_ {
        self.0.iter().copied().filter(move |&p| p != me)
    }
}

/// Outcome of one consensus pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exclusion {
    pub credible: CredibleSet,
    pub removed: Vec<PartyId>,
}

/// Removes every credible party reported by strictly more than half of the
/// credible parties. Reports from or about non-credible parties are ignored.
pub fn consensus_exclude(
    reports: &BTreeMap<PartyId, Vec<PartyId>>,
    credible: &CredibleSet,
) -> Result<Exclusion> {
    let mut tally: BTreeMap<PartyId, BTreeSet<PartyId>> = BTreeMap::new();
    for (&reporter, targets) in reports {
        if !credible.contains(reporter) {
            continue;
        }
        for &t in targets {
            if credible.contains(t) && t != reporter {
                tally.entry(t).or_default().insert(reporter);
            }
        }
    }
    let removed: Vec<PartyId> = tally
        .into_iter()
        .filter(|(_, who)| 2 * who.len() > credible.len())
        .map(|(t, _)| t)
        .collect();
    if removed.len() >= credible.len() {
        return Err(Error::EmptyCredibleSet);
    }
    let remaining = CredibleSet::new(credible.iter().filter(|p| !removed.contains(p)));
    Ok(Exclusion {
        credible: remaining,
        removed,
    })
}

/// Seller-side cap `floor(lambda_j * |grad|)`.
pub fn upload_capacity(sharing_level: f64, grad_len: usize) -> u64 {
    floor_count(sharing_level * grad_len as f64)
}

/// `floor(min(c * d_i, lambda_j * |grad_j|))`.
pub fn download_allocation<T: Scalar>(
    credibility: T,
    download_budget: u64,
    seller_sharing_level: f64,
    grad_len: usize,
) -> u64 {
    let wanted = credibility.as_f64().max(0.0) * download_budget as f64;
    let offered = seller_sharing_level * grad_len as f64;
    floor_count(wanted.min(offered))
}

/// Fills the gap between the download budget and the credibility-driven
/// downloads. The gap is split over peers with spare capacity in proportion
/// to credibility; a peer whose share exceeds its spare capacity is capped
/// and the excess is redistributed among the rest. Fractional shares are
/// floored and leftover units go to the largest remainders (ties: lower id).
/// Peers with zero credibility receive nothing.
pub fn supplement<T: Scalar>(
    download_budget: u64,
    received: &BTreeMap<PartyId, u64>,
    capacities: &BTreeMap<PartyId, u64>,
    credibilities: &BTreeMap<PartyId, T>,
) -> BTreeMap<PartyId, u64> {
    let got: u64 = received.values().sum();
    let gap = download_budget.saturating_sub(got);
    let mut extra = BTreeMap::new();
    if gap == 0 {
        return extra;
    }
    let spare: Vec<(PartyId, u64, f64)> = capacities
        .iter()
        .filter_map(|(&p, &cap)| {
            let r = cap.saturating_sub(received.get(&p).copied().unwrap_or(0));
            let c = credibilities.get(&p).map_or(0.0, |c| c.as_f64());
            (r > 0 && c > 0.0).then_some((p, r, c))
        })
        .collect();
    let total_spare: u64 = spare.iter().map(|s| s.1).sum();
    let target = gap.min(total_spare);
    if target == 0 {
        return extra;
    }

    // Continuous water-filling.
    let mut share = vec![0.0f64; spare.len()];
    let mut capped = vec![false; spare.len()];
    let mut remaining = target as f64;
    loop {
        let weight: f64 = spare
            .iter()
            .zip(&capped)
            .filter(|(_, &c)| !c)
            .map(|(s, _)| s.2)
            .sum();
        if weight <= 0.0 {
            break;
        }
        let mut newly_capped = false;
        for (k, s) in spare.iter().enumerate() {
            if !capped[k] && remaining * s.2 / weight >= s.1 as f64 {
                capped[k] = true;
                share[k] = s.1 as f64;
                remaining -= s.1 as f64;
                newly_capped = true;
            }
        }
        if !newly_capped {
            for (k, s) in spare.iter().enumerate() {
                if !capped[k] {
                    share[k] = remaining * s.2 / weight;
                }
            }
            break;
        }
    }

    // Integer rounding by largest remainder.
    let mut units: Vec<u64> = share
        .iter()
        .zip(&spare)
        .map(|(&x, s)| (x.floor() as u64).min(s.1))
        .collect();
    let mut leftover = target - units.iter().sum::<u64>().min(target);
    // Remainders are compared at a fixed resolution so that equal fractions
    // of shares with different integer parts still tie.
    let remainder = |k: usize| ((share[k] - share[k].floor()) * 1e9).round() as u64;
    let mut order: Vec<usize> = (0..spare.len()).collect();
    order.sort_by(|&a, &b| remainder(b).cmp(&remainder(a)).then(spare[a].0.cmp(&spare[b].0)));
    while leftover > 0 {
        let mut progressed = false;
        for &k in &order {
            if leftover == 0 {
                break;
            }
            if units[k] < spare[k].1 {
                units[k] += 1;
                leftover -= 1;
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
    }
    for (k, s) in spare.iter().enumerate() {
        if units[k] > 0 {
            extra.insert(s.0, units[k]);
        }
    }
    extra
}

/// `1 / (1 + exp(-15 (x - 0.5)))`.
pub fn credibility_sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-T::lit(SIGMOID_SLOPE) * (x - T::lit(0.5))).exp())
}

/// `acc / (acc + acc_j)`, or the neutral 0.5 when both accuracies are zero.
pub fn accuracy_factor<T: Scalar>(acc: T, acc_without: T) -> T {
    let denom = acc + acc_without;
    if denom > T::zero() {
        acc / denom
    } else {
        T::lit(0.5)
    }
}

/// Averages the previous credibility with the sigmoid of the leave-one-out
/// accuracy factor. The result is not normalized.
pub fn credibility_update<T: Scalar>(previous: T, acc: T, acc_without: T) -> T {
    (previous + credibility_sigmoid(accuracy_factor(acc, acc_without))) / T::lit(2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenAccount {
    pub party: PartyId,
    pub balance: u64,
}

impl TokenAccount {
    pub fn new(party: PartyId, balance: u64) -> Self {
        Self { party, balance }
    }
}

/// Moves `amount` tokens from buyer to seller, or refuses without change.
pub fn settle_tokens(buyer: &mut TokenAccount, seller: &mut TokenAccount, amount: u64) -> Result<()> {
    if buyer.balance < amount {
        return Err(Error::InsufficientTokens {
            balance: buyer.balance,
            requested: amount,
        });
    }
    buyer.balance -= amount;
    seller.balance += amount;
    Ok(())
}
