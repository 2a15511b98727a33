//! Malicious party behaviours and detection bookkeeping.
//!
//! Free-riders contribute nothing useful: random labels when asked to label
//! peers' releases, random or echoed gradients during updates. The GAN
//! attacker is modelled by its footprint only: it owns classes disjoint from
//! its victims, so its standalone model cannot label their releases.

use std::collections::BTreeSet;
use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::PartyId;
use crate::numerics::{Dataset, DenseGradient};
use crate::samplegen::SampleRelease;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversaryKind {
    FreeRiderRandomLabel,
    FreeRiderRandomGrad,
    FreeRiderCraftedGrad,
    GanAttacker,
}

impl AdversaryKind {
    pub fn is_free_rider(self) -> bool {
        !matches!(self, AdversaryKind::GanAttacker)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AdversaryKind::FreeRiderRandomLabel => "free_rider_random_label",
            AdversaryKind::FreeRiderRandomGrad => "free_rider_random_grad",
            AdversaryKind::FreeRiderCraftedGrad => "free_rider_crafted_grad",
            AdversaryKind::GanAttacker => "gan_attacker",
        }
    }
}

impl fmt::Display for AdversaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Classes owned by victims and by the attacker.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassSplit {
    pub victim_classes: Vec<usize>,
    pub adversary_classes: Vec<usize>,
}

impl ClassSplit {
    /// Lower half of the classes to victims, upper half to the attacker.
    pub fn halves(num_classes: usize) -> Self {
        let mid = num_classes / 2;
        Self {
            victim_classes: (0..mid).collect(),
            adversary_classes: (mid..num_classes).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.victim_classes.is_empty() {
            return Err(Error::invalid("victim class set is empty"));
        }
        if self.adversary_classes.is_empty() {
            return Err(Error::invalid("adversary class set is empty"));
        }
        let victims: BTreeSet<_> = self.victim_classes.iter().collect();
        if self.adversary_classes.iter().any(|c| victims.contains(c)) {
            return Err(Error::invalid("victim and adversary classes overlap"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversaryConfig {
    pub party: PartyId,
    pub kind: AdversaryKind,
    #[serde(default)]
    pub split: Option<ClassSplit>,
    #[serde(default)]
    pub seed: u64,
    /// Std of random gradients, or of the noise added to an echo.
    #[serde(default = "default_gradient_scale")]
    pub gradient_scale: f64,
    /// Simulated response latency in seconds; checked against a timeout.
    #[serde(default)]
    pub latency: Option<f64>,
}

fn default_gradient_scale() -> f64 {
    0.01
}

impl AdversaryConfig {
    pub fn new(party: PartyId, kind: AdversaryKind) -> Self {
        Self {
            party,
            kind,
            split: None,
            seed: 0,
            gradient_scale: default_gradient_scale(),
            latency: None,
        }
    }
}

/// Whether a party's response time exceeds the timeout.
pub fn exceeds_timeout(latency: Option<f64>, timeout: Option<f64>) -> bool {
    matches!((latency, timeout), (Some(l), Some(t)) if l > t)
}

/// One uniformly random class per released sample.
pub fn freerider_label<T: Scalar, R: Rng + ?Sized>(
    release: &SampleRelease<T>,
    num_classes: usize,
    rng: &mut R,
) -> Vec<usize> {
    (0..release.count())
        .map(|_| if num_classes <= 1 { 0 } else { rng.gen_range(0..num_classes) })
        .collect()
}

/// A meaningless update. The random kinds draw `N(0, scale^2)` per
/// coordinate; the crafted kind re-emits `echo` (the last aggregate the party
/// received) with the same noise added.
pub fn freerider_gradients<T: Scalar, R: Rng + ?Sized>(
    kind: AdversaryKind,
    param_count: usize,
    scale: f64,
    echo: Option<&DenseGradient<T>>,
    rng: &mut R,
) -> Result<DenseGradient<T>> {
    let mut g = match (kind, echo) {
        (AdversaryKind::FreeRiderCraftedGrad, Some(e)) => {
            if e.len() != param_count {
                return Err(Error::DimensionMismatch {
                    context: "echo gradient",
                    expected: param_count,
                    found: e.len(),
                });
            }
            e.clone()
        }
        _ => DenseGradient::zeros(param_count),
    };
    if scale > 0.0 {
        for v in g.as_mut_slice() {
            let z: f64 = StandardNormal.sample(rng);
            *v += T::lit(scale * z);
        }
    }
    Ok(g)
}

/// Splits `full` so that `victims` parties share the victim classes
/// round-robin and the attacker gets every example of its own classes.
pub fn gan_attacker_setup<T: Scalar, R: Rng + ?Sized>(
    full: &Dataset<T>,
    split: &ClassSplit,
    victims: usize,
    rng: &mut R,
) -> Result<(Dataset<T>, Vec<Dataset<T>>)> {
    split.validate()?;
    if victims == 0 {
        return Err(Error::invalid("need at least one victim party"));
    }
    let adversary = full.filter_classes(&split.adversary_classes).shuffled(rng);
    let pool = full.filter_classes(&split.victim_classes).shuffled(rng);
    let parts = (0..victims)
        .map(|v| {
            let idx: Vec<usize> = (v..pool.len()).step_by(victims).collect();
            pool.subset(&idx)
        })
        .collect();
    Ok((adversary, parts))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionStage {
    Init,
    Update,
    Never,
}

impl fmt::Display for DetectionStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DetectionStage::Init => "init",
            DetectionStage::Update => "update",
            DetectionStage::Never => "never",
        })
    }
}

/// Trace events relevant to detection. Round 0 is the initialisation stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum RunEvent {
    Excluded { party: PartyId, round: u32 },
    TokensExhausted { party: PartyId, round: u32 },
    TimedOut { party: PartyId, round: u32 },
}

impl RunEvent {
    pub fn party(&self) -> PartyId {
        match *self {
            RunEvent::Excluded { party, .. }
            | RunEvent::TokensExhausted { party, .. }
            | RunEvent::TimedOut { party, .. } => party,
        }
    }

    pub fn round(&self) -> u32 {
        match *self {
            RunEvent::Excluded { round, .. }
            | RunEvent::TokensExhausted { round, .. }
            | RunEvent::TimedOut { round, .. } => round,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Detection {
    pub party: PartyId,
    pub kind: AdversaryKind,
    pub detected: bool,
    pub stage: DetectionStage,
    pub round: Option<u32>,
}

impl Detection {
    /// `party,kind,detected,stage,round` with an empty round when undetected.
    pub fn to_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.party,
            self.kind,
            self.detected,
            self.stage,
            self.round.map(|r| r.to_string()).unwrap_or_default()
        )
    }
}

pub const DETECTION_HEADER: &str = "party,kind,detected,stage,round";

/// Earliest exclusion, token drain or timeout per adversary.
pub fn detection_report(adversaries: &[AdversaryConfig], events: &[RunEvent]) -> Vec<Detection> {
    adversaries
        .iter()
        .map(|a| {
            let first = events
                .iter()
                .filter(|e| e.party() == a.party)
                .min_by_key(|e| e.round());
            match first {
                Some(e) => Detection {
                    party: a.party,
                    kind: a.kind,
                    detected: true,
                    stage: if e.round() == 0 {
                        DetectionStage::Init
                    } else {
                        DetectionStage::Update
                    },
                    round: Some(e.round()),
                },
                None => Detection {
                    party: a.party,
                    kind: a.kind,
                    detected: false,
                    stage: DetectionStage::Never,
                    round: None,
                },
            }
        })
        .collect()
}
