//! Serializable record of a run; every table is derived from it.

use fairdl_core::adversary::{AdversaryConfig, Detection, RunEvent};
use serde::{Deserialize, Serialize};

use crate::config::FrameworkKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u32,
    /// Test accuracy per party after the round.
    pub accuracy: Vec<f64>,
    /// Token balances after the round; empty outside the ledger framework.
    #[serde(default)]
    pub tokens: Vec<u64>,
    #[serde(default)]
    pub credible: Vec<bool>,
    /// Row `i` is party `i`'s normalized view of its peers.
    #[serde(default)]
    pub credibility: Vec<Vec<Option<f64>>>,
    /// Gradients each party downloaded this round.
    #[serde(default)]
    pub downloads: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellTrace {
    pub framework: FrameworkKind,
    pub setting: u8,
    pub seed: u64,
    pub parties: usize,
    pub sizes: Vec<usize>,
    pub sharing_levels: Vec<f64>,
    /// Test accuracy of each pretrained standalone model.
    pub standalone_accuracy: Vec<f64>,
    pub rounds: Vec<RoundRecord>,
    pub final_accuracy: Vec<f64>,
    #[serde(default)]
    pub events: Vec<RunEvent>,
    #[serde(default)]
    pub adversaries: Vec<AdversaryConfig>,
    #[serde(default)]
    pub detections: Vec<Detection>,
}

impl CellTrace {
    /// Parties not configured as adversaries.
    pub fn honest(&self) -> Vec<usize> {
        (0..self.parties)
            .filter(|&i| !self.adversaries.iter().any(|a| a.party.index() == i))
            .collect()
    }

    pub fn label(&self) -> String {
        format!("{}_s{}_n{}_seed{}", self.framework, self.setting, self.parties, self.seed)
    }
}
