use fairdl_core::adversary::AdversaryConfig;
use fairdl_core::credibility::TokenAccount;
use fairdl_core::privacy::PrivacyAccountant;
use fairdl_core::{CredibilityList64, Dataset64, DenseGradient64, MlpModel64, PartyId};
use fairdl_ledger::KeyPair;

/// One participant's private state.
#[derive(Debug)]
pub struct Party {
    pub id: PartyId,
    pub train: Dataset64,
    pub validation: Dataset64,
    /// Replicated training records used for DP-SGD and sample release.
    pub augmented: Dataset64,
    /// Nominal local data size; the release size derives from it.
    pub size: usize,
    pub sharing_level: f64,
    pub model: MlpModel64,
    pub standalone_accuracy: f64,
    pub credibility: Option<CredibilityList64>,
    /// Mirror of the ledger balance, moved only through settlements.
    pub tokens: TokenAccount,
    pub release_accountant: PrivacyAccountant,
    pub update_accountant: PrivacyAccountant,
    pub keys: KeyPair,
    pub adversary: Option<AdversaryConfig>,
    /// Training steps taken so far; indexes the learning rate schedule.
    pub step: u64,
    /// Sum of the updates received last round.
    pub last_received: Option<DenseGradient64>,
}

impl Party {
    pub fn is_free_rider(&self) -> bool {
        self.adversary.as_ref().is_some_and(|a| a.kind.is_free_rider())
    }
}
