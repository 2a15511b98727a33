//! Run configuration, read from and written to TOML.

use std::fmt;
use std::path::{Path, PathBuf};

use fairdl_core::adversary::{AdversaryConfig, AdversaryKind};
use fairdl_core::privacy::{allocate_budgets, Budget, Composition, Stage};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameworkKind {
    Standalone,
    Centralised,
    #[serde(rename = "distributed_dssgd")]
    Distributed,
    Fdpddl,
}

impl FrameworkKind {
    pub const ALL: [FrameworkKind; 4] = [
        FrameworkKind::Standalone,
        FrameworkKind::Centralised,
        FrameworkKind::Distributed,
        FrameworkKind::Fdpddl,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FrameworkKind::Standalone => "standalone",
            FrameworkKind::Centralised => "centralised",
            FrameworkKind::Distributed => "distributed_dssgd",
            FrameworkKind::Fdpddl => "fdpddl",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl fmt::Display for FrameworkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Blobs {
        num_classes: usize,
        dim: usize,
        cluster_std: f64,
        center_spread: f64,
    },
    /// Header row, numeric features, integer label in the last column.
    Csv { path: PathBuf },
    Idx {
        images: PathBuf,
        labels: PathBuf,
        num_classes: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Name used for budget defaults (`svhn` tightens delta).
    #[serde(default = "default_dataset_name")]
    pub name: String,
    pub source: DataSource,
    /// Examples per party before the validation split (settings 1 and 2;
    /// the mean size in setting 3).
    pub party_size: usize,
    pub test_size: usize,
    /// Concentration of the symmetric Dirichlet used for setting 3 sizes.
    #[serde(default = "default_dirichlet")]
    pub dirichlet_alpha: f64,
    #[serde(default = "default_min_party_size")]
    pub min_party_size: usize,
    #[serde(default = "default_validation_fraction")]
    pub validation_fraction: f64,
}

fn default_dataset_name() -> String {
    "blobs".into()
}
fn default_dirichlet() -> f64 {
    1.0
}
fn default_min_party_size() -> usize {
    20
}
fn default_validation_fraction() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub decay: f64,
    pub batch_size: usize,
    pub pretrain_epochs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrivacyConfig {
    pub composition: Composition,
    /// Defaults to the stage allocation for the dataset name.
    #[serde(default)]
    pub init_budget: Option<Budget>,
    #[serde(default)]
    pub update_budget: Option<Budget>,
    pub epsilon_per_step: f64,
    pub delta_per_step: f64,
    pub clip_norm: f64,
    /// Replication factor of local records before DP-SGD and sample release.
    pub augment_replication: usize,
    /// Defaults to `ceil(sqrt(N))` of the augmented set.
    #[serde(default)]
    pub lot_size: Option<usize>,
    /// Defaults to one epoch of lots.
    #[serde(default)]
    pub steps_per_round: Option<usize>,
    #[serde(default = "default_jitter")]
    pub release_jitter: f64,
}

fn default_jitter() -> f64 {
    0.05
}

impl PrivacyConfig {
    pub fn init_budget(&self, dataset: &str) -> Budget {
        self.init_budget
            .unwrap_or_else(|| allocate_budgets(Stage::Initialisation, dataset))
    }

    pub fn update_budget(&self, dataset: &str) -> Budget {
        self.update_budget
            .unwrap_or_else(|| allocate_budgets(Stage::Update, dataset))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    /// Sharing level of every party in settings 1 and 3.
    pub sharing_level: f64,
    /// Range setting 2 draws sharing levels from.
    pub sharing_range: [f64; 2],
    /// Report threshold; defaults to `(1 / n) * (2 / 3)`.
    #[serde(default)]
    pub threshold: Option<f64>,
    /// Share of the peers' total upload capacity a party tries to buy each
    /// round, before the token balance caps it.
    #[serde(default = "default_download_fraction")]
    pub download_fraction: f64,
    /// Tokens kept back when sizing the download budget.
    #[serde(default = "default_reserve")]
    pub reserve: u64,
    #[serde(default = "default_fine")]
    pub fine_per_gradient: u64,
    /// Response time limit in seconds; parties slower than this are ignored for the round.
    #[serde(default)]
    pub timeout: Option<f64>,
    #[serde(default = "default_max_parties")]
    pub max_parties: usize,
}

fn default_download_fraction() -> f64 {
    1.0
}
fn default_reserve() -> u64 {
    1
}
fn default_fine() -> u64 {
    1
}
fn default_max_parties() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributedConfig {
    pub upload_rate: f64,
    pub download_rate: f64,
    pub local_epochs: usize,
}

impl Default for DistributedConfig {
    fn default() -> Self {
        Self {
            upload_rate: 0.1,
            download_rate: 1.0,
            local_epochs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub name: String,
    pub parties: usize,
    pub setting: u8,
    pub rounds: usize,
    pub seeds: Vec<u64>,
    pub frameworks: Vec<FrameworkKind>,
    /// Run independent cells on the thread pool.
    #[serde(default)]
    pub parallel: bool,
    pub data: DataConfig,
    pub model: ModelConfig,
    pub privacy: PrivacyConfig,
    pub protocol: ProtocolConfig,
    #[serde(default)]
    pub distributed: DistributedConfig,
    #[serde(default)]
    pub adversaries: Vec<AdversaryConfig>,
}

impl Config {
    /// Synthetic-blob defaults sized for quick runs.
    pub fn desk(setting: u8, parties: usize) -> Self {
        Self {
            name: format!("desk-s{setting}-n{parties}"),
            parties,
            setting,
            rounds: 20,
            seeds: vec![1, 2, 3, 4, 5],
            frameworks: FrameworkKind::ALL.to_vec(),
            parallel: true,
            data: DataConfig {
                name: default_dataset_name(),
                source: DataSource::Blobs {
                    num_classes: 10,
                    dim: 32,
                    cluster_std: 0.2,
                    center_spread: 0.2,
                },
                party_size: 250,
                test_size: 2000,
                dirichlet_alpha: 0.5,
                min_party_size: default_min_party_size(),
                validation_fraction: default_validation_fraction(),
            },
            model: ModelConfig {
                hidden: vec![32],
                learning_rate: 0.1,
                decay: 1e-7,
                batch_size: 4,
                pretrain_epochs: 10,
            },
            privacy: PrivacyConfig {
                composition: Composition::AmplifiedBasic,
                init_budget: None,
                update_budget: None,
                epsilon_per_step: 1.0,
                delta_per_step: 1e-6,
                clip_norm: 1.0,
                augment_replication: 100,
                lot_size: None,
                steps_per_round: Some(10),
                release_jitter: default_jitter(),
            },
            protocol: ProtocolConfig {
                sharing_level: 0.1,
                sharing_range: [0.1, 0.5],
                threshold: None,
                download_fraction: default_download_fraction(),
                reserve: default_reserve(),
                fine_per_gradient: default_fine(),
                timeout: None,
                max_parties: default_max_parties(),
            },
            distributed: DistributedConfig::default(),
            adversaries: Vec::new(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| SimError::Config(vec![e.to_string()]))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::Config(vec![format!("{}: {e}", path.display())]))?;
        Self::from_toml(&text)
    }

    /// Every problem with the configuration, not only the first.
    pub fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        if self.parties < 2 {
            p.push(format!("parties must be at least 2, got {}", self.parties));
        }
        if self.parties > self.protocol.max_parties {
            p.push(format!(
                "parties {} exceeds max_parties {}",
                self.parties, self.protocol.max_parties
            ));
        }
        if !(1..=3).contains(&self.setting) {
            p.push(format!("setting must be 1, 2 or 3, got {}", self.setting));
        }
        if self.seeds.is_empty() {
            p.push("at least one seed is required".into());
        }
        if self.frameworks.is_empty() {
            p.push("at least one framework is required".into());
        }
        let d = &self.data;
        if d.party_size < 5 {
            p.push(format!("party_size must be at least 5, got {}", d.party_size));
        }
        if d.test_size == 0 {
            p.push("test_size must be positive".into());
        }
        if !(d.dirichlet_alpha > 0.0) {
            p.push("dirichlet_alpha must be positive".into());
        }
        if !(d.validation_fraction > 0.0 && d.validation_fraction < 1.0) {
            p.push("validation_fraction must be in (0, 1)".into());
        }
        if d.min_party_size < 5 || d.min_party_size.saturating_mul(self.parties) > d.party_size.saturating_mul(self.parties) {
            p.push("min_party_size must be at least 5 and at most party_size".into());
        }
        if let DataSource::Blobs {
            num_classes, dim, cluster_std, ..
        } = &d.source
        {
            if *num_classes < 2 || *dim == 0 {
                p.push("blobs need at least 2 classes and 1 dimension".into());
            }
            if !(*cluster_std >= 0.0) {
                p.push("cluster_std must be nonnegative".into());
            }
        }
        let m = &self.model;
        if m.hidden.iter().any(|&h| h == 0) {
            p.push("hidden layer widths must be positive".into());
        }
        if !(m.learning_rate > 0.0) || !(m.decay >= 0.0) {
            p.push("learning_rate must be positive and decay nonnegative".into());
        }
        if m.batch_size == 0 {
            p.push("batch_size must be positive".into());
        }
        let pr = &self.privacy;
        if !(pr.epsilon_per_step > 0.0 && pr.epsilon_per_step <= 1.0) {
            p.push(format!("epsilon_per_step must be in (0, 1], got {}", pr.epsilon_per_step));
        }
        if !(pr.delta_per_step > 0.0 && pr.delta_per_step < 1.0) {
            p.push("delta_per_step must be in (0, 1)".into());
        }
        if !(pr.clip_norm > 0.0) {
            p.push("clip_norm must be positive".into());
        }
        if pr.augment_replication == 0 {
            p.push("augment_replication must be at least 1".into());
        }
        if pr.lot_size == Some(0) || pr.steps_per_round == Some(0) {
            p.push("lot_size and steps_per_round must be positive when set".into());
        }
        for (name, b) in [("init_budget", pr.init_budget), ("update_budget", pr.update_budget)] {
            if let Some(b) = b {
                if !(b.epsilon > 0.0) || !(b.delta > 0.0 && b.delta < 1.0) {
                    p.push(format!("{name} must have epsilon > 0 and delta in (0, 1)"));
                }
            }
        }
        let pc = &self.protocol;
        let in_range = |x: f64| x > 0.0 && x <= 1.0;
        if !in_range(pc.sharing_level) {
            p.push(format!("sharing_level must be in (0, 1], got {}", pc.sharing_level));
        }
        if !(in_range(pc.sharing_range[0]) && in_range(pc.sharing_range[1]) && pc.sharing_range[0] <= pc.sharing_range[1]) {
            p.push("sharing_range must be an ordered pair inside (0, 1]".into());
        }
        if let Some(t) = pc.threshold {
            if !(t >= 0.0 && t < 1.0) {
                p.push("threshold must be in [0, 1)".into());
            }
        }
        if !in_range(pc.download_fraction) {
            p.push("download_fraction must be in (0, 1]".into());
        }
        let dc = &self.distributed;
        if !in_range(dc.upload_rate) || !in_range(dc.download_rate) {
            p.push("distributed upload and download rates must be in (0, 1]".into());
        }
        let mut seen = std::collections::BTreeSet::new();
        for a in &self.adversaries {
            if a.party.index() >= self.parties {
                p.push(format!("adversary {} is not one of the {} parties", a.party, self.parties));
            }
            if !seen.insert(a.party) {
                p.push(format!("adversary {} is listed twice", a.party));
            }
            if let Some(split) = &a.split {
                if a.kind != AdversaryKind::GanAttacker {
                    p.push(format!("class split only applies to gan_attacker ({})", a.party));
                }
                if let Err(e) = split.validate() {
                    p.push(format!("{}: {e}", a.party));
                }
            }
        }
        if self
            .adversaries
            .iter()
            .filter(|a| a.split.is_some())
            .count()
            > 1
        {
            p.push("at most one adversary may use a class split".into());
        }
        if seen.len() >= self.parties {
            p.push("at least one party must be honest".into());
        }
        p
    }

    pub fn validate(&self) -> Result<()> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(SimError::Config(problems))
        }
    }

    pub fn adversary(&self, party: usize) -> Option<&AdversaryConfig> {
        self.adversaries.iter().find(|a| a.party.index() == party)
    }
}
