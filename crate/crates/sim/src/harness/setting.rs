//! The three experimental settings and the per-party data they imply.

use fairdl_core::adversary::{gan_attacker_setup, AdversaryKind};
use fairdl_core::numerics::{load_csv, load_idx, BlobSpec, GaussianBlobs};
use fairdl_core::{Dataset64, PartyId};
use rand::Rng;
use rand_distr::{Dirichlet, Distribution};
use serde::{Deserialize, Serialize};

use crate::config::{Config, DataSource};
use crate::error::{Result, SimError};
use crate::rng::{stream, Purpose};

/// Sizes and sharing levels of one setting draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingSpec {
    pub setting: u8,
    pub sizes: Vec<usize>,
    pub sharing_levels: Vec<f64>,
}

impl SettingSpec {
    pub fn n(&self) -> usize {
        self.sizes.len()
    }
}

/// Setting 1: equal sizes, equal sharing. Setting 2: equal sizes, sharing
/// drawn uniformly from the configured range. Setting 3: Dirichlet sizes,
/// equal sharing.
pub fn build_setting(cfg: &Config, seed: u64) -> Result<SettingSpec> {
    let n = cfg.parties;
    let base = cfg.data.party_size;
    let mut rng = stream(seed, Purpose::Sharing, 0, 0);
    let sharing_levels = match cfg.setting {
        2 => {
            let [lo, hi] = cfg.protocol.sharing_range;
            (0..n)
                .map(|_| if hi > lo { rng.gen_range(lo..=hi) } else { lo })
                .collect()
        }
        _ => vec![cfg.protocol.sharing_level; n],
    };
    let sizes = match cfg.setting {
        3 => {
            let min = cfg.data.min_party_size;
            let spare = (base * n).saturating_sub(min * n) as f64;
            let shares = Dirichlet::new_with_size(cfg.data.dirichlet_alpha, n)
                .map_err(|e| SimError::Config(vec![format!("dirichlet: {e}")]))?
                .sample(&mut rng);
            shares
                .iter()
                .map(|p| min + (p * spare).floor() as usize)
                .collect()
        }
        _ => vec![base; n],
    };
    Ok(SettingSpec {
        setting: cfg.setting,
        sizes,
        sharing_levels,
    })
}

/// Local data of every party plus the shared test set.
#[derive(Debug, Clone)]
pub struct Partition {
    pub spec: SettingSpec,
    pub train: Vec<Dataset64>,
    pub validation: Vec<Dataset64>,
    pub test: Dataset64,
    pub num_classes: usize,
    pub dim: usize,
}

fn source_pool(cfg: &Config, seed: u64, needed: usize) -> Result<(Dataset64, Dataset64)> {
    let mut rng = stream(seed, Purpose::Data, 0, 0);
    match &cfg.data.source {
        DataSource::Blobs {
            num_classes,
            dim,
            cluster_std,
            center_spread,
        } => {
            let blobs = GaussianBlobs::new(
                BlobSpec {
                    num_classes: *num_classes,
                    dim: *dim,
                    cluster_std: *cluster_std,
                    center_spread: *center_spread,
                },
                &mut rng,
            )?;
            let test = blobs.sample(cfg.data.test_size, &mut rng);
            let pool = blobs.sample(needed, &mut rng);
            Ok((pool, test))
        }
        DataSource::Csv { path } => split_loaded(load_csv(path)?, cfg.data.test_size, &mut rng),
        DataSource::Idx {
            images,
            labels,
            num_classes,
        } => split_loaded(load_idx(images, labels, *num_classes)?, cfg.data.test_size, &mut rng),
    }
}

fn split_loaded<R: Rng>(full: Dataset64, test_size: usize, rng: &mut R) -> Result<(Dataset64, Dataset64)> {
    let full = full.min_max_normalized().shuffled(rng);
    if full.len() <= test_size {
        return Err(SimError::Config(vec![format!(
            "dataset has {} rows, not enough for a test set of {test_size}",
            full.len()
        )]));
    }
    let idx: Vec<usize> = (0..full.len()).collect();
    let (test_idx, pool_idx) = idx.split_at(test_size);
    Ok((full.subset(pool_idx), full.subset(test_idx)))
}

fn take(data: &Dataset64, size: usize, who: PartyId) -> Result<Dataset64> {
    if data.len() < size {
        return Err(SimError::Config(vec![format!(
            "not enough data for {who}: need {size}, have {}",
            data.len()
        )]));
    }
    Ok(data.subset(&(0..size).collect::<Vec<_>>()))
}

/// Draws the setting and hands every party its local data. Free-riders get
/// none. With a class-split attacker, victims share the victim classes and
/// the attacker gets its own classes.
pub fn build_partition(cfg: &Config, seed: u64) -> Result<Partition> {
    let spec = build_setting(cfg, seed)?;
    let n = spec.n();
    let split = cfg
        .adversaries
        .iter()
        .find_map(|a| a.split.clone().map(|s| (a.party, s)));
    let total: usize = spec.sizes.iter().sum();
    let needed = match &split {
        // Room for the smaller side of the class split.
        Some((_, s)) => {
            let k = s.victim_classes.len().min(s.adversary_classes.len()).max(1);
            let classes = s.victim_classes.len() + s.adversary_classes.len();
            total * classes.div_ceil(k) + total / 2
        }
        None => total,
    };
    let (pool, test) = source_pool(cfg, seed, needed)?;
    let num_classes = pool.num_classes();
    let dim = pool.dim();

    let mut locals: Vec<Dataset64> = Vec::with_capacity(n);
    match &split {
        Some((attacker, s)) => {
            let victims = n - 1;
            let mut rng = stream(seed, Purpose::Data, 1, 0);
            let (adv, parts) = gan_attacker_setup(&pool, s, victims, &mut rng)?;
            let mut parts = parts.into_iter();
            for i in 0..n {
                let who = PartyId::from(i);
                if who == *attacker {
                    locals.push(take(&adv, spec.sizes[i], who)?);
                } else {
                    let part = parts.next().expect("one part per victim");
                    locals.push(take(&part, spec.sizes[i], who)?);
                }
            }
        }
        None => {
            if pool.len() < total {
                return Err(SimError::Config(vec![format!(
                    "pool of {} rows cannot cover {total} party rows",
                    pool.len()
                )]));
            }
            let mut start = 0;
            for &size in &spec.sizes {
                locals.push(pool.subset(&(start..start + size).collect::<Vec<_>>()));
                start += size;
            }
        }
    }

    let mut train = Vec::with_capacity(n);
    let mut validation = Vec::with_capacity(n);
    for (i, local) in locals.into_iter().enumerate() {
        let free_rider = cfg
            .adversary(i)
            .is_some_and(|a| a.kind != AdversaryKind::GanAttacker);
        if free_rider {
            train.push(Dataset64::empty(dim, num_classes));
            validation.push(Dataset64::empty(dim, num_classes));
        } else {
            let (t, v) = local.split_tail(cfg.data.validation_fraction);
            train.push(t);
            validation.push(v);
        }
    }
    Ok(Partition {
        spec,
        train,
        validation,
        test,
        num_classes,
        dim,
    })
}
