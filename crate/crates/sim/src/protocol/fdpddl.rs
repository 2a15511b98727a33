//! The two-stage protocol: credibility and token initialisation from labeled
//! sample releases, then synchronous rounds of gradient trading.

use std::collections::{BTreeMap, BTreeSet};

use fairdl_core::adversary::{
    detection_report, exceeds_timeout, freerider_gradients, freerider_label, AdversaryKind, RunEvent,
};
use fairdl_core::credibility::{
    consensus_exclude, credibility_update, default_threshold, download_allocation, init_credibility, init_tokens,
    normalize_and_screen, settle_tokens, supplement, upload_capacity, CredibleSet, LabelMatrix, TokenAccount,
};
use fairdl_core::numerics::{apply_updates, select_largest, sqrt_lot_size, InverseTimeDecay, Matrix, SgdTrainer};
use fairdl_core::privacy::{DpSgd, PrivacyAccountant, PrivacyParams};
use fairdl_core::samplegen::{
    augment, release_size, AugmentConfig, AugmentKind, NoisyPrototypeGenerator, SampleGenerator, SampleRelease,
};
use fairdl_core::{Dataset64, DenseGradient64, Error as CoreError, MlpModel64, PartyId, SparseUpdate64};
use fairdl_ledger::{leader_for, Block, KeyPair, Ledger, PayloadStore};
use rand::Rng;
use rayon::prelude::*;

use super::party::Party;
use super::trace::{CellTrace, RoundRecord};
use crate::config::{Config, DataSource, FrameworkKind};
use crate::error::{Result, SimError};
use crate::harness::setting::Partition;
use crate::rng::{stream, Purpose};

/// Layer sizes: input, configured hidden widths, classes.
pub fn model_dims(cfg: &Config, partition: &Partition) -> Vec<usize> {
    let mut dims = vec![partition.dim];
    dims.extend(&cfg.model.hidden);
    dims.push(partition.num_classes);
    dims
}

/// The common starting point `w0` every party copies.
pub fn initial_model(cfg: &Config, partition: &Partition, seed: u64) -> Result<MlpModel64> {
    Ok(MlpModel64::random(
        &model_dims(cfg, partition),
        &mut stream(seed, Purpose::ModelInit, 0, 0),
    )?)
}

pub fn schedule(cfg: &Config) -> InverseTimeDecay {
    InverseTimeDecay {
        initial: cfg.model.learning_rate,
        decay: cfg.model.decay,
    }
}

/// A party's model after local pretraining.
#[derive(Debug, Clone)]
pub struct Pretrained {
    /// Local training records after augmentation.
    pub augmented: Dataset64,
    pub model: MlpModel64,
    pub steps: u64,
    pub accuracy: f64,
}

/// Trains each party's copy of `w0` on its own data for the configured
/// number of epochs and records its test accuracy. The augmented records
/// used later for DP-SGD are built here too.
pub fn pretrain(cfg: &Config, partition: &Partition, seed: u64, w0: &MlpModel64) -> Result<Vec<Pretrained>> {
    partition
        .train
        .par_iter()
        .enumerate()
        .map(|(i, data)| {
            let mut model = w0.clone();
            let mut trainer = SgdTrainer::new(schedule(cfg), cfg.model.batch_size);
            let augmented = if data.is_empty() {
                data.clone()
            } else {
                augment(data, &augment_config(cfg), &mut stream(seed, Purpose::Release, i as u64, 1))?
            };
            if !data.is_empty() {
                let mut rng = stream(seed, Purpose::Pretrain, i as u64, 0);
                for _ in 0..cfg.model.pretrain_epochs {
                    trainer.epoch(&mut model, data, &mut rng)?;
                }
            }
            let accuracy = model.evaluate(&partition.test)?;
            Ok(Pretrained {
                augmented,
                model,
                steps: trainer.step,
                accuracy,
            })
        })
        .collect()
}

pub fn augment_config(cfg: &Config) -> AugmentConfig {
    let mut a = match cfg.data.source {
        DataSource::Idx { .. } => AugmentConfig::image(),
        _ => AugmentConfig::tabular(cfg.privacy.augment_replication),
    };
    a.replication = cfg.privacy.augment_replication;
    if a.kind == AugmentKind::Image && cfg.privacy.augment_replication == 1 {
        a.rotation_range = 0.0;
        a.shift_range = 0.0;
    }
    a
}

fn pair_mut<T>(v: &mut [T], a: usize, b: usize) -> (&mut T, &mut T) {
    assert_ne!(a, b);
    if a < b {
        let (lo, hi) = v.split_at_mut(b);
        (&mut lo[a], &mut hi[0])
    } else {
        let (lo, hi) = v.split_at_mut(a);
        (&mut hi[0], &mut lo[b])
    }
}

/// Everything a finished run leaves behind.
#[derive(Debug)]
pub struct FdpddlOutcome {
    pub trace: CellTrace,
    pub chain: Vec<Block>,
    pub store: PayloadStore,
}

/// Protocol state shared across rounds.
pub struct Fdpddl<'a> {
    cfg: &'a Config,
    partition: &'a Partition,
    seed: u64,
    pub parties: Vec<Party>,
    pub ledger: Ledger,
    pub credible: CredibleSet,
    pub events: Vec<RunEvent>,
    threshold: f64,
    param_count: usize,
    drained: BTreeSet<PartyId>,
    round: u32,
}

impl<'a> Fdpddl<'a> {
    /// Sets up parties from their pretrained models and writes the genesis
    /// block with the initial token grants.
    pub fn new(cfg: &'a Config, partition: &'a Partition, seed: u64, pretrained: &[Pretrained]) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.parties;
        let param_count = pretrained
            .first()
            .map(|p| p.model.param_count())
            .ok_or_else(|| SimError::Trace("no pretrained models".into()))?;
        let init_budget = cfg.privacy.init_budget(&cfg.data.name);
        let update_budget = cfg.privacy.update_budget(&cfg.data.name);
        let mut parties = Vec::with_capacity(n);
        for i in 0..n {
            let id = PartyId::from(i);
            let train = partition.train[i].clone();
            let augmented = pretrained[i].augmented.clone();
            let sharing_level = partition.spec.sharing_levels[i];
            let tokens = init_tokens(sharing_level, param_count, n)?;
            let keys = KeyPair::generate(&mut stream(seed, Purpose::Keys, i as u64, 0));
            parties.push(Party {
                id,
                train,
                validation: partition.validation[i].clone(),
                augmented,
                size: partition.spec.sizes[i],
                sharing_level,
                model: pretrained[i].model.clone(),
                standalone_accuracy: pretrained[i].accuracy,
                credibility: None,
                tokens: TokenAccount::new(id, tokens),
                release_accountant: PrivacyAccountant::new(init_budget, cfg.privacy.composition),
                update_accountant: PrivacyAccountant::new(update_budget, cfg.privacy.composition),
                keys,
                adversary: cfg.adversary(i).cloned(),
                step: pretrained[i].steps,
                last_received: None,
            });
        }
        let regs: Vec<_> = parties.iter().map(|p| (p.id, &p.keys, p.tokens.balance)).collect();
        let mut ledger = Ledger::create_genesis(&regs)?;
        ledger.set_fine_per_gradient(cfg.protocol.fine_per_gradient);
        let threshold = cfg.protocol.threshold.unwrap_or_else(|| default_threshold::<f64>(n));
        Ok(Self {
            cfg,
            partition,
            seed,
            credible: CredibleSet::new(parties.iter().map(|p| p.id)),
            parties,
            ledger,
            events: Vec::new(),
            threshold,
            param_count,
            drained: BTreeSet::new(),
            round: 0,
        })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn round(&self) -> u32 {
        self.round
    }

    fn release(&mut self, i: usize) -> Result<SampleRelease<f64>> {
        let cfg = self.cfg;
        let p = &mut self.parties[i];
        let mut rng = stream(self.seed, Purpose::Release, i as u64, 0);
        if p.is_free_rider() {
            // No data to learn from: publish uniform noise of the promised size.
            let u = release_size(p.sharing_level, p.size);
            let dim = self.partition.dim;
            let data: Vec<f64> = (0..u * dim).map(|_| rng.gen::<f64>()).collect();
            return Ok(SampleRelease::new(p.id, Matrix::new(u, dim, data)?));
        }
        let generator = NoisyPrototypeGenerator {
            jitter_std: cfg.privacy.release_jitter,
            augment: Some(augment_config(cfg)),
            noise_multiplier: None,
        };
        Ok(generator.generate(p.id, &p.train, p.sharing_level, &mut p.release_accountant, &mut rng)?)
    }

    fn label(&self, labeler: usize, release: &SampleRelease<f64>) -> Result<Vec<usize>> {
        let p = &self.parties[labeler];
        let random = p
            .adversary
            .as_ref()
            .is_some_and(|a| a.kind == AdversaryKind::FreeRiderRandomLabel);
        if random {
            let mut rng = stream(self.seed, Purpose::Labels, labeler as u64, release.party().0 as u64);
            Ok(freerider_label(release, self.partition.num_classes, &mut rng))
        } else {
            Ok(p.model.predict(release.samples())?)
        }
    }

    fn credibility_rows(&self) -> Vec<Vec<Option<f64>>> {
        self.parties
            .iter()
            .map(|p| {
                (0..self.parties.len())
                    .map(|j| p.credibility.as_ref().and_then(|c| c.get(PartyId::from(j))))
                    .collect()
            })
            .collect()
    }

    fn record(&self, downloads: Vec<u64>) -> Result<RoundRecord> {
        let accuracy = self
            .parties
            .par_iter()
            .map(|p| Ok(p.model.evaluate(&self.partition.test)?))
            .collect::<Result<Vec<f64>>>()?;
        Ok(RoundRecord {
            round: self.round,
            accuracy,
            tokens: self.parties.iter().map(|p| p.tokens.balance).collect(),
            credible: self.parties.iter().map(|p| self.credible.contains(p.id)).collect(),
            credibility: self.credibility_rows(),
            downloads,
        })
    }

    /// Every party releases samples, every party labels every release, and
    /// each releaser scores its peers by agreement with the majority label.
    /// Parties reported by a strict majority are excluded.
    pub fn run_initialisation(&mut self) -> Result<RoundRecord> {
        let n = self.parties.len();
        let releases = (0..n).map(|i| self.release(i)).collect::<Result<Vec<_>>>()?;
        let ids: Vec<PartyId> = self.parties.iter().map(|p| p.id).collect();
        let mut reports = BTreeMap::new();
        for (i, release) in releases.iter().enumerate() {
            let columns = (0..n).map(|k| self.label(k, release)).collect::<Result<Vec<_>>>()?;
            let matrix = LabelMatrix::from_columns(ids.clone(), columns)?;
            let raw = init_credibility::<f64>(&matrix, ids[i]);
            let (list, reported) = normalize_and_screen(ids[i], &raw, self.threshold);
            self.parties[i].credibility = Some(list);
            reports.insert(ids[i], reported);
        }
        let outcome = consensus_exclude(&reports, &self.credible)?;
        if outcome.credible.len() < 2 {
            return Err(SimError::CredibleSetTooSmall(outcome.credible.len()));
        }
        for &p in &outcome.removed {
            self.events.push(RunEvent::Excluded { party: p, round: 0 });
        }
        self.credible = outcome.credible;
        for p in &mut self.parties {
            if let Some(list) = p.credibility.as_mut() {
                list.retain_and_renormalize(&self.credible);
            }
        }
        self.record(vec![0; n])
    }

    /// Local DP-SGD for one round. Returns the model delta, or `None` once
    /// the update budget is spent.
    fn local_training(cfg: &Config, p: &mut Party, rng: &mut impl Rng) -> Result<Option<DenseGradient64>> {
        if p.augmented.is_empty() || p.update_accountant.is_exhausted() {
            return Ok(None);
        }
        let n = p.augmented.len();
        let lot = cfg.privacy.lot_size.unwrap_or_else(|| sqrt_lot_size(n)).min(n);
        let steps = cfg.privacy.steps_per_round.unwrap_or_else(|| n.div_ceil(lot));
        let dp = DpSgd::new(PrivacyParams {
            epsilon_per_step: cfg.privacy.epsilon_per_step,
            delta_per_step: cfg.privacy.delta_per_step,
            clip_norm: cfg.privacy.clip_norm,
            lot_size: lot,
            dataset_size: n,
        })?;
        let lr = schedule(cfg);
        let mut model = p.model.clone();
        let mut taken = 0;
        for _ in 0..steps {
            match dp.privatized_gradient(&model, &p.augmented, &mut p.update_accountant, rng) {
                Ok(g) => {
                    model.sgd_step(&g, lr.rate(p.step))?;
                    p.step += 1;
                    taken += 1;
                }
                Err(CoreError::BudgetExhausted { .. }) => break,
                Err(e) => return Err(e.into()),
            }
        }
        if taken == 0 {
            return Ok(None);
        }
        let delta = model.delta_from(&p.model)?;
        p.model = model;
        Ok(Some(delta))
    }

    /// One synchronous round of local training, gradient purchases,
    /// leave-one-out credibility updates and consensus exclusion.
    pub fn run_update_round(&mut self) -> Result<RoundRecord> {
        self.round += 1;
        let round = self.round;
        let cfg = self.cfg;
        let seed = self.seed;
        let n = self.parties.len();
        let pc = self.param_count;

        // Local updates, in parallel; each party owns its random stream.
        let credible = self.credible.clone();
        let deltas: Vec<Option<DenseGradient64>> = self
            .parties
            .par_iter_mut()
            .map(|p| {
                if !credible.contains(p.id) {
                    return Ok(None);
                }
                let mut rng = stream(seed, Purpose::LocalTraining, p.id.0 as u64, round as u64);
                match p.adversary.as_ref().map(|a| (a.kind, a.gradient_scale)) {
                    Some((kind, scale)) if kind.is_free_rider() => {
                        let kind = match kind {
                            AdversaryKind::FreeRiderRandomLabel => AdversaryKind::FreeRiderRandomGrad,
                            k => k,
                        };
                        Ok(Some(freerider_gradients(kind, pc, scale, p.last_received.as_ref(), &mut rng)?))
                    }
                    _ => Self::local_training(cfg, p, &mut rng),
                }
            })
            .collect::<Result<_>>()?;

        // What each seller can offer this round.
        let mut capacity = vec![0u64; n];
        for (j, p) in self.parties.iter().enumerate() {
            if !self.credible.contains(p.id) || deltas[j].is_none() {
                continue;
            }
            let latency = p.adversary.as_ref().and_then(|a| a.latency);
            if exceeds_timeout(latency, cfg.protocol.timeout) {
                self.events.push(RunEvent::TimedOut { party: p.id, round });
                continue;
            }
            capacity[j] = upload_capacity(p.sharing_level, pc);
        }

        // Purchase orders, sized by credibility and topped up by supplement.
        let mut orders = Vec::new();
        let mut downloads = vec![0u64; n];
        for i in 0..n {
            let buyer = &self.parties[i];
            if !self.credible.contains(buyer.id) {
                continue;
            }
            let balance = self.ledger.balance(buyer.id).unwrap_or(0);
            if balance <= cfg.protocol.reserve {
                if self.drained.insert(buyer.id) {
                    self.events.push(RunEvent::TokensExhausted { party: buyer.id, round });
                }
                continue;
            }
            let peers: Vec<PartyId> = self.credible.others(buyer.id).collect();
            let supply: u64 = peers.iter().map(|j| capacity[j.index()]).sum();
            let wanted = (cfg.protocol.download_fraction * supply as f64).floor() as u64;
            let budget = (balance - cfg.protocol.reserve).min(wanted);
            if budget == 0 {
                continue;
            }
            let list = buyer.credibility.as_ref();
            let cred = |j: PartyId| list.and_then(|l| l.get(j)).unwrap_or(0.0);
            let mut got = BTreeMap::new();
            let mut caps = BTreeMap::new();
            let mut creds = BTreeMap::new();
            for &j in &peers {
                let cap = capacity[j.index()];
                let share = download_allocation(cred(j), budget, self.parties[j.index()].sharing_level, pc).min(cap);
                got.insert(j, share);
                caps.insert(j, cap);
                creds.insert(j, cred(j));
            }
            let extra = supplement(budget, &got, &caps, &creds);
            for &j in &peers {
                let count = got[&j] + extra.get(&j).copied().unwrap_or(0);
                if count == 0 {
                    continue;
                }
                let r = self
                    .ledger
                    .submit_purchase_order(buyer.id, &buyer.keys, j, count, count)?;
                orders.push((i, j.index(), r, count));
                downloads[i] += count;
            }
        }

        // Sellers fulfill; buyers decrypt what they paid for.
        let mut envelope_rngs: BTreeMap<usize, _> = BTreeMap::new();
        let mut received: Vec<Vec<(PartyId, SparseUpdate64)>> = vec![Vec::new(); n];
        for &(i, j, order, count) in &orders {
            let delta = deltas[j].as_ref().expect("only publishing sellers have capacity");
            let update = select_largest(delta, count as usize)?;
            let rng = envelope_rngs
                .entry(j)
                .or_insert_with(|| stream(seed, Purpose::Envelope, j as u64, round as u64));
            let seller = &self.parties[j];
            self.ledger.fulfill_order(seller.id, &seller.keys, order, &update, rng)?;
            let (b, s) = pair_mut(&mut self.parties, i, j);
            settle_tokens(&mut b.tokens, &mut s.tokens, count)?;
            let delivered = self.ledger.receive::<f64>(order, &self.parties[i].keys)?;
            received[i].push((PartyId::from(j), delivered));
        }

        // Apply downloads, then score each seller by leave-one-out accuracy.
        let threshold = self.threshold;
        let credible = self.credible.clone();
        let reports: BTreeMap<PartyId, Vec<PartyId>> = self
            .parties
            .par_iter_mut()
            .zip(received.par_iter())
            .filter(|(p, _)| credible.contains(p.id))
            .map(|(p, got)| {
                let updates: Vec<SparseUpdate64> = got.iter().map(|(_, u)| u.clone()).collect();
                apply_updates(&mut p.model, &updates)?;
                p.last_received = if updates.is_empty() {
                    None
                } else {
                    let mut sum = DenseGradient64::zeros(pc);
                    for u in &updates {
                        sum.add_assign(&u.to_dense());
                    }
                    Some(sum)
                };
                let Some(list) = p.credibility.as_mut() else {
                    return Ok((p.id, Vec::new()));
                };
                if p.validation.is_empty() || got.is_empty() {
                    let reports = list.replace_and_renormalize(list.values().clone());
                    return Ok((p.id, reports));
                }
                let acc = p.model.evaluate(&p.validation)?;
                let mut raw = list.values().clone();
                for (j, u) in got {
                    let mut without = p.model.clone();
                    apply_updates(&mut without, &[u.negated()])?;
                    let acc_j = without.evaluate(&p.validation)?;
                    let prev = raw.get(j).copied().unwrap_or(0.0);
                    raw.insert(*j, credibility_update(prev, acc, acc_j));
                }
                raw.retain(|j, _| credible.contains(*j) && *j != p.id);
                let (next, reports) = normalize_and_screen(p.id, &raw, threshold);
                *list = next;
                Ok((p.id, reports))
            })
            .collect::<Result<_>>()?;

        // Consensus exclusion; the excluded party's updates are rolled back.
        let outcome = consensus_exclude(&reports, &self.credible)?;
        if outcome.credible.len() < 2 {
            return Err(SimError::CredibleSetTooSmall(outcome.credible.len()));
        }
        for &gone in &outcome.removed {
            self.events.push(RunEvent::Excluded { party: gone, round });
        }
        if !outcome.removed.is_empty() {
            for (p, got) in self.parties.iter_mut().zip(&received) {
                if !outcome.credible.contains(p.id) {
                    continue;
                }
                let back: Vec<SparseUpdate64> = got
                    .iter()
                    .filter(|(j, _)| outcome.removed.contains(j))
                    .map(|(_, u)| u.negated())
                    .collect();
                apply_updates(&mut p.model, &back)?;
                if let Some(list) = p.credibility.as_mut() {
                    list.retain_and_renormalize(&outcome.credible);
                }
            }
        }
        self.credible = outcome.credible;

        // Seal the round's block; the ledger and the party mirrors must agree.
        let members: Vec<PartyId> = self.credible.iter().collect();
        let leader = leader_for(round as u64, &members).expect("credible set is nonempty");
        self.ledger.seal_block(leader, &self.parties[leader.index()].keys)?;
        for p in &self.parties {
            if self.ledger.balance(p.id) != Some(p.tokens.balance) {
                return Err(SimError::Trace(format!(
                    "token mirror of {} diverged from the ledger",
                    p.id
                )));
            }
        }
        self.record(downloads)
    }

    /// Initialisation followed by the configured number of rounds.
    pub fn run(cfg: &'a Config, partition: &'a Partition, seed: u64, pretrained: &[Pretrained]) -> Result<FdpddlOutcome> {
        let mut run = Fdpddl::new(cfg, partition, seed, pretrained)?;
        let mut rounds = vec![run.run_initialisation()?];
        for _ in 0..cfg.rounds {
            rounds.push(run.run_update_round()?);
        }
        let final_accuracy = rounds.last().expect("at least round 0").accuracy.clone();
        let detections = detection_report(&cfg.adversaries, &run.events);
        let trace = CellTrace {
            framework: FrameworkKind::Fdpddl,
            setting: cfg.setting,
            seed,
            parties: cfg.parties,
            sizes: partition.spec.sizes.clone(),
            sharing_levels: partition.spec.sharing_levels.clone(),
            standalone_accuracy: pretrained.iter().map(|p| p.accuracy).collect(),
            rounds,
            final_accuracy,
            events: run.events,
            adversaries: cfg.adversaries.clone(),
            detections,
        };
        Ok(FdpddlOutcome {
            trace,
            store: run.ledger.store().clone(),
            chain: run.ledger.into_blocks(),
        })
    }
}

/// Helper for tests and tools: a dataset's test accuracy under `model`.
pub fn accuracy(model: &MlpModel64, data: &Dataset64) -> Result<f64> {
    Ok(model.evaluate(data)?)
}
