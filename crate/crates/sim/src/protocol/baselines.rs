//! Reference frameworks: standalone training, a centralised model on pooled
//! data, and round-robin distributed selective SGD.

use fairdl_core::numerics::{apply_updates, select_largest, SgdTrainer};
use fairdl_core::{Dataset64, MlpModel64, SparseUpdate64};
use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::fdpddl::{schedule, Pretrained};
use super::trace::{CellTrace, RoundRecord};
use crate::config::{Config, FrameworkKind};
use crate::error::Result;
use crate::harness::setting::Partition;
use crate::rng::{stream, Purpose};

fn trace(
    cfg: &Config,
    partition: &Partition,
    seed: u64,
    framework: FrameworkKind,
    pretrained: &[Pretrained],
    rounds: Vec<RoundRecord>,
) -> CellTrace {
    CellTrace {
        framework,
        setting: cfg.setting,
        seed,
        parties: cfg.parties,
        sizes: partition.spec.sizes.clone(),
        sharing_levels: partition.spec.sharing_levels.clone(),
        standalone_accuracy: pretrained.iter().map(|p| p.accuracy).collect(),
        final_accuracy: rounds.last().map(|r| r.accuracy.clone()).unwrap_or_default(),
        rounds,
        events: Vec::new(),
        adversaries: cfg.adversaries.clone(),
        detections: Vec::new(),
    }
}

fn record(round: u32, accuracy: Vec<f64>) -> RoundRecord {
    RoundRecord {
        round,
        accuracy,
        tokens: Vec::new(),
        credible: Vec::new(),
        credibility: Vec::new(),
        downloads: Vec::new(),
    }
}

/// Each party keeps training its pretrained model alone, one epoch a round.
pub fn standalone(cfg: &Config, partition: &Partition, seed: u64, pretrained: &[Pretrained]) -> Result<CellTrace> {
    let mut models: Vec<(MlpModel64, SgdTrainer)> = pretrained
        .iter()
        .map(|p| {
            let mut t = SgdTrainer::new(schedule(cfg), cfg.model.batch_size);
            t.step = p.steps;
            (p.model.clone(), t)
        })
        .collect();
    let mut rounds = vec![record(0, pretrained.iter().map(|p| p.accuracy).collect())];
    for round in 1..=cfg.rounds as u32 {
        let accuracy = models
            .par_iter_mut()
            .zip(partition.train.par_iter())
            .enumerate()
            .map(|(i, ((model, trainer), data))| {
                if !data.is_empty() {
                    let mut rng = stream(seed, Purpose::Baseline, i as u64, round as u64);
                    trainer.epoch(model, data, &mut rng)?;
                }
                Ok(model.evaluate(&partition.test)?)
            })
            .collect::<Result<Vec<f64>>>()?;
        rounds.push(record(round, accuracy));
    }
    Ok(trace(cfg, partition, seed, FrameworkKind::Standalone, pretrained, rounds))
}

fn pooled(cfg: &Config, partition: &Partition) -> Result<Dataset64> {
    let mut pool = Dataset64::empty(partition.dim, partition.num_classes);
    for (i, data) in partition.train.iter().enumerate() {
        if cfg.adversary(i).is_none() {
            pool = pool.concat(data)?;
        }
    }
    Ok(pool)
}

/// One model trained on the honest parties' pooled data; every party
/// reports its accuracy.
pub fn centralised(
    cfg: &Config,
    partition: &Partition,
    seed: u64,
    w0: &MlpModel64,
    pretrained: &[Pretrained],
) -> Result<CellTrace> {
    let pool = pooled(cfg, partition)?;
    let mut model = w0.clone();
    let mut trainer = SgdTrainer::new(schedule(cfg), cfg.model.batch_size);
    let mut rng = stream(seed, Purpose::Baseline, u64::MAX, 0);
    for _ in 0..cfg.model.pretrain_epochs {
        trainer.epoch(&mut model, &pool, &mut rng)?;
    }
    let n = cfg.parties;
    let mut rounds = vec![record(0, vec![model.evaluate(&partition.test)?; n])];
    for round in 1..=cfg.rounds as u32 {
        trainer.epoch(&mut model, &pool, &mut rng)?;
        rounds.push(record(round, vec![model.evaluate(&partition.test)?; n]));
    }
    Ok(trace(cfg, partition, seed, FrameworkKind::Centralised, pretrained, rounds))
}

/// Distributed selective SGD with a parameter server, visited round robin.
///
/// A party downloads the `download_rate` fraction of server parameters that
/// differ most from its own, trains locally, and uploads the
/// `upload_rate` fraction of its largest changes.
pub fn distributed(
    cfg: &Config,
    partition: &Partition,
    seed: u64,
    w0: &MlpModel64,
    pretrained: &[Pretrained],
) -> Result<CellTrace> {
    let n = cfg.parties;
    let dc = &cfg.distributed;
    let pc = w0.param_count();
    let mut server = w0.clone();
    let mut models: Vec<MlpModel64> = pretrained.iter().map(|p| p.model.clone()).collect();
    let mut trainers: Vec<SgdTrainer> = pretrained
        .iter()
        .map(|p| {
            let mut t = SgdTrainer::new(schedule(cfg), cfg.model.batch_size);
            t.step = p.steps;
            t
        })
        .collect();
    let download = ((dc.download_rate * pc as f64).round() as usize).clamp(1, pc);
    let upload = ((dc.upload_rate * pc as f64).round() as usize).clamp(1, pc);
    let mut rounds = vec![record(0, pretrained.iter().map(|p| p.accuracy).collect())];
    for round in 1..=cfg.rounds as u32 {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut stream(seed, Purpose::Baseline, u64::MAX - 1, round as u64));
        for i in order {
            let model = &mut models[i];
            let diff = server.delta_from(model)?;
            apply_updates(model, &[select_largest(&diff, download)?])?;
            let data = &partition.train[i];
            if data.is_empty() {
                continue;
            }
            let before = model.clone();
            let mut rng = stream(seed, Purpose::Baseline, i as u64, round as u64);
            for _ in 0..dc.local_epochs {
                trainers[i].epoch(model, data, &mut rng)?;
            }
            let change = model.delta_from(&before)?;
            let shared: SparseUpdate64 = select_largest(&change, upload)?;
            apply_updates(&mut server, &[shared])?;
        }
        let accuracy = models
            .par_iter()
            .map(|m| Ok(m.evaluate(&partition.test)?))
            .collect::<Result<Vec<f64>>>()?;
        rounds.push(record(round, accuracy));
    }
    Ok(trace(cfg, partition, seed, FrameworkKind::Distributed, pretrained, rounds))
}
