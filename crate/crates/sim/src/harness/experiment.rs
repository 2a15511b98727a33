//! Runs every (framework, seed) cell of a configuration.

use fairdl_ledger::{Block, PayloadStore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fairness::{build_x_axis, fairness, Fairness};
use super::setting::{build_partition, Partition};
use crate::config::{Config, FrameworkKind};
use crate::error::Result;
use crate::protocol::{baselines, initial_model, pretrain, CellTrace, Fdpddl, Pretrained};

/// Fairness of a finished cell, measured over honest parties only.
pub fn cell_fairness(trace: &CellTrace) -> Result<Fairness> {
    let honest = trace.honest();
    let pick = |v: &[f64]| honest.iter().map(|&i| v[i]).collect::<Vec<_>>();
    let x = build_x_axis(
        trace.setting,
        &pick(&trace.sharing_levels),
        &pick(&trace.standalone_accuracy),
    )?;
    Ok(fairness(&x, &pick(&trace.final_accuracy)))
}

/// One finished cell. The chain and payloads exist only for the ledger framework.
#[derive(Debug)]
pub struct CellOutcome {
    pub trace: CellTrace,
    pub fairness: Fairness,
    pub chain: Option<Vec<Block>>,
    pub store: Option<PayloadStore>,
}

/// Data, `w0` and pretrained models of one seed, shared by every framework.
pub struct SeedContext {
    pub seed: u64,
    pub partition: Partition,
    pub w0: fairdl_core::MlpModel64,
    pub pretrained: Vec<Pretrained>,
}

impl SeedContext {
    pub fn prepare(cfg: &Config, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let partition = build_partition(cfg, seed)?;
        let w0 = initial_model(cfg, &partition, seed)?;
        let pretrained = pretrain(cfg, &partition, seed, &w0)?;
        Ok(Self {
            seed,
            partition,
            w0,
            pretrained,
        })
    }

    pub fn run(&self, cfg: &Config, framework: FrameworkKind) -> Result<CellOutcome> {
        let (p, s, pre) = (&self.partition, self.seed, &self.pretrained);
        let (trace, chain, store) = match framework {
            FrameworkKind::Standalone => (baselines::standalone(cfg, p, s, pre)?, None, None),
            FrameworkKind::Centralised => (baselines::centralised(cfg, p, s, &self.w0, pre)?, None, None),
            FrameworkKind::Distributed => (baselines::distributed(cfg, p, s, &self.w0, pre)?, None, None),
            FrameworkKind::Fdpddl => {
                let out = Fdpddl::run(cfg, p, s, pre)?;
                (out.trace, Some(out.chain), Some(out.store))
            }
        };
        Ok(CellOutcome {
            fairness: cell_fairness(&trace)?,
            trace,
            chain,
            store,
        })
    }
}

/// Runs one cell from scratch.
pub fn run_cell(cfg: &Config, framework: FrameworkKind, seed: u64) -> Result<CellOutcome> {
    SeedContext::prepare(cfg, seed)?.run(cfg, framework)
}

/// All cells, ordered by seed then framework as configured.
pub fn run_experiment(cfg: &Config) -> Result<Vec<CellOutcome>> {
    cfg.validate()?;
    let per_seed = |seed: u64| -> Result<Vec<CellOutcome>> {
        let ctx = SeedContext::prepare(cfg, seed)?;
        cfg.frameworks.iter().map(|&f| ctx.run(cfg, f)).collect()
    };
    let nested: Vec<Vec<CellOutcome>> = if cfg.parallel {
        cfg.seeds.par_iter().map(|&s| per_seed(s)).collect::<Result<_>>()?
    } else {
        cfg.seeds.iter().map(|&s| per_seed(s)).collect::<Result<_>>()?
    };
    Ok(nested.into_iter().flatten().collect())
}

/// Per-framework means over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameworkSummary {
    pub framework: FrameworkKind,
    pub cells: usize,
    /// Mean over seeds of the honest parties' mean final accuracy.
    pub mean_accuracy: f64,
    /// Mean over seeds where fairness is defined; `None` if it never is.
    pub mean_fairness: Option<f64>,
    pub defined_fairness: usize,
}

pub fn summarize(traces: &[CellTrace]) -> Result<Vec<FrameworkSummary>> {
    let mut out = Vec::new();
    for framework in FrameworkKind::ALL {
        let cells: Vec<&CellTrace> = traces.iter().filter(|t| t.framework == framework).collect();
        if cells.is_empty() {
            continue;
        }
        let mut acc = 0.0;
        let mut fair = Vec::new();
        for t in &cells {
            let honest = t.honest();
            acc += honest.iter().map(|&i| t.final_accuracy[i]).sum::<f64>() / honest.len().max(1) as f64;
            if let Some(r) = cell_fairness(t)?.value() {
                fair.push(r);
            }
        }
        out.push(FrameworkSummary {
            framework,
            cells: cells.len(),
            mean_accuracy: acc / cells.len() as f64,
            mean_fairness: (!fair.is_empty()).then(|| fair.iter().sum::<f64>() / fair.len() as f64),
            defined_fairness: fair.len(),
        });
    }
    Ok(out)
}
