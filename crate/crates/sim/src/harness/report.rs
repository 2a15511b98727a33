//! Tables and summary derived from run traces.
//!
//! Everything here is a pure function of the traces, so regenerating a
//! report from a stored `traces.json` reproduces the files byte for byte.

use std::fs;
use std::path::Path;

use fairdl_core::adversary::DETECTION_HEADER;
use serde::{Deserialize, Serialize};

use super::experiment::{cell_fairness, summarize, FrameworkSummary};
use super::fairness::Fairness;
use crate::config::FrameworkKind;
use crate::error::{Result, SimError};
use crate::protocol::CellTrace;

pub const TRACES_FILE: &str = "traces.json";

/// Fairness is only analysed for the two frameworks that exchange updates.
pub fn reports_fairness(framework: FrameworkKind) -> bool {
    matches!(framework, FrameworkKind::Fdpddl | FrameworkKind::Distributed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub framework: FrameworkKind,
    pub setting: u8,
    pub seed: u64,
    pub final_accuracy: Vec<f64>,
    pub fairness: Option<Fairness>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub frameworks: Vec<FrameworkSummary>,
    pub cells: Vec<CellSummary>,
    pub detections: Vec<DetectionSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionSummary {
    pub seed: u64,
    #[serde(flatten)]
    pub detection: fairdl_core::adversary::Detection,
}

pub fn summary(traces: &[CellTrace]) -> Result<Summary> {
    let mut frameworks = summarize(traces)?;
    for f in &mut frameworks {
        if !reports_fairness(f.framework) {
            f.mean_fairness = None;
            f.defined_fairness = 0;
        }
    }
    let cells = traces
        .iter()
        .map(|t| {
            Ok(CellSummary {
                framework: t.framework,
                setting: t.setting,
                seed: t.seed,
                final_accuracy: t.final_accuracy.clone(),
                fairness: if reports_fairness(t.framework) {
                    Some(cell_fairness(t)?)
                } else {
                    None
                },
            })
        })
        .collect::<Result<_>>()?;
    let detections = traces
        .iter()
        .filter(|t| t.framework == FrameworkKind::Fdpddl)
        .flat_map(|t| {
            t.detections.iter().map(|d| DetectionSummary {
                seed: t.seed,
                detection: d.clone(),
            })
        })
        .collect();
    Ok(Summary {
        frameworks,
        cells,
        detections,
    })
}

fn opt<T: ToString>(v: Option<&T>) -> String {
    v.map(ToString::to_string).unwrap_or_default()
}

/// Per round and party: accuracy, tokens, credible flag, downloads.
pub fn rounds_csv(traces: &[CellTrace]) -> String {
    let mut out = String::from("framework,setting,seed,round,party,accuracy,tokens,credible,downloads\n");
    for t in traces {
        for r in &t.rounds {
            for (p, acc) in r.accuracy.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{}\n",
                    t.framework,
                    t.setting,
                    t.seed,
                    r.round,
                    p,
                    acc,
                    opt(r.tokens.get(p)),
                    opt(r.credible.get(p)),
                    opt(r.downloads.get(p)),
                ));
            }
        }
    }
    out
}

/// Each party's normalized view of each peer, per round.
pub fn credibility_csv(traces: &[CellTrace]) -> String {
    let mut out = String::from("setting,seed,round,party,peer,credibility\n");
    for t in traces.iter().filter(|t| t.framework == FrameworkKind::Fdpddl) {
        for r in &t.rounds {
            for (i, row) in r.credibility.iter().enumerate() {
                for (j, c) in row.iter().enumerate() {
                    if let Some(c) = c {
                        out.push_str(&format!("{},{},{},{i},{j},{c}\n", t.setting, t.seed, r.round));
                    }
                }
            }
        }
    }
    out
}

pub fn accuracy_csv(traces: &[CellTrace]) -> String {
    let mut out = String::from("framework,setting,seed,party,standalone_accuracy,final_accuracy\n");
    for t in traces {
        for (p, acc) in t.final_accuracy.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{p},{},{acc}\n",
                t.framework, t.setting, t.seed, t.standalone_accuracy[p]
            ));
        }
    }
    out
}

pub fn fairness_csv(traces: &[CellTrace]) -> Result<String> {
    let mut out = String::from("framework,setting,seed,r\n");
    for t in traces.iter().filter(|t| reports_fairness(t.framework)) {
        out.push_str(&format!(
            "{},{},{},{}\n",
            t.framework,
            t.setting,
            t.seed,
            cell_fairness(t)?.cell()
        ));
    }
    Ok(out)
}

pub fn detections_csv(traces: &[CellTrace]) -> String {
    let mut out = format!("seed,{DETECTION_HEADER}\n");
    for t in traces.iter().filter(|t| t.framework == FrameworkKind::Fdpddl) {
        for d in &t.detections {
            out.push_str(&format!("{},{}\n", t.seed, d.to_row()));
        }
    }
    out
}

pub fn framework_csv(summary: &Summary) -> String {
    let mut out = String::from("framework,cells,mean_accuracy,mean_fairness,defined_fairness\n");
    for f in &summary.frameworks {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            f.framework,
            f.cells,
            f.mean_accuracy,
            opt(f.mean_fairness.as_ref()),
            f.defined_fairness
        ));
    }
    out
}

/// Writes every table plus `summary.json` into `dir`.
pub fn write_report(traces: &[CellTrace], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let s = summary(traces)?;
    fs::write(dir.join("rounds.csv"), rounds_csv(traces))?;
    fs::write(dir.join("credibility.csv"), credibility_csv(traces))?;
    fs::write(dir.join("accuracy.csv"), accuracy_csv(traces))?;
    fs::write(dir.join("fairness.csv"), fairness_csv(traces)?)?;
    fs::write(dir.join("detections.csv"), detections_csv(traces))?;
    fs::write(dir.join("frameworks.csv"), framework_csv(&s))?;
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&s)? + "\n")?;
    Ok(())
}

pub fn write_traces(traces: &[CellTrace], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(TRACES_FILE), serde_json::to_string(traces)? + "\n")?;
    Ok(())
}

/// Accepts either a run directory or the traces file itself.
pub fn read_traces(path: &Path) -> Result<Vec<CellTrace>> {
    let file = if path.is_dir() { path.join(TRACES_FILE) } else { path.to_path_buf() };
    let text = fs::read_to_string(&file)
        .map_err(|e| SimError::Trace(format!("{}: {e}", file.display())))?;
    Ok(serde_json::from_str(&text)?)
}
