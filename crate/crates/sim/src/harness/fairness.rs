//! Collaborative fairness: correlation between what parties put in and the
//! accuracy they get out.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// Pearson correlation, or the reason it is undefined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Fairness {
    Defined { r: f64 },
    Undefined { reason: String },
}

impl Fairness {
    pub fn value(&self) -> Option<f64> {
        match self {
            Fairness::Defined { r } => Some(*r),
            Fairness::Undefined { .. } => None,
        }
    }

    /// Table cell: the coefficient, or `undefined`.
    pub fn cell(&self) -> String {
        match self {
            Fairness::Defined { r } => format!("{r:.6}"),
            Fairness::Undefined { .. } => "undefined".into(),
        }
    }
}

/// Contribution axis. Setting 2 adds normalized sharing levels to normalized
/// standalone accuracies; settings 1 and 3 use standalone accuracies as is.
pub fn build_x_axis(setting: u8, sharing_levels: &[f64], standalone: &[f64]) -> Result<Vec<f64>> {
    if sharing_levels.len() != standalone.len() {
        return Err(SimError::Trace(format!(
            "{} sharing levels for {} standalone accuracies",
            sharing_levels.len(),
            standalone.len()
        )));
    }
    match setting {
        2 => {
            let ls: f64 = sharing_levels.iter().sum();
            let ss: f64 = standalone.iter().sum();
            if !(ls > 0.0) || !(ss > 0.0) {
                return Err(SimError::Trace(
                    "setting 2 needs positive sums of sharing levels and accuracies".into(),
                ));
            }
            Ok(sharing_levels
                .iter()
                .zip(standalone)
                .map(|(l, s)| l / ls + s / ss)
                .collect())
        }
        1 | 3 => Ok(standalone.to_vec()),
        other => Err(SimError::Trace(format!("unknown setting {other}"))),
    }
}

/// Pearson correlation with `n - 1` denominators in both the covariance and
/// the standard deviations.
pub fn fairness(x: &[f64], y: &[f64]) -> Fairness {
    let n = x.len();
    if n != y.len() {
        return Fairness::Undefined {
            reason: format!("length mismatch: {} vs {}", n, y.len()),
        };
    }
    if n < 2 {
        return Fairness::Undefined {
            reason: format!("need at least 2 parties, got {n}"),
        };
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum::<f64>() / (nf - 1.0);
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum::<f64>() / (nf - 1.0);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (nf - 1.0);
    // Relative test so that values differing only by rounding count as constant.
    let flat = |s: f64, m: f64| s <= (1e-12 * m.abs().max(1.0)).powi(2);
    if flat(sxx, mx) {
        return Fairness::Undefined {
            reason: "contributions have zero variance".into(),
        };
    }
    if flat(syy, my) {
        return Fairness::Undefined {
            reason: "accuracies have zero variance".into(),
        };
    }
    let r = sxy / (sxx.sqrt() * syy.sqrt());
    Fairness::Defined { r: r.clamp(-1.0, 1.0) }
}
