//! Differentially private gradient release and per-party budget accounting.

mod accountant;
mod dp_sgd;

pub use accountant::{compose_spent, Composition, CompositionStrategy, PrivacyAccountant, StepRecord};
pub use dp_sgd::{dp_sgd_step, DpSgd};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::DenseGradient;
use crate::scalar::Scalar;

/// An `(epsilon, delta)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub epsilon: f64,
    pub delta: f64,
}

impl Budget {
    pub const fn new(epsilon: f64, delta: f64) -> Self {
        Self { epsilon, delta }
    }
}

/// Gaussian mechanism noise multiplier `sqrt(2 ln(1.25 / delta)) / epsilon`,
/// valid for `0 < epsilon <= 1`.
pub fn calibrate_sigma<T: Scalar>(epsilon: T, delta: T) -> Result<T> {
    if !(epsilon > T::zero()) || !(delta > T::zero()) || !(delta < T::one()) {
        return Err(Error::invalid(format!(
            "need epsilon > 0 and delta in (0, 1), got ({epsilon}, {delta})"
        )));
    }
    if epsilon > T::one() {
        return Err(Error::invalid(format!(
            "Gaussian calibration requires epsilon <= 1, got {epsilon}"
        )));
    }
    Ok((T::lit(2.0) * (T::lit(1.25) / delta).ln()).sqrt() / epsilon)
}

/// Rescales each gradient to L2 norm at most `clip_norm`:
/// `g / max(1, |g| / C)`.
pub fn clip_per_example<T: Scalar>(gradients: &mut [DenseGradient<T>], clip_norm: T) {
    for g in gradients {
        let norm = g.l2_norm();
        let factor = (norm / clip_norm).max(T::one());
        if factor > T::one() {
            g.scale(T::one() / factor);
        }
    }
}

/// Per-step DP-SGD parameters of one party.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyParams {
    pub epsilon_per_step: f64,
    pub delta_per_step: f64,
    pub clip_norm: f64,
    pub lot_size: usize,
    pub dataset_size: usize,
}

impl PrivacyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon_per_step > 0.0 && self.epsilon_per_step <= 1.0) {
            return Err(Error::invalid(format!(
                "epsilon per step must be in (0, 1], got {}",
                self.epsilon_per_step
            )));
        }
        if !(self.delta_per_step > 0.0 && self.delta_per_step < 1.0) {
            return Err(Error::invalid(format!(
                "delta per step must be in (0, 1), got {}",
                self.delta_per_step
            )));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::invalid("clip norm must be positive"));
        }
        if self.lot_size == 0 || self.lot_size > self.dataset_size {
            return Err(Error::invalid(format!(
                "lot size {} must be in [1, {}]",
                self.lot_size, self.dataset_size
            )));
        }
        Ok(())
    }

    /// `q = L / N`.
    pub fn sample_ratio(&self) -> f64 {
        self.lot_size as f64 / self.dataset_size as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Initialisation,
    Update,
}

/// Default per-stage budgets: (4, 1e-5) for sample release, (2, 1e-5) for
/// gradient training; SVHN tightens delta to 1e-6.
pub fn allocate_budgets(stage: Stage, dataset_name: &str) -> Budget {
    let delta = if dataset_name.eq_ignore_ascii_case("svhn") {
        1e-6
    } else {
        1e-5
    };
    match stage {
        Stage::Initialisation => Budget::new(4.0, delta),
        Stage::Update => Budget::new(2.0, delta),
    }
}
