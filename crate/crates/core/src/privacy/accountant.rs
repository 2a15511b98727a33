use serde::{Deserialize, Serialize};

use super::Budget;
use crate::error::{Error, Result};

/// One recorded DP-SGD step: the per-lot guarantee and the lot sampling ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub epsilon: f64,
    pub delta: f64,
    pub sample_ratio: f64,
}

/// How per-step guarantees combine into the spent budget.
pub trait CompositionStrategy {
    fn name(&self) -> &'static str;

    /// Cost of one step with respect to the whole local dataset.
    fn step_cost(&self, step: &StepRecord) -> (f64, f64);

    fn compose(&self, steps: &[StepRecord]) -> (f64, f64) {
        steps.iter().fold((0.0, 0.0), |(e, d), s| {
            let (se, sd) = self.step_cost(s);
            (e + se, d + sd)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Composition {
    /// Epsilons and deltas add up.
    Basic,
    /// Each step is first mapped to `(q * eps, q * delta)` by sampling
    /// amplification (leading constant taken as 1), then summed.
    AmplifiedBasic,
}

impl CompositionStrategy for Composition {
    fn name(&self) -> &'static str {
        match self {
            Composition::Basic => "basic",
            Composition::AmplifiedBasic => "amplified-basic",
        }
    }

    fn step_cost(&self, step: &StepRecord) -> (f64, f64) {
        match self {
            Composition::Basic => (step.epsilon, step.delta),
            Composition::AmplifiedBasic => {
                let q = step.sample_ratio.clamp(0.0, 1.0);
                (q * step.epsilon, q * step.delta)
            }
        }
    }
}

/// Spent budgets may exceed the total by this much from summation rounding.
const SLACK: f64 = 1e-9;

/// Per-party ledger of spent privacy against a fixed total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyAccountant {
    total: Budget,
    strategy: Composition,
    steps: Vec<StepRecord>,
    exhausted: bool,
}

impl PrivacyAccountant {
    pub fn new(total: Budget, strategy: Composition) -> Self {
        Self {
            total,
            strategy,
            steps: Vec::new(),
            exhausted: false,
        }
    }

    pub fn total(&self) -> Budget {
        self.total
    }

    pub fn strategy(&self) -> Composition {
        self.strategy
    }

    pub fn steps(&self) -> &[StepRecord] {
        &self.steps
    }

    pub fn spent(&self) -> (f64, f64) {
        self.strategy.compose(&self.steps)
    }

    /// Whether recording `step` would stay within the total.
    pub fn can_afford(&self, step: &StepRecord) -> bool {
        if self.exhausted {
            return false;
        }
        let (e, d) = self.spent();
        let (se, sd) = self.strategy.step_cost(step);
        e + se <= self.total.epsilon * (1.0 + SLACK) && d + sd <= self.total.delta * (1.0 + SLACK)
    }

    /// Records `step`, or refuses and marks the accountant exhausted for good.
    pub fn record(&mut self, step: StepRecord) -> Result<()> {
        if !self.can_afford(&step) {
            self.exhausted = true;
            return Err(self.exhausted_error());
        }
        self.steps.push(step);
        Ok(())
    }

    pub fn is_exhausted(&self) -> bool {
        self.exhausted
    }

    pub(crate) fn mark_exhausted(&mut self) {
        self.exhausted = true;
    }

    pub(crate) fn exhausted_error(&self) -> Error {
        let (e, d) = self.spent();
        Error::BudgetExhausted {
            spent_epsilon: e,
            spent_delta: d,
            total_epsilon: self.total.epsilon,
            total_delta: self.total.delta,
        }
    }

    /// Audit/resume record: strategy name, totals and every step.
    pub fn to_record(&self) -> String {
        serde_json::to_string(self).expect("accountant serializes")
    }

    pub fn from_record(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// `(epsilon, delta)` spent so far under the accountant's strategy.
pub fn compose_spent(accountant: &PrivacyAccountant) -> (f64, f64) {
    accountant.spent()
}
