use rand::seq::SliceRandom;
use rand::Rng;

use super::dataset::Dataset;
use super::mlp::{InverseTimeDecay, MlpModel};
use crate::error::Result;
use crate::scalar::Scalar;

/// Non-private minibatch SGD state: schedule plus the global step counter the
/// decay is indexed by.
#[derive(Debug, Clone)]
pub struct SgdTrainer {
    pub schedule: InverseTimeDecay,
    pub batch_size: usize,
    pub step: u64,
}

impl SgdTrainer {
    pub fn new(schedule: InverseTimeDecay, batch_size: usize) -> Self {
        Self {
            schedule,
            batch_size: batch_size.max(1),
            step: 0,
        }
    }

    /// One shuffled pass over `data`.
    pub fn epoch<T: Scalar, R: Rng + ?Sized>(
        &mut self,
        model: &mut MlpModel<T>,
        data: &Dataset<T>,
        rng: &mut R,
    ) -> Result<()> {
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(rng);
        for chunk in order.chunks(self.batch_size) {
            let batch = data.subset(chunk);
            let grad = model.backward(&batch)?;
            model.sgd_step(&grad, T::lit(self.schedule.rate(self.step)))?;
            self.step += 1;
        }
        Ok(())
    }
}

/// Lot size convention for local training: `ceil(sqrt(n))`.
pub fn sqrt_lot_size(n: usize) -> usize {
    ((n as f64).sqrt().ceil() as usize).max(1)
}
