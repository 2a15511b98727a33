use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{calibrate_sigma, clip_per_example, PrivacyAccountant, PrivacyParams, StepRecord};
use crate::error::{Error, Result};
use crate::numerics::{Dataset, DenseGradient, MlpModel};
use crate::scalar::Scalar;

/// Sanitizer for one party's local training: lot sampling, clipping and
/// Gaussian noise on the lot-mean gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpSgd {
    params: PrivacyParams,
    noise_multiplier: f64,
}

impl DpSgd {
    /// Calibrates the noise multiplier from the per-step `(epsilon, delta)`.
    pub fn new(params: PrivacyParams) -> Result<Self> {
        params.validate()?;
        let noise_multiplier = calibrate_sigma(params.epsilon_per_step, params.delta_per_step)?;
        Ok(Self {
            params,
            noise_multiplier,
        })
    }

    /// Uses an explicit noise multiplier instead of the calibrated one.
    /// Zero turns the noise off; intended for tests.
    pub fn with_noise_multiplier(params: PrivacyParams, noise_multiplier: f64) -> Result<Self> {
        params.validate()?;
        if !(noise_multiplier >= 0.0) {
            return Err(Error::invalid("noise multiplier must be nonnegative"));
        }
        Ok(Self {
            params,
            noise_multiplier,
        })
    }

    pub fn params(&self) -> &PrivacyParams {
        &self.params
    }

    pub fn noise_multiplier(&self) -> f64 {
        self.noise_multiplier
    }

    /// Per-coordinate noise standard deviation on the lot mean: `sigma * C / L`.
    pub fn noise_std(&self) -> f64 {
        self.noise_multiplier * self.params.clip_norm / self.params.lot_size as f64
    }

    pub fn step_record(&self) -> StepRecord {
        StepRecord {
            epsilon: self.params.epsilon_per_step,
            delta: self.params.delta_per_step,
            sample_ratio: self.params.sample_ratio(),
        }
    }

    /// One private gradient: samples a lot with replacement, clips each
    /// example's gradient, averages, adds noise and records the step.
    /// Refuses once the accountant cannot pay for another step.
    pub fn privatized_gradient<T: Scalar, R: Rng + ?Sized>(
        &self,
        model: &MlpModel<T>,
        data: &Dataset<T>,
        accountant: &mut PrivacyAccountant,
        rng: &mut R,
    ) -> Result<DenseGradient<T>> {
        if data.len() != self.params.dataset_size {
            return Err(Error::DimensionMismatch {
                context: "dp-sgd dataset size",
                expected: self.params.dataset_size,
                found: data.len(),
            });
        }
        let record = self.step_record();
        if !accountant.can_afford(&record) {
            accountant.mark_exhausted();
            return Err(accountant.exhausted_error());
        }
        let lot_size = self.params.lot_size;
        let lot: Vec<usize> = (0..lot_size).map(|_| rng.gen_range(0..data.len())).collect();
        let mut grads = model.per_example_gradients(&data.subset(&lot))?;
        clip_per_example(&mut grads, T::lit(self.params.clip_norm));

        let mut mean = DenseGradient::zeros(model.param_count());
        for g in &grads {
            mean.add_assign(g);
        }
        mean.scale(T::one() / T::from_count(lot_size));

        let std = self.noise_std();
        if std > 0.0 {
            for v in mean.as_mut_slice() {
                let z: f64 = StandardNormal.sample(rng);
                *v += T::lit(std * z);
            }
        }
        accountant.record(record)?;
        Ok(mean)
    }
}

/// Free-function form of [`DpSgd::privatized_gradient`] with calibrated noise.
pub fn dp_sgd_step<T: Scalar, R: Rng + ?Sized>(
    model: &MlpModel<T>,
    data: &Dataset<T>,
    params: &PrivacyParams,
    accountant: &mut PrivacyAccountant,
    rng: &mut R,
) -> Result<DenseGradient<T>> {
    DpSgd::new(*params)?.privatized_gradient(model, data, accountant, rng)
}
