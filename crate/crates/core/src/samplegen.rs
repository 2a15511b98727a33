//! Stage-one artificial sample release.
//!
//! Every party publishes `floor(lambda * |D|)` unlabeled, differentially
//! private samples that peers label with their own standalone models. The
//! generator is a trait so a real generative model can replace the default
//! [`NoisyPrototypeGenerator`], which perturbs per-class feature means with
//! the Gaussian mechanism and emits jittered copies of them.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, WeightedIndex};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::PartyId;
use crate::numerics::{Dataset, Matrix};
use crate::privacy::{calibrate_sigma, Budget, PrivacyAccountant, StepRecord};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentKind {
    /// Square single-channel images flattened row-major.
    Image,
    /// Records are replicated verbatim.
    Tabular,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub kind: AugmentKind,
    /// Maximum absolute rotation in degrees.
    pub rotation_range: f64,
    /// Maximum shift as a fraction of the image side.
    pub shift_range: f64,
    pub replication: usize,
}

impl AugmentConfig {
    pub fn tabular(replication: usize) -> Self {
        Self {
            kind: AugmentKind::Tabular,
            rotation_range: 0.0,
            shift_range: 0.0,
            replication,
        }
    }

    /// Image defaults: 1 degree rotation, 1% shifts, 100 copies.
    pub fn image() -> Self {
        Self {
            kind: AugmentKind::Image,
            rotation_range: 1.0,
            shift_range: 0.01,
            replication: 100,
        }
    }
}

/// Expands `data` to `replication` copies of every example. Image copies are
/// randomly rotated and shifted (nearest-neighbour resampling, zero fill).
pub fn augment<T: Scalar, R: Rng + ?Sized>(
    data: &Dataset<T>,
    cfg: &AugmentConfig,
    rng: &mut R,
) -> Result<Dataset<T>> {
    if cfg.replication == 0 {
        return Err(Error::invalid("replication factor must be at least 1"));
    }
    let dim = data.dim();
    let mut out = Vec::with_capacity(data.len() * cfg.replication * dim);
    let mut labels = Vec::with_capacity(data.len() * cfg.replication);
    match cfg.kind {
        AugmentKind::Tabular => {
            for _ in 0..cfg.replication {
                out.extend_from_slice(data.features().as_slice());
                labels.extend_from_slice(data.labels());
            }
        }
        AugmentKind::Image => {
            let side = (dim as f64).sqrt().round() as usize;
            if side * side != dim {
                return Err(Error::invalid(format!(
                    "image augmentation needs square images, feature dim is {dim}"
                )));
            }
            for _ in 0..cfg.replication {
                for (row, &label) in data.features().iter_rows().zip(data.labels()) {
                    let angle = uniform_symmetric(rng, cfg.rotation_range).to_radians();
                    let dx = uniform_symmetric(rng, cfg.shift_range) * side as f64;
                    let dy = uniform_symmetric(rng, cfg.shift_range) * side as f64;
                    transform_image(row, side, angle, dx, dy, &mut out);
                    labels.push(label);
                }
            }
        }
    }
    Dataset::new(
        Matrix::new(labels.len(), dim, out)?,
        labels,
        data.num_classes(),
    )
}

fn uniform_symmetric<R: Rng + ?Sized>(rng: &mut R, range: f64) -> f64 {
    if range > 0.0 {
        rng.gen_range(-range..=range)
    } else {
        0.0
    }
}

/// Inverse-maps every output pixel through a rotation about the centre and a
/// translation, sampling the nearest source pixel.
fn transform_image<T: Scalar>(src: &[T], side: usize, angle: f64, dx: f64, dy: f64, out: &mut Vec<T>) {
    let c = (side as f64 - 1.0) / 2.0;
    let (sin, cos) = angle.sin_cos();
    for y in 0..side {
        for x in 0..side {
            let px = x as f64 - c - dx;
            let py = y as f64 - c - dy;
            let sx = (cos * px + sin * py + c).round();
            let sy = (-sin * px + cos * py + c).round();
            let inside = sx >= 0.0 && sy >= 0.0 && sx < side as f64 && sy < side as f64;
            out.push(if inside {
                src[sy as usize * side + sx as usize]
            } else {
                T::zero()
            });
        }
    }
}

/// Unlabeled artificial samples from one party. There is deliberately no way
/// to attach labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRelease<T> {
    party: PartyId,
    samples: Matrix<T>,
}

impl<T: Scalar> SampleRelease<T> {
    pub fn new(party: PartyId, samples: Matrix<T>) -> Self {
        Self { party, samples }
    }

    pub fn party(&self) -> PartyId {
        self.party
    }

    pub fn samples(&self) -> &Matrix<T> {
        &self.samples
    }

    pub fn count(&self) -> usize {
        self.samples.rows()
    }
}

/// `floor(lambda * |D|)`.
pub fn release_size(sharing_level: f64, data_len: usize) -> usize {
    (sharing_level * data_len as f64 + 1e-9).floor() as usize
}

/// Produces a party's stage-one release, debiting its sample-release budget.
pub trait SampleGenerator<T: Scalar> {
    fn generate(
        &self,
        party: PartyId,
        data: &Dataset<T>,
        sharing_level: f64,
        accountant: &mut PrivacyAccountant,
        rng: &mut dyn rand::RngCore,
    ) -> Result<SampleRelease<T>>;
}

/// Gaussian-mechanism class prototypes plus isotropic jitter.
///
/// Features are assumed to lie in [0, 1], which bounds the sensitivity of a
/// class mean by `sqrt(dim) / count`. Prototypes are computed on the
/// augmented local data when `augment` is set; the release size always uses
/// the original data size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisyPrototypeGenerator {
    pub jitter_std: f64,
    pub augment: Option<AugmentConfig>,
    /// Overrides the calibrated noise multiplier; `Some(0.0)` disables noise.
    pub noise_multiplier: Option<f64>,
}

impl Default for NoisyPrototypeGenerator {
    fn default() -> Self {
        Self {
            jitter_std: 0.05,
            augment: Some(AugmentConfig::tabular(100)),
            noise_multiplier: None,
        }
    }
}

impl NoisyPrototypeGenerator {
    /// The per-release guarantee paid from the budget: epsilon capped at 1 so
    /// the Gaussian calibration applies, the full delta.
    fn release_cost(total: Budget) -> StepRecord {
        StepRecord {
            epsilon: total.epsilon.min(1.0),
            delta: total.delta,
            sample_ratio: 1.0,
        }
    }
}

impl<T: Scalar> SampleGenerator<T> for NoisyPrototypeGenerator {
    fn generate(
        &self,
        party: PartyId,
        data: &Dataset<T>,
        sharing_level: f64,
        accountant: &mut PrivacyAccountant,
        rng: &mut dyn rand::RngCore,
    ) -> Result<SampleRelease<T>> {
        if !(sharing_level > 0.0 && sharing_level <= 1.0) {
            return Err(Error::invalid(format!(
                "sharing level must be in (0, 1], got {sharing_level}"
            )));
        }
        if data.is_empty() {
            return Err(Error::Empty("release source data"));
        }
        let cost = Self::release_cost(accountant.total());
        if !(cost.epsilon > 0.0) || !accountant.can_afford(&cost) {
            return Err(Error::invalid(
                "sample-release budget cannot pay for a single release",
            ));
        }
        let sigma = match self.noise_multiplier {
            Some(s) => s,
            None => calibrate_sigma(cost.epsilon, cost.delta)?,
        };
        let u = release_size(sharing_level, data.len());

        let source = match &self.augment {
            Some(cfg) => augment(data, cfg, rng)?,
            None => data.clone(),
        };
        let dim = source.dim();
        let k = source.num_classes();
        let counts = source.class_counts();
        let mut prototypes = vec![vec![0.0f64; dim]; k];
        for (row, &label) in source.features().iter_rows().zip(source.labels()) {
            for (p, &v) in prototypes[label].iter_mut().zip(row) {
                *p += v.as_f64();
            }
        }
        let sensitivity_scale = sigma * (dim as f64).sqrt();
        for (proto, &count) in prototypes.iter_mut().zip(&counts) {
            if count == 0 {
                continue;
            }
            let std = sensitivity_scale / count as f64;
            for p in proto.iter_mut() {
                *p /= count as f64;
                if std > 0.0 {
                    let z: f64 = StandardNormal.sample(rng);
                    *p += std * z;
                }
            }
        }
        accountant.record(cost)?;

        // Class mix follows the local label distribution.
        let local_counts = data.class_counts();
        let chooser = WeightedIndex::new(&local_counts)
            .map_err(|e| Error::invalid(format!("class weights: {e}")))?;
        let mut samples = Vec::with_capacity(u * dim);
        for _ in 0..u {
            let class = chooser.sample(rng);
            for &p in &prototypes[class] {
                let jitter = if self.jitter_std > 0.0 {
                    let z: f64 = StandardNormal.sample(rng);
                    self.jitter_std * z
                } else {
                    0.0
                };
                samples.push(T::lit(p + jitter));
            }
        }
        Ok(SampleRelease::new(party, Matrix::new(u, dim, samples)?))
    }
}

/// Convenience wrapper around [`SampleGenerator::generate`] for the default generator.
pub fn generate_release<T: Scalar, R: rand::RngCore>(
    party: PartyId,
    data: &Dataset<T>,
    sharing_level: f64,
    accountant: &mut PrivacyAccountant,
    rng: &mut R,
) -> Result<SampleRelease<T>> {
    NoisyPrototypeGenerator::default().generate(party, data, sharing_level, accountant, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{BlobSpec, GaussianBlobs};
    use crate::privacy::Composition;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn data(n: usize, seed: u64) -> Dataset<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        GaussianBlobs::new(BlobSpec::default(), &mut rng)
            .unwrap()
            .sample(n, &mut rng)
    }

    fn init_budget() -> PrivacyAccountant {
        PrivacyAccountant::new(Budget::new(4.0, 1e-5), Composition::Basic)
    }

    #[test]
    fn identity_augmentation() {
        let d = data(20, 1);
        let cfg = AugmentConfig {
            kind: AugmentKind::Tabular,
            rotation_range: 0.0,
            shift_range: 0.0,
            replication: 1,
        };
        assert_eq!(augment(&d, &cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap(), d);

        let img = Dataset::new(
            Matrix::new(1, 9, (0..9).map(f64::from).collect()).unwrap(),
            vec![0],
            1,
        )
        .unwrap();
        let cfg = AugmentConfig {
            kind: AugmentKind::Image,
            rotation_range: 0.0,
            shift_range: 0.0,
            replication: 1,
        };
        assert_eq!(augment(&img, &cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap(), img);
    }

    #[test]
    fn tabular_replication_scales_counts() {
        let d = data(370, 2);
        let out = augment(&d, &AugmentConfig::tabular(100), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(out.len(), 37_000);
        let before = d.class_counts();
        let after = out.class_counts();
        for (b, a) in before.iter().zip(after) {
            assert_eq!(a, b * 100);
        }
    }

    #[test]
    fn image_augmentation_keeps_labels_and_size() {
        let img = Dataset::new(
            Matrix::new(2, 16, (0..32).map(|v| f64::from(v) / 32.0).collect()).unwrap(),
            vec![1, 0],
            2,
        )
        .unwrap();
        let cfg = AugmentConfig {
            replication: 3,
            ..AugmentConfig::image()
        };
        let out = augment(&img, &cfg, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(out.len(), 6);
        assert_eq!(out.labels(), &[1, 0, 1, 0, 1, 0]);
        assert!(augment(&data(2, 0), &cfg, &mut ChaCha8Rng::seed_from_u64(4)).is_err());
    }

    #[test]
    fn release_size_floors() {
        assert_eq!(release_size(0.1, 600), 60);
        assert_eq!(release_size(0.1, 605), 60);
        assert_eq!(release_size(0.3, 10), 3);
    }

    #[test]
    fn release_has_expected_count_and_debits_budget() {
        let d = data(600, 3);
        let mut acc = init_budget();
        let r = generate_release(PartyId(2), &d, 0.1, &mut acc, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(r.count(), 60);
        assert_eq!(r.party(), PartyId(2));
        assert_eq!(acc.steps().len(), 1);
    }

    #[test]
    fn zero_noise_release_is_prototype_plus_jitter() {
        let d = data(200, 5);
        let gen = NoisyPrototypeGenerator {
            jitter_std: 0.0,
            augment: None,
            noise_multiplier: Some(0.0),
        };
        let r = gen
            .generate(PartyId(0), &d, 0.5, &mut init_budget(), &mut ChaCha8Rng::seed_from_u64(1))
            .unwrap();
        let counts = d.class_counts();
        let mut means = vec![vec![0.0; d.dim()]; d.num_classes()];
        for (row, &l) in d.features().iter_rows().zip(d.labels()) {
            for (m, v) in means[l].iter_mut().zip(row) {
                *m += v / counts[l] as f64;
            }
        }
        for row in r.samples().iter_rows() {
            let hit = means.iter().any(|m| {
                m.iter().zip(row).all(|(a, b)| (a - b).abs() < 1e-12)
            });
            assert!(hit, "sample is not an exact class prototype");
        }
    }

    #[test]
    fn deterministic_for_same_seed() {
        let d = data(100, 6);
        let a = generate_release(PartyId(0), &d, 0.2, &mut init_budget(), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = generate_release(PartyId(0), &d, 0.2, &mut init_budget(), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn refuses_without_budget() {
        let d = data(100, 6);
        let mut acc = PrivacyAccountant::new(Budget::new(0.5, 1e-5), Composition::Basic);
        generate_release(PartyId(0), &d, 0.2, &mut acc, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert!(generate_release(PartyId(0), &d, 0.2, &mut acc, &mut ChaCha8Rng::seed_from_u64(3)).is_err());
        assert!(generate_release(PartyId(0), &d, 0.0, &mut init_budget(), &mut ChaCha8Rng::seed_from_u64(3)).is_err());
    }
}
