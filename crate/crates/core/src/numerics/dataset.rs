use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Labelled examples: one feature row per label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset<T> {
    features: Matrix<T>,
    labels: Vec<usize>,
    num_classes: usize,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(features: Matrix<T>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(Error::DimensionMismatch {
                context: "dataset labels",
                expected: features.rows(),
                found: labels.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::invalid(format!(
                "label {bad} outside [0, {num_classes})"
            )));
        }
        Ok(Self {
            features,
            labels,
            num_classes,
        })
    }

    pub fn empty(dim: usize, num_classes: usize) -> Self {
        Self {
            features: Matrix::zeros(0, dim),
            labels: Vec::new(),
            num_classes,
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    #[inline]
    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    #[inline]
    pub fn features(&self) -> &Matrix<T> {
        &self.features
    }

    #[inline]
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
        }
    }

    pub fn concat(&self, other: &Self) -> Result<Self> {
        let features = self.features.vstack(&other.features)?;
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        Self::new(features, labels, self.num_classes.max(other.num_classes))
    }

    /// Splits off the trailing `fraction` of rows as a second dataset.
    /// The head keeps at least one example whenever the input is nonempty.
    pub fn split_tail(&self, fraction: f64) -> (Self, Self) {
        let n = self.len();
        let mut tail = (n as f64 * fraction).round() as usize;
        if n > 0 && tail >= n {
            tail = n - 1;
        }
        let head: Vec<usize> = (0..n - tail).collect();
        let rest: Vec<usize> = (n - tail..n).collect();
        (self.subset(&head), self.subset(&rest))
    }

    pub fn shuffled<R: Rng + ?Sized>(&self, rng: &mut R) -> Self {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(rng);
        self.subset(&idx)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Keeps only examples whose label is in `classes`.
    pub fn filter_classes(&self, classes: &[usize]) -> Self {
        let idx: Vec<usize> = (0..self.len())
            .filter(|&i| classes.contains(&self.labels[i]))
            .collect();
        self.subset(&idx)
    }

    /// Rescales every feature column into [0, 1] by its min/max over this dataset.
    /// Constant columns map to 0.
    pub fn min_max_normalized(&self) -> Self {
        let dim = self.dim();
        let mut lo = vec![T::infinity(); dim];
        let mut hi = vec![T::neg_infinity(); dim];
        for row in self.features.iter_rows() {
            for (c, &v) in row.iter().enumerate() {
                lo[c] = lo[c].min(v);
                hi[c] = hi[c].max(v);
            }
        }
        let mut data = Vec::with_capacity(self.len() * dim);
        for row in self.features.iter_rows() {
            for (c, &v) in row.iter().enumerate() {
                let span = hi[c] - lo[c];
                data.push(if span > T::zero() {
                    (v - lo[c]) / span
                } else {
                    T::zero()
                });
            }
        }
        Self {
            features: Matrix::new(self.len(), dim, data).expect("same shape"),
            labels: self.labels.clone(),
            num_classes: self.num_classes,
        }
    }
}

/// Reads a CSV file with a header row whose last column is an integer class label.
/// `num_classes` is inferred as `max label + 1`.
pub fn load_csv<T: Scalar>(path: impl AsRef<Path>) -> Result<Dataset<T>> {
    let file = std::fs::File::open(path)?;
    read_csv(file)
}

pub fn read_csv<T: Scalar, R: Read>(reader: R) -> Result<Dataset<T>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let width = rdr.headers()?.len();
    if width < 2 {
        return Err(Error::Parse("csv needs at least one feature and a label column".into()));
    }
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != width {
            return Err(Error::Parse(format!(
                "row {} has {} fields, header has {width}",
                line + 1,
                record.len()
            )));
        }
        for field in record.iter().take(width - 1) {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("row {}: {e}", line + 1)))?;
            data.push(T::lit(v));
        }
        let label: usize = record[width - 1]
            .trim()
            .parse()
            .map_err(|e| Error::Parse(format!("row {} label: {e}", line + 1)))?;
        labels.push(label);
    }
    let num_classes = labels.iter().max().map_or(0, |m| m + 1);
    let features = Matrix::new(labels.len(), width - 1, data)?;
    Dataset::new(features, labels, num_classes)
}

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn read_u32_be(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Parse("truncated idx header".into()))
}

/// Parses an IDX image/label pair (unsigned byte payloads). Pixel values are
/// scaled to [0, 1]; images are flattened row-major.
pub fn parse_idx<T: Scalar>(images: &[u8], labels: &[u8], num_classes: usize) -> Result<Dataset<T>> {
    if read_u32_be(images, 0)? != IDX_IMAGES_MAGIC {
        return Err(Error::Parse("bad idx image magic".into()));
    }
    if read_u32_be(labels, 0)? != IDX_LABELS_MAGIC {
        return Err(Error::Parse("bad idx label magic".into()));
    }
    let count = read_u32_be(images, 4)? as usize;
    let rows = read_u32_be(images, 8)? as usize;
    let cols = read_u32_be(images, 12)? as usize;
    let label_count = read_u32_be(labels, 4)? as usize;
    if label_count != count {
        return Err(Error::DimensionMismatch {
            context: "idx label count",
            expected: count,
            found: label_count,
        });
    }
    let dim = rows * cols;
    let pixels = images
        .get(16..16 + count * dim)
        .ok_or_else(|| Error::Parse("truncated idx image data".into()))?;
    let raw_labels = labels
        .get(8..8 + count)
        .ok_or_else(|| Error::Parse("truncated idx label data".into()))?;
    let scale = T::lit(255.0);
    let data = pixels.iter().map(|&p| T::from_count(p as usize) / scale).collect();
    let labels = raw_labels.iter().map(|&l| l as usize).collect();
    Dataset::new(Matrix::new(count, dim, data)?, labels, num_classes)
}

pub fn load_idx<T: Scalar>(
    images: impl AsRef<Path>,
    labels: impl AsRef<Path>,
    num_classes: usize,
) -> Result<Dataset<T>> {
    let images = std::fs::read(images)?;
    let labels = std::fs::read(labels)?;
    parse_idx(&images, &labels, num_classes)
}

/// Synthetic isotropic Gaussian clusters, one per class, clamped into [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobSpec {
    pub num_classes: usize,
    pub dim: usize,
    pub cluster_std: f64,
    /// Half-width of the cube around 0.5 that class centers are drawn from.
    pub center_spread: f64,
}

impl Default for BlobSpec {
    fn default() -> Self {
        Self {
            num_classes: 10,
            dim: 32,
            cluster_std: 0.2,
            center_spread: 0.2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GaussianBlobs {
    spec: BlobSpec,
    centers: Vec<Vec<f64>>,
}

impl GaussianBlobs {
    pub fn new<R: Rng + ?Sized>(spec: BlobSpec, rng: &mut R) -> Result<Self> {
        if spec.num_classes == 0 || spec.dim == 0 {
            return Err(Error::invalid("blobs need at least one class and one dimension"));
        }
        if !(spec.cluster_std >= 0.0) || !(spec.center_spread >= 0.0) {
            return Err(Error::invalid("blob spreads must be nonnegative"));
        }
        let centers = (0..spec.num_classes)
            .map(|_| {
                (0..spec.dim)
                    .map(|_| 0.5 + spec.center_spread * (2.0 * rng.gen::<f64>() - 1.0))
                    .collect()
            })
            .collect();
        Ok(Self { spec, centers })
    }

    pub fn spec(&self) -> &BlobSpec {
        &self.spec
    }

    /// Draws `n` examples with labels uniform over all classes.
    pub fn sample<T: Scalar, R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Dataset<T> {
        let classes: Vec<usize> = (0..self.spec.num_classes).collect();
        self.sample_classes(n, &classes, rng)
    }

    /// Draws `n` examples with labels uniform over `classes`.
    pub fn sample_classes<T: Scalar, R: Rng + ?Sized>(
        &self,
        n: usize,
        classes: &[usize],
        rng: &mut R,
    ) -> Dataset<T> {
        assert!(!classes.is_empty(), "need at least one class to sample");
        let dim = self.spec.dim;
        let mut data = Vec::with_capacity(n * dim);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let label = classes[rng.gen_range(0..classes.len())];
            for &c in &self.centers[label] {
                let z: f64 = StandardNormal.sample(rng);
                data.push(T::lit((c + self.spec.cluster_std * z).clamp(0.0, 1.0)));
            }
            labels.push(label);
        }
        Dataset::new(
            Matrix::new(n, dim, data).expect("shape by construction"),
            labels,
            self.spec.num_classes,
        )
        .expect("labels in range by construction")
    }
}
