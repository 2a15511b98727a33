//! Fully connected network with ReLU hidden layers and a softmax output,
//! trained with mean cross-entropy.
//!
//! Parameters live in one flat vector so gradients, sparse updates and SGD
//! steps all index the same space. Layout, layer by layer from the input:
//! the `out x in` weight matrix in row-major order (row = output unit),
//! followed by the `out` biases. A [`SparseUpdate`](super::SparseUpdate)
//! index therefore means the same parameter on every party that shares the
//! layer dimensions.

use std::ops::{Index, IndexMut};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::matrix::Matrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Flat gradient (or parameter delta) in the model's parameter layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseGradient<T>(Vec<T>);

impl<T: Scalar> DenseGradient<T> {
    pub fn new(values: Vec<T>) -> Self {
        Self(values)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![T::zero(); len])
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<T> {
        self.0
    }

    pub fn l2_norm(&self) -> T {
        self.0.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    pub fn scale(&mut self, factor: T) {
        for v in &mut self.0 {
            *v *= factor;
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        debug_assert_eq!(self.len(), other.len());
        for (a, &b) in self.0.iter_mut().zip(&other.0) {
            *a += b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl<T> Index<usize> for DenseGradient<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

impl<T> IndexMut<usize> for DenseGradient<T> {
    fn index_mut(&mut self, i: usize) -> &mut T {
        &mut self.0[i]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel<T> {
    dims: Vec<usize>,
    params: Vec<T>,
}

/// Offsets of one layer inside the flat parameter vector.
#[derive(Debug, Clone, Copy)]
struct LayerSpan {
    inputs: usize,
    outputs: usize,
    weights: usize,
    biases: usize,
}

fn layer_spans(dims: &[usize]) -> Vec<LayerSpan> {
    let mut offset = 0;
    dims.windows(2)
        .map(|w| {
            let span = LayerSpan {
                inputs: w[0],
                outputs: w[1],
                weights: offset,
                biases: offset + w[0] * w[1],
            };
            offset += w[0] * w[1] + w[1];
            span
        })
        .collect()
}

pub fn parameter_count(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl<T: Scalar> MlpModel<T> {
    /// All-zero parameters. Outputs are uniform over classes.
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        Self::validate_dims(dims)?;
        Ok(Self {
            dims: dims.to_vec(),
            params: vec![T::zero(); parameter_count(dims)],
        })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn random<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Result<Self> {
        let mut model = Self::zeros(dims)?;
        for span in layer_spans(dims) {
            let limit = (6.0 / (span.inputs + span.outputs) as f64).sqrt();
            for p in &mut model.params[span.weights..span.biases] {
                *p = T::lit(rng.gen_range(-limit..limit));
            }
        }
        Ok(model)
    }

    pub fn from_params(dims: &[usize], params: Vec<T>) -> Result<Self> {
        Self::validate_dims(dims)?;
        let expected = parameter_count(dims);
        if params.len() != expected {
            return Err(Error::DimensionMismatch {
                context: "model parameters",
                expected,
                found: params.len(),
            });
        }
        Ok(Self {
            dims: dims.to_vec(),
            params,
        })
    }

    fn validate_dims(dims: &[usize]) -> Result<()> {
        if dims.len() < 2 || dims.iter().any(|&d| d == 0) {
            return Err(Error::invalid(
                "an MLP needs at least input and output layers, all nonempty",
            ));
        }
        Ok(())
    }

    #[inline]
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    #[inline]
    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    #[inline]
    pub fn num_classes(&self) -> usize {
        *self.dims.last().expect("validated")
    }

    #[inline]
    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    #[inline]
    pub fn params(&self) -> &[T] {
        &self.params
    }

    #[inline]
    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    /// Runs one example forward, leaving every layer's activation in `acts`
    /// (`acts[0]` is the input, the last entry the softmax output).
    fn forward_into(&self, x: &[T], acts: &mut Vec<Vec<T>>) {
        acts.clear();
        acts.push(x.to_vec());
        let spans = layer_spans(&self.dims);
        let last = spans.len() - 1;
        for (l, span) in spans.iter().enumerate() {
            let input = &acts[l];
            let mut out = Vec::with_capacity(span.outputs);
            for o in 0..span.outputs {
                let row = &self.params[span.weights + o * span.inputs..][..span.inputs];
                let mut z = self.params[span.biases + o];
                for (&w, &a) in row.iter().zip(input) {
                    z += w * a;
                }
                out.push(if l < last { z.max(T::zero()) } else { z });
            }
            if l == last {
                softmax_in_place(&mut out);
            }
            acts.push(out);
        }
    }

    /// Class probabilities, one row per input row.
    pub fn forward(&self, features: &Matrix<T>) -> Result<Matrix<T>> {
        if features.cols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "forward input",
                expected: self.input_dim(),
                found: features.cols(),
            });
        }
        let k = self.num_classes();
        let mut out = Vec::with_capacity(features.rows() * k);
        let mut acts = Vec::new();
        for row in features.iter_rows() {
            self.forward_into(row, &mut acts);
            out.extend_from_slice(acts.last().expect("output layer"));
        }
        Matrix::new(features.rows(), k, out)
    }

    /// Accumulates the cross-entropy gradient of one example into `grad`.
    fn accumulate_example(&self, x: &[T], label: usize, acts: &mut Vec<Vec<T>>, grad: &mut [T]) {
        self.forward_into(x, acts);
        let spans = layer_spans(&self.dims);
        let mut delta: Vec<T> = acts.last().expect("output").clone();
        delta[label] -= T::one();
        for (l, span) in spans.iter().enumerate().rev() {
            let input = &acts[l];
            for o in 0..span.outputs {
                let d = delta[o];
                if d == T::zero() {
                    continue;
                }
                let g = &mut grad[span.weights + o * span.inputs..][..span.inputs];
                for (gw, &a) in g.iter_mut().zip(input) {
                    *gw += d * a;
                }
                grad[span.biases + o] += d;
            }
            if l > 0 {
                let mut prev = vec![T::zero(); span.inputs];
                for o in 0..span.outputs {
                    let d = delta[o];
                    if d == T::zero() {
                        continue;
                    }
                    let row = &self.params[span.weights + o * span.inputs..][..span.inputs];
                    for (p, &w) in prev.iter_mut().zip(row) {
                        *p += w * d;
                    }
                }
                // ReLU derivative: hidden activation is zero exactly when the unit is off.
                for (p, &a) in prev.iter_mut().zip(input) {
                    if a <= T::zero() {
                        *p = T::zero();
                    }
                }
                delta = prev;
            }
        }
    }

    fn check_batch(&self, batch: &Dataset<T>) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::Empty("gradient batch"));
        }
        if batch.dim() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "batch features",
                expected: self.input_dim(),
                found: batch.dim(),
            });
        }
        if let Some(&l) = batch.labels().iter().find(|&&l| l >= self.num_classes()) {
            return Err(Error::invalid(format!("label {l} exceeds model outputs")));
        }
        Ok(())
    }

    /// Mean cross-entropy gradient over `batch`.
    pub fn backward(&self, batch: &Dataset<T>) -> Result<DenseGradient<T>> {
        self.check_batch(batch)?;
        let mut grad = vec![T::zero(); self.param_count()];
        let mut acts = Vec::new();
        for (x, &y) in batch.features().iter_rows().zip(batch.labels()) {
            self.accumulate_example(x, y, &mut acts, &mut grad);
        }
        let inv = T::one() / T::from_count(batch.len());
        for g in &mut grad {
            *g *= inv;
        }
        Ok(DenseGradient(grad))
    }

    /// One gradient per example, in batch order.
    pub fn per_example_gradients(&self, batch: &Dataset<T>) -> Result<Vec<DenseGradient<T>>> {
        self.check_batch(batch)?;
        let mut acts = Vec::new();
        Ok(batch
            .features()
            .iter_rows()
            .zip(batch.labels())
            .map(|(x, &y)| {
                let mut grad = vec![T::zero(); self.param_count()];
                self.accumulate_example(x, y, &mut acts, &mut grad);
                DenseGradient(grad)
            })
            .collect())
    }

    /// Mean cross-entropy loss.
    pub fn loss(&self, batch: &Dataset<T>) -> Result<T> {
        self.check_batch(batch)?;
        let probs = self.forward(batch.features())?;
        let floor = T::min_positive_value();
        let total: T = batch
            .labels()
            .iter()
            .enumerate()
            .map(|(i, &y)| -probs.get(i, y).max(floor).ln())
            .sum();
        Ok(total / T::from_count(batch.len()))
    }

    /// `w <- w - lr * g`.
    pub fn sgd_step(&mut self, gradient: &DenseGradient<T>, learning_rate: T) -> Result<()> {
        self.add_scaled(gradient, -learning_rate)
    }

    /// `w <- w + factor * delta`.
    pub fn add_scaled(&mut self, delta: &DenseGradient<T>, factor: T) -> Result<()> {
        if delta.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                context: "gradient length",
                expected: self.param_count(),
                found: delta.len(),
            });
        }
        for (w, &g) in self.params.iter_mut().zip(delta.as_slice()) {
            *w += factor * g;
        }
        Ok(())
    }

    /// `self - base`, as a gradient-shaped delta.
    pub fn delta_from(&self, base: &Self) -> Result<DenseGradient<T>> {
        if base.dims != self.dims {
            return Err(Error::invalid("models have different layer dimensions"));
        }
        Ok(DenseGradient(
            self.params
                .iter()
                .zip(&base.params)
                .map(|(&a, &b)| a - b)
                .collect(),
        ))
    }

    /// Predicted class per row; ties go to the lowest class index.
    pub fn predict(&self, features: &Matrix<T>) -> Result<Vec<usize>> {
        let probs = self.forward(features)?;
        Ok(probs.iter_rows().map(argmax).collect())
    }

    /// Fraction of examples whose argmax prediction equals the label.
    pub fn evaluate(&self, data: &Dataset<T>) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::Empty("evaluation dataset"));
        }
        let predicted = self.predict(data.features())?;
        let correct = predicted
            .iter()
            .zip(data.labels())
            .filter(|(p, y)| p == y)
            .count();
        Ok(correct as f64 / data.len() as f64)
    }
}

fn softmax_in_place<T: Scalar>(z: &mut [T]) {
    let max = z.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

/// Index of the largest value; the first one wins ties.
pub fn argmax<T: Scalar>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Inverse-time learning-rate decay applied once per SGD step:
/// `lr_t = lr_0 / (1 + decay * t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverseTimeDecay {
    pub initial: f64,
    pub decay: f64,
}

impl InverseTimeDecay {
    pub fn rate(&self, step: u64) -> f64 {
        self.initial / (1.0 + self.decay * step as f64)
    }
}

impl Default for InverseTimeDecay {
    fn default() -> Self {
        Self {
            initial: 0.1,
            decay: 1e-7,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy_batch() -> Dataset<f64> {
        Dataset::new(
            Matrix::new(3, 2, vec![0.1, 0.9, 0.8, 0.2, 0.4, 0.4]).unwrap(),
            vec![1, 0, 1],
            2,
        )
        .unwrap()
    }

    #[test]
    fn zero_model_outputs_uniform() {
        let model = MlpModel::<f64>::zeros(&[3, 4, 5]).unwrap();
        let x = Matrix::new(2, 3, vec![1.0, -2.0, 3.0, 0.5, 0.5, 0.5]).unwrap();
        let p = model.forward(&x).unwrap();
        assert!(p.as_slice().iter().all(|&v| (v - 0.2).abs() < 1e-15));
    }

    #[test]
    fn hand_set_two_two_two_forward() {
        // Hidden: identity weights, biases (0, -1). Output: swap, biases 0.
        // x = (2, 0.5): hidden z = (2, -0.5) -> relu (2, 0);
        // output logits = (0, 2) -> softmax = (1/(1+e^2), e^2/(1+e^2)).
        let params = vec![1.0, 0.0, 0.0, 1.0, 0.0, -1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0];
        let model = MlpModel::from_params(&[2, 2, 2], params).unwrap();
        let p = model
            .forward(&Matrix::new(1, 2, vec![2.0, 0.5]).unwrap())
            .unwrap();
        let e2 = 2f64.exp();
        assert!((p.get(0, 0) - 1.0 / (1.0 + e2)).abs() < 1e-12);
        assert!((p.get(0, 1) - e2 / (1.0 + e2)).abs() < 1e-12);
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let model = MlpModel::<f64>::zeros(&[3, 2]).unwrap();
        assert!(model.forward(&Matrix::zeros(1, 4)).is_err());
    }

    #[test]
    fn backward_rejects_empty_batch() {
        let model = MlpModel::<f64>::zeros(&[2, 2]).unwrap();
        assert!(matches!(
            model.backward(&Dataset::empty(2, 2)),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn duplicated_batch_has_same_gradient() {
        let model = MlpModel::<f64>::random(&[2, 3, 2], &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let batch = toy_batch();
        let doubled = batch.concat(&batch).unwrap();
        let g1 = model.backward(&batch).unwrap();
        let g2 = model.backward(&doubled).unwrap();
        for (a, b) in g1.as_slice().iter().zip(g2.as_slice()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn confident_correct_model_is_stationary() {
        // Single linear layer; bias pushes class 1 to probability ~1.
        let model = MlpModel::from_params(&[1, 2], vec![0.0, 0.0, 0.0, 50.0]).unwrap();
        let batch = Dataset::new(Matrix::new(1, 1, vec![0.3]).unwrap(), vec![1], 2).unwrap();
        assert!(model.backward(&batch).unwrap().l2_norm() < 1e-6);
    }

    #[test]
    fn mean_gradient_equals_mean_of_per_example() {
        let model = MlpModel::<f64>::random(&[2, 3, 2], &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let batch = toy_batch();
        let mean = model.backward(&batch).unwrap();
        let per = model.per_example_gradients(&batch).unwrap();
        for i in 0..mean.len() {
            let avg: f64 = per.iter().map(|g| g[i]).sum::<f64>() / 3.0;
            assert!((avg - mean[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn sgd_step_arithmetic() {
        let mut model = MlpModel::from_params(&[1, 1], vec![1.0f64, 1.0]).unwrap();
        model
            .sgd_step(&DenseGradient::new(vec![1.0, 2.0]), 0.1)
            .unwrap();
        assert!((model.params()[0] - 0.9).abs() < 1e-15);
        assert!((model.params()[1] - 0.8).abs() < 1e-15);
        let before = model.clone();
        model
            .sgd_step(&DenseGradient::new(vec![5.0, -3.0]), 0.0)
            .unwrap();
        assert_eq!(model, before);
    }

    #[test]
    fn decay_schedule_per_step() {
        let s = InverseTimeDecay::default();
        assert_eq!(s.rate(0), 0.1);
        assert_eq!(s.rate(1), 0.1 / (1.0 + 1e-7));
    }

    #[test]
    fn evaluate_ties_and_fractions() {
        // Constant zero model: argmax tie -> class 0 everywhere.
        let model = MlpModel::<f64>::zeros(&[1, 2]).unwrap();
        let balanced = Dataset::new(
            Matrix::new(4, 1, vec![0.0, 1.0, 2.0, 3.0]).unwrap(),
            vec![0, 1, 0, 1],
            2,
        )
        .unwrap();
        assert_eq!(model.evaluate(&balanced).unwrap(), 0.5);

        // Weight +1 on class 1, bias +0.5 on class 0: predicts 1 iff x > 0.5.
        let model = MlpModel::from_params(&[1, 2], vec![0.0, 1.0, 0.5, 0.0]).unwrap();
        let three = Dataset::new(
            Matrix::new(3, 1, vec![0.0, 1.0, 2.0]).unwrap(),
            vec![0, 1, 0],
            2,
        )
        .unwrap();
        assert!((model.evaluate(&three).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(model.evaluate(&Dataset::empty(1, 2)).is_err());
    }

    #[test]
    fn works_in_f32() {
        let model = MlpModel::<f32>::random(&[2, 3, 2], &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let batch = Dataset::new(
            Matrix::new(1, 2, vec![0.5f32, 0.25]).unwrap(),
            vec![1],
            2,
        )
        .unwrap();
        let g = model.backward(&batch).unwrap();
        assert_eq!(g.len(), model.param_count());
        assert!(g.is_finite());
    }
}
