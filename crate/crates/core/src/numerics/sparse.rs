use serde::{Deserialize, Serialize};

use super::mlp::{DenseGradient, MlpModel};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A subset of gradient coordinates, sorted by index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseUpdate<T> {
    param_count: usize,
    entries: Vec<(usize, T)>,
}

impl<T: Scalar> SparseUpdate<T> {
    /// Validates that indices are strictly increasing and below `param_count`.
    pub fn new(param_count: usize, entries: Vec<(usize, T)>) -> Result<Self> {
        for w in entries.windows(2) {
            if w[0].0 >= w[1].0 {
                return Err(Error::invalid("sparse indices must be strictly increasing"));
            }
        }
        if let Some(&(index, _)) = entries.last() {
            if index >= param_count {
                return Err(Error::IndexOutOfRange {
                    index,
                    len: param_count,
                });
            }
        }
        Ok(Self {
            param_count,
            entries,
        })
    }

    pub fn empty(param_count: usize) -> Self {
        Self {
            param_count,
            entries: Vec::new(),
        }
    }

    #[inline]
    pub fn param_count(&self) -> usize {
        self.param_count
    }

    #[inline]
    pub fn entries(&self) -> &[(usize, T)] {
        &self.entries
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn negated(&self) -> Self {
        Self {
            param_count: self.param_count,
            entries: self.entries.iter().map(|&(i, v)| (i, -v)).collect(),
        }
    }

    pub fn to_dense(&self) -> DenseGradient<T> {
        let mut dense = DenseGradient::zeros(self.param_count);
        for &(i, v) in &self.entries {
            dense[i] = v;
        }
        dense
    }
}

/// The `k` coordinates of largest magnitude; equal magnitudes prefer the lower index.
pub fn select_largest<T: Scalar>(gradient: &DenseGradient<T>, k: usize) -> Result<SparseUpdate<T>> {
    let len = gradient.len();
    if k > len {
        return Err(Error::invalid(format!(
            "cannot select {k} of {len} gradient entries"
        )));
    }
    let values = gradient.as_slice();
    let mut order: Vec<usize> = (0..len).collect();
    let by_magnitude = |a: &usize, b: &usize| {
        values[*b]
            .abs()
            .partial_cmp(&values[*a].abs())
            .expect("finite gradient")
            .then(a.cmp(b))
    };
    if k < len {
        order.select_nth_unstable_by(k, by_magnitude);
    }
    let mut chosen = order[..k].to_vec();
    chosen.sort_unstable();
    Ok(SparseUpdate {
        param_count: len,
        entries: chosen.into_iter().map(|i| (i, values[i])).collect(),
    })
}

/// Adds every update into the model's flat parameters.
///
/// Contributions are summed per index in a canonical order (ascending
/// index, then value) before touching the parameters, so the result is
/// bitwise independent of the order of `updates`.
pub fn apply_updates<T: Scalar>(model: &mut MlpModel<T>, updates: &[SparseUpdate<T>]) -> Result<()> {
    let n = model.param_count();
    let mut all: Vec<(usize, T)> = Vec::with_capacity(updates.iter().map(SparseUpdate::len).sum());
    for u in updates {
        if u.param_count != n {
            return Err(Error::DimensionMismatch {
                context: "sparse update size",
                expected: n,
                found: u.param_count,
            });
        }
        if let Some(&(index, _)) = u.entries.iter().find(|(i, _)| *i >= n) {
            return Err(Error::IndexOutOfRange { index, len: n });
        }
        all.extend_from_slice(&u.entries);
    }
    all.sort_unstable_by(|a, b| {
        a.0.cmp(&b.0)
            .then_with(|| a.1.partial_cmp(&b.1).expect("finite update"))
    });
    let params = model.params_mut();
    let mut k = 0;
    while k < all.len() {
        let index = all[k].0;
        let mut sum = T::zero();
        while k < all.len() && all[k].0 == index {
            sum += all[k].1;
            k += 1;
        }
        params[index] += sum;
    }
    Ok(())
}
