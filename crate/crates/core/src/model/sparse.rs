use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A coefficient vector in `R^p` stored by its support.
///
/// The support is strictly increasing and every stored value is a nonzero
/// finite real, so `len()` is the model size `s_theta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SparseRepr", into = "SparseRepr")]
pub struct SparseVector {
    dim: usize,
    support: Vec<usize>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SparseRepr {
    dim: usize,
    support: Vec<usize>,
    values: Vec<f64>,
}

impl TryFrom<SparseRepr> for SparseVector {
    type Error = Error;

    fn try_from(r: SparseRepr) -> Result<Self> {
        SparseVector::new(r.dim, r.support, r.values)
    }
}

impl From<SparseVector> for SparseRepr {
    fn from(v: SparseVector) -> Self {
        SparseRepr {
            dim: v.dim,
            support: v.support,
            values: v.values,
        }
    }
}

impl SparseVector {
    pub fn new(dim: usize, support: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidSparseVector(
                "dimension must be positive".into(),
            ));
        }
        if support.len() != values.len() {
            return Err(Error::InvalidSparseVector(format!(
                "{} indices but {} values",
                support.len(),
                values.len()
            )));
        }
        for w in support.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::InvalidSparseVector(
                    "support must be strictly increasing".into(),
                ));
            }
        }
        if let Some(&last) = support.last() {
            if last >= dim {
                return Err(Error::InvalidSparseVector(format!(
                    "index {last} out of range for dimension {dim}"
                )));
            }
        }
        if let Some(v) = values.iter().find(|v| **v == 0.0 || !v.is_finite()) {
            return Err(Error::InvalidSparseVector(format!(
                "stored value {v} is not a nonzero finite real"
            )));
        }
        Ok(Self {
            dim,
            support,
            values,
        })
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "dimension must be positive");
        Self {
            dim,
            support: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Keeps the exactly-nonzero entries of a dense vector.
    pub fn from_dense(dense: &[f64]) -> Result<Self> {
        let (support, values) = dense
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(j, v)| (j, *v))
            .unzip();
        Self::new(dense.len(), support, values)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Model size `s_theta`.
    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn get(&self, j: usize) -> f64 {
        match self.support.binary_search(&j) {
            Ok(k) => self.values[k],
            Err(_) => 0.0,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.support
            .iter()
            .copied()
            .zip(self.values.iter().copied())
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (j, v) in self.iter() {
            out[j] = v;
        }
        out
    }

    /// Dense `self - other`.
    pub fn sub_dense(&self, other: &SparseVector) -> Vec<f64> {
        let mut out = self.to_dense();
        for (j, v) in other.iter() {
            out[j] -= v;
        }
        out
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }

    pub fn min_abs(&self) -> Option<f64> {
        self.values.iter().map(|v| v.abs()).min_by(f64::total_cmp)
    }

    /// Sets coordinate `j` to the nonzero value `v`, inserting it into the
    /// support if needed. Returns the position within the support.
    pub fn set(&mut self, j: usize, v: f64) -> usize {
        assert!(j < self.dim && v != 0.0 && v.is_finite());
        match self.support.binary_search(&j) {
            Ok(k) => {
                self.values[k] = v;
                k
            }
            Err(k) => {
                self.support.insert(k, j);
                self.values.insert(k, v);
                k
            }
        }
    }

    /// Removes the support entry at position `k`, returning `(index, value)`.
    pub fn remove_at(&mut self, k: usize) -> (usize, f64) {
        (self.support.remove(k), self.values.remove(k))
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}
