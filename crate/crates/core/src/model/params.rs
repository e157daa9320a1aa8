use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Flat, ordered weights of one model. The layout is owned by the [`ModelSpec`](super::ModelSpec).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterVector(Vec<f64>);

impl ParameterVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        check_len(self, other)?;
        Ok(self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub(crate) fn ensure_finite(self, what: &str) -> Result<Self> {
        if self.is_finite() {
            Ok(self)
        } else {
            Err(Error::Numerical(format!("{what} produced a non-finite value")))
        }
    }
}

impl From<Vec<f64>> for ParameterVector {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

impl AsRef<[f64]> for ParameterVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

fn check_len(x: &ParameterVector, y: &ParameterVector) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::shape(format!(
            "parameter vectors have lengths {} and {}",
            x.len(),
            y.len()
        )));
    }
    Ok(())
}

/// `a * x + y`
pub fn vec_axpy(a: f64, x: &ParameterVector, y: &ParameterVector) -> Result<ParameterVector> {
    check_len(x, y)?;
    let out = x.0.iter().zip(&y.0).map(|(xi, yi)| a * xi + yi).collect();
    ParameterVector(out).ensure_finite("axpy")
}

/// `x - y`
pub fn vec_sub(x: &ParameterVector, y: &ParameterVector) -> Result<ParameterVector> {
    check_len(x, y)?;
    let out = x.0.iter().zip(&y.0).map(|(xi, yi)| xi - yi).collect();
    ParameterVector(out).ensure_finite("sub")
}

pub fn vec_scale(a: f64, x: &ParameterVector) -> Result<ParameterVector> {
    ParameterVector(x.0.iter().map(|v| a * v).collect()).ensure_finite("scale")
}

/// Elementwise mean, summed in the order given. Callers pass vectors in
/// ascending client-id order so the result is bit-reproducible.
pub fn vec_mean<V: AsRef<ParameterVector>>(vectors: &[V]) -> Result<ParameterVector> {
    let first = vectors
        .first()
        .ok_or_else(|| Error::config("mean of an empty set of vectors"))?
        .as_ref();
    let mut sum = vec![0.0; first.len()];
    for v in vectors {
        let v = v.as_ref();
        check_len(first, v)?;
        for (s, x) in sum.iter_mut().zip(&v.0) {
            *s += x;
        }
    }
    let n = vectors.len() as f64;
    ParameterVector(sum.into_iter().map(|s| s / n).collect()).ensure_finite("mean")
}

impl AsRef<ParameterVector> for ParameterVector {
    fn as_ref(&self) -> &ParameterVector {
        self
    }
}

/// One plain SGD step: `params - lr * gradient`.
pub fn sgd_step(params: &ParameterVector, gradient: &ParameterVector, lr: f64) -> Result<ParameterVector> {
    if !(lr >= 0.0 && lr.is_finite()) {
        return Err(Error::config(format!("learning rate must be >= 0, got {lr}")));
    }
    check_len(params, gradient)?;
    let out = params.0.iter().zip(&gradient.0).map(|(p, g)| p - lr * g).collect();
    ParameterVector(out).ensure_finite("sgd step")
}
