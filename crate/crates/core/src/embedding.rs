//! Unit-norm appearance embeddings.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Tolerance on the Euclidean norm of a stored embedding.
pub const UNIT_NORM_TOL: f64 = 1e-6;

/// Appearance feature vector with unit Euclidean norm.
///
/// Storage is shared, so cloning a detection or a track feature is cheap.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(Arc<[f64]>);

impl Embedding {
    /// Accepts `values` unchanged if they are already unit-norm within
    /// [`UNIT_NORM_TOL`], otherwise rescales them.
    ///
    /// Values decoded from single-precision storage are kept bit-for-bit when
    /// they were written from a unit vector, which keeps file round trips exact.
    pub fn from_unit_or_normalize(values: Vec<f64>) -> Result<Self> {
        let n = norm(&values)?;
        if (n - 1.0).abs() <= UNIT_NORM_TOL {
            Ok(Self(values.into()))
        } else {
            Ok(Self(values.into_iter().map(|v| v / n).collect()))
        }
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Embedding) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(self.0.iter().zip(other.0.iter()).map(|(a, b)| a * b).sum())
    }
}

fn norm(v: &[f64]) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::InvalidEmbedding("empty vector".into()));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidEmbedding("non-finite component".into()));
    }
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::InvalidEmbedding(format!("norm {n} cannot be normalized")));
    }
    Ok(n)
}

/// Scales `v` to unit Euclidean norm.
pub fn normalize(v: &[f64]) -> Result<Embedding> {
    let n = norm(v)?;
    Ok(Embedding(v.iter().map(|x| x / n).collect()))
}

/// Appearance cost `clamp(1 - a·b, 0, 1)`.
pub fn cosine_cost(a: &Embedding, b: &Embedding) -> Result<f64> {
    Ok((1.0 - a.dot(b)?).clamp(0.0, 1.0))
}
