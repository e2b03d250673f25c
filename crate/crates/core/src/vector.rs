//! Dense real vectors and the handful of primitives the rest of the crate builds on.

use std::fmt;
use std::ops::Index;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VectorError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("zero-norm vector")]
    ZeroNorm,
    #[error("vector must have at least one component")]
    Empty,
    #[error("non-finite component at index {index}")]
    NonFinite { index: usize },
}

/// A dense vector of finite `f64` components.
#[derive(Clone, PartialEq, Default)]
pub struct Vector(Vec<f64>);

impl Vector {
    /// Wraps raw components, rejecting empty input and NaN/Inf.
    pub fn new(components: Vec<f64>) -> Result<Self, VectorError> {
        if components.is_empty() {
            return Err(VectorError::Empty);
        }
        if let Some(index) = components.iter().position(|c| !c.is_finite()) {
            return Err(VectorError::NonFinite { index });
        }
        Ok(Self(components))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub(crate) fn from_raw(components: Vec<f64>) -> Self {
        Self(components)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn dot(&self, other: &Vector) -> Result<f64, VectorError> {
        check_dims(self, other)?;
        Ok(dot(&self.0, &other.0))
    }

    pub fn norm(&self) -> f64 {
        dot(&self.0, &self.0).sqrt()
    }

    pub fn scaled(&self, factor: f64) -> Vector {
        Vector(self.0.iter().map(|c| c * factor).collect())
    }

    /// Unit-L2 copy of this vector.
    pub fn normalized(&self) -> Result<Vector, VectorError> {
        let n = self.norm();
        if n == 0.0 {
            return Err(VectorError::ZeroNorm);
        }
        Ok(Vector(self.0.iter().map(|c| c / n).collect()))
    }

    pub fn sub(&self, other: &Vector) -> Result<Vector, VectorError> {
        check_dims(self, other)?;
        Ok(Vector(
            self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect(),
        ))
    }

    pub fn add(&self, other: &Vector) -> Result<Vector, VectorError> {
        check_dims(self, other)?;
        Ok(Vector(
            self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect(),
        ))
    }

    /// `self + factor * other`.
    pub fn axpy(&self, factor: f64, other: &Vector) -> Result<Vector, VectorError> {
        check_dims(self, other)?;
        Ok(Vector(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + factor * b)
                .collect(),
        ))
    }

    /// Removes the component along `unit`, which must already be unit-norm.
    pub fn reject(&self, unit: &Vector) -> Result<Vector, VectorError> {
        let along = self.dot(unit)?;
        self.axpy(-along, unit)
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(&self.0).finish()
    }
}

impl Index<usize> for Vector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl TryFrom<Vec<f64>> for Vector {
    type Error = VectorError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Vector::new(v)
    }
}

impl<'a> IntoIterator for &'a Vector {
    type Item = &'a f64;
    type IntoIter = std::slice::Iter<'a, f64>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

fn check_dims(a: &Vector, b: &Vector) -> Result<(), VectorError> {
    if a.dim() != b.dim() {
        return Err(VectorError::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    Ok(())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cosine similarity, clamped to `[-1, 1]`.
pub fn cosine(u: &Vector, v: &Vector) -> Result<f64, VectorError> {
    check_dims(u, v)?;
    let uu = dot(&u.0, &u.0);
    let vv = dot(&v.0, &v.0);
    if uu == 0.0 || vv == 0.0 {
        return Err(VectorError::ZeroNorm);
    }
    // one square root instead of two keeps parallel vectors at exactly 1 more often
    Ok((dot(&u.0, &v.0) / (uu * vv).sqrt()).clamp(-1.0, 1.0))
}

/// Unweighted mean of equal-dimension vectors.
pub fn mean<'a, I>(vectors: I) -> Result<Vector, VectorError>
where
    I: IntoIterator<Item = &'a Vector>,
{
    let mut iter = vectors.into_iter();
    let first = iter.next().ok_or(VectorError::Empty)?;
    let mut acc = first.0.clone();
    let mut count = 1usize;
    for v in iter {
        check_dims(first, v)?;
        for (a, b) in acc.iter_mut().zip(&v.0) {
            *a += b;
        }
        count += 1;
    }
    if count > 1 {
        let n = count as f64;
        acc.iter_mut().for_each(|a| *a /= n);
    }
    Ok(Vector(acc))
}
