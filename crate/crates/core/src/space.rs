//! Finite-dimensional real inner-product space primitives.
//!
//! Vectors are dense `f64` coordinate lists with a fixed dimension. Every
//! operation combining two vectors checks the dimensions and fails on a
//! mismatch; nothing is broadcast.

use std::fmt;
use std::ops::Index;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute slack used when a quantity has no natural scale.
pub const ABS_EPS: f64 = 1e-12;

/// A point of `R^d` with finite coordinates.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::EmptyVector);
        }
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Vector(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be at least 1");
        Vector(vec![0.0; dim])
    }

    pub fn scalar(value: f64) -> Result<Self> {
        Vector::new(vec![value])
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

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0.0)
    }

    pub(crate) fn check_dim(&self, other: &Vector) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(())
    }

    /// Componentwise `self - other`.
    pub fn sub(&self, other: &Vector) -> Result<Vector> {
        self.check_dim(other)?;
        Vector::new(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    /// Euclidean distance `‖self - other‖` without materializing the difference.
    pub fn distance(&self, other: &Vector) -> Result<f64> {
        self.check_dim(other)?;
        Ok(self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }

    pub fn distance_squared(&self, other: &Vector) -> Result<f64> {
        self.check_dim(other)?;
        Ok(self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum())
    }
}

impl Index<usize> for Vector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl TryFrom<Vec<f64>> for Vector {
    type Error = Error;

    fn try_from(coords: Vec<f64>) -> Result<Self> {
        Vector::new(coords)
    }
}

impl From<Vector> for Vec<f64> {
    fn from(v: Vector) -> Vec<f64> {
        v.0
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(&self.0).finish()
    }
}

/// `Σ x[i]·y[i]`.
pub fn inner(x: &Vector, y: &Vector) -> Result<f64> {
    x.check_dim(y)?;
    Ok(x.0.iter().zip(&y.0).map(|(a, b)| a * b).sum())
}

pub fn norm(x: &Vector) -> f64 {
    x.0.iter().map(|c| c * c).sum::<f64>().sqrt()
}

fn check_lambda(lambda: f64) -> Result<()> {
    if (0.0..=1.0).contains(&lambda) {
        Ok(())
    } else {
        Err(Error::LambdaOutOfRange(lambda))
    }
}

/// `λ·x + (1−λ)·y`, componentwise.
pub fn convex_combination(lambda: f64, x: &Vector, y: &Vector) -> Result<Vector> {
    check_lambda(lambda)?;
    x.check_dim(y)?;
    let mu = 1.0 - lambda;
    Ok(Vector(
        x.0.iter()
            .zip(&y.0)
            .map(|(a, b)| lambda * a + mu * b)
            .collect(),
    ))
}

/// Floating-point defect of the Hilbert-space identity
///
/// ```text
/// ‖λx + (1−λ)y − z‖² = λ‖x−z‖² + (1−λ)‖y−z‖² − λ(1−λ)‖x−y‖²
/// ```
///
/// returned as left side minus right side. Both sides are evaluated
/// directly, so the result is pure rounding error.
pub fn lemma18_defect(lambda: f64, x: &Vector, y: &Vector, z: &Vector) -> Result<f64> {
    check_lambda(lambda)?;
    x.check_dim(y)?;
    x.check_dim(z)?;
    let mu = 1.0 - lambda;
    let lhs: f64 = (0..x.dim())
        .map(|i| {
            let c = lambda * x[i] + mu * y[i] - z[i];
            c * c
        })
        .sum();
    let rhs = lambda * x.distance_squared(z)? + mu * y.distance_squared(z)?
        - lambda * mu * x.distance_squared(y)?;
    Ok(lhs - rhs)
}

/// Closed axis-aligned box `[lower, upper]`, the domain `C` of an operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    lower: Vector,
    upper: Vector,
}

impl BoxDomain {
    pub fn new(lower: Vector, upper: Vector) -> Result<Self> {
        lower.check_dim(&upper)?;
        if let Some(i) = (0..lower.dim()).find(|&i| lower[i] > upper[i]) {
            return Err(Error::InvalidBox(i));
        }
        Ok(BoxDomain { lower, upper })
    }

    /// The cube `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        BoxDomain::new(Vector::new(vec![lo; dim])?, Vector::new(vec![hi; dim])?)
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        BoxDomain::cube(1, lo, hi)
    }

    pub fn dim(&self) -> usize {
        self.lower.dim()
    }

    pub fn lower(&self) -> &Vector {
        &self.lower
    }

    pub fn upper(&self) -> &Vector {
        &self.upper
    }

    /// True when every coordinate interval is a single point.
    pub fn is_degenerate(&self) -> bool {
        self.lower == self.upper
    }

    pub fn contains(&self, x: &Vector) -> Result<bool> {
        self.contains_within(x, 0.0)
    }

    /// Membership with a relative slack `rel_tol·max(1, |bound|)` on each face.
    pub fn contains_within(&self, x: &Vector, rel_tol: f64) -> Result<bool> {
        self.lower.check_dim(x)?;
        Ok((0..x.dim()).all(|i| {
            let lo = self.lower[i];
            let hi = self.upper[i];
            x[i] >= lo - rel_tol * lo.abs().max(1.0) && x[i] <= hi + rel_tol * hi.abs().max(1.0)
        }))
    }

    /// Draw a point uniformly from the box.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector {
        Vector(
            (0..self.dim())
                .map(|i| {
                    let u: f64 = rng.gen();
                    let lo = self.lower[i];
                    (lo + u * (self.upper[i] - lo)).min(self.upper[i])
                })
                .collect(),
        )
    }
}

/// Componentwise clamp of `x` into the box.
pub fn project_box(x: &Vector, c: &BoxDomain) -> Result<Vector> {
    c.lower.check_dim(x)?;
    Ok(Vector(
        (0..x.dim())
            .map(|i| x[i].clamp(c.lower[i], c.upper[i]))
            .collect(),
    ))
}

/// Dense square matrix stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    dim: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn from_row_major(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.len() != dim * dim {
            return Err(Error::NotSquare {
                rows: dim,
                len: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Matrix { dim, data })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.len();
        let len = rows.iter().map(Vec::len).sum();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::NotSquare { rows: dim, len });
        }
        Matrix::from_row_major(dim, rows.into_iter().flatten().collect())
    }

    pub fn zeros(dim: usize) -> Self {
        Matrix {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn diagonal(entries: &[f64]) -> Result<Self> {
        let dim = entries.len();
        let mut m = Matrix::zeros(dim);
        for (i, &e) in entries.iter().enumerate() {
            m.data[i * dim + i] = e;
        }
        Matrix::from_row_major(dim, m.data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.dim + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.dim..(row + 1) * self.dim]
    }

    pub fn scaled(&self, factor: f64) -> Matrix {
        Matrix {
            dim: self.dim,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    /// `self · x` as a raw coordinate list (finiteness is checked by callers).
    pub(crate) fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|r| self.row(r).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn mul_vec(&self, x: &Vector) -> Result<Vector> {
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.dim(),
            });
        }
        Vector::new(self.apply(x.as_slice()))
    }

    pub(crate) fn to_nalgebra(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }

    /// Largest singular value.
    pub fn spectral_norm(&self) -> f64 {
        self.to_nalgebra()
            .singular_values()
            .iter()
            .copied()
            .fold(0.0, f64::max)
    }
}
