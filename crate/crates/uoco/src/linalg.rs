//! Dense symmetric matrices for the Newton-step expert.
//!
//! The curvature matrices involved are small (d ≤ 64) symmetric positive
//! definite, built from a scaled identity plus rank-one updates. A cyclic
//! Jacobi eigensolver is accurate enough at this size and keeps the crate
//! free of heavyweight linear-algebra dependencies.

use thiserror::Error;

use crate::vecmath::{dot, norm_sq};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    /// A matrix that must be positive definite lost that property,
    /// typically through state corruption.
    #[error("matrix is singular or indefinite (pivot {pivot:e})")]
    SingularMatrix { pivot: f64 },
    /// Jacobi sweeps did not drive the off-diagonal mass below tolerance.
    #[error("eigendecomposition did not converge (off-diagonal {off:e})")]
    EigenNonConvergence { off: f64 },
}

/// Symmetric d×d matrix in row-major full storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn scaled_identity(dim: usize, scale: f64) -> Self {
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = scale;
        }
        SymMatrix { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim);
        (0..self.dim)
            .map(|i| dot(&self.data[i * self.dim..(i + 1) * self.dim], x))
            .collect()
    }

    /// Quadratic form x' A x.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        dot(&self.matvec(x), x)
    }

    /// `A += scale * v v'`.
    pub fn add_outer(&mut self, v: &[f64], scale: f64) {
        assert_eq!(v.len(), self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                self.data[i * self.dim + j] += scale * v[i] * v[j];
            }
        }
    }

    /// `A += c * I`.
    pub fn add_diagonal(&mut self, c: f64) {
        for i in 0..self.dim {
            self.data[i * self.dim + i] += c;
        }
    }

    /// Sherman–Morrison update of an inverse: replaces `self` (holding
    /// A⁻¹) with (A + v v')⁻¹. Fails if the denominator collapses.
    pub fn sherman_morrison_inverse_update(&mut self, v: &[f64]) -> Result<(), LinalgError> {
        let u = self.matvec(v);
        let denom = 1.0 + dot(v, &u);
        if !(denom.is_finite() && denom > 1e-300) {
            return Err(LinalgError::SingularMatrix { pivot: denom });
        }
        self.add_outer(&u, -1.0 / denom);
        Ok(())
    }

    /// Eigendecomposition by cyclic Jacobi rotations: A = V diag(w) V'.
    ///
    /// Returns the eigenvalues `w` and the orthogonal matrix `V` whose
    /// columns are the eigenvectors. Sweeps run until the off-diagonal
    /// Frobenius norm falls below 1e-12 relative to the matrix scale.
    pub fn jacobi_eigen(&self) -> Result<Eigen, LinalgError> {
        let d = self.dim;
        let mut a = self.clone();
        let mut v = SymMatrix::scaled_identity(d, 1.0);
        let scale = norm_sq(&self.data).sqrt().max(1e-300);
        let tol = 1e-12 * scale;

        for _sweep in 0..100 {
            let mut off = 0.0;
            for i in 0..d {
                for j in (i + 1)..d {
                    off += a.get(i, j) * a.get(i, j);
                }
            }
            let off = (2.0 * off).sqrt();
            if off <= tol {
                let w = (0..d).map(|i| a.get(i, i)).collect();
                return Ok(Eigen { values: w, vectors: v });
            }
            for p in 0..d {
                for q in (p + 1)..d {
                    let apq = a.get(p, q);
                    if apq.abs() <= tol / (d as f64) {
                        continue;
                    }
                    let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    // Rotate rows/columns p and q of A.
                    for k in 0..d {
                        let akp = a.get(k, p);
                        let akq = a.get(k, q);
                        a.set(k, p, c * akp - s * akq);
                        a.set(k, q, s * akp + c * akq);
                    }
                    for k in 0..d {
                        let apk = a.get(p, k);
                        let aqk = a.get(q, k);
                        a.set(p, k, c * apk - s * aqk);
                        a.set(q, k, s * apk + c * aqk);
                    }
                    // Accumulate the rotation into V (columns are eigenvectors).
                    for k in 0..d {
                        let vkp = v.get(k, p);
                        let vkq = v.get(k, q);
                        v.set(k, p, c * vkp - s * vkq);
                        v.set(k, q, s * vkp + c * vkq);
                    }
                }
            }
        }
        let mut off = 0.0;
        for i in 0..d {
            for j in (i + 1)..d {
                off += a.get(i, j) * a.get(i, j);
            }
        }
        Err(LinalgError::EigenNonConvergence { off: (2.0 * off).sqrt() })
    }
}

/// Result of [`SymMatrix::jacobi_eigen`].
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    /// Orthogonal matrix with eigenvectors as columns.
    pub vectors: SymMatrix,
}

impl Eigen {
    /// Coordinates of `x` in the eigenbasis, i.e. V' x.
    pub fn to_basis(&self, x: &[f64]) -> Vec<f64> {
        let d = self.values.len();
        (0..d)
            .map(|j| (0..d).map(|k| self.vectors.get(k, j) * x[k]).sum())
            .collect()
    }

    /// Map eigenbasis coordinates back: V z.
    pub fn from_basis(&self, z: &[f64]) -> Vec<f64> {
        self.vectors.matvec(z)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}
