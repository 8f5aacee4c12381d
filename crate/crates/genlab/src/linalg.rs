//! Dense real linear algebra: row-major matrices, a cyclic Jacobi
//! eigensolver for symmetric matrices, null-space bases, minimum-norm
//! solutions of underdetermined systems, and the norm collection used by the
//! bounds engine.
//!
//! Everything here operates on small dense matrices (at most ~1k rows); the
//! Jacobi sweep is chosen for robustness, not speed. Numerical rank uses a
//! relative threshold of `1e-10` on singular values.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative threshold under which singular/eigen values count as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric: |A[{i}][{j}] - A[{j}][{i}]| = {diff:.3e} exceeds tolerance")]
    NotSymmetric { i: usize, j: usize, diff: f64 },
    #[error("non-finite entry at ({i}, {j})")]
    NotFinite { i: usize, j: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },
    #[error("rank-deficient matrix: required rank {required}, numerical rank {found}")]
    RankDeficient { required: usize, found: usize },
    #[error("data length {got} does not match {rows}x{cols}")]
    BadDataLength { rows: usize, cols: usize, got: usize },
    #[error("Jacobi eigensolver failed to converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
}

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Build from row-major data, rejecting wrong lengths and non-finite
    /// entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::BadDataLength {
                rows,
                cols,
                got: data.len(),
            });
        }
        let m = Self { rows, cols, data };
        m.check_finite()?;
        Ok(m)
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self, LinalgError> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(LinalgError::DimensionMismatch {
                    expected: format!("{c} columns"),
                    got: format!("{} columns", row.len()),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_vec(r, c, data)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.data[i * cols + j] = f(i, j);
            }
        }
        m
    }

    /// Column vector from a slice.
    pub fn column(v: &[f64]) -> Self {
        Self {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    pub fn check_finite(&self) -> Result<(), LinalgError> {
        for (idx, &v) in self.data.iter().enumerate() {
            if !v.is_finite() {
                return Err(LinalgError::NotFinite {
                    i: idx / self.cols.max(1),
                    j: idx % self.cols.max(1),
                });
            }
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col_vec(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix, LinalgError> {
        if self.cols != other.rows {
            return Err(LinalgError::DimensionMismatch {
                expected: format!("{} rows", self.cols),
                got: format!("{} rows", other.rows),
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let lhs = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(lhs) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if self.cols != v.len() {
            return Err(LinalgError::DimensionMismatch {
                expected: format!("vector of length {}", self.cols),
                got: format!("length {}", v.len()),
            });
        }
        Ok((0..self.rows)
            .map(|i| dot(self.row(i), v))
            .collect())
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix, LinalgError> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix, LinalgError> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix, LinalgError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(LinalgError::DimensionMismatch {
                expected: format!("{}x{}", self.rows, self.cols),
                got: format!("{}x{}", other.rows, other.cols),
            });
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| v * s).collect(),
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Outer product `u v^T` scaled by `s`, accumulated into `self`.
    pub fn add_scaled_outer(&mut self, u: &[f64], v: &[f64], s: f64) {
        debug_assert_eq!(u.len(), self.rows);
        debug_assert_eq!(v.len(), self.cols);
        for (i, &ui) in u.iter().enumerate() {
            let f = s * ui;
            if f == 0.0 {
                continue;
            }
            let row = &mut self.data[i * self.cols..(i + 1) * self.cols];
            for (d, &vj) in row.iter_mut().zip(v) {
                *d += f * vj;
            }
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn l1_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

pub fn l2_norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

pub fn linf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Eigendecomposition of a symmetric matrix: `A = U diag(eigenvalues) U^T`
/// with eigenvalues sorted descending and orthonormal eigenvector columns.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub eigenvalues: Vec<f64>,
    /// Eigenvectors as columns, in eigenvalue order.
    pub vectors: Matrix,
}

impl SymEig {
    pub fn eigenvector(&self, j: usize) -> Vec<f64> {
        self.vectors.col_vec(j)
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Rejects non-square, non-finite, or asymmetric (beyond `1e-10` relative)
/// input. Convergence: off-diagonal Frobenius mass below `1e-12 * ||A||_F`,
/// at most 100 sweeps. Eigenvector sign is fixed so the largest-magnitude
/// component of each vector is positive.
pub fn sym_eig(a: &Matrix) -> Result<SymEig, LinalgError> {
    if a.rows != a.cols {
        return Err(LinalgError::NotSquare {
            rows: a.rows,
            cols: a.cols,
        });
    }
    a.check_finite()?;
    let n = a.rows;
    let scale = a.max_abs().max(1.0);
    for i in 0..n {
        for j in (i + 1)..n {
            let diff = (a.get(i, j) - a.get(j, i)).abs();
            if diff > 1e-10 * scale {
                return Err(LinalgError::NotSymmetric { i, j, diff });
            }
        }
    }
    if n == 0 {
        return Ok(SymEig {
            eigenvalues: vec![],
            vectors: Matrix::zeros(0, 0),
        });
    }

    // Work on the symmetrized copy so tiny asymmetries cannot bias rotations.
    let mut m = Matrix::from_fn(n, n, |i, j| 0.5 * (a.get(i, j) + a.get(j, i)));
    let mut vecs = Matrix::identity(n);
    let threshold = 1e-12 * m.frobenius_norm();

    let max_sweeps = 100;
    let mut converged = false;
    for _ in 0..max_sweeps {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m.get(i, j) * m.get(i, j);
            }
        }
        if (2.0 * off).sqrt() <= threshold {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                for k in 0..n {
                    let vkp = vecs.get(k, p);
                    let vkq = vecs.get(k, q);
                    vecs.set(k, p, c * vkp - s * vkq);
                    vecs.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    if !converged {
        // One final check; the sweep loop updates in place so the last sweep
        // may have reached the threshold.
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m.get(i, j) * m.get(i, j);
            }
        }
        if (2.0 * off).sqrt() > threshold {
            return Err(LinalgError::NoConvergence { sweeps: max_sweeps });
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| m.get(i, i)).collect();
    order.sort_by(|&i, &j| diag[j].partial_cmp(&diag[i]).unwrap());

    let eigenvalues: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (new_j, &old_j) in order.iter().enumerate() {
        let mut col: Vec<f64> = (0..n).map(|i| vecs.get(i, old_j)).collect();
        // Deterministic sign: largest-magnitude component positive.
        let mut pivot = 0;
        for (i, &v) in col.iter().enumerate() {
            if v.abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        if col[pivot] < 0.0 {
            for v in &mut col {
                *v = -*v;
            }
        }
        for (i, &v) in col.iter().enumerate() {
            vectors.set(i, new_j, v);
        }
    }

    Ok(SymEig {
        eigenvalues,
        vectors,
    })
}

/// Singular values of `M` (descending), via the spectrum of `M^T M` or
/// `M M^T`, whichever is smaller.
pub fn singular_values(m: &Matrix) -> Result<Vec<f64>, LinalgError> {
    let gram = if m.rows <= m.cols {
        m.matmul(&m.transpose())?
    } else {
        m.transpose().matmul(m)?
    };
    let eig = sym_eig(&gram)?;
    Ok(eig
        .eigenvalues
        .iter()
        .map(|&l| l.max(0.0).sqrt())
        .collect())
}

/// Numerical rank with the crate-wide relative tolerance.
///
/// The threshold applies to the Gram-matrix eigenvalues (the spectrum we
/// actually compute); squaring the spectrum means true zeros sit around
/// machine noise relative to the largest eigenvalue, far below the cutoff.
pub fn rank(m: &Matrix) -> Result<usize, LinalgError> {
    let gram = if m.rows <= m.cols {
        m.matmul(&m.transpose())?
    } else {
        m.transpose().matmul(m)?
    };
    let eig = sym_eig(&gram)?;
    let top = eig.eigenvalues.first().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return Ok(0);
    }
    Ok(eig
        .eigenvalues
        .iter()
        .filter(|&&l| l >= RANK_TOLERANCE * top)
        .count())
}

/// Orthonormal basis of the null space of `M`, as matrix columns.
///
/// A full-rank (in columns) matrix yields a 0-column result. Basis vectors
/// come from the small-eigenvalue eigenvectors of `M^T M`.
pub fn null_space_basis(m: &Matrix) -> Result<Matrix, LinalgError> {
    m.check_finite()?;
    let gram = m.transpose().matmul(m)?;
    let eig = sym_eig(&gram)?;
    let top = eig.eigenvalues.first().copied().unwrap_or(0.0);
    let n = m.cols;
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for j in 0..n {
        if top <= 0.0 || eig.eigenvalues[j] < RANK_TOLERANCE * top {
            cols.push(eig.eigenvector(j));
        }
    }
    let mut basis = Matrix::zeros(n, cols.len());
    for (j, col) in cols.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            basis.set(i, j, v);
        }
    }
    Ok(basis)
}

/// Minimum-Frobenius-norm solution of `Phi w = Y` for a full-row-rank `Phi`.
///
/// Requires `rank(Phi) = rows(Phi)`; rank-deficient inputs are rejected. The
/// returned `w` lies in the row space of `Phi`.
pub fn min_norm_solution(phi: &Matrix, y: &Matrix) -> Result<Matrix, LinalgError> {
    if y.rows != phi.rows {
        return Err(LinalgError::DimensionMismatch {
            expected: format!("{} target rows", phi.rows),
            got: format!("{}", y.rows),
        });
    }
    let m = phi.rows;
    let found = rank(phi)?;
    if found < m {
        return Err(LinalgError::RankDeficient {
            required: m,
            found,
        });
    }
    pinv_solve(phi, y)
}

/// Minimum-norm least-squares solution `w = M^+ B` via the eigendecomposition
/// of `M M^T`. Valid for any rank.
pub fn pinv_solve(m: &Matrix, b: &Matrix) -> Result<Matrix, LinalgError> {
    let gram = m.matmul(&m.transpose())?;
    let eig = sym_eig(&gram)?;
    let top = eig.eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
    let cutoff = top * RANK_TOLERANCE;
    // w = M^T U diag(1/lambda) U^T B over the numerically nonzero spectrum.
    let ut_b = eig.vectors.transpose().matmul(b)?;
    let mut scaled = ut_b;
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        let inv = if lambda > cutoff && lambda > 0.0 {
            1.0 / lambda
        } else {
            0.0
        };
        for c in 0..scaled.cols() {
            let v = scaled.get(j, c);
            scaled.set(j, c, v * inv);
        }
    }
    let u_scaled = eig.vectors.matmul(&scaled)?;
    m.transpose().matmul(&u_scaled)
}

/// The norm collection used throughout the bounds engine. Vector norms treat
/// the matrix entries as one flat vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    pub frobenius: f64,
    pub spectral: f64,
    pub max_abs: f64,
    pub l1_vector: f64,
    pub l2_vector: f64,
    pub linf_vector: f64,
}

pub fn norms(a: &Matrix) -> Result<Norms, LinalgError> {
    let sv = singular_values(a)?;
    Ok(Norms {
        frobenius: a.frobenius_norm(),
        spectral: sv.first().copied().unwrap_or(0.0),
        max_abs: a.max_abs(),
        l1_vector: l1_norm(a.data()),
        l2_vector: l2_norm(a.data()),
        linf_vector: linf_norm(a.data()),
    })
}

/// Spectral norm (largest singular value).
pub fn spectral_norm(a: &Matrix) -> Result<f64, LinalgError> {
    Ok(singular_values(a)?.first().copied().unwrap_or(0.0))
}
