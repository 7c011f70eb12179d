//! Banded Cholesky factorization and small dense eigen helpers.
//!
//! Tensor-product spline spaces couple only within a fixed per-axis stencil,
//! so lexicographically ordered stiffness/mass matrices are banded and the
//! band is preserved under Cholesky. That makes a row-stored band LLᵀ the
//! whole sparse-direct story for this crate.

use nalgebra::{DMatrix, DVector};

use crate::discretization::SymmetricSparseMatrix;
use crate::error::{CoreError, Result};

/// Lower-triangular band factor L of A = L Lᵀ in column-major band storage:
/// column j holds L[j..=j+band][j] contiguously, so the left-looking updates
/// and the triangular solves run as contiguous axpy/dot kernels.
pub struct BandedCholesky {
    n: usize,
    band: usize,
    cols: Vec<f64>,
}

#[inline]
fn dot_unrolled(a: &[f64], b: &[f64]) -> f64 {
    let len = a.len().min(b.len());
    let mut acc = [0.0f64; 4];
    let chunks = len / 4;
    for c in 0..chunks {
        let t = 4 * c;
        acc[0] += a[t] * b[t];
        acc[1] += a[t + 1] * b[t + 1];
        acc[2] += a[t + 2] * b[t + 2];
        acc[3] += a[t + 3] * b[t + 3];
    }
    for t in 4 * chunks..len {
        acc[0] += a[t] * b[t];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3])
}

impl BandedCholesky {
    /// Factor a symmetric positive definite sparse matrix.
    pub fn factor(a: &SymmetricSparseMatrix) -> Result<Self> {
        let n = a.dim();
        let band = a.bandwidth();
        let stride = band + 1;
        let mut cols = vec![0.0f64; n * stride];
        // scatter the lower triangle: cols[j*stride + (i−j)] = A[i][j]
        for i in 0..n {
            for (j, v) in a.row_entries(i) {
                if j <= i {
                    cols[j * stride + (i - j)] = v;
                }
            }
        }

        for j in 0..n {
            let reach = band.min(n - 1 - j);
            // left-looking update from columns k that reach row j
            let k_lo = j.saturating_sub(band);
            for k in k_lo..j {
                let off = j - k;
                let ljk = cols[k * stride + off];
                if ljk == 0.0 {
                    continue;
                }
                // rows i = j .. min(k+band, n−1)
                let len = (band - off).min(reach) + 1;
                let (head, tail) = cols.split_at_mut(j * stride);
                let ck = &head[k * stride + off..k * stride + off + len];
                let cj = &mut tail[..len];
                for t in 0..len {
                    cj[t] -= ljk * ck[t];
                }
            }
            let cj = &mut cols[j * stride..j * stride + reach + 1];
            let pivot = cj[0];
            if !(pivot > 0.0) {
                return Err(CoreError::Factorization(format!(
                    "pivot {pivot:.3e} at column {j}: matrix not positive definite (shift too small)"
                )));
            }
            let s = pivot.sqrt();
            cj[0] = s;
            let inv = 1.0 / s;
            for v in cj[1..].iter_mut() {
                *v *= inv;
            }
        }
        Ok(BandedCholesky { n, band, cols })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solve A x = b in place.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        let stride = self.band + 1;
        // forward: column sweeps of L
        for j in 0..self.n {
            let reach = self.band.min(self.n - 1 - j);
            let cj = &self.cols[j * stride..j * stride + reach + 1];
            let xj = x[j] / cj[0];
            x[j] = xj;
            if xj != 0.0 {
                let (_, rest) = x.split_at_mut(j + 1);
                for t in 1..=reach {
                    rest[t - 1] -= cj[t] * xj;
                }
            }
        }
        // backward: contiguous dots against column j
        for j in (0..self.n).rev() {
            let reach = self.band.min(self.n - 1 - j);
            let cj = &self.cols[j * stride..j * stride + reach + 1];
            let s = dot_unrolled(&cj[1..], &x[j + 1..j + 1 + reach]);
            x[j] = (x[j] - s) / cj[0];
        }
    }
}

/// Eigen-decomposition of the dense symmetric pencil (A, B) with B SPD:
/// ascending eigenvalues and B-orthonormal eigenvectors as columns.
pub fn dense_generalized_eigen(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    let chol = b
        .clone()
        .cholesky()
        .ok_or_else(|| CoreError::Solver("reduced mass matrix not positive definite".into()))?;
    let l = chol.l();
    // C = L^{-1} A L^{-T}
    let mut c = a.clone();
    // solve L X = A (column-wise forward substitution)
    for j in 0..n {
        for i in 0..n {
            let mut s = c[(i, j)];
            for k in 0..i {
                s -= l[(i, k)] * c[(k, j)];
            }
            c[(i, j)] = s / l[(i, i)];
        }
    }
    // solve X L^T = C  =>  (L X^T = C^T)
    let mut ct = c.transpose();
    for j in 0..n {
        for i in 0..n {
            let mut s = ct[(i, j)];
            for k in 0..i {
                s -= l[(i, k)] * ct[(k, j)];
            }
            ct[(i, j)] = s / l[(i, i)];
        }
    }
    let sym = 0.5 * (&ct + ct.transpose());
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    // eigenvectors of the pencil: v = L^{-T} w
    let mut vectors = DMatrix::<f64>::zeros(n, n);
    for (col, &oi) in order.iter().enumerate() {
        let mut w: DVector<f64> = eig.eigenvectors.column(oi).into();
        // back substitution L^T v = w
        for i in (0..n).rev() {
            let mut s = w[i];
            for k in i + 1..n {
                s -= l[(k, i)] * w[k];
            }
            w[i] = s / l[(i, i)];
        }
        vectors.set_column(col, &w);
    }
    Ok((values, vectors))
}
