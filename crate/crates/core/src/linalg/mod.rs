//! Dense complex linear algebra used by the lattice, spectral and dynamics
//! modules: a row-major square matrix, LU with partial pivoting, the
//! Schur-based eigensolver and the Padé matrix exponential.

mod eigen;
mod expm;

pub use eigen::{eigen_decompose, hermitian_eigen, schur, EigenvectorPair, Schur};
pub use expm::{expm, PADE_THETA_13};

use std::ops::{Index, IndexMut};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("matrix is empty")]
    Empty,
    #[error("matrix is singular at pivot {pivot}")]
    Singular { pivot: usize },
    #[error(
        "QR iteration failed to converge after {iterations} sweeps \
         (active block {block_start}..={block_end}, last subdiagonal magnitude {subdiagonal:e})"
    )]
    NoConvergence {
        iterations: usize,
        block_start: usize,
        block_end: usize,
        subdiagonal: f64,
    },
    #[error("non-finite entry in matrix")]
    NonFinite,
}

/// Square dense complex matrix stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        Self { dim, data }
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self, LinalgError> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(LinalgError::DimensionMismatch {
                    expected: dim,
                    actual: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.dim).map(|i| self[(i, i)]).collect()
    }

    pub fn conj_transpose(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.dim, other.dim);
        Self {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        debug_assert_eq!(self.dim, other.dim);
        Self {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    /// `self + s * other`
    pub fn add_scaled(&self, other: &Self, s: C64) -> Self {
        debug_assert_eq!(self.dim, other.dim);
        Self {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + s * b).collect(),
        }
    }

    /// Matrix product. Rows are distributed over the thread pool for large
    /// matrices when the `parallel` feature is enabled.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "matmul dimension mismatch");
        let n = self.dim;
        let mut out = vec![ZERO; n * n];
        let row_kernel = |i: usize, out_row: &mut [C64]| {
            let a_row = self.row(i);
            for (k, &a) in a_row.iter().enumerate() {
                if a == ZERO {
                    continue;
                }
                let b_row = other.row(k);
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        };
        exec::for_each_row(&mut out, n, exec::auto_for(n), row_kernel);
        Self { dim: n, data: out }
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(self.dim, x.len(), "matvec dimension mismatch");
        let n = self.dim;
        let mut out = vec![ZERO; n];
        exec::for_each_row(&mut out, 1, exec::auto_for(n), |i, o| {
            o[0] = dot_plain(self.row(i), x);
        });
        out
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        (0..self.dim)
            .map(|j| (0..self.dim).map(|i| self[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn norm_fro(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.dim + j]
    }
}

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: ComplexMatrix,
    perm: Vec<usize>,
}

impl Lu {
    /// Factorizes `a`. Pivots smaller than `pivot_floor` are an error unless
    /// `pivot_floor` is negative, in which case they are replaced by
    /// `-pivot_floor` (the perturbation inverse iteration relies on).
    pub fn factor(a: &ComplexMatrix, pivot_floor: f64) -> Result<Self, LinalgError> {
        let n = a.dim();
        if n == 0 {
            return Err(LinalgError::Empty);
        }
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let (p, pmax) =
                (col..n)
                    .map(|r| (r, lu[(r, col)].norm()))
                    .fold((col, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if p != col {
                for j in 0..n {
                    let tmp = lu[(col, j)];
                    lu[(col, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
                perm.swap(col, p);
            }
            if pmax <= pivot_floor.abs() {
                if pivot_floor < 0.0 {
                    lu[(col, col)] = C64::new(-pivot_floor, 0.0);
                } else {
                    return Err(LinalgError::Singular { pivot: col });
                }
            }
            let pivot = lu[(col, col)];
            for r in col + 1..n {
                let factor = lu[(r, col)] / pivot;
                lu[(r, col)] = factor;
                if factor == ZERO {
                    continue;
                }
                for j in col + 1..n {
                    let u = lu[(col, j)];
                    lu[(r, j)] -= factor * u;
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let n = self.lu.dim();
        let mut x: Vec<C64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = self.lu.row(i);
            let s = row[..i].iter().zip(&x[..i]).map(|(a, b)| a * b).sum::<C64>();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let s = x[i] - row[i + 1..].iter().zip(&x[i + 1..]).map(|(a, b)| a * b).sum::<C64>();
            x[i] = s / row[i];
        }
        x
    }

    /// Solves `A X = B` column by column.
    pub fn solve_matrix(&self, b: &ComplexMatrix) -> ComplexMatrix {
        let n = b.dim();
        let mut out = ComplexMatrix::zeros(n);
        for j in 0..n {
            let col: Vec<C64> = (0..n).map(|i| b[(i, j)]).collect();
            let x = self.solve(&col);
            for i in 0..n {
                out[(i, j)] = x[i];
            }
        }
        out
    }
}

/// Hermitian inner product `<a|b> = sum conj(a_i) b_i`.
pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Bilinear pairing `sum a_i b_i`, used between row (left) eigenvectors and
/// column vectors.
pub fn dot_plain(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Scales `a` to unit 2-norm; returns the original norm.
pub fn normalize(a: &mut [C64]) -> f64 {
    let n = norm2(a);
    if n > 0.0 {
        let inv = 1.0 / n;
        for z in a.iter_mut() {
            *z *= inv;
        }
    }
    n
}

/// Multiplies `a` by the unit phase that makes its largest-magnitude
/// component real and positive.
pub fn fix_phase(a: &mut [C64]) {
    let Some(big) = a.iter().copied().max_by(|x, y| x.norm_sqr().total_cmp(&y.norm_sqr())) else {
        return;
    };
    let mag = big.norm();
    if mag == 0.0 {
        return;
    }
    let phase = big.conj() / mag;
    for z in a.iter_mut() {
        *z *= phase;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn lu_solves_small_system() {
        let a = ComplexMatrix::from_rows(&[
            vec![c(2.0, 1.0), c(1.0, 0.0), c(0.0, 0.0)],
            vec![c(1.0, 0.0), c(3.0, -1.0), c(1.0, 1.0)],
            vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
        ])
        .unwrap();
        let x_true = vec![c(1.0, 2.0), c(-0.5, 0.0), c(0.0, 3.0)];
        let b = a.matvec(&x_true);
        let lu = Lu::factor(&a, 0.0).unwrap();
        let x = lu.solve(&b);
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).norm() < 1e-14);
        }
    }

    #[test]
    fn lu_reports_singular() {
        let a = ComplexMatrix::from_rows(&[vec![ONE, ONE], vec![ONE, ONE]]).unwrap();
        assert!(matches!(Lu::factor(&a, 1e-14), Err(LinalgError::Singular { pivot: 1 })));
        // negative floor perturbs instead of failing
        assert!(Lu::factor(&a, -1e-14).is_ok());
    }

    #[test]
    fn matmul_matches_naive() {
        let a = ComplexMatrix::from_fn(5, |i, j| c(i as f64 - j as f64, (i * j) as f64 * 0.1));
        let b = ComplexMatrix::from_fn(5, |i, j| c((i + 2 * j) as f64, -(i as f64)));
        let p = a.matmul(&b);
        for i in 0..5 {
            for j in 0..5 {
                let s: C64 = (0..5).map(|k| a[(i, k)] * b[(k, j)]).sum();
                assert!((p[(i, j)] - s).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn fix_phase_makes_largest_component_real_positive() {
        let mut v = vec![c(0.1, 0.2), c(0.0, -3.0), c(1.0, 1.0)];
        fix_phase(&mut v);
        assert!(v[1].im.abs() < 1e-15 && v[1].re > 0.0);
        assert!((norm2(&v) - (0.05f64 + 9.0 + 2.0).sqrt()).abs() < 1e-12);
    }
}
