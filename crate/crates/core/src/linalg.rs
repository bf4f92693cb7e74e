//! Small dense complex matrices.
//!
//! The Hilbert spaces here never exceed a few dozen states, so a flat
//! row-major buffer with allocation-free kernels is all the integrators need.
//! Eigen-decompositions are delegated to nalgebra.

use std::ops::{Index, IndexMut};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for k in 0..dim {
            m[(k, k)] = ONE;
        }
        m
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let dim = rows.len();
        let mut m = Self::zeros(dim);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), dim, "matrix must be square");
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = C64::new(v, 0.0);
            }
        }
        m
    }

    /// `|to⟩⟨from|`
    pub fn transition(dim: usize, to: usize, from: usize) -> Self {
        let mut m = Self::zeros(dim);
        m[(to, from)] = ONE;
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn fill_zero(&mut self) {
        self.data.iter_mut().for_each(|z| *z = ZERO);
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        Self {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        let mut out = Self::zeros(self.dim);
        matmul_into(self.as_slice(), other.as_slice(), out.as_mut_slice(), self.dim);
        out
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![ZERO; self.dim];
        matvec_into(self.as_slice(), v, &mut out, self.dim);
        out
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|k| self[(k, k)]).sum()
    }

    /// Largest elementwise modulus of `H − H†`.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self[(i, j)])
    }

    /// Eigen-decomposition of a Hermitian matrix. Eigenvalues ascend; column
    /// `k` of the returned vectors (as `vectors[k]`) belongs to `values[k]`.
    pub fn eigh(&self) -> (Vec<f64>, Vec<Vec<C64>>) {
        let eig = self.to_nalgebra().symmetric_eigen();
        let mut order: Vec<usize> = (0..self.dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = order
            .iter()
            .map(|&k| eig.eigenvectors.column(k).iter().copied().collect())
            .collect();
        (values, vectors)
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let herm = self.add(&self.adjoint()).scale(C64::new(0.5, 0.0));
        herm.to_nalgebra()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.dim + j]
    }
}

/// `out = a · v` for a row-major `n × n` matrix.
#[inline]
pub fn matvec_into(a: &[C64], v: &[C64], out: &mut [C64], n: usize) {
    for (i, o) in out.iter_mut().enumerate().take(n) {
        let row = &a[i * n..(i + 1) * n];
        *o = row.iter().zip(v).map(|(x, y)| x * y).sum();
    }
}

/// `out = a · b` for row-major `n × n` matrices.
#[inline]
pub fn matmul_into(a: &[C64], b: &[C64], out: &mut [C64], n: usize) {
    for i in 0..n {
        for j in 0..n {
            let mut acc = ZERO;
            for k in 0..n {
                acc += a[i * n + k] * b[k * n + j];
            }
            out[i * n + j] = acc;
        }
    }
}

pub fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigh_of_pauli_x() {
        let x = CMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let (vals, vecs) = x.eigh();
        assert!((vals[0] + 1.0).abs() < 1e-14);
        assert!((vals[1] - 1.0).abs() < 1e-14);
        let hv = x.mul_vec(&vecs[1]);
        for (a, b) in hv.iter().zip(&vecs[1]) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn adjoint_and_hermiticity() {
        let mut m = CMatrix::zeros(2);
        m[(0, 1)] = C64::new(1.0, 2.0);
        m[(1, 0)] = C64::new(1.0, -2.0);
        assert_eq!(m.hermiticity_defect(), 0.0);
        m[(1, 0)] = C64::new(1.0, 2.0);
        assert!((m.hermiticity_defect() - 4.0).abs() < 1e-15);
        assert_eq!(m.adjoint().adjoint(), m);
    }

    #[test]
    fn min_eigenvalue_of_projector() {
        let p = CMatrix::transition(3, 1, 1);
        assert!(p.min_eigenvalue().abs() < 1e-15);
        assert!((p.trace().re - 1.0).abs() < 1e-15);
    }
}
