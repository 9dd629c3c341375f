// Copyright 2026 The ionzeno Authors
// SPDX-License-Identifier: Apache-2.0

//! Small dense/sparse helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// `e^{iθ}`
#[inline]
pub fn phase(theta: f64) -> C64 {
    C64::from_polar(1.0, theta)
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMatrix::zeros(ar * br, ac * bc);
    for j in 0..ac {
        for i in 0..ar {
            let aij = a[(i, j)];
            if aij == ZERO {
                continue;
            }
            for q in 0..bc {
                for p in 0..br {
                    out[(i * br + p, j * bc + q)] = aij * b[(p, q)];
                }
            }
        }
    }
    out
}

pub fn kron_vec(a: &CVector, b: &CVector) -> CVector {
    let mut out = CVector::zeros(a.len() * b.len());
    for (i, ai) in a.iter().enumerate() {
        for (j, bj) in b.iter().enumerate() {
            out[i * b.len() + j] = ai * bj;
        }
    }
    out
}

/// Largest absolute entry.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

/// Eigendecomposition of a Hermitian generator, used to apply `exp(-iHt)`
/// exactly for any `t`.
#[derive(Debug, Clone)]
pub struct HermitianPropagator {
    energies: DVector<f64>,
    basis: CMatrix,
}

impl HermitianPropagator {
    pub fn new(h: &CMatrix) -> Self {
        // symmetrize so round-off in the builder cannot leak into the eigensolver
        let herm = (h + h.adjoint()).scale(0.5);
        let eig = SymmetricEigen::new(herm);
        HermitianPropagator {
            energies: eig.eigenvalues,
            basis: eig.eigenvectors,
        }
    }

    pub fn energies(&self) -> &DVector<f64> {
        &self.energies
    }

    pub fn spectral_radius(&self) -> f64 {
        self.energies.iter().fold(0.0_f64, |a, e| a.max(e.abs()))
    }

    /// `exp(-iHt) ψ`
    pub fn apply(&self, t: f64, psi: &CVector) -> CVector {
        let mut coeffs = self.basis.adjoint() * psi;
        for (k, z) in coeffs.iter_mut().enumerate() {
            *z *= phase(-self.energies[k] * t);
        }
        &self.basis * coeffs
    }

    pub fn unitary(&self, t: f64) -> CMatrix {
        let mut scaled = self.basis.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= phase(-self.energies[k] * t);
        }
        scaled * self.basis.adjoint()
    }
}

/// Minimum eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    let herm = (m + m.adjoint()).scale(0.5);
    herm.symmetric_eigenvalues()
        .iter()
        .fold(f64::INFINITY, |a, &e| a.min(e))
}

/// Compressed-row sparse matrix; only what the Lindblad right-hand side needs.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<C64>,
}

impl SparseMatrix {
    pub fn from_dense(m: &CMatrix) -> Self {
        let (n_rows, n_cols) = m.shape();
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for i in 0..n_rows {
            for j in 0..n_cols {
                let v = m[(i, j)];
                if v != ZERO {
                    col_idx.push(j);
                    vals.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        SparseMatrix {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            vals,
        }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// `out = self * rhs`
    pub fn mul_dense_into(&self, rhs: &CMatrix, out: &mut CMatrix) {
        debug_assert_eq!(self.n_cols, rhs.nrows());
        let n_out_cols = rhs.ncols();
        out.fill(ZERO);
        for j in 0..n_out_cols {
            let col = rhs.column(j);
            let mut out_col = out.column_mut(j);
            for i in 0..self.n_rows {
                let mut acc = ZERO;
                for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                    acc += self.vals[k] * col[self.col_idx[k]];
                }
                out_col[i] = acc;
            }
        }
    }

    pub fn mul_dense(&self, rhs: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.n_rows, rhs.ncols());
        self.mul_dense_into(rhs, &mut out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kron_of_identities_is_identity() {
        let a = CMatrix::identity(2, 2);
        let b = CMatrix::identity(3, 3);
        assert_eq!(kron(&a, &b), CMatrix::identity(6, 6));
    }

    #[test]
    fn propagator_matches_two_level_rabi() {
        // H = Ω σx, exp(-iHt)|0> = cos(Ωt)|0> - i sin(Ωt)|1>
        let h = CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]);
        let prop = HermitianPropagator::new(&h);
        let psi = CVector::from_vec(vec![ONE, ZERO]);
        let t = 0.37;
        let out = prop.apply(t, &psi);
        assert!((out[0] - c(t.cos(), 0.0)).norm() < 1e-12);
        assert!((out[1] - c(0.0, -t.sin())).norm() < 1e-12);
    }

    #[test]
    fn sparse_product_matches_dense() {
        let m = CMatrix::from_fn(5, 5, |i, j| {
            if (i + 2 * j) % 3 == 0 {
                c(i as f64, j as f64 - 1.0)
            } else {
                ZERO
            }
        });
        let r = CMatrix::from_fn(5, 4, |i, j| c((i * j) as f64, 1.0 / (1.0 + i as f64)));
        let s = SparseMatrix::from_dense(&m);
        assert!(max_abs(&(s.mul_dense(&r) - &m * &r)) < 1e-12);
    }
}
