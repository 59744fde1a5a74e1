//! Compressed sparse row matrices shared by the FEM assembly and the
//! differentiation core.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Square-or-rectangular CSR matrix with entries stored row by row in
/// ascending column order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsrMatrix<S> {
    pub n_rows: usize,
    pub n_cols: usize,
    /// `row_ptr[i]..row_ptr[i + 1]` indexes row `i` in `cols`/`vals`.
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<S>,
}

impl<S: Scalar> CsrMatrix<S> {
    /// Builds a CSR matrix from a per-row sparsity pattern. Columns within a
    /// row must be strictly ascending; values start at zero.
    pub fn from_pattern(n_cols: usize, pattern: &[Vec<usize>]) -> Self {
        let mut row_ptr = Vec::with_capacity(pattern.len() + 1);
        let mut cols = Vec::new();
        row_ptr.push(0);
        for row in pattern {
            debug_assert!(row.windows(2).all(|w| w[0] < w[1]));
            cols.extend_from_slice(row);
            row_ptr.push(cols.len());
        }
        let vals = vec![S::zero(); cols.len()];
        Self {
            n_rows: pattern.len(),
            n_cols,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    /// Entry `(i, j)` or zero when structurally absent.
    pub fn get(&self, i: usize, j: usize) -> S {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        match self.cols[lo..hi].binary_search(&j) {
            Ok(k) => self.vals[lo + k],
            Err(_) => S::zero(),
        }
    }

    /// Adds `v` to entry `(i, j)`; the slot must exist in the pattern.
    pub fn add_at(&mut self, i: usize, j: usize, v: S) {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        let k = self.cols[lo..hi]
            .binary_search(&j)
            .unwrap_or_else(|_| panic!("entry ({i}, {j}) outside sparsity pattern"));
        self.vals[lo + k] += v;
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[S]) -> Vec<S> {
        assert_eq!(x.len(), self.n_cols, "matvec dimension mismatch");
        let mut y = vec![S::zero(); self.n_rows];
        for i in 0..self.n_rows {
            let mut acc = S::zero();
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            y[i] = acc;
        }
        y
    }

    /// `y = Aᵀ x` without materializing the transpose.
    pub fn matvec_transpose(&self, x: &[S]) -> Vec<S> {
        assert_eq!(x.len(), self.n_rows, "transpose matvec dimension mismatch");
        let mut y = vec![S::zero(); self.n_cols];
        for i in 0..self.n_rows {
            let xi = x[i];
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                y[self.cols[k]] += self.vals[k] * xi;
            }
        }
        y
    }

    /// Dense copy, row major.
    pub fn to_dense(&self) -> Vec<S> {
        let mut out = vec![S::zero(); self.n_rows * self.n_cols];
        for i in 0..self.n_rows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                out[i * self.n_cols + self.cols[k]] = self.vals[k];
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CsrMatrix<f64> {
        // [[2, 0, 1], [0, 3, 0]]
        let mut m = CsrMatrix::from_pattern(3, &[vec![0, 2], vec![1]]);
        m.add_at(0, 0, 2.0);
        m.add_at(0, 2, 1.0);
        m.add_at(1, 1, 3.0);
        m
    }

    #[test]
    fn matvec_matches_dense_loop() {
        let m = sample();
        let x = [1.0, -1.0, 4.0];
        let y = m.matvec(&x);
        let dense = m.to_dense();
        for i in 0..2 {
            let mut acc = 0.0;
            for j in 0..3 {
                acc += dense[i * 3 + j] * x[j];
            }
            assert_eq!(y[i], acc);
        }
        assert_eq!(y, vec![6.0, -3.0]);
    }

    #[test]
    fn transpose_matvec_matches_dense() {
        let m = sample();
        let x = [2.0, 5.0];
        let y = m.matvec_transpose(&x);
        assert_eq!(y, vec![4.0, 15.0, 2.0]);
    }

    #[test]
    fn get_reports_structural_zeros() {
        let m = sample();
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.get(1, 1), 3.0);
    }
}
