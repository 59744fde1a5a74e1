//! Minimal dense-tensor computation core with reverse-mode differentiation.
//!
//! The operation set is closed under its own adjoints: every backward rule is
//! emitted as ordinary trace operations, so a vector-Jacobian product is
//! itself differentiable. That one extra level is exactly what the
//! Jacobian-norm regularizer needs; nothing deeper is supported.

mod tape;

pub use tape::{Tape, ValId};

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Row-major dense tensor. Shape `[]` is a scalar, `[n]` a vector,
/// `[m, n]` a matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor<S> {
    shape: Vec<usize>,
    data: Vec<S>,
}

impl<S: Scalar> Tensor<S> {
    pub fn new(shape: Vec<usize>, data: Vec<S>) -> Self {
        assert_eq!(
            data.len(),
            shape.iter().product::<usize>(),
            "data length {} does not match shape {:?}",
            data.len(),
            shape
        );
        Self { shape, data }
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![S::zero(); n],
        }
    }

    pub fn scalar(v: S) -> Self {
        Self {
            shape: Vec::new(),
            data: vec![v],
        }
    }

    pub fn vector(data: Vec<S>) -> Self {
        let n = data.len();
        Self::new(vec![n], data)
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<S>) -> Self {
        Self::new(vec![rows, cols], data)
    }

    /// `[n, 1]` column from a flat slice.
    pub fn column(data: &[S]) -> Self {
        Self::new(vec![data.len(), 1], data.to_vec())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<S> {
        self.data
    }

    /// Number of rows of a matrix (or length of a vector).
    pub fn rows(&self) -> usize {
        self.shape.first().copied().unwrap_or(1)
    }

    /// Number of columns of a matrix.
    pub fn cols(&self) -> usize {
        match self.shape.len() {
            0 => 1,
            1 => self.shape[0],
            _ => self.shape[1],
        }
    }

    /// The single value of a scalar or one-element tensor.
    pub fn item(&self) -> S {
        assert_eq!(self.numel(), 1, "item() on tensor with {} elements", self.numel());
        self.data[0]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Squared Euclidean norm over all entries.
    pub fn sq_norm(&self) -> S {
        self.data.iter().fold(S::zero(), |acc, &v| acc + v * v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    #[should_panic(expected = "does not match shape")]
    fn shape_data_mismatch_panics() {
        let _ = Tensor::new(vec![2, 2], vec![1.0_f64; 3]);
    }

    #[test]
    fn scalar_and_column_shapes() {
        let s = Tensor::scalar(3.0_f64);
        assert_eq!(s.shape(), &[] as &[usize]);
        assert_eq!(s.item(), 3.0);
        let c = Tensor::column(&[1.0, 2.0]);
        assert_eq!(c.shape(), &[2, 1]);
        assert_eq!(c.rows(), 2);
        assert_eq!(c.cols(), 1);
    }
}
