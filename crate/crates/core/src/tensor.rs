//! Dense row-major tensors in double precision.
//!
//! `Tensor` is the carrier for features, channel symbols and gradients.
//! Most of the crate works with 2-D tensors shaped `[batch, features]`.

use crate::error::{Error, Result};

/// Dense numeric array with an explicit shape, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// Creates a tensor filled with zeros.
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; n],
        }
    }

    /// Creates a tensor from raw data, checking that the element count
    /// matches the shape.
    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Dim(format!(
                "shape {:?} holds {} elements, got {}",
                shape,
                n,
                data.len()
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    /// 2-D tensor `[rows, cols]` from row-major data.
    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::from_vec(&[rows, cols], data)
    }

    /// 1-row matrix wrapping a single vector.
    pub fn row(data: Vec<f64>) -> Self {
        let n = data.len();
        Tensor {
            shape: vec![1, n],
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Number of rows of a 2-D tensor.
    pub fn rows(&self) -> usize {
        assert_eq!(self.shape.len(), 2, "expected 2-D tensor");
        self.shape[0]
    }

    /// Number of columns of a 2-D tensor.
    pub fn cols(&self) -> usize {
        assert_eq!(self.shape.len(), 2, "expected 2-D tensor");
        self.shape[1]
    }

    /// Borrows row `r` of a 2-D tensor.
    pub fn row_slice(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn row_slice_mut(&mut self, r: usize) -> &mut [f64] {
        let c = self.cols();
        &mut self.data[r * c..(r + 1) * c]
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols() + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        let cols = self.cols();
        self.data[r * cols + c] = v;
    }

    /// True when every element is finite.
    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Concatenates two 2-D tensors along the feature axis.
    pub fn concat_cols(a: &Tensor, b: &Tensor) -> Tensor {
        assert_eq!(a.rows(), b.rows(), "row count mismatch in concat");
        let (ra, ca, cb) = (a.rows(), a.cols(), b.cols());
        let mut out = Tensor::zeros(&[ra, ca + cb]);
        for r in 0..ra {
            out.row_slice_mut(r)[..ca].copy_from_slice(a.row_slice(r));
            out.row_slice_mut(r)[ca..].copy_from_slice(b.row_slice(r));
        }
        out
    }

    /// Splits a 2-D tensor into two along the feature axis at `at` columns.
    pub fn split_cols(&self, at: usize) -> (Tensor, Tensor) {
        let (r, c) = (self.rows(), self.cols());
        assert!(at <= c, "split point beyond width");
        let mut a = Tensor::zeros(&[r, at]);
        let mut b = Tensor::zeros(&[r, c - at]);
        for i in 0..r {
            a.row_slice_mut(i).copy_from_slice(&self.row_slice(i)[..at]);
            b.row_slice_mut(i).copy_from_slice(&self.row_slice(i)[at..]);
        }
        (a, b)
    }

    /// Elementwise sum; shapes must match.
    pub fn add(&self, other: &Tensor) -> Tensor {
        assert_eq!(self.shape, other.shape, "shape mismatch in add");
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Tensor {
            shape: self.shape.clone(),
            data,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_rejects_bad_length() {
        assert!(Tensor::from_vec(&[2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::from_vec(&[2, 3], vec![0.0; 6]).is_ok());
    }

    #[test]
    fn concat_and_split_are_inverse() {
        let a = Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = Tensor::matrix(2, 1, vec![5.0, 6.0]).unwrap();
        let c = Tensor::concat_cols(&a, &b);
        assert_eq!(c.shape(), &[2, 3]);
        assert_eq!(c.row_slice(1), &[3.0, 4.0, 6.0]);
        let (a2, b2) = c.split_cols(2);
        assert_eq!(a, a2);
        assert_eq!(b, b2);
    }
}
