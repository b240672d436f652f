//! Dense row-major tensors.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};

/// Scalar type for all model values. Tests and gradient checks assume the
/// default f64; the `single-precision` feature switches training to f32.
#[cfg(feature = "single-precision")]
pub type Real = f32;
#[cfg(not(feature = "single-precision"))]
pub type Real = f64;

/// A dense tensor. Vectors have shape `[n]`, matrices `[rows, cols]`
/// (row-major), scalars `[1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<Real>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; len],
        }
    }

    pub fn filled(shape: &[usize], value: Real) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; len],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<Real>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(CoreError::ShapeMismatch {
                op: "from_vec",
                left: shape.to_vec(),
                right: vec![data.len()],
            });
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn vector(data: Vec<Real>) -> Self {
        Tensor {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn scalar(value: Real) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![value],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[Real] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Real] {
        &mut self.data
    }

    pub fn is_vector(&self) -> bool {
        self.shape.len() == 1
    }

    /// Rows and columns of a matrix.
    pub fn dims2(&self) -> Result<(usize, usize)> {
        match self.shape.as_slice() {
            [r, c] => Ok((*r, *c)),
            _ => Err(CoreError::ShapeMismatch {
                op: "dims2",
                left: self.shape.clone(),
                right: vec![],
            }),
        }
    }

    pub fn row(&self, r: usize) -> Result<&[Real]> {
        let (rows, cols) = self.dims2()?;
        if r >= rows {
            return Err(CoreError::IdOutOfRange {
                what: "row",
                id: r,
                size: rows,
            });
        }
        Ok(&self.data[r * cols..(r + 1) * cols])
    }

    pub fn row_mut(&mut self, r: usize) -> Result<&mut [Real]> {
        let (rows, cols) = self.dims2()?;
        if r >= rows {
            return Err(CoreError::IdOutOfRange {
                what: "row",
                id: r,
                size: rows,
            });
        }
        Ok(&mut self.data[r * cols..(r + 1) * cols])
    }

    pub fn fill(&mut self, value: Real) {
        for x in self.data.iter_mut() {
            *x = value;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}
