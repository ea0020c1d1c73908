//! Dense tensors and reverse-mode differentiation.
//!
//! Values live in [`Tensor`]; differentiable computation is recorded on a
//! [`Tape`] and addressed through lightweight [`Var`] handles. Learned
//! weights are kept in a [`ParamStore`] and updated with [`adam_step`].

mod adam;
mod params;
mod tape;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use params::{ParamId, ParamStore, Parameter};
pub use tape::{Gradients, Tape, Var};

use crate::error::{Error, Result};

pub const MAX_RANK: usize = 3;

/// Row-major `f64` array of rank 1 to 3.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.len() > MAX_RANK {
            return Err(Error::invalid(format!(
                "tensor rank must be 1..={MAX_RANK}, got shape {shape:?}"
            )));
        }
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::Shape {
                op: "tensor",
                lhs: shape.to_vec(),
                rhs: vec![data.len()],
            });
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Self::new(shape, vec![0.0; len]).expect("valid zero shape")
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            shape: vec![1],
            data: vec![value],
        }
    }

    /// Builds an `rows.len() x width` matrix; every row must have the same width.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let width = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * width);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != width {
                return Err(Error::invalid(format!(
                    "row {i} has width {}, expected {width}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Self::new(&[rows.len(), width], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Size of the last axis.
    pub fn width(&self) -> usize {
        *self.shape.last().expect("rank >= 1")
    }

    /// Number of rows when viewed as a matrix over the last axis.
    pub fn rows(&self) -> usize {
        if self.width() == 0 {
            self.shape[..self.shape.len() - 1].iter().product()
        } else {
            self.data.len() / self.width()
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.width();
        &self.data[i * w..(i + 1) * w]
    }

    pub fn reshaped(mut self, shape: &[usize]) -> Result<Self> {
        let len: usize = shape.iter().product();
        if len != self.data.len() || shape.is_empty() || shape.len() > MAX_RANK {
            return Err(Error::Shape {
                op: "reshape",
                lhs: self.shape,
                rhs: shape.to_vec(),
            });
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Layout map of the shuffle: row `r*i + s` of the output is the channel
/// block `[s*C, (s+1)*C)` of input row `i`. In row-major storage this is a
/// pure reshape, so the element order never changes.
pub fn shuffle_shape(shape: &[usize], ratio: usize) -> Result<[usize; 2]> {
    if shape.len() != 2 {
        return Err(Error::invalid(format!(
            "shuffle expects a matrix, got shape {shape:?}"
        )));
    }
    if ratio == 0 || shape[1] % ratio != 0 {
        return Err(Error::invalid(format!(
            "channel count {} is not divisible by ratio {ratio}",
            shape[1]
        )));
    }
    Ok([shape[0] * ratio, shape[1] / ratio])
}

/// Inverse layout of [`shuffle_shape`]: `(r*N) x C -> N x (r*C)`.
pub fn unshuffle_shape(shape: &[usize], ratio: usize) -> Result<[usize; 2]> {
    if shape.len() != 2 || ratio == 0 || shape[0] % ratio != 0 {
        return Err(Error::invalid(format!(
            "cannot fold shape {shape:?} by ratio {ratio}"
        )));
    }
    Ok([shape[0] / ratio, shape[1] * ratio])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_rank_and_length() {
        assert!(Tensor::new(&[], vec![]).is_err());
        assert!(Tensor::new(&[1, 1, 1, 1], vec![0.0]).is_err());
        assert!(matches!(
            Tensor::new(&[2, 2], vec![0.0; 3]),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn rows_view() {
        let t = Tensor::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        assert_eq!(t.rows(), 2);
        assert_eq!(t.row(1), &[3.0, 4.0]);
        let t3 = t.reshaped(&[1, 2, 2]).unwrap();
        assert_eq!(t3.rows(), 2);
    }

    #[test]
    fn shuffle_requires_divisible_width() {
        assert_eq!(shuffle_shape(&[3, 8], 4).unwrap(), [12, 2]);
        assert!(shuffle_shape(&[3, 6], 4).is_err());
        assert_eq!(unshuffle_shape(&[12, 2], 4).unwrap(), [3, 8]);
    }
}
