//! Dense N-C-H-W `f64` tensors and a small kernel set with hand-written backward
//! passes. Every kernel uses a fixed loop order, so results are bit-reproducible.

mod conv;
mod elementwise;
mod gradcheck;
mod norm;

use alloc::vec::Vec;
use core::ops::Range;

use crate::error::{Error, Result};

pub use conv::{conv2d_backward, conv2d_forward, conv2d_forward_counted, Conv2dGrads, Conv2dParams, OpCount};
pub use elementwise::{
    avg_pool, concat_channels, hadamard, nearest_upsample, nearest_upsample_backward, sigmoid, sigmoid_backward,
    silu_gate, silu_gate_backward,
};
pub use gradcheck::{finite_diff_check, GradCheck};
pub use norm::{batchnorm_backward, batchnorm_forward, BatchNormGrads, BatchNormParams, BnCache, BnMode};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: [usize; 4],
    data: Vec<f64>,
}

impl Tensor {
    /// Builds a tensor, rejecting a wrong length or non-finite entries.
    pub fn new(dims: [usize; 4], data: Vec<f64>) -> Result<Self> {
        let expected = dims.iter().product();
        if data.len() != expected {
            return Err(Error::BufferLength { expected, actual: data.len() });
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(alloc::format!("tensor entry {v}")));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: [usize; 4]) -> Self {
        Self { dims, data: alloc::vec![0.0; dims.iter().product()] }
    }

    pub fn full(dims: [usize; 4], value: f64) -> Self {
        Self { dims, data: alloc::vec![value; dims.iter().product()] }
    }

    pub fn from_fn(dims: [usize; 4], mut f: impl FnMut([usize; 4]) -> f64) -> Self {
        let mut data = Vec::with_capacity(dims.iter().product());
        for n in 0..dims[0] {
            for c in 0..dims[1] {
                for h in 0..dims[2] {
                    for w in 0..dims[3] {
                        data.push(f([n, c, h, w]));
                    }
                }
            }
        }
        Self { dims, data }
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    pub fn batch(&self) -> usize {
        self.dims[0]
    }

    pub fn channels(&self) -> usize {
        self.dims[1]
    }

    pub fn height(&self) -> usize {
        self.dims[2]
    }

    pub fn width(&self) -> usize {
        self.dims[3]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_raw(&self) -> &[f64] {
        &self.data
    }

    pub fn as_raw_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_raw(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn offset(&self, n: usize, c: usize, h: usize, w: usize) -> usize {
        ((n * self.dims[1] + c) * self.dims[2] + h) * self.dims[3] + w
    }

    #[inline]
    pub fn get(&self, n: usize, c: usize, h: usize, w: usize) -> f64 {
        self.data[self.offset(n, c, h, w)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { dims: self.dims, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn scale(&self, k: f64) -> Self {
        self.map(|v| k * v)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn dot(&self, other: &Tensor) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    /// Copy of channels `range` for every batch item.
    pub fn slice_channels(&self, range: Range<usize>) -> Result<Self> {
        let [n, c, h, w] = self.dims;
        if range.start > range.end || range.end > c {
            return Err(Error::ShapeMismatch(alloc::format!("channel slice {range:?} of {c} channels")));
        }
        let plane = h * w;
        let mut data = Vec::with_capacity(n * range.len() * plane);
        for b in 0..n {
            let base = b * c * plane;
            data.extend_from_slice(&self.data[base + range.start * plane..base + range.end * plane]);
        }
        Ok(Self { dims: [n, range.len(), h, w], data })
    }

    /// Elementwise sum of two same-shape tensors.
    pub fn add(&self, other: &Tensor) -> Result<Self> {
        self.expect_dims(other.dims, "add")?;
        Ok(Self { dims: self.dims, data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect() })
    }

    pub(crate) fn expect_dims(&self, dims: [usize; 4], what: &str) -> Result<()> {
        if self.dims != dims {
            return Err(Error::ShapeMismatch(alloc::format!("{what}: got {:?}, expected {:?}", self.dims, dims)));
        }
        Ok(())
    }

    pub(crate) fn from_parts(dims: [usize; 4], data: Vec<f64>) -> Self {
        debug_assert_eq!(dims.iter().product::<usize>(), data.len());
        Self { dims, data }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn new_validates() {
        assert!(Tensor::new([1, 1, 2, 2], vec![0.0; 3]).is_err());
        assert!(Tensor::new([1, 1, 1, 1], vec![f64::NAN]).is_err());
        assert!(Tensor::new([1, 1, 1, 2], vec![1.0, 2.0]).is_ok());
    }

    #[test]
    fn offsets_are_row_major() {
        let t = Tensor::from_fn([2, 3, 4, 5], |[n, c, h, w]| (n * 1000 + c * 100 + h * 10 + w) as f64);
        assert_eq!(t.get(1, 2, 3, 4), 1234.0);
        assert_eq!(t.as_raw()[t.offset(1, 0, 2, 1)], 1021.0);
    }

    #[test]
    fn slice_channels_picks_planes() {
        let t = Tensor::from_fn([2, 3, 1, 2], |[n, c, _, w]| (n * 10 + c) as f64 + w as f64 * 0.5);
        let s = t.slice_channels(1..3).unwrap();
        assert_eq!(s.dims(), [2, 2, 1, 2]);
        assert_eq!(s.get(1, 0, 0, 1), 11.5);
        assert!(t.slice_channels(2..4).is_err());
    }
}
