//! Raster types. Pixels are stored row-major, interleaved `R, G, B`.
//!
//! Conversions between the 8-bit and float representations are explicit:
//! `float = u8 / 255`, `u8 = round(clamp(float * 255, 0, 255))`.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// 8-bit RGB image, row-major `H x W x 3`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        check_len(width, height, data.len())?;
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn filled(width: usize, height: usize, px: [u8; 3]) -> Self {
        Self::from_fn(width, height, |_, _| px)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_raw(&self) -> &[u8] {
        &self.data
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn pixels(&self) -> impl Iterator<Item = [u8; 3]> + '_ {
        self.data.chunks_exact(3).map(|p| [p[0], p[1], p[2]])
    }

    /// Unit-interval float copy (`v / 255`).
    pub fn to_float(&self) -> RgbFloatImage {
        RgbFloatImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f64::from(v) / 255.0).collect(),
        }
    }
}

/// Float RGB image, row-major `H x W x 3`.
///
/// Images built with [`RgbFloatImage::from_unit`] or [`RgbImage::to_float`] lie in
/// `[0, 1]`; amplified images (see [`crate::lapm::amplify`]) may exceed 1.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbFloatImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl RgbFloatImage {
    /// Builds a unit-interval image, rejecting values outside `[0, 1]`.
    pub fn from_unit(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        check_len(width, height, data.len())?;
        if let Some(&value) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::NotUnitInterval { value });
        }
        Ok(Self { width, height, data })
    }

    /// Builds an image from arbitrary finite values (e.g. intermediate results
    /// that are allowed to leave the unit interval).
    pub fn from_values(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        check_len(width, height, data.len())?;
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(alloc::format!("pixel value {v}")));
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn as_raw(&self) -> &[f64] {
        &self.data
    }

    pub fn is_unit_interval(&self) -> bool {
        self.data.iter().all(|v| (0.0..=1.0).contains(v))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// 8-bit copy: `round(clamp(v * 255, 0, 255))`.
    pub fn to_u8(&self) -> RgbImage {
        RgbImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| quantize(v * 255.0)).collect(),
        }
    }
}

/// Single-channel float plane, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayPlane {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayPlane {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::BufferLength { expected: width * height, actual: data.len() });
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self { width, height, data: alloc::vec![value; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn as_raw(&self) -> &[f64] {
        &self.data
    }

    pub fn into_raw(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { width: self.width, height: self.height, data: self.data.iter().map(|&v| f(v)).collect() }
    }
}

/// Read access to RGB pixels as `f64` triplets, shared by both image representations.
pub trait RgbPixels {
    fn dims(&self) -> (usize, usize);
    fn pixel_f64(&self, index: usize) -> [f64; 3];
}

impl RgbPixels for RgbImage {
    fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    fn pixel_f64(&self, index: usize) -> [f64; 3] {
        let p = &self.data[index * 3..index * 3 + 3];
        [f64::from(p[0]), f64::from(p[1]), f64::from(p[2])]
    }
}

impl RgbPixels for RgbFloatImage {
    fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    fn pixel_f64(&self, index: usize) -> [f64; 3] {
        let p = &self.data[index * 3..index * 3 + 3];
        [p[0], p[1], p[2]]
    }
}

/// Clamp to `[0, 255]` and round half away from zero.
pub fn quantize(v: f64) -> u8 {
    libm::round(v.clamp(0.0, 255.0)) as u8
}

fn check_len(width: usize, height: usize, len: usize) -> Result<()> {
    let expected = width * height * 3;
    if len != expected {
        return Err(Error::BufferLength { expected, actual: len });
    }
    Ok(())
}
