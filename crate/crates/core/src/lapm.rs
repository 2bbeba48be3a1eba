//! Light-adaptive photoreceptive mask branch.
//!
//! `amplify(λ) → BT.601 gray → threshold(τ) → 2x2 max-pool pyramid → gated texture`.
//! The texture map is `(γ·z + β) / (1 + e^{−z} + ε)` with `z = w·mask + bias`,
//! so the whole branch has exactly four trainable scalars shared by every level.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::image::{GrayPlane, RgbFloatImage};
use crate::stats::rgb_to_gray;
use crate::tensor::Tensor;

/// Documented range for the amplification factor.
pub const TYPICAL_LAMBDA: (f64, f64) = (5.0, 12.0);

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LapmConfig {
    pub lambda: f64,
    pub tau_photon: f64,
    pub eps: f64,
    pub levels: u32,
}

impl Default for LapmConfig {
    fn default() -> Self {
        Self { lambda: 8.0, tau_photon: 0.02, eps: 1e-8, levels: 5 }
    }
}

impl LapmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidParameter(alloc::format!("lambda {} must be > 0", self.lambda)));
        }
        if !(self.tau_photon > 0.0 && self.tau_photon < 1.0) {
            return Err(Error::InvalidParameter(alloc::format!("tau_photon {} not in (0, 1)", self.tau_photon)));
        }
        if !(self.eps >= 0.0) {
            return Err(Error::InvalidParameter(alloc::format!("eps {} must be >= 0", self.eps)));
        }
        if self.levels == 0 || self.levels > 30 {
            return Err(Error::InvalidParameter(alloc::format!("levels {} not in 1..=30", self.levels)));
        }
        Ok(())
    }

    /// Smallest image side the pyramid accepts: `2^levels`.
    pub fn min_side(&self) -> usize {
        1usize << self.levels
    }
}

pub fn lambda_in_typical_range(lambda: f64) -> bool {
    (TYPICAL_LAMBDA.0..=TYPICAL_LAMBDA.1).contains(&lambda)
}

/// The four trainable scalars. Also used as the gradient container.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LapmParams {
    /// 1x1 kernel weight.
    pub w: f64,
    /// 1x1 kernel bias; 0 recovers the bias-free gate.
    pub bias: f64,
    pub gamma: f64,
    pub beta: f64,
}

impl LapmParams {
    pub const TRAINABLE: usize = 4;

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.bias, self.gamma, self.beta]
    }

    pub fn from_array(v: [f64; 4]) -> Self {
        Self { w: v[0], bias: v[1], gamma: v[2], beta: v[3] }
    }
}

impl Default for LapmParams {
    fn default() -> Self {
        Self { w: 1.0, bias: 0.0, gamma: 1.0, beta: 0.0 }
    }
}

/// `λ · X`, unclipped. Logs a warning when `λ` is outside the typical range.
pub fn amplify(img: &RgbFloatImage, lambda: f64) -> RgbFloatImage {
    if !lambda_in_typical_range(lambda) {
        log::warn!("amplification factor {lambda} outside the typical range [5, 12]");
    }
    img.map(|v| lambda * v)
}

/// 1 where `gray > τ`, else 0.
pub fn photomask(gray: &GrayPlane, tau_photon: f64) -> GrayPlane {
    gray.map(|v| if v > tau_photon { 1.0 } else { 0.0 })
}

/// 2x2 stride-2 max pooling; a trailing odd row/column is dropped.
pub fn max_pool2(plane: &GrayPlane) -> GrayPlane {
    let (w, h) = (plane.width() / 2, plane.height() / 2);
    let src = plane.as_raw();
    let pw = plane.width();
    let mut data = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let i = 2 * y * pw + 2 * x;
            data.push(src[i].max(src[i + 1]).max(src[i + pw]).max(src[i + pw + 1]));
        }
    }
    GrayPlane::new(w, h, data).expect("pooled dims")
}

#[inline]
fn gate(z: f64, p: &LapmParams, eps: f64) -> f64 {
    (p.gamma * z + p.beta) / (1.0 + libm::exp(-z) + eps)
}

/// Gated texture response of a mask plane, elementwise.
pub fn texture_features(mask: &GrayPlane, p: &LapmParams, eps: f64) -> GrayPlane {
    mask.map(|m| gate(p.w * m + p.bias, p, eps))
}

/// Gradients of `Σ grad_out ⊙ texture_features(mask)` with respect to the four
/// parameters; the mask is a constant input.
pub fn texture_backward(mask: &GrayPlane, p: &LapmParams, eps: f64, grad_out: &GrayPlane) -> Result<LapmParams> {
    if (mask.width(), mask.height()) != (grad_out.width(), grad_out.height()) {
        return Err(Error::ShapeMismatch(alloc::format!(
            "mask {}x{} vs gradient {}x{}",
            mask.width(),
            mask.height(),
            grad_out.width(),
            grad_out.height()
        )));
    }
    let mut grads = LapmParams { w: 0.0, bias: 0.0, gamma: 0.0, beta: 0.0 };
    for (&m, &g) in mask.as_raw().iter().zip(grad_out.as_raw()) {
        let z = p.w * m + p.bias;
        let e = libm::exp(-z);
        let d = 1.0 + e + eps;
        let num = p.gamma * z + p.beta;
        let dz = p.gamma / d + num * e / (d * d);
        grads.w += g * dz * m;
        grads.bias += g * dz;
        grads.gamma += g * z / d;
        grads.beta += g / d;
    }
    Ok(grads)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LapmPyramid {
    /// Full-resolution binary mask.
    pub base_mask: GrayPlane,
    /// Masks at strides 2, 4, …, 2^levels.
    pub masks: Vec<GrayPlane>,
    pub textures: Vec<GrayPlane>,
}

/// Full-resolution photosensitive mask of an image.
pub fn base_mask(img: &RgbFloatImage, cfg: &LapmConfig) -> Result<GrayPlane> {
    cfg.validate()?;
    Ok(photomask(&rgb_to_gray(&amplify(img, cfg.lambda)), cfg.tau_photon))
}

pub fn lapm_pyramid(img: &RgbFloatImage, cfg: &LapmConfig, p: &LapmParams) -> Result<LapmPyramid> {
    cfg.validate()?;
    let min_side = cfg.min_side();
    if img.width() < min_side || img.height() < min_side {
        return Err(Error::ImageTooSmall { width: img.width(), height: img.height(), levels: cfg.levels, min_side });
    }
    let base = base_mask(img, cfg)?;
    let mut masks = Vec::with_capacity(cfg.levels as usize);
    let mut current = base.clone();
    for _ in 0..cfg.levels {
        current = max_pool2(&current);
        masks.push(current.clone());
    }
    let textures = masks.iter().map(|m| texture_features(m, p, cfg.eps)).collect();
    Ok(LapmPyramid { base_mask: base, masks, textures })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FuseMode {
    /// Append the plane as one extra channel.
    Concat,
    /// Add the plane to every channel.
    Add,
}

/// Fuses a texture plane into an N-C-H-W feature map (broadcast over the batch).
pub fn fuse_texture(fmap: &Tensor, plane: &GrayPlane, mode: FuseMode) -> Result<Tensor> {
    let [n, _, h, w] = fmap.dims();
    if (plane.width(), plane.height()) != (w, h) {
        return Err(Error::ShapeMismatch(alloc::format!(
            "feature map {w}x{h} vs texture plane {}x{}",
            plane.width(),
            plane.height()
        )));
    }
    let tex = plane.as_raw();
    match mode {
        FuseMode::Add => {
            let mut out = fmap.clone();
            for (i, v) in out.as_raw_mut().iter_mut().enumerate() {
                *v += tex[i % (h * w)];
            }
            Ok(out)
        }
        FuseMode::Concat => {
            let extra = Tensor::from_fn([n, 1, h, w], |[_, _, y, x]| tex[y * w + x]);
            crate::tensor::concat_channels(fmap, &extra)
        }
    }
}
