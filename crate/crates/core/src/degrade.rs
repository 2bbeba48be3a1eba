//! Illumination degradation transfer.
//!
//! Pipeline for one image:
//! 1. sample per-channel target mean/std from truncated normals fitted to a
//!    low-light corpus summary ([`sample_targets`]);
//! 2. affinely map each channel onto the sampled statistics and clip to
//!    `[0, 255]` ([`linear_transform`]);
//! 3. flag pixels whose color proportions drifted by more than `tau_color`
//!    ([`color_ratios`], [`consistency_mask`]) and redistribute their adjusted
//!    intensity along the original proportions ([`apply_correction`]).
//!
//! No noise is injected. Randomness comes from a per-image ChaCha8 stream whose
//! seed is [`stream_seed`]`(seed, image_key)`, so batch order and parallelism never
//! change any output.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::{quantize, RgbImage, RgbPixels};
use crate::stats::{channel_mean_std, ChannelStats, ChannelStatsSummary, ChannelSummary};
use crate::truncnorm::TruncNormParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegradeConfig {
    /// Color-consistency threshold on the max per-channel ratio change.
    pub tau_color: f64,
    /// Guard added to per-pixel channel sums.
    pub epsilon: f64,
    pub seed: u64,
    /// Channels whose std falls below this (8-bit units) are treated as constant.
    pub sigma_floor: f64,
}

impl Default for DegradeConfig {
    fn default() -> Self {
        Self { tau_color: 0.5, epsilon: 1e-8, seed: 0, sigma_floor: 1e-6 }
    }
}

impl DegradeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_color > 0.0 && self.tau_color < 1.0) {
            return Err(Error::InvalidParameter(alloc::format!("tau_color {} not in (0, 1)", self.tau_color)));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParameter(alloc::format!("epsilon {} must be > 0", self.epsilon)));
        }
        if !(self.sigma_floor >= 0.0) {
            return Err(Error::InvalidParameter(alloc::format!("sigma_floor {} must be >= 0", self.sigma_floor)));
        }
        Ok(())
    }
}

/// Sampled per-channel target statistics (R, G, B).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TargetSample {
    pub channels: [ChannelStats; 3],
}

impl From<[ChannelStats; 3]> for TargetSample {
    fn from(channels: [ChannelStats; 3]) -> Self {
        Self { channels }
    }
}

impl ChannelSummary {
    pub fn mean_sampler(&self) -> TruncNormParams {
        TruncNormParams { loc: self.mean_median, scale: self.mean_spread, lower: self.mean_min, upper: self.mean_max }
    }

    pub fn std_sampler(&self) -> TruncNormParams {
        TruncNormParams { loc: self.std_median, scale: self.std_spread, lower: self.std_min, upper: self.std_max }
    }
}

/// Six independent draws, in the order R mean, R std, G mean, G std, B mean, B std.
pub fn sample_targets<R: Rng + ?Sized>(summary: &ChannelStatsSummary, rng: &mut R) -> Result<TargetSample> {
    let mut channels = [ChannelStats { mean: 0.0, std: 0.0 }; 3];
    for (out, ch) in channels.iter_mut().zip(summary.channels()) {
        out.mean = ch.mean_sampler().sample(rng)?;
        out.std = ch.std_sampler().sample(rng)?;
    }
    Ok(TargetSample { channels })
}

/// Channel-wise affine map `clip((σ_t/σ_o)(I − μ_o) + μ_t)`, rounded to 8 bits.
///
/// A channel with `σ_o < sigma_floor` is constant and maps to `clip(μ_t)`.
pub fn linear_transform(
    img: &RgbImage,
    orig: &[ChannelStats; 3],
    target: &TargetSample,
    cfg: &DegradeConfig,
) -> RgbImage {
    let gains: [Option<f64>; 3] = core::array::from_fn(|c| {
        (orig[c].std >= cfg.sigma_floor).then(|| target.channels[c].std / orig[c].std)
    });
    let data = img
        .as_raw()
        .chunks_exact(3)
        .flat_map(|p| {
            let px: [u8; 3] = core::array::from_fn(|c| {
                let t = target.channels[c].mean;
                match gains[c] {
                    Some(gain) => quantize(gain * (f64::from(p[c]) - orig[c].mean) + t),
                    None => quantize(t),
                }
            });
            px
        })
        .collect();
    RgbImage::new(img.width(), img.height(), data).expect("same dims as input")
}

/// Per-pixel channel proportions `I^c / (Σ_k I^k + ε)`, interleaved like the image.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioField {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl RatioField {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn as_raw(&self) -> &[f64] {
        &self.data
    }

    pub fn at(&self, index: usize) -> [f64; 3] {
        let p = &self.data[index * 3..index * 3 + 3];
        [p[0], p[1], p[2]]
    }
}

pub fn color_ratios(img: &impl RgbPixels, eps: f64) -> RatioField {
    let (width, height) = img.dims();
    let mut data = Vec::with_capacity(width * height * 3);
    for i in 0..width * height {
        let p = img.pixel_f64(i);
        let denom = p[0] + p[1] + p[2] + eps;
        data.extend(p.iter().map(|v| v / denom));
    }
    RatioField { width, height, data }
}

/// Binary per-pixel mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::BufferLength { expected: width * height, actual: data.len() });
        }
        Ok(Self { width, height, data })
    }

    pub fn as_raw(&self) -> &[bool] {
        &self.data
    }

    pub fn count_set(&self) -> usize {
        self.data.iter().filter(|&&m| m).count()
    }
}

/// `M(i,j) = 1` iff `max_c |R_o − R_adj| > τ` (strict).
pub fn consistency_mask(orig: &RatioField, adj: &RatioField, tau_color: f64) -> Result<Mask> {
    if (orig.width, orig.height) != (adj.width, adj.height) {
        return Err(Error::ShapeMismatch(alloc::format!(
            "ratio fields {}x{} vs {}x{}",
            orig.width, orig.height, adj.width, adj.height
        )));
    }
    let data = orig
        .data
        .chunks_exact(3)
        .zip(adj.data.chunks_exact(3))
        .map(|(o, a)| {
            let drift = (0..3).map(|c| libm::fabs(o[c] - a[c])).fold(0.0, f64::max);
            drift > tau_color
        })
        .collect();
    Ok(Mask { width: orig.width, height: orig.height, data })
}

/// Corrected intensities before clipping and rounding: masked pixels become
/// `R_o^c · Σ_k I_adj^k`, others keep `I_adj`. Interleaved, 8-bit scale.
pub fn correct_unrounded(adj: &RgbImage, ratios_orig: &RatioField, mask: &Mask) -> Result<Vec<f64>> {
    let dims = (adj.width(), adj.height());
    if dims != (ratios_orig.width, ratios_orig.height) || dims != (mask.width, mask.height) {
        return Err(Error::ShapeMismatch(alloc::format!(
            "image {}x{}, ratios {}x{}, mask {}x{}",
            dims.0, dims.1, ratios_orig.width, ratios_orig.height, mask.width, mask.height
        )));
    }
    let mut out = Vec::with_capacity(adj.as_raw().len());
    for (i, &flag) in mask.data.iter().enumerate() {
        let p = adj.pixel_f64(i);
        if flag {
            let total = p[0] + p[1] + p[2];
            let r = ratios_orig.at(i);
            out.extend(r.iter().map(|rc| rc * total));
        } else {
            out.extend_from_slice(&p);
        }
    }
    Ok(out)
}

/// Color-drift correction, clipped to `[0, 255]` and rounded.
pub fn apply_correction(adj: &RgbImage, ratios_orig: &RatioField, mask: &Mask) -> Result<RgbImage> {
    let raw = correct_unrounded(adj, ratios_orig, mask)?;
    RgbImage::new(adj.width(), adj.height(), raw.into_iter().map(quantize).collect())
}

/// Everything produced while degrading one image.
#[derive(Debug, Clone, PartialEq)]
pub struct DegradeTrace {
    pub source: [ChannelStats; 3],
    pub targets: TargetSample,
    pub adjusted: RgbImage,
    pub mask: Mask,
    /// Pre-rounding corrected values (see [`correct_unrounded`]).
    pub corrected: Vec<f64>,
    pub output: RgbImage,
}

/// Runs the transform and correction stages for known targets.
pub fn degrade_with_targets(
    img: &RgbImage,
    source: [ChannelStats; 3],
    targets: TargetSample,
    cfg: &DegradeConfig,
) -> Result<DegradeTrace> {
    cfg.validate()?;
    let adjusted = linear_transform(img, &source, &targets, cfg);
    let ratios_orig = color_ratios(img, cfg.epsilon);
    let ratios_adj = color_ratios(&adjusted, cfg.epsilon);
    let mask = consistency_mask(&ratios_orig, &ratios_adj, cfg.tau_color)?;
    let corrected = correct_unrounded(&adjusted, &ratios_orig, &mask)?;
    let output = RgbImage::new(img.width(), img.height(), corrected.iter().map(|&v| quantize(v)).collect())?;
    Ok(DegradeTrace { source, targets, adjusted, mask, corrected, output })
}

pub fn degrade_image_traced(
    img: &RgbImage,
    summary: &ChannelStatsSummary,
    cfg: &DegradeConfig,
    image_key: &str,
) -> Result<DegradeTrace> {
    summary.validate()?;
    let source = channel_mean_std(img)?;
    let mut rng = image_rng(cfg.seed, image_key);
    let targets = sample_targets(summary, &mut rng)?;
    degrade_with_targets(img, source, targets, cfg)
}

/// Degrades one image. Output is a pure function of `(img, summary, cfg, image_key)`.
pub fn degrade_image(
    img: &RgbImage,
    summary: &ChannelStatsSummary,
    cfg: &DegradeConfig,
    image_key: &str,
) -> Result<RgbImage> {
    degrade_image_traced(img, summary, cfg, image_key).map(|t| t.output)
}

/// Per-image RNG stream.
pub fn image_rng(seed: u64, image_key: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(seed, image_key))
}

/// `splitmix64(splitmix64(seed) ^ fnv1a64(key))`.
pub fn stream_seed(seed: u64, image_key: &str) -> u64 {
    splitmix64(splitmix64(seed) ^ fnv1a64(image_key.as_bytes()))
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3))
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
