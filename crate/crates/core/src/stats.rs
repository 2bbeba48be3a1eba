//! Per-channel image statistics and corpus summaries.
//!
//! All standard deviations are population (divide-by-N) deviations.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::image::{GrayPlane, RgbFloatImage, RgbImage, RgbPixels};

/// BT.601 luma weights for R, G, B.
pub const BT601: [f64; 3] = [0.299, 0.587, 0.114];

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChannelStats {
    pub mean: f64,
    pub std: f64,
}

/// Per-channel mean and population std of an 8-bit image.
///
/// Sums are accumulated in integers, so the result does not depend on pixel order.
pub fn channel_mean_std(img: &RgbImage) -> Result<[ChannelStats; 3]> {
    if img.is_empty() {
        return Err(Error::EmptyImage);
    }
    let n = img.pixel_count() as u128;
    let mut sum = [0u128; 3];
    let mut sum_sq = [0u128; 3];
    for px in img.pixels() {
        for c in 0..3 {
            let v = u128::from(px[c]);
            sum[c] += v;
            sum_sq[c] += v * v;
        }
    }
    Ok(core::array::from_fn(|c| {
        // n^2 * var = n * sum(x^2) - sum(x)^2, exact in integers.
        let scaled_var = n * sum_sq[c] - sum[c] * sum[c];
        let nf = n as f64;
        ChannelStats {
            mean: sum[c] as f64 / nf,
            std: libm::sqrt(scaled_var as f64) / nf,
        }
    }))
}

/// Per-channel mean and population std of a float image (two-pass).
pub fn channel_mean_std_f64(img: &impl RgbPixels) -> Result<[ChannelStats; 3]> {
    let (w, h) = img.dims();
    let n = w * h;
    if n == 0 {
        return Err(Error::EmptyImage);
    }
    let mut sum = [0.0f64; 3];
    for i in 0..n {
        let p = img.pixel_f64(i);
        for c in 0..3 {
            sum[c] += p[c];
        }
    }
    let mean = sum.map(|s| s / n as f64);
    let mut ss = [0.0f64; 3];
    for i in 0..n {
        let p = img.pixel_f64(i);
        for c in 0..3 {
            let d = p[c] - mean[c];
            ss[c] += d * d;
        }
    }
    Ok(core::array::from_fn(|c| ChannelStats { mean: mean[c], std: libm::sqrt(ss[c] / n as f64) }))
}

/// BT.601 grayscale. Values are not clamped, so amplified inputs may exceed 1.
pub fn rgb_to_gray(img: &RgbFloatImage) -> GrayPlane {
    let data = img
        .as_raw()
        .chunks_exact(3)
        .map(|p| BT601[0] * p[0] + BT601[1] * p[1] + BT601[2] * p[2])
        .collect();
    GrayPlane::new(img.width(), img.height(), data).expect("plane sized from image")
}

/// Summary of one channel over a corpus: distribution of per-image means and stds.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChannelSummary {
    pub mean_median: f64,
    pub mean_spread: f64,
    pub mean_min: f64,
    pub mean_max: f64,
    pub std_median: f64,
    pub std_spread: f64,
    pub std_min: f64,
    pub std_max: f64,
}

/// Corpus statistics driving target sampling. Serializes with keys `R`, `G`, `B`
/// and `n_images`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChannelStatsSummary {
    #[cfg_attr(feature = "serde", serde(rename = "R"))]
    pub r: ChannelSummary,
    #[cfg_attr(feature = "serde", serde(rename = "G"))]
    pub g: ChannelSummary,
    #[cfg_attr(feature = "serde", serde(rename = "B"))]
    pub b: ChannelSummary,
    pub n_images: usize,
}

impl ChannelStatsSummary {
    pub fn channels(&self) -> [&ChannelSummary; 3] {
        [&self.r, &self.g, &self.b]
    }

    /// Checks ordering (min <= median <= max), non-negative spreads and finiteness.
    pub fn validate(&self) -> Result<()> {
        if self.n_images == 0 {
            return Err(Error::EmptyCorpus);
        }
        for (name, ch) in ["R", "G", "B"].iter().zip(self.channels()) {
            let vals = [
                ch.mean_median, ch.mean_spread, ch.mean_min, ch.mean_max,
                ch.std_median, ch.std_spread, ch.std_min, ch.std_max,
            ];
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(alloc::format!("summary channel {name}")));
            }
            let ordered = ch.mean_min <= ch.mean_median
                && ch.mean_median <= ch.mean_max
                && ch.std_min <= ch.std_median
                && ch.std_median <= ch.std_max;
            if !ordered || ch.mean_spread < 0.0 || ch.std_spread < 0.0 || ch.std_min < 0.0 {
                return Err(Error::InvalidParameter(alloc::format!(
                    "summary channel {name} violates min <= median <= max or has a negative spread"
                )));
            }
        }
        Ok(())
    }

    /// A zero-spread summary whose medians are the given image statistics.
    pub fn point(stats: &[ChannelStats; 3]) -> Self {
        let ch = |s: &ChannelStats| ChannelSummary {
            mean_median: s.mean,
            mean_spread: 0.0,
            mean_min: s.mean,
            mean_max: s.mean,
            std_median: s.std,
            std_spread: 0.0,
            std_min: s.std,
            std_max: s.std,
        };
        Self { r: ch(&stats[0]), g: ch(&stats[1]), b: ch(&stats[2]), n_images: 1 }
    }
}

/// Median, min, max and population std of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Spread {
    median: f64,
    spread: f64,
    min: f64,
    max: f64,
}

fn describe(mut values: Vec<f64>) -> Spread {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    let median = if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    };
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    Spread { median, spread: libm::sqrt(var), min: values[0], max: values[n - 1] }
}

/// Summarizes per-image statistics. Values are sorted before any reduction, so
/// the result is independent of input order.
pub fn summarize_corpus(stats: &[[ChannelStats; 3]]) -> Result<ChannelStatsSummary> {
    if stats.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let channel = |c: usize| {
        let means = describe(stats.iter().map(|s| s[c].mean).collect());
        let stds = describe(stats.iter().map(|s| s[c].std).collect());
        ChannelSummary {
            mean_median: means.median,
            mean_spread: means.spread,
            mean_min: means.min,
            mean_max: means.max,
            std_median: stds.median,
            std_spread: stds.spread,
            std_min: stds.min,
            std_max: stds.max,
        }
    };
    Ok(ChannelStatsSummary { r: channel(0), g: channel(1), b: channel(2), n_images: stats.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn cs(mean: f64, std: f64) -> ChannelStats {
        ChannelStats { mean, std }
    }

    #[test]
    fn constant_image_has_zero_std() {
        let s = channel_mean_std(&RgbImage::filled(7, 5, [100, 100, 100])).unwrap();
        for c in s {
            assert_eq!(c, cs(100.0, 0.0));
        }
    }

    #[test]
    fn two_pixel_population_std() {
        let img = RgbImage::new(2, 1, vec![0, 5, 5, 200, 5, 5]).unwrap();
        let s = channel_mean_std(&img).unwrap();
        assert_eq!(s[0], cs(100.0, 100.0));
        assert_eq!(s[1], cs(5.0, 0.0));
    }

    #[test]
    fn identical_planes_give_identical_stats() {
        let img = RgbImage::from_fn(9, 4, |x, y| {
            let v = (x * 31 + y * 7) as u8;
            [v, v, v]
        });
        let s = channel_mean_std(&img).unwrap();
        assert_eq!(s[0], s[1]);
        assert_eq!(s[1], s[2]);
    }

    #[test]
    fn empty_image_is_an_error() {
        let img = RgbImage::new(0, 0, vec![]).unwrap();
        assert_eq!(channel_mean_std(&img), Err(Error::EmptyImage));
    }

    #[test]
    fn float_and_integer_paths_agree() {
        let img = RgbImage::from_fn(13, 11, |x, y| [(x * 19) as u8, (y * 23) as u8, ((x * y) % 256) as u8]);
        let a = channel_mean_std(&img).unwrap();
        let b = channel_mean_std_f64(&img).unwrap();
        for c in 0..3 {
            assert!((a[c].mean - b[c].mean).abs() < 1e-9);
            assert!((a[c].std - b[c].std).abs() < 1e-9);
        }
    }

    #[test]
    fn gray_coefficients() {
        let img = RgbFloatImage::from_unit(3, 1, vec![1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.5, 0.5, 0.5]).unwrap();
        let g = rgb_to_gray(&img);
        assert!((g.as_raw()[0] - 1.0).abs() < 1e-15);
        assert_eq!(g.as_raw()[1], 0.299);
        assert!((g.as_raw()[2] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn three_image_summary() {
        let stats: Vec<_> = [10.0, 20.0, 30.0].iter().map(|&m| [cs(m, 1.0), cs(5.0, 2.0), cs(7.0, 3.0)]).collect();
        let s = summarize_corpus(&stats).unwrap();
        assert_eq!(s.r.mean_median, 20.0);
        assert_eq!(s.r.mean_min, 10.0);
        assert_eq!(s.r.mean_max, 30.0);
        assert!((s.r.mean_spread - libm::sqrt(200.0 / 3.0)).abs() < 1e-12);
        assert!((s.r.mean_spread - 8.1650).abs() < 1e-4);
        assert_eq!(s.n_images, 3);
    }

    #[test]
    fn even_median_averages_central_pair() {
        let stats: Vec<_> = [4.0, 1.0, 3.0, 10.0].iter().map(|&m| [cs(m, 0.0); 3]).collect();
        assert_eq!(summarize_corpus(&stats).unwrap().g.mean_median, 3.5);
    }

    #[test]
    fn degenerate_corpora() {
        let one = [[cs(12.0, 4.0), cs(13.0, 5.0), cs(14.0, 6.0)]];
        let s = summarize_corpus(&one).unwrap();
        assert_eq!(s, ChannelStatsSummary::point(&one[0]));
        let same = vec![one[0]; 5];
        let s = summarize_corpus(&same).unwrap();
        assert_eq!(s.b.std_spread, 0.0);
        assert_eq!(s.b.std_min, s.b.std_max);
        assert_eq!(summarize_corpus(&[]), Err(Error::EmptyCorpus));
    }
}
