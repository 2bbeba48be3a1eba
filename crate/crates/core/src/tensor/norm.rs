//! Batch normalization over the batch and spatial dimensions.

use alloc::vec::Vec;

use super::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum BnMode {
    /// Mean and population variance computed from the input.
    Batch,
    /// Externally supplied (running) statistics.
    Provided { mean: Vec<f64>, var: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormParams {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub eps: f64,
    pub mode: BnMode,
}

impl BatchNormParams {
    /// `γ = 1`, `β = 0`, `ε = 1e-8`, batch statistics.
    pub fn identity(channels: usize) -> Self {
        Self { gamma: alloc::vec![1.0; channels], beta: alloc::vec![0.0; channels], eps: 1e-8, mode: BnMode::Batch }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    fn validate(&self, channels: usize) -> Result<()> {
        if !(self.eps > 0.0) {
            return Err(Error::InvalidParameter(alloc::format!("batchnorm eps {} must be > 0", self.eps)));
        }
        let mut lens = alloc::vec![self.gamma.len(), self.beta.len()];
        if let BnMode::Provided { mean, var } = &self.mode {
            lens.extend([mean.len(), var.len()]);
            if var.iter().any(|&v| v < 0.0) {
                return Err(Error::InvalidParameter("provided variance is negative".into()));
            }
        }
        if lens.iter().any(|&l| l != channels) {
            return Err(Error::ShapeMismatch(alloc::format!(
                "batchnorm parameter lengths {lens:?} for {channels} channels"
            )));
        }
        Ok(())
    }
}

/// Values saved by the forward pass for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct BnCache {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub inv_std: Vec<f64>,
    /// Normalized input before the affine step.
    pub normalized: Tensor,
    batch_stats: bool,
}

pub fn batchnorm_forward(x: &Tensor, p: &BatchNormParams) -> Result<(Tensor, BnCache)> {
    let [n, c, h, w] = x.dims();
    p.validate(c)?;
    let plane = h * w;
    let xs = x.as_raw();
    let (mean, var) = match &p.mode {
        BnMode::Provided { mean, var } => (mean.clone(), var.clone()),
        BnMode::Batch => {
            let count = n * plane;
            if count == 0 {
                return Err(Error::ShapeMismatch("batch statistics need N*H*W >= 1".into()));
            }
            let mut mean = alloc::vec![0.0; c];
            let mut var = alloc::vec![0.0; c];
            for ch in 0..c {
                let mut s = 0.0;
                for b in 0..n {
                    let base = (b * c + ch) * plane;
                    s += xs[base..base + plane].iter().sum::<f64>();
                }
                let m = s / count as f64;
                let mut ss = 0.0;
                for b in 0..n {
                    let base = (b * c + ch) * plane;
                    ss += xs[base..base + plane].iter().map(|v| (v - m) * (v - m)).sum::<f64>();
                }
                mean[ch] = m;
                var[ch] = ss / count as f64;
            }
            (mean, var)
        }
    };
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / libm::sqrt(v + p.eps)).collect();
    let mut normalized = Vec::with_capacity(xs.len());
    let mut out = Vec::with_capacity(xs.len());
    for b in 0..n {
        for ch in 0..c {
            let base = (b * c + ch) * plane;
            for &v in &xs[base..base + plane] {
                let xh = (v - mean[ch]) * inv_std[ch];
                normalized.push(xh);
                out.push(xh * p.gamma[ch] + p.beta[ch]);
            }
        }
    }
    let cache = BnCache {
        mean,
        var,
        inv_std,
        normalized: Tensor::from_parts(x.dims(), normalized),
        batch_stats: matches!(p.mode, BnMode::Batch),
    };
    Ok((Tensor::from_parts(x.dims(), out), cache))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormGrads {
    pub x: Tensor,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

/// Backward pass. In batch mode the dependence of mean and variance on `x` is
/// included: `dx = γ·inv_std/M · (M·dy − Σdy − x̂·Σ(dy·x̂))`.
pub fn batchnorm_backward(p: &BatchNormParams, cache: &BnCache, grad_out: &Tensor) -> Result<BatchNormGrads> {
    grad_out.expect_dims(cache.normalized.dims(), "batchnorm grad_out")?;
    let [n, c, h, w] = grad_out.dims();
    p.validate(c)?;
    let plane = h * w;
    let gs = grad_out.as_raw();
    let xh = cache.normalized.as_raw();
    let mut dgamma = alloc::vec![0.0; c];
    let mut dbeta = alloc::vec![0.0; c];
    for b in 0..n {
        for ch in 0..c {
            let base = (b * c + ch) * plane;
            for i in base..base + plane {
                dbeta[ch] += gs[i];
                dgamma[ch] += gs[i] * xh[i];
            }
        }
    }
    let m = (n * plane) as f64;
    let mut dx = alloc::vec![0.0; gs.len()];
    for b in 0..n {
        for ch in 0..c {
            let base = (b * c + ch) * plane;
            let k = p.gamma[ch] * cache.inv_std[ch];
            for i in base..base + plane {
                dx[i] = if cache.batch_stats {
                    k / m * (m * gs[i] - dbeta[ch] - xh[i] * dgamma[ch])
                } else {
                    k * gs[i]
                };
            }
        }
    }
    Ok(BatchNormGrads { x: Tensor::from_parts(grad_out.dims(), dx), gamma: dgamma, beta: dbeta })
}
