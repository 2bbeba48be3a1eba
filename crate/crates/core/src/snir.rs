//! Gated nearest-neighbor upsampling for aligning feature maps across scales.
//!
//! `u = α·up_s(x)`, `Y = u ⊙ sigmoid(W ∗ u + b)` with a 1x1 convolution `W`.
//! The default `α = 1/s²` keeps `Σ u = Σ x`.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{
    conv2d_backward, conv2d_forward, hadamard, nearest_upsample, nearest_upsample_backward, sigmoid, sigmoid_backward,
    Conv2dParams, Tensor,
};

#[derive(Debug, Clone, PartialEq)]
pub struct SnirParams {
    /// `(C, C, 1, 1)`: the gate has as many channels as the upsampled features.
    pub weight: Tensor,
    pub bias: Vec<f64>,
    pub scale: usize,
    pub alpha: f64,
}

/// `1 / s²`.
pub fn default_alpha(scale: usize) -> f64 {
    1.0 / (scale * scale) as f64
}

impl SnirParams {
    pub fn new(weight: Tensor, bias: Vec<f64>, scale: usize) -> Result<Self> {
        Self::with_alpha(weight, bias, scale, default_alpha(scale.max(1)))
    }

    pub fn with_alpha(weight: Tensor, bias: Vec<f64>, scale: usize, alpha: f64) -> Result<Self> {
        let p = Self { weight, bias, scale, alpha };
        p.validate()?;
        Ok(p)
    }

    pub fn random<R: Rng + ?Sized>(channels: usize, scale: usize, rng: &mut R) -> Result<Self> {
        let bound = 1.0 / libm::sqrt(channels as f64);
        let weight = Tensor::from_fn([channels, channels, 1, 1], |_| rng.gen_range(-bound..bound));
        let bias = (0..channels).map(|_| rng.gen_range(-0.5..0.5)).collect();
        Self::new(weight, bias, scale)
    }

    pub fn channels(&self) -> usize {
        self.weight.dims()[1]
    }

    pub fn validate(&self) -> Result<()> {
        let [co, ci, kh, kw] = self.weight.dims();
        if (kh, kw) != (1, 1) {
            return Err(Error::InvalidParameter(alloc::format!("gate kernel must be 1x1, got {kh}x{kw}")));
        }
        if co != ci {
            return Err(Error::ShapeMismatch(alloc::format!(
                "gate maps {ci} -> {co} channels; the elementwise product needs equal counts"
            )));
        }
        if self.bias.len() != co {
            return Err(Error::ShapeMismatch(alloc::format!("bias has {} entries, expected {co}", self.bias.len())));
        }
        if self.scale == 0 {
            return Err(Error::InvalidParameter("upsampling factor must be >= 1".into()));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::InvalidParameter(alloc::format!("alpha {} must be > 0", self.alpha)));
        }
        Ok(())
    }

    fn gate_conv(&self) -> Conv2dParams {
        Conv2dParams { weight: self.weight.clone(), bias: Some(self.bias.clone()), stride: 1, padding: 0, groups: 1 }
    }
}

struct Forward {
    upsampled: Tensor,
    gate: Tensor,
    out: Tensor,
}

fn forward(x: &Tensor, p: &SnirParams) -> Result<Forward> {
    p.validate()?;
    if x.channels() != p.channels() {
        return Err(Error::ShapeMismatch(alloc::format!(
            "input has {} channels, gate expects {}",
            x.channels(),
            p.channels()
        )));
    }
    let upsampled = nearest_upsample(x, p.scale)?.scale(p.alpha);
    let gate = sigmoid(&conv2d_forward(&upsampled, &p.gate_conv())?);
    let out = hadamard(&upsampled, &gate)?;
    Ok(Forward { upsampled, gate, out })
}

pub fn snir_forward(x: &Tensor, p: &SnirParams) -> Result<Tensor> {
    forward(x, p).map(|f| f.out)
}

/// The sigmoid gate field alone.
pub fn snir_gate(x: &Tensor, p: &SnirParams) -> Result<Tensor> {
    forward(x, p).map(|f| f.gate)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnirGrads {
    pub x: Tensor,
    pub weight: Tensor,
    pub bias: Vec<f64>,
}

/// Exact gradients; `u` feeds both factors of the product.
pub fn snir_backward(x: &Tensor, p: &SnirParams, grad_out: &Tensor) -> Result<SnirGrads> {
    let f = forward(x, p)?;
    grad_out.expect_dims(f.out.dims(), "SNI-r grad_out")?;
    let g_u_direct = hadamard(grad_out, &f.gate)?;
    let g_gate = hadamard(grad_out, &f.upsampled)?;
    let g_logits = sigmoid_backward(&f.gate, &g_gate)?;
    let conv = conv2d_backward(&f.upsampled, &p.gate_conv(), &g_logits)?;
    let g_u = g_u_direct.add(&conv.x)?;
    let g_x = nearest_upsample_backward(&g_u, p.scale)?.scale(p.alpha);
    Ok(SnirGrads { x: g_x, weight: conv.weight, bias: conv.bias.unwrap_or_default() })
}

/// Scaled nearest upsample without a learned gate: `α·up_s(x)` with `α = 1/s²`.
pub fn sni_baseline_forward(x: &Tensor, scale: usize) -> Result<Tensor> {
    if scale == 0 {
        return Err(Error::InvalidParameter("upsampling factor must be >= 1".into()));
    }
    Ok(nearest_upsample(x, scale)?.scale(default_alpha(scale)))
}
