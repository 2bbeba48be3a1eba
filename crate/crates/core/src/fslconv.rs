//! Two-stage serial separable convolution block.
//!
//! ```text
//! G1 = act(silu(BN1(conv3x3_s(x))))      C1 -> C0 channels, stride s
//! G2 = act(silu(BN2(conv3x3_1(G1))))     C0 -> C0 channels, stride 1
//! Y  = G1 ⊕ G2                           C2 = 2·C0 channels
//! ```
//! `silu(z) = z / (1 + e^{-z})` is the gated normalization itself; `act` is an
//! optional outer activation, identity by default.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{
    batchnorm_backward, batchnorm_forward, concat_channels, conv2d_backward, conv2d_forward, silu_gate,
    silu_gate_backward, BatchNormParams, BnCache, Conv2dGrads, Conv2dParams, Tensor,
};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum OuterAct {
    #[default]
    Identity,
    Relu,
    Silu,
}

impl OuterAct {
    fn apply(self, t: &Tensor) -> Tensor {
        match self {
            Self::Identity => t.clone(),
            Self::Relu => t.map(|v| v.max(0.0)),
            Self::Silu => silu_gate(t),
        }
    }

    fn backward(self, input: &Tensor, grad: &Tensor) -> Result<Tensor> {
        match self {
            Self::Identity => Ok(grad.clone()),
            Self::Relu => {
                let data = input.as_raw().iter().zip(grad.as_raw()).map(|(&x, &g)| if x > 0.0 { g } else { 0.0 }).collect();
                Tensor::new(grad.dims(), data)
            }
            Self::Silu => silu_gate_backward(input, grad),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FslConvParams {
    pub stage1: Conv2dParams,
    pub bn1: BatchNormParams,
    pub stage2: Conv2dParams,
    pub bn2: BatchNormParams,
    pub outer_act: OuterAct,
}

impl FslConvParams {
    pub fn new(
        stage1: Conv2dParams,
        bn1: BatchNormParams,
        stage2: Conv2dParams,
        bn2: BatchNormParams,
        outer_act: OuterAct,
    ) -> Result<Self> {
        let p = Self { stage1, bn1, stage2, bn2, outer_act };
        p.validate()?;
        Ok(p)
    }

    /// Random weights (uniform, fan-in scaled), identity batch norms, no conv bias.
    pub fn random<R: Rng + ?Sized>(c1: usize, c2: usize, stride: usize, rng: &mut R) -> Result<Self> {
        if c2 == 0 || !c2.is_multiple_of(2) {
            return Err(Error::InvalidParameter(alloc::format!("output channels {c2} must be even and positive")));
        }
        let c0 = c2 / 2;
        let mut weights = |dims: [usize; 4]| {
            let bound = 1.0 / libm::sqrt((dims[1] * dims[2] * dims[3]) as f64);
            Tensor::from_fn(dims, |_| rng.gen_range(-bound..bound))
        };
        let w1 = weights([c0, c1, 3, 3]);
        let w2 = weights([c0, c0, 3, 3]);
        Self::new(
            Conv2dParams::new(w1, None, stride, 1)?,
            BatchNormParams::identity(c0),
            Conv2dParams::new(w2, None, 1, 1)?,
            BatchNormParams::identity(c0),
            OuterAct::Identity,
        )
    }

    pub fn in_channels(&self) -> usize {
        self.stage1.in_channels()
    }

    /// `C0 = C2 / 2`.
    pub fn half_channels(&self) -> usize {
        self.stage1.out_channels()
    }

    pub fn out_channels(&self) -> usize {
        2 * self.half_channels()
    }

    /// Convolution weight scalars of both stages (bias and batch norm excluded).
    pub fn weight_count(&self) -> usize {
        self.stage1.weight_count() + self.stage2.weight_count()
    }

    pub fn validate(&self) -> Result<()> {
        self.stage1.validate()?;
        self.stage2.validate()?;
        let c0 = self.half_channels();
        let [_, _, kh1, kw1] = self.stage1.weight.dims();
        let [o2, i2, kh2, kw2] = self.stage2.weight.dims();
        if (kh1, kw1, kh2, kw2) != (3, 3, 3, 3) {
            return Err(Error::InvalidParameter("both stages use 3x3 kernels".into()));
        }
        if self.stage1.groups != 1 || self.stage2.groups != 1 {
            return Err(Error::InvalidParameter("stages are ungrouped convolutions".into()));
        }
        if (o2, i2) != (c0, c0) {
            return Err(Error::ShapeMismatch(alloc::format!("stage 2 weight is {o2}x{i2}, expected {c0}x{c0}")));
        }
        if self.stage2.stride != 1 || self.stage2.padding != 1 {
            return Err(Error::InvalidParameter("stage 2 must preserve spatial dims (stride 1, padding 1)".into()));
        }
        if self.bn1.channels() != c0 || self.bn2.channels() != c0 {
            return Err(Error::ShapeMismatch(alloc::format!("batch norms must cover {c0} channels")));
        }
        Ok(())
    }
}

struct StageCache {
    conv_out: Tensor,
    bn: BnCache,
    bn_out: Tensor,
    gated: Tensor,
    out: Tensor,
}

fn stage_forward(x: &Tensor, conv: &Conv2dParams, bn: &BatchNormParams, act: OuterAct) -> Result<StageCache> {
    let conv_out = conv2d_forward(x, conv)?;
    let (bn_out, bn_cache) = batchnorm_forward(&conv_out, bn)?;
    let gated = silu_gate(&bn_out);
    let out = act.apply(&gated);
    Ok(StageCache { conv_out, bn: bn_cache, bn_out, gated, out })
}

struct StageGrads {
    conv: Conv2dGrads,
    gamma: Vec<f64>,
    beta: Vec<f64>,
}

fn stage_backward(
    x: &Tensor,
    conv: &Conv2dParams,
    bn: &BatchNormParams,
    act: OuterAct,
    cache: &StageCache,
    grad: &Tensor,
) -> Result<StageGrads> {
    let g_gated = act.backward(&cache.gated, grad)?;
    let g_bn_out = silu_gate_backward(&cache.bn_out, &g_gated)?;
    let g_bn = batchnorm_backward(bn, &cache.bn, &g_bn_out)?;
    debug_assert_eq!(g_bn.x.dims(), cache.conv_out.dims());
    let g_conv = conv2d_backward(x, conv, &g_bn.x)?;
    Ok(StageGrads { conv: g_conv, gamma: g_bn.gamma, beta: g_bn.beta })
}

fn check_input(x: &Tensor, p: &FslConvParams) -> Result<()> {
    p.validate()?;
    if x.channels() != p.in_channels() {
        return Err(Error::ShapeMismatch(alloc::format!(
            "FSLConv expects {} input channels, got {}",
            p.in_channels(),
            x.channels()
        )));
    }
    Ok(())
}

/// Stage 1 on its own: `G1`.
pub fn stage1_forward(x: &Tensor, p: &FslConvParams) -> Result<Tensor> {
    check_input(x, p)?;
    Ok(stage_forward(x, &p.stage1, &p.bn1, p.outer_act)?.out)
}

pub fn fslconv_forward(x: &Tensor, p: &FslConvParams) -> Result<Tensor> {
    check_input(x, p)?;
    let s1 = stage_forward(x, &p.stage1, &p.bn1, p.outer_act)?;
    let s2 = stage_forward(&s1.out, &p.stage2, &p.bn2, p.outer_act)?;
    concat_channels(&s1.out, &s2.out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FslConvGrads {
    pub x: Tensor,
    pub stage1_weight: Tensor,
    pub bn1_gamma: Vec<f64>,
    pub bn1_beta: Vec<f64>,
    pub stage2_weight: Tensor,
    pub bn2_gamma: Vec<f64>,
    pub bn2_beta: Vec<f64>,
}

/// Exact gradients. `G1` receives gradient both from its own output slice and
/// through stage 2.
pub fn fslconv_backward(x: &Tensor, p: &FslConvParams, grad_out: &Tensor) -> Result<FslConvGrads> {
    check_input(x, p)?;
    let s1 = stage_forward(x, &p.stage1, &p.bn1, p.outer_act)?;
    let s2 = stage_forward(&s1.out, &p.stage2, &p.bn2, p.outer_act)?;
    let c0 = p.half_channels();
    let out_dims = [x.batch(), 2 * c0, s1.out.height(), s1.out.width()];
    grad_out.expect_dims(out_dims, "FSLConv grad_out")?;
    let g_direct = grad_out.slice_channels(0..c0)?;
    let g_g2 = grad_out.slice_channels(c0..2 * c0)?;
    let g2 = stage_backward(&s1.out, &p.stage2, &p.bn2, p.outer_act, &s2, &g_g2)?;
    let g_g1 = g_direct.add(&g2.conv.x)?;
    let g1 = stage_backward(x, &p.stage1, &p.bn1, p.outer_act, &s1, &g_g1)?;
    Ok(FslConvGrads {
        x: g1.conv.x,
        stage1_weight: g1.conv.weight,
        bn1_gamma: g1.gamma,
        bn1_beta: g1.beta,
        stage2_weight: g2.conv.weight,
        bn2_gamma: g2.gamma,
        bn2_beta: g2.beta,
    })
}
