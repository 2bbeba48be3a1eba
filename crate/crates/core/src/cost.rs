//! Exact FLOPs/MACs accounting for standard, grouped and split convolutions.
//!
//! Conventions (all counts exact, no floating point):
//! - one multiply-accumulate = 2 FLOPs, bias folded into the accumulation, so a
//!   standard conv costs `2·C1·C2·Kh·Kw·H·W`;
//! - a `g`-way split costs `1/g` of that;
//! - memory access cost is activation traffic `H·W·(C1 + C2)` plus weight traffic
//!   `C1·C2·Kh·Kw / g`;
//! - `H`, `W` are always output dims.

use alloc::string::String;
use alloc::vec::Vec;

use num_rational::Ratio;
use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::lapm::LapmParams;

/// Exact rational count.
pub type Exact = Ratio<i128>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum LayerKind {
    StandardConv,
    FslConv,
    Lapm,
    Upsample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LayerSpec {
    pub c_in: u64,
    pub c_out: u64,
    pub kh: u64,
    pub kw: u64,
    /// Output height.
    pub h: u64,
    /// Output width.
    pub w: u64,
    #[cfg_attr(feature = "serde", serde(default = "one"))]
    pub stride: u64,
    #[cfg_attr(feature = "serde", serde(default = "one"))]
    pub groups: u64,
    pub kind: LayerKind,
}

#[cfg(feature = "serde")]
fn one() -> u64 {
    1
}

impl LayerSpec {
    pub fn conv(c_in: u64, c_out: u64, k: u64, h: u64, w: u64) -> Self {
        Self { c_in, c_out, kh: k, kw: k, h, w, stride: 1, groups: 1, kind: LayerKind::StandardConv }
    }

    pub fn with_groups(self, groups: u64) -> Self {
        Self { groups, ..self }
    }

    pub fn with_stride(self, stride: u64) -> Self {
        Self { stride, ..self }
    }

    pub fn with_kind(self, kind: LayerKind) -> Self {
        Self { kind, ..self }
    }

    /// `C1·C2·Kh·Kw·H·W`.
    fn volume(&self) -> u128 {
        [self.c_in, self.c_out, self.kh, self.kw, self.h, self.w].iter().map(|&v| u128::from(v)).product()
    }

    fn weight_term(&self) -> u128 {
        [self.c_in, self.c_out, self.kh, self.kw].iter().map(|&v| u128::from(v)).product()
    }

    fn traffic_term(&self) -> u128 {
        u128::from(self.h) * u128::from(self.w) * (u128::from(self.c_in) + u128::from(self.c_out))
    }

    pub fn check_groups(&self, g: u64) -> Result<()> {
        if g == 0 || !self.c_in.is_multiple_of(g) || !self.c_out.is_multiple_of(g) {
            return Err(Error::GroupDivisibility { groups: g, c_in: self.c_in, c_out: self.c_out });
        }
        Ok(())
    }
}

fn signed(v: u128) -> i128 {
    i128::try_from(v).expect("count exceeds i128")
}

/// Standard convolution FLOPs `2·C1·C2·Kh·Kw·H·W` (the `groups` field is ignored).
pub fn conv_flops(spec: &LayerSpec) -> u128 {
    2 * spec.volume()
}

/// Grouped convolution FLOPs `2·(C2/g)·C1·Kh·Kw·H·W`.
pub fn conv_flops_grouped(spec: &LayerSpec) -> Result<u128> {
    spec.check_groups(spec.groups)?;
    let g = u128::from(spec.groups);
    Ok(2 * (u128::from(spec.c_out) / g)
        * u128::from(spec.c_in)
        * u128::from(spec.kh)
        * u128::from(spec.kw)
        * u128::from(spec.h)
        * u128::from(spec.w))
}

/// `F(g) = 2·((1 − g)/g)·C1·C2·Kh·Kw·H·W`.
pub fn flops_increment(spec: &LayerSpec, g: u64) -> Result<Exact> {
    if g == 0 {
        return Err(Error::InvalidParameter("split factor must be >= 1".into()));
    }
    let g = i128::from(g);
    Ok(Exact::new(2 * (1 - g), g) * Exact::from_integer(signed(spec.volume())))
}

/// `lim_{g→∞} F(g) = −conv_flops`.
pub fn flops_increment_limit(spec: &LayerSpec) -> Exact {
    Exact::from_integer(-signed(conv_flops(spec)))
}

/// `MACs = H·W·(C1 + C2) + C1·C2·Kh·Kw`.
pub fn conv_macs(spec: &LayerSpec) -> u128 {
    spec.traffic_term() + spec.weight_term()
}

/// `MACs_g = g·[H·W·(C1/g + C2/g) + (C1/g)·(C2/g)·Kh·Kw] = H·W·(C1 + C2) + C1·C2·Kh·Kw/g`.
pub fn conv_macs_grouped(spec: &LayerSpec) -> Result<u128> {
    spec.check_groups(spec.groups)?;
    let g = u128::from(spec.groups);
    let per_group = u128::from(spec.h) * u128::from(spec.w) * (u128::from(spec.c_in) / g + u128::from(spec.c_out) / g)
        + (u128::from(spec.c_in) / g) * (u128::from(spec.c_out) / g) * u128::from(spec.kh) * u128::from(spec.kw);
    Ok(g * per_group)
}

/// `M(g) = C1·C2·Kh·Kw·(1/g − 1)`, exact for any `g >= 1`.
pub fn macs_increment(spec: &LayerSpec, g: u64) -> Result<Exact> {
    if g == 0 {
        return Err(Error::InvalidParameter("split factor must be >= 1".into()));
    }
    let g = i128::from(g);
    Ok(Exact::from_integer(signed(spec.weight_term())) * Exact::new(1 - g, g))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub g: u64,
    pub flops_increment: Exact,
    pub macs_increment: Exact,
    /// `F(g) / FLOPs`.
    pub flops_ratio: Exact,
    /// `M(g) / (C1·C2·Kh·Kw)`.
    pub macs_weight_ratio: Exact,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IncrementCurve {
    pub points: Vec<CurvePoint>,
    /// `|F(g_{k+1})| − |F(g_k)|` for consecutive points.
    pub marginal_flops_gain: Vec<Exact>,
    /// `|M(g_{k+1})| − |M(g_k)|` for consecutive points.
    pub marginal_macs_gain: Vec<Exact>,
}

impl IncrementCurve {
    /// Index `k` of the step `g_k → g_{k+1}` with the largest FLOPs gain (first on ties).
    pub fn best_step(&self) -> Option<usize> {
        let mut best: Option<(usize, &Exact)> = None;
        for (i, gain) in self.marginal_flops_gain.iter().enumerate() {
            if best.is_none_or(|(_, b)| gain > b) {
                best = Some((i, gain));
            }
        }
        best.map(|(i, _)| i)
    }
}

pub fn increment_curve(spec: &LayerSpec, g_values: &[u64]) -> Result<IncrementCurve> {
    if g_values.contains(&0) || g_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("split factors must be >= 1 and strictly ascending".into()));
    }
    let flops = Exact::from_integer(signed(conv_flops(spec)));
    let weights = Exact::from_integer(signed(spec.weight_term()));
    let mut points = Vec::with_capacity(g_values.len());
    for &g in g_values {
        let f = flops_increment(spec, g)?;
        let m = macs_increment(spec, g)?;
        let flops_ratio = if flops.is_zero() { Exact::zero() } else { f / flops };
        let macs_weight_ratio = if weights.is_zero() { Exact::zero() } else { m / weights };
        points.push(CurvePoint { g, flops_increment: f, macs_increment: m, flops_ratio, macs_weight_ratio });
    }
    let gains = |sel: fn(&CurvePoint) -> Exact| -> Vec<Exact> {
        points.windows(2).map(|w| sel(&w[1]).abs() - sel(&w[0]).abs()).collect()
    };
    let marginal_flops_gain = gains(|p| p.flops_increment);
    let marginal_macs_gain = gains(|p| p.macs_increment);
    Ok(IncrementCurve { points, marginal_flops_gain, marginal_macs_gain })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct FslCost {
    pub stage1_flops: u128,
    pub stage2_flops: u128,
    pub flops: u128,
    pub macs: u128,
    pub weight_params: u128,
    /// Weights of a single standard 3x3 conv `C1 → C2`.
    pub standard_weight_params: u128,
}

impl FslCost {
    pub fn weight_ratio(&self) -> Exact {
        Exact::new(signed(self.weight_params), signed(self.standard_weight_params))
    }
}

/// Cost of a split block: a 3x3 conv `C1 → C2/2` at the output resolution,
/// then a 3x3 conv `C2/2 → C2/2` at the same resolution.
pub fn fsl_layer_cost(c1: u64, c2: u64, stride: u64, h_out: u64, w_out: u64) -> Result<FslCost> {
    if c2 == 0 || !c2.is_multiple_of(2) {
        return Err(Error::InvalidParameter(alloc::format!("output channels {c2} must be even and positive")));
    }
    if stride == 0 {
        return Err(Error::InvalidParameter("stride must be >= 1".into()));
    }
    let c0 = c2 / 2;
    let s1 = LayerSpec::conv(c1, c0, 3, h_out, w_out).with_stride(stride);
    let s2 = LayerSpec::conv(c0, c0, 3, h_out, w_out);
    let stage1_flops = conv_flops(&s1);
    let stage2_flops = conv_flops(&s2);
    Ok(FslCost {
        stage1_flops,
        stage2_flops,
        flops: stage1_flops + stage2_flops,
        macs: conv_macs(&s1) + conv_macs(&s2),
        weight_params: s1.weight_term() + s2.weight_term(),
        standard_weight_params: LayerSpec::conv(c1, c2, 3, h_out, w_out).weight_term(),
    })
}

/// Operation-counting convention used by [`lapm_cost`].
pub const LAPM_CONVENTION: &str = "lapm-ops-v1: 2 FLOPs per multiply-add, 1 per lone multiply/add/divide, \
1 per compare, 4 per exp; amplify 3/px, BT.601 gray 5/px, threshold 1/px; per pyramid level: 2x2 max-pool \
3/out, gate z=w*m+bias 2 + gamma*z+beta 2 + exp 4 + two adds 2 + divide 1 = 11/out; planes use floor(side/2^k)";

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct StageCost {
    pub name: String,
    pub elements: u128,
    pub flops_per_element: u128,
    pub flops: u128,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct LapmCost {
    pub stages: Vec<StageCost>,
    pub total: u128,
    pub convention: &'static str,
}

pub fn lapm_cost(h: u64, w: u64, levels: u32) -> LapmCost {
    let pixels = u128::from(h) * u128::from(w);
    let mut stages = Vec::new();
    let mut push = |name: String, elements: u128, per: u128| {
        stages.push(StageCost { name, elements, flops_per_element: per, flops: elements * per });
    };
    push("amplify".into(), pixels, 3);
    push("grayscale".into(), pixels, 5);
    push("threshold".into(), pixels, 1);
    let (mut ph, mut pw) = (h, w);
    for level in 1..=levels {
        ph /= 2;
        pw /= 2;
        let outs = u128::from(ph) * u128::from(pw);
        push(alloc::format!("level{level}.maxpool"), outs, 3);
        push(alloc::format!("level{level}.gate"), outs, 11);
    }
    let total = stages.iter().map(|s| s.flops).sum();
    LapmCost { stages, total, convention: LAPM_CONVENTION }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct LayerCost {
    pub index: usize,
    pub spec: LayerSpec,
    pub flops: u128,
    pub macs: u128,
    pub params: u128,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct NetworkCost {
    pub layers: Vec<LayerCost>,
    pub total_flops: u128,
    pub total_macs: u128,
    pub total_params: u128,
}

fn layer_cost(index: usize, spec: &LayerSpec, lapm_params_counted: &mut bool) -> Result<LayerCost> {
    let chain_err = |reason: String| Error::InconsistentChain { index, reason };
    let (flops, macs, params) = match spec.kind {
        LayerKind::StandardConv => {
            let flops = conv_flops_grouped(spec).map_err(|e| chain_err(alloc::format!("{e}")))?;
            let macs = conv_macs_grouped(spec).map_err(|e| chain_err(alloc::format!("{e}")))?;
            (flops, macs, spec.weight_term() / u128::from(spec.groups))
        }
        LayerKind::FslConv => {
            let c = fsl_layer_cost(spec.c_in, spec.c_out, spec.stride, spec.h, spec.w)
                .map_err(|e| chain_err(alloc::format!("{e}")))?;
            (c.flops, c.macs, c.weight_params)
        }
        LayerKind::Lapm => {
            if spec.c_in != 1 || spec.c_out != 1 {
                return Err(chain_err("mask layers carry a single channel".into()));
            }
            let outs = u128::from(spec.h) * u128::from(spec.w);
            // Parameters are shared by every level of the branch.
            let params = if *lapm_params_counted { 0 } else { LapmParams::TRAINABLE as u128 };
            *lapm_params_counted = true;
            (outs * 14, spec.traffic_term(), params)
        }
        LayerKind::Upsample => (0, spec.traffic_term(), 0),
    };
    Ok(LayerCost { index, spec: *spec, flops, macs, params })
}

/// Per-layer and total cost of a chain of layers. Consecutive layers must agree
/// on channels, and spatial dims must follow the stride (downsampling) or the
/// scale factor (upsampling).
pub fn network_cost(layers: &[LayerSpec]) -> Result<NetworkCost> {
    let mut out = Vec::with_capacity(layers.len());
    let mut lapm_counted = false;
    for (index, spec) in layers.iter().enumerate() {
        if spec.stride == 0 || spec.kh == 0 || spec.kw == 0 {
            return Err(Error::InconsistentChain { index, reason: "stride and kernel dims must be >= 1".into() });
        }
        if index > 0 {
            let prev = &layers[index - 1];
            if prev.c_out != spec.c_in {
                return Err(Error::InconsistentChain {
                    index,
                    reason: alloc::format!("expects {} input channels, previous layer emits {}", spec.c_in, prev.c_out),
                });
            }
            let expected = match spec.kind {
                LayerKind::Upsample => (prev.h * spec.stride, prev.w * spec.stride),
                // Pooling drops odd edges; padded convs round up.
                LayerKind::Lapm => (prev.h / spec.stride, prev.w / spec.stride),
                _ => (prev.h.div_ceil(spec.stride), prev.w.div_ceil(spec.stride)),
            };
            if (spec.h, spec.w) != expected {
                return Err(Error::InconsistentChain {
                    index,
                    reason: alloc::format!(
                        "output {}x{} does not follow {}x{} at stride {}",
                        spec.h, spec.w, prev.h, prev.w, spec.stride
                    ),
                });
            }
        }
        out.push(layer_cost(index, spec, &mut lapm_counted)?);
    }
    Ok(NetworkCost {
        total_flops: out.iter().map(|l| l.flops).sum(),
        total_macs: out.iter().map(|l| l.macs).sum(),
        total_params: out.iter().map(|l| l.params).sum(),
        layers: out,
    })
}

/// Backbone variant of the split-conv network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backbone {
    Small,
    Large,
}

/// Main-branch backbone rows (stem conv, split blocks, 1x1 conv blocks) for an
/// RGB `side x side` input. The pooling head is not included.
pub fn backbone_layers(variant: Backbone, side: u64) -> Vec<LayerSpec> {
    // (kind, channels, kernel, stride, repeats)
    let rows: &[(LayerKind, u64, u64, u64, usize)] = match variant {
        Backbone::Small => &[
            (LayerKind::StandardConv, 16, 3, 2, 1),
            (LayerKind::FslConv, 32, 3, 2, 1),
            (LayerKind::StandardConv, 32, 1, 1, 1),
            (LayerKind::FslConv, 64, 3, 2, 1),
            (LayerKind::StandardConv, 64, 1, 1, 2),
            (LayerKind::FslConv, 128, 3, 2, 1),
            (LayerKind::StandardConv, 128, 1, 1, 2),
            (LayerKind::FslConv, 256, 3, 2, 1),
            (LayerKind::StandardConv, 256, 1, 1, 1),
        ],
        Backbone::Large => &[
            (LayerKind::StandardConv, 64, 3, 2, 1),
            (LayerKind::FslConv, 128, 3, 2, 1),
            (LayerKind::StandardConv, 128, 1, 1, 3),
            (LayerKind::FslConv, 256, 3, 2, 1),
            (LayerKind::StandardConv, 256, 1, 1, 6),
            (LayerKind::FslConv, 512, 3, 2, 1),
            (LayerKind::StandardConv, 512, 1, 1, 6),
            (LayerKind::FslConv, 1024, 3, 2, 1),
            (LayerKind::StandardConv, 1024, 1, 1, 3),
        ],
    };
    let mut layers = Vec::new();
    let (mut c, mut hw) = (3u64, side);
    for &(kind, channels, k, stride, repeats) in rows {
        for _ in 0..repeats {
            hw = hw.div_ceil(stride);
            layers.push(LayerSpec { c_in: c, c_out: channels, kh: k, kw: k, h: hw, w: hw, stride, groups: 1, kind });
            c = channels;
        }
    }
    layers
}

/// The mask branch: `levels` 2x2 stride-2 single-channel layers.
pub fn lapm_branch_layers(side: u64, levels: u32) -> Vec<LayerSpec> {
    let mut hw = side;
    (0..levels)
        .map(|_| {
            hw /= 2;
            LayerSpec { c_in: 1, c_out: 1, kh: 2, kw: 2, h: hw, w: hw, stride: 2, groups: 1, kind: LayerKind::Lapm }
        })
        .collect()
}
