//! JSON and CSV renderings of the cost model.

use darkforge_core::cost::{
    conv_flops, conv_flops_grouped, conv_macs, conv_macs_grouped, flops_increment, fsl_layer_cost, increment_curve,
    lapm_cost, macs_increment, network_cost, Exact, FslCost, IncrementCurve, LapmCost, LayerSpec, NetworkCost,
};
use serde::Serialize;
use serde_json::Value;

use crate::manifest::SCHEMA_VERSION;

/// Counting rules behind the convolution figures.
pub const CONV_CONVENTION: &str = "conv-ops-v1: FLOPs = 2 per multiply-accumulate, bias excluded; \
grouped FLOPs = 2*(C2/g)*C1*Kh*Kw*H*W; MACs = H*W*(C1+C2) + C1*C2*Kh*Kw/g with H, W the output dims; \
F(g), M(g) = grouped minus standard";

/// Exact value as a JSON integer when integral, else as the string `"p/q"`.
pub fn exact_json(v: &Exact) -> Value {
    if v.is_integer() {
        if let Ok(n) = i64::try_from(v.to_integer()) {
            return Value::from(n);
        }
    }
    Value::String(v.to_string())
}

fn exact_f64(v: &Exact) -> f64 {
    *v.numer() as f64 / *v.denom() as f64
}

#[derive(Debug, Clone, Serialize)]
pub struct CurveRow {
    pub g: u64,
    #[serde(rename = "F")]
    pub f: Value,
    #[serde(rename = "M")]
    pub m: Value,
    pub flops_ratio: Value,
    pub macs_weight_ratio: Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvReport {
    pub schema_version: u32,
    pub convention: &'static str,
    pub spec: LayerSpec,
    pub flops: u128,
    pub flops_grouped: u128,
    pub macs: u128,
    pub macs_grouped: u128,
    pub params: u128,
    #[serde(rename = "F")]
    pub f: Value,
    #[serde(rename = "M")]
    pub m: Value,
    pub curve: Vec<CurveRow>,
    pub marginal_flops_gain: Vec<Value>,
    /// `"g_k->g_{k+1}"` with the largest FLOPs gain.
    pub best_step: Option<String>,
}

pub fn conv_report(spec: &LayerSpec, curve_g: &[u64]) -> darkforge_core::Result<(ConvReport, IncrementCurve)> {
    let g = spec.groups;
    let base = LayerSpec { groups: 1, ..*spec };
    let curve = increment_curve(&base, curve_g)?;
    let rows = curve
        .points
        .iter()
        .map(|p| CurveRow {
            g: p.g,
            f: exact_json(&p.flops_increment),
            m: exact_json(&p.macs_increment),
            flops_ratio: exact_json(&p.flops_ratio),
            macs_weight_ratio: exact_json(&p.macs_weight_ratio),
        })
        .collect();
    let best_step = curve.best_step().map(|k| format!("{}->{}", curve.points[k].g, curve.points[k + 1].g));
    let report = ConvReport {
        schema_version: SCHEMA_VERSION,
        convention: CONV_CONVENTION,
        spec: *spec,
        flops: conv_flops(&base),
        flops_grouped: conv_flops_grouped(spec)?,
        macs: conv_macs(&base),
        macs_grouped: conv_macs_grouped(spec)?,
        params: u128::from(spec.c_in) * u128::from(spec.c_out) * u128::from(spec.kh) * u128::from(spec.kw)
            / u128::from(g),
        f: exact_json(&flops_increment(&base, g)?),
        m: exact_json(&macs_increment(&base, g)?),
        curve: rows,
        marginal_flops_gain: curve.marginal_flops_gain.iter().map(exact_json).collect(),
        best_step,
    };
    Ok((report, curve))
}

/// `g,F,M,flops_ratio,macs_weight_ratio` with exact values and float ratios for plotting.
pub fn curve_csv(curve: &IncrementCurve) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["g", "F", "M", "flops_ratio", "macs_weight_ratio"])?;
    for p in &curve.points {
        w.write_record([
            p.g.to_string(),
            p.flops_increment.to_string(),
            p.macs_increment.to_string(),
            exact_f64(&p.flops_ratio).to_string(),
            exact_f64(&p.macs_weight_ratio).to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| e.into_error().into())
}

#[derive(Debug, Clone, Serialize)]
pub struct FslReport {
    pub schema_version: u32,
    pub convention: &'static str,
    pub c1: u64,
    pub c2: u64,
    pub stride: u64,
    pub h_out: u64,
    pub w_out: u64,
    #[serde(flatten)]
    pub cost: FslCost,
    pub weight_ratio: Value,
    pub weight_ratio_f64: f64,
}

pub fn fsl_report(c1: u64, c2: u64, stride: u64, h_out: u64, w_out: u64) -> darkforge_core::Result<FslReport> {
    let cost = fsl_layer_cost(c1, c2, stride, h_out, w_out)?;
    let ratio = cost.weight_ratio();
    Ok(FslReport {
        schema_version: SCHEMA_VERSION,
        convention: CONV_CONVENTION,
        c1,
        c2,
        stride,
        h_out,
        w_out,
        cost,
        weight_ratio: exact_json(&ratio),
        weight_ratio_f64: exact_f64(&ratio),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LapmReport {
    pub schema_version: u32,
    pub h: u64,
    pub w: u64,
    pub levels: u32,
    #[serde(flatten)]
    pub cost: LapmCost,
    pub total_gflops: f64,
}

pub fn lapm_report(h: u64, w: u64, levels: u32) -> LapmReport {
    let cost = lapm_cost(h, w, levels);
    let total_gflops = cost.total as f64 / 1e9;
    LapmReport { schema_version: SCHEMA_VERSION, h, w, levels, cost, total_gflops }
}

#[derive(Debug, Clone, Serialize)]
pub struct NetworkReport {
    pub schema_version: u32,
    pub convention: &'static str,
    #[serde(flatten)]
    pub cost: NetworkCost,
    pub total_gflops: f64,
}

pub fn network_report(layers: &[LayerSpec]) -> darkforge_core::Result<NetworkReport> {
    let cost = network_cost(layers)?;
    let total_gflops = cost.total_flops as f64 / 1e9;
    Ok(NetworkReport { schema_version: SCHEMA_VERSION, convention: CONV_CONVENTION, cost, total_gflops })
}
