//! Reference tensors produced by an external autograd framework in float64,
//! embedded at build time (see `golden/generate.py`), and the comparisons
//! that replay each case through the core kernels.

use darkforge_core::fslconv::{fslconv_backward, fslconv_forward, FslConvParams, OuterAct};
use darkforge_core::lapm::{lapm_pyramid, texture_backward, LapmConfig, LapmParams};
use darkforge_core::snir::{snir_backward, snir_forward, SnirParams};
use darkforge_core::tensor::{
    batchnorm_backward, batchnorm_forward, conv2d_backward, conv2d_forward, BatchNormParams, BnMode, Conv2dParams,
};
use darkforge_core::{GrayPlane, RgbFloatImage, Tensor};

use crate::tensorfile::{decode, RawTensor};

macro_rules! embed {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_bytes!(concat!("../golden/", $name, ".f64")) as &[u8])),*]
    };
}

static FILES: &[(&str, &[u8])] = embed!(
    "conv.x", "conv.w", "conv.b", "conv.cotangent", "conv.y", "conv.dx", "conv.dw", "conv.db",
    "bn.x", "bn.gamma", "bn.beta", "bn.cotangent", "bn.y", "bn.dx", "bn.dgamma", "bn.dbeta",
    "fsl.x", "fsl.w1", "fsl.w2", "fsl.gamma1", "fsl.beta1", "fsl.gamma2", "fsl.beta2", "fsl.cotangent", "fsl.y",
    "fsl.dx", "fsl.dw1", "fsl.dw2", "fsl.dgamma1", "fsl.dbeta1", "fsl.dgamma2", "fsl.dbeta2",
    "snir.x", "snir.w", "snir.b", "snir.cotangent", "snir.y", "snir.dx", "snir.dw", "snir.db",
    "lapm.image", "lapm.params", "lapm.mask0", "lapm.mask1", "lapm.mask2", "lapm.texture1", "lapm.texture2",
    "lapm.cotangent1", "lapm.cotangent2", "lapm.dparams",
);

/// Batch-norm epsilon used when the references were generated.
const BN_EPS: f64 = 1e-5;

/// One compared output: worst `|ours − ref| / max(1, |ref|)` over its entries.
#[derive(Debug, Clone, PartialEq)]
pub struct GoldenComparison {
    pub case: &'static str,
    pub output: &'static str,
    pub max_error: f64,
}

type CaseResult = Result<Vec<GoldenComparison>, String>;

fn raw(name: &str) -> Result<RawTensor, String> {
    let bytes = FILES.iter().find(|(n, _)| *n == name).ok_or_else(|| format!("no golden tensor {name}"))?.1;
    decode(bytes).map_err(|e| format!("{name}: {e}"))
}

fn tensor(name: &str) -> Result<Tensor, String> {
    let r = raw(name)?;
    let dims: [usize; 4] = r.dims.as_slice().try_into().map_err(|_| format!("{name}: expected 4 dims, got {:?}", r.dims))?;
    Tensor::new(dims, r.data).map_err(|e| format!("{name}: {e}"))
}

fn vector(name: &str) -> Result<Vec<f64>, String> {
    Ok(raw(name)?.data)
}

fn plane(name: &str) -> Result<GrayPlane, String> {
    let r = raw(name)?;
    match r.dims[..] {
        [h, w] => GrayPlane::new(w, h, r.data).map_err(|e| format!("{name}: {e}")),
        _ => Err(format!("{name}: expected 2 dims, got {:?}", r.dims)),
    }
}

fn max_error(ours: &[f64], reference: &[f64]) -> f64 {
    if ours.len() != reference.len() {
        return f64::INFINITY;
    }
    ours.iter().zip(reference).map(|(a, b)| (a - b).abs() / b.abs().max(1.0)).fold(0.0, f64::max)
}

struct Collector {
    case: &'static str,
    out: Vec<GoldenComparison>,
}

impl Collector {
    fn new(case: &'static str) -> Self {
        Self { case, out: Vec::new() }
    }

    fn cmp(&mut self, output: &'static str, ours: &[f64], reference: &str) -> Result<(), String> {
        let r = vector(reference)?;
        self.out.push(GoldenComparison { case: self.case, output, max_error: max_error(ours, &r) });
        Ok(())
    }
}

fn err(e: darkforge_core::Error) -> String {
    e.to_string()
}

fn conv_case() -> CaseResult {
    let x = tensor("conv.x")?;
    let p = Conv2dParams::grouped(tensor("conv.w")?, Some(vector("conv.b")?), 2, 1, 2).map_err(err)?;
    let g = tensor("conv.cotangent")?;
    let mut c = Collector::new("conv2d");
    c.cmp("y", conv2d_forward(&x, &p).map_err(err)?.as_raw(), "conv.y")?;
    let grads = conv2d_backward(&x, &p, &g).map_err(err)?;
    c.cmp("dx", grads.x.as_raw(), "conv.dx")?;
    c.cmp("dw", grads.weight.as_raw(), "conv.dw")?;
    c.cmp("db", grads.bias.as_deref().unwrap_or(&[]), "conv.db")?;
    Ok(c.out)
}

fn bn_params(gamma: &str, beta: &str) -> Result<BatchNormParams, String> {
    Ok(BatchNormParams { gamma: vector(gamma)?, beta: vector(beta)?, eps: BN_EPS, mode: BnMode::Batch })
}

fn bn_case() -> CaseResult {
    let x = tensor("bn.x")?;
    let p = bn_params("bn.gamma", "bn.beta")?;
    let mut c = Collector::new("batchnorm");
    let (y, cache) = batchnorm_forward(&x, &p).map_err(err)?;
    c.cmp("y", y.as_raw(), "bn.y")?;
    let grads = batchnorm_backward(&p, &cache, &tensor("bn.cotangent")?).map_err(err)?;
    c.cmp("dx", grads.x.as_raw(), "bn.dx")?;
    c.cmp("dgamma", &grads.gamma, "bn.dgamma")?;
    c.cmp("dbeta", &grads.beta, "bn.dbeta")?;
    Ok(c.out)
}

fn fsl_case() -> CaseResult {
    let x = tensor("fsl.x")?;
    let p = FslConvParams::new(
        Conv2dParams::new(tensor("fsl.w1")?, None, 2, 1).map_err(err)?,
        bn_params("fsl.gamma1", "fsl.beta1")?,
        Conv2dParams::new(tensor("fsl.w2")?, None, 1, 1).map_err(err)?,
        bn_params("fsl.gamma2", "fsl.beta2")?,
        OuterAct::Identity,
    )
    .map_err(err)?;
    let mut c = Collector::new("fslconv");
    c.cmp("y", fslconv_forward(&x, &p).map_err(err)?.as_raw(), "fsl.y")?;
    let g = fslconv_backward(&x, &p, &tensor("fsl.cotangent")?).map_err(err)?;
    c.cmp("dx", g.x.as_raw(), "fsl.dx")?;
    c.cmp("dw1", g.stage1_weight.as_raw(), "fsl.dw1")?;
    c.cmp("dw2", g.stage2_weight.as_raw(), "fsl.dw2")?;
    c.cmp("dgamma1", &g.bn1_gamma, "fsl.dgamma1")?;
    c.cmp("dbeta1", &g.bn1_beta, "fsl.dbeta1")?;
    c.cmp("dgamma2", &g.bn2_gamma, "fsl.dgamma2")?;
    c.cmp("dbeta2", &g.bn2_beta, "fsl.dbeta2")?;
    Ok(c.out)
}

fn snir_case() -> CaseResult {
    let x = tensor("snir.x")?;
    let p = SnirParams::new(tensor("snir.w")?, vector("snir.b")?, 2).map_err(err)?;
    let mut c = Collector::new("snir");
    c.cmp("y", snir_forward(&x, &p).map_err(err)?.as_raw(), "snir.y")?;
    let g = snir_backward(&x, &p, &tensor("snir.cotangent")?).map_err(err)?;
    c.cmp("dx", g.x.as_raw(), "snir.dx")?;
    c.cmp("dw", g.weight.as_raw(), "snir.dw")?;
    c.cmp("db", &g.bias, "snir.db")?;
    Ok(c.out)
}

fn lapm_case() -> CaseResult {
    let img = raw("lapm.image")?;
    let [h, w, 3] = img.dims[..] else {
        return Err(format!("lapm.image: expected (H, W, 3), got {:?}", img.dims));
    };
    let img = RgbFloatImage::from_unit(w, h, img.data).map_err(err)?;
    let pv: [f64; 4] = vector("lapm.params")?.try_into().map_err(|_| "lapm.params: expected 4 values".to_string())?;
    let params = LapmParams::from_array(pv);
    let cfg = LapmConfig { lambda: 8.0, tau_photon: 0.02, eps: 1e-8, levels: 2 };
    let pyr = lapm_pyramid(&img, &cfg, &params).map_err(err)?;
    let mut c = Collector::new("lapm");
    c.cmp("mask0", pyr.base_mask.as_raw(), "lapm.mask0")?;
    let names = [("mask1", "texture1", "lapm.mask1", "lapm.texture1", "lapm.cotangent1"),
                 ("mask2", "texture2", "lapm.mask2", "lapm.texture2", "lapm.cotangent2")];
    let mut grad = [0.0; 4];
    for (k, (mo, to, mr, tr, cot)) in names.into_iter().enumerate() {
        c.cmp(mo, pyr.masks[k].as_raw(), mr)?;
        c.cmp(to, pyr.textures[k].as_raw(), tr)?;
        let g = texture_backward(&pyr.masks[k], &params, cfg.eps, &plane(cot)?).map_err(err)?.to_array();
        for (acc, v) in grad.iter_mut().zip(g) {
            *acc += v;
        }
    }
    c.cmp("dparams", &grad, "lapm.dparams")?;
    Ok(c.out)
}

/// Replays every embedded case.
pub fn compare_all() -> Result<Vec<GoldenComparison>, String> {
    let mut all = Vec::new();
    for case in [conv_case, bn_case, fsl_case, snir_case, lapm_case] {
        all.extend(case()?);
    }
    Ok(all)
}
