//! Self-verification battery behind the `check` command.

use darkforge_core::cost::{conv_flops, conv_flops_grouped, flops_increment, increment_curve, macs_increment, Exact, LayerSpec};
use darkforge_core::degrade::{color_ratios, degrade_with_targets, DegradeConfig, TargetSample};
use darkforge_core::fslconv::{fslconv_backward, fslconv_forward, FslConvParams};
use darkforge_core::lapm::{base_mask, texture_backward, texture_features, LapmConfig, LapmParams};
use darkforge_core::snir::{snir_backward, snir_forward, SnirParams};
use darkforge_core::stats::channel_mean_std;
use darkforge_core::tensor::{
    batchnorm_backward, batchnorm_forward, conv2d_backward, conv2d_forward, conv2d_forward_counted,
    finite_diff_check, sigmoid, sigmoid_backward, silu_gate, silu_gate_backward, BatchNormParams, BnMode,
    Conv2dParams,
};
use darkforge_core::truncnorm::TruncNormParams;
use darkforge_core::{ChannelStats, GrayPlane, RgbFloatImage, RgbImage, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Central-difference step for maps that are linear in the checked argument,
/// where the difference quotient is exact and only rounding matters.
pub const LINEAR_STEP: f64 = 1e-3;
/// Step for nonlinear maps, balancing truncation against rounding.
pub const NONLINEAR_STEP: f64 = 1e-5;
pub const LINEAR_TOL: f64 = 1e-6;
pub const NONLINEAR_TOL: f64 = 1e-5;
pub const GOLDEN_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct CheckOptions {
    pub seeds: u64,
    /// Gradient case whose analytic result is scaled by `1 + 1e-3` (negative control).
    pub perturb: Option<String>,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self { seeds: 20, perturb: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub suite: &'static str,
    pub case: String,
    pub trials: u64,
    pub max_error: f64,
    pub tolerance: f64,
    /// Equality-style checks pass at `max_error <= tolerance`, the rest need `<`.
    pub inclusive: bool,
    pub note: Option<String>,
}

impl CheckRow {
    pub fn passed(&self) -> bool {
        self.note.is_none()
            && (if self.inclusive { self.max_error <= self.tolerance } else { self.max_error < self.tolerance })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub rows: Vec<CheckRow>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(CheckRow::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRow> {
        self.rows.iter().filter(|r| !r.passed())
    }

    pub fn table(&self) -> String {
        let mut out = format!("{:<12} {:<22} {:>6} {:>12} {:>10}  {}\n", "suite", "case", "trials", "max error", "tolerance", "status");
        for r in &self.rows {
            let status = match (&r.note, r.passed()) {
                (Some(n), _) => format!("FAIL ({n})"),
                (None, true) => "pass".to_string(),
                (None, false) => "FAIL".to_string(),
            };
            out.push_str(&format!(
                "{:<12} {:<22} {:>6} {:>12.3e} {:>10.1e}  {}\n",
                r.suite, r.case, r.trials, r.max_error, r.tolerance, status
            ));
        }
        out
    }
}

type GradFn = fn(&mut ChaCha8Rng, Fd) -> Result<f64, String>;

/// Analytic scale (perturbation hook) and finite-difference step of one case.
#[derive(Debug, Clone, Copy)]
struct Fd {
    scale: f64,
    step: f64,
}

const GRADIENT_CASES: &[(&str, bool, GradFn)] = &[
    ("conv2d", true, grad_conv),
    ("conv2d-grouped", true, grad_conv_grouped),
    ("batchnorm-provided", true, grad_bn_provided),
    ("batchnorm", false, grad_bn_batch),
    ("silu", false, grad_silu),
    ("sigmoid", false, grad_sigmoid),
    ("fslconv", false, grad_fslconv),
    ("snir", false, grad_snir),
    ("lapm-texture", false, grad_lapm),
];

/// Names accepted by [`CheckOptions::perturb`].
pub fn gradient_case_names() -> Vec<&'static str> {
    GRADIENT_CASES.iter().map(|c| c.0).collect()
}

pub fn run_checks(opts: &CheckOptions) -> CheckReport {
    let mut rows = Vec::new();
    for &(name, linear, f) in GRADIENT_CASES {
        let scale = if opts.perturb.as_deref() == Some(name) { 1.0 + 1e-3 } else { 1.0 };
        let step = if linear { LINEAR_STEP } else { NONLINEAR_STEP };
        let mut worst = 0.0f64;
        let mut note = None;
        for seed in 0..opts.seeds {
            let mut rng = ChaCha8Rng::seed_from_u64(0x6368_6563_6b00 ^ seed);
            match f(&mut rng, Fd { scale, step }) {
                Ok(e) => worst = worst.max(e),
                Err(e) => {
                    note = Some(e);
                    break;
                }
            }
        }
        let tolerance = if linear { LINEAR_TOL } else { NONLINEAR_TOL };
        rows.push(CheckRow { suite: "gradient", case: name.into(), trials: opts.seeds, max_error: worst, tolerance, inclusive: false, note });
    }
    rows.extend(golden_rows());
    rows.extend(sampler_rows());
    rows.extend(degrade_rows());
    rows.extend(cost_rows());
    rows.extend(lapm_rows());
    CheckReport { rows }
}

fn row(suite: &'static str, case: &str, trials: u64, max_error: f64, tolerance: f64) -> CheckRow {
    CheckRow { suite, case: case.into(), trials, max_error, tolerance, inclusive: true, note: None }
}

fn golden_rows() -> Vec<CheckRow> {
    match crate::golden::compare_all() {
        Ok(cmps) => {
            let mut rows: Vec<CheckRow> = Vec::new();
            for c in cmps {
                match rows.iter_mut().find(|r| r.case == c.case) {
                    Some(r) => {
                        r.trials += 1;
                        r.max_error = r.max_error.max(c.max_error);
                    }
                    None => rows.push(row("golden", c.case, 1, c.max_error, GOLDEN_TOL)),
                }
            }
            rows
        }
        Err(e) => vec![CheckRow { note: Some(e), ..row("golden", "load", 0, f64::NAN, GOLDEN_TOL) }],
    }
}

fn random_tensor(dims: [usize; 4], rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::from_fn(dims, |_| rng.gen_range(-1.0..1.0))
}

fn like(t: &Tensor, v: &[f64]) -> Tensor {
    Tensor::new(t.dims(), v.to_vec()).expect("same length as template")
}

fn scaled(v: &[f64], k: f64) -> Vec<f64> {
    v.iter().map(|a| a * k).collect()
}

fn fd(
    f: impl FnMut(&[f64]) -> darkforge_core::Result<Vec<f64>>,
    x: &[f64],
    cot: &[f64],
    analytic: &[f64],
    k: Fd,
) -> Result<f64, String> {
    finite_diff_check(f, x, cot, &scaled(analytic, k.scale), k.step).map(|c| c.max_rel_error).map_err(|e| e.to_string())
}

fn e(err: darkforge_core::Error) -> String {
    err.to_string()
}

fn grad_conv(rng: &mut ChaCha8Rng, k: Fd) -> Result<f64, String> {
    let x = random_tensor([2, 3, 5, 5], rng);
    let w = random_tensor([4, 3, 3, 3], rng);
    let b: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let stride = rng.gen_range(1..=2);
    let p = Conv2dParams::new(w.clone(), Some(b.clone()), stride, 1).map_err(e)?;
    let g = random_tensor(conv2d_forward(&x, &p).map_err(e)?.dims(), rng);
    let grads = conv2d_backward(&x, &p, &g).map_err(e)?;
    let ex = fd(|v| Ok(conv2d_forward(&like(&x, v), &p)?.into_raw()), x.as_raw(), g.as_raw(), grads.x.as_raw(), k)?;
    let ew = fd(
        |v| Ok(conv2d_forward(&x, &Conv2dParams { weight: like(&w, v), ..p.clone() })?.into_raw()),
        w.as_raw(), g.as_raw(), grads.weight.as_raw(), k,
    )?;
    let eb = fd(
        |v| Ok(conv2d_forward(&x, &Conv2dParams { bias: Some(v.to_vec()), ..p.clone() })?.into_raw()),
        &b, g.as_raw(), grads.bias.as_deref().unwrap_or(&[]), k,
    )?;
    Ok(ex.max(ew).max(eb))
}

fn grad_conv_grouped(rng: &mut ChaCha8Rng, k: Fd) -> Result<f64, String> {
    let x = random_tensor([1, 4, 5, 4], rng);
    let w = random_tensor([6, 2, 3, 3], rng);
    let p = Conv2dParams::grouped(w.clone(), None, 1, 1, 2).map_err(e)?;
    let g = random_tensor(conv2d_forward(&x, &p).map_err(e)?.dims(), rng);
    let grads = conv2d_backward(&x, &p, &g).map_err(e)?;
    let ex = fd(|v| Ok(conv2d_forward(&like(&x, v), &p)?.into_raw()), x.as_raw(), g.as_raw(), grads.x.as_raw(), k)?;
    let ew = fd(
        |v| Ok(conv2d_forward(&x, &Conv2dParams { weight: like(&w, v), ..p.clone() })?.into_raw()),
        w.as_raw(), g.as_raw(), grads.weight.as_raw(), k,
    )?;
    Ok(ex.max(ew))
}

fn bn_case(rng: &mut ChaCha8Rng, k: Fd, mode: BnMode) -> Result<f64, String> {
    let x = Tensor::from_fn([3, 2, 3, 3], |[_, c, _, _]| rng.gen_range(-1.0..1.0) * (1.0 + c as f64) + c as f64);
    let gamma: Vec<f64> = (0..2).map(|_| rng.gen_range(0.5..1.5)).collect();
    let beta: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let p = BatchNormParams { gamma: gamma.clone(), beta: beta.clone(), eps: 1e-5, mode };
    let g = random_tensor(x.dims(), rng);
    let (_, cache) = batchnorm_forward(&x, &p).map_err(e)?;
    let grads = batchnorm_backward(&p, &cache, &g).map_err(e)?;
    let fwd = |x: &Tensor, p: &BatchNormParams| batchnorm_forward(x, p).map(|(y, _)| y.into_raw());
    let ex = fd(|v| fwd(&like(&x, v), &p), x.as_raw(), g.as_raw(), grads.x.as_raw(), k)?;
    let eg = fd(|v| fwd(&x, &BatchNormParams { gamma: v.to_vec(), ..p.clone() }), &gamma, g.as_raw(), &grads.gamma, k)?;
    let eb = fd(|v| fwd(&x, &BatchNormParams { beta: v.to_vec(), ..p.clone() }), &beta, g.as_raw(), &grads.beta, k)?;
    Ok(ex.max(eg).max(eb))
}

fn grad_bn_batch(rng: &mut ChaCha8Rng, k: Fd) -> Result<f64, String> {
    bn_case(rng, k, BnMode::Batch)
}

fn grad_bn_provided(rng: &mut ChaCha8Rng, k: Fd) -> Result<f64, String> {
    let mean = vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
    let var = vec![rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0)];
    bn_case(rng, k, BnMode::Provided { mean, var })
}

fn grad_silu(rng: &mut ChaCha8Rng, k: Fd) -> Result<f64, String> {
    let z = Tensor::from_fn([1, 2, 4, 4], |_| rng.gen_range(-4.0..4.0));
    let g = random_tensor(z.dims(), rng);
    let a = silu_gate_backward(&z, &g).map_err(e)?;
    fd(|v| Ok(silu_gate(&like(&z, v)).into_raw()), z.as_raw(), g.as_raw(), a.as_raw(), k)
}

fn grad_sigmoid(rng: &mut ChaCha8Rng, k: Fd) -> Result<f64, String> {
    let z = Tensor::from_fn([1, 2, 4, 4], |_| rng.gen_range(-4.0..4.0));
    let g = random_tensor(z.dims(), rng);
    let a = sigmoid_backward(&sigmoid(&z), &g).map_err(e)?;
    fd(|v| Ok(sigmoid(&like(&z, v)).into_raw()), z.as_raw(), g.as_raw(), a.as_raw(), k)
}

fn grad_fslconv(rng: &mut ChaCha8Rng, k: Fd) -> Result<f64, String> {
    let stride = rng.gen_range(1..=2);
    let mut p = FslConvParams::random(3, 4, stride, rng).map_err(e)?;
    for bn in [&mut p.bn1, &mut p.bn2] {
        bn.eps = 1e-5;
        bn.gamma.iter_mut().for_each(|v| *v = rng.gen_range(0.5..1.5));
        bn.beta.iter_mut().for_each(|v| *v = rng.gen_range(-0.5..0.5));
    }
    let x = random_tensor([2, 3, 6, 6], rng);
    let g = random_tensor(fslconv_forward(&x, &p).map_err(e)?.dims(), rng);
    let grads = fslconv_backward(&x, &p, &g).map_err(e)?;
    let ex = fd(|v| Ok(fslconv_forward(&like(&x, v), &p)?.into_raw()), x.as_raw(), g.as_raw(), grads.x.as_raw(), k)?;
    let w1 = p.stage1.weight.clone();
    let e1 = fd(
        |v| {
            let mut q = p.clone();
            q.stage1.weight = like(&w1, v);
            Ok(fslconv_forward(&x, &q)?.into_raw())
        },
        w1.as_raw(), g.as_raw(), grads.stage1_weight.as_raw(), k,
    )?;
    let w2 = p.stage2.weight.clone();
    let e2 = fd(
        |v| {
            let mut q = p.clone();
            q.stage2.weight = like(&w2, v);
            Ok(fslconv_forward(&x, &q)?.into_raw())
        },
        w2.as_raw(), g.as_raw(), grads.stage2_weight.as_raw(), k,
    )?;
    Ok(ex.max(e1).max(e2))
}

fn grad_snir(rng: &mut ChaCha8Rng, k: Fd) -> Result<f64, String> {
    let p = SnirParams::random(3, 2, rng).map_err(e)?;
    let x = random_tensor([1, 3, 3, 4], rng);
    let g = random_tensor(snir_forward(&x, &p).map_err(e)?.dims(), rng);
    let grads = snir_backward(&x, &p, &g).map_err(e)?;
    let ex = fd(|v| Ok(snir_forward(&like(&x, v), &p)?.into_raw()), x.as_raw(), g.as_raw(), grads.x.as_raw(), k)?;
    let ew = fd(
        |v| Ok(snir_forward(&x, &SnirParams { weight: like(&p.weight, v), ..p.clone() })?.into_raw()),
        p.weight.as_raw(), g.as_raw(), grads.weight.as_raw(), k,
    )?;
    let eb = fd(
        |v| Ok(snir_forward(&x, &SnirParams { bias: v.to_vec(), ..p.clone() })?.into_raw()),
        &p.bias, g.as_raw(), &grads.bias, k,
    )?;
    Ok(ex.max(ew).max(eb))
}

fn grad_lapm(rng: &mut ChaCha8Rng, k: Fd) -> Result<f64, String> {
    let mask = GrayPlane::new(6, 6, (0..36).map(|_| if rng.gen_bool(0.5) { 1.0 } else { 0.0 }).collect()).map_err(e)?;
    let p = LapmParams::from_array(core::array::from_fn(|_| rng.gen_range(-1.5..1.5)));
    let g = GrayPlane::new(6, 6, (0..36).map(|_| rng.gen_range(-1.0..1.0)).collect()).map_err(e)?;
    let eps = 1e-8;
    let a = texture_backward(&mask, &p, eps, &g).map_err(e)?.to_array();
    let f = |v: &[f64]| {
        let q = LapmParams::from_array(v.try_into().expect("four parameters"));
        Ok(texture_features(&mask, &q, eps).into_raw())
    };
    fd(f, &p.to_array(), g.as_raw(), &a, k)
}

const SAMPLER_DRAWS: usize = 100_000;

fn quadrature_moments(p: &TruncNormParams) -> (f64, f64) {
    let n = 20_000;
    let h = (p.upper - p.lower) / n as f64;
    let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for i in 0..=n {
        let x = p.lower + h * i as f64;
        let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        let d = w * (-0.5 * ((x - p.loc) / p.scale).powi(2)).exp();
        m0 += d;
        m1 += d * x;
        m2 += d * x * x;
    }
    let mean = m1 / m0;
    (mean, (m2 / m0 - mean * mean).sqrt())
}

fn sampler_rows() -> Vec<CheckRow> {
    let cases = [(20.0, 8.165, 10.0, 30.0), (30.0, 12.0, 2.0, 95.0), (10.0, 3.0, 14.0, 30.0)];
    let (mut mean_err, mut std_err, mut outside) = (0.0f64, 0.0f64, 0usize);
    for (i, &(loc, scale, lower, upper)) in cases.iter().enumerate() {
        let p = TruncNormParams { loc, scale, lower, upper };
        let mut rng = ChaCha8Rng::seed_from_u64(0x7361_6d70 + i as u64);
        let draws: Vec<f64> = (0..SAMPLER_DRAWS).map(|_| p.sample(&mut rng).unwrap_or(f64::NAN)).collect();
        outside += draws.iter().filter(|v| !(**v >= lower && **v <= upper)).count();
        let m = draws.iter().sum::<f64>() / SAMPLER_DRAWS as f64;
        let s = (draws.iter().map(|v| (v - m).powi(2)).sum::<f64>() / SAMPLER_DRAWS as f64).sqrt();
        let (om, os) = quadrature_moments(&p);
        mean_err = mean_err.max((m - om).abs() / scale);
        std_err = std_err.max((s - os).abs() / os);
    }
    let n = cases.len() as u64;
    vec![
        row("sampler", "bounds", n, outside as f64, 0.0),
        row("sampler", "mean / scale", n, mean_err, 0.05),
        row("sampler", "std relative", n, std_err, 0.05),
    ]
}

fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize, lo: u8, hi: u8) -> RgbImage {
    RgbImage::from_fn(w, h, |_, _| core::array::from_fn(|_| rng.gen_range(lo..=hi)))
}

const DEGRADE_IMAGES: u64 = 20;

fn degrade_rows() -> Vec<CheckRow> {
    let cfg = DegradeConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x6465_6772);
    let (mut differing, mut conservation, mut fidelity) = (0usize, 0.0f64, 0.0f64);
    let mut note = None;
    for _ in 0..DEGRADE_IMAGES {
        let img = random_image(&mut rng, 17, 11, 0, 255);
        let src = match channel_mean_std(&img) {
            Ok(s) => s,
            Err(err) => {
                note = Some(err.to_string());
                break;
            }
        };
        match degrade_with_targets(&img, src, TargetSample::from(src), &cfg) {
            Ok(t) => differing += t.output.as_raw().iter().zip(img.as_raw()).filter(|(a, b)| a != b).count(),
            Err(err) => note = Some(err.to_string()),
        }

        // Adversarial targets: opposite channel shifts force the correction path.
        let dark = TargetSample::from([
            ChannelStats { mean: rng.gen_range(0.0..40.0), std: rng.gen_range(1.0..30.0) },
            ChannelStats { mean: rng.gen_range(150.0..255.0), std: rng.gen_range(1.0..60.0) },
            ChannelStats { mean: rng.gen_range(0.0..40.0), std: rng.gen_range(1.0..30.0) },
        ]);
        let tight = DegradeConfig { tau_color: 0.2, ..cfg };
        if let Ok(t) = degrade_with_targets(&img, src, dark, &tight) {
            let ro = color_ratios(&img, tight.epsilon);
            for (i, _) in t.mask.as_raw().iter().enumerate().filter(|(_, m)| **m) {
                let adj = &t.adjusted.as_raw()[3 * i..3 * i + 3];
                let total: f64 = adj.iter().map(|&v| f64::from(v)).sum();
                for c in 0..3 {
                    let want = ro.at(i)[c] * total;
                    conservation = conservation.max((t.corrected[3 * i + c] - want).abs() / want.abs().max(1.0));
                }
            }
        }

        let (smooth, target) = unclipped_pair(&mut rng);
        if let Ok(t) = degrade_with_targets(&smooth, channel_mean_std(&smooth).expect("non-empty"), target, &cfg) {
            let out = channel_mean_std(&t.output).expect("non-empty");
            for (o, t) in out.iter().zip(&target.channels) {
                fidelity = fidelity.max((o.mean - t.mean).abs()).max((o.std - t.std).abs());
            }
        }
    }
    let mut rows = vec![
        row("degrade", "identity bytes", DEGRADE_IMAGES, differing as f64, 0.0),
        row("degrade", "correction", DEGRADE_IMAGES, conservation, 1e-6),
        row("degrade", "fidelity (8-bit)", DEGRADE_IMAGES, fidelity, 0.5),
    ];
    if let Some(n) = note {
        rows[0].note = Some(n);
    }
    rows
}

/// An image and targets for which the affine map never clips and the
/// color-consistency mask stays empty, so the output is the rounded affine map.
pub fn unclipped_pair(rng: &mut ChaCha8Rng) -> (RgbImage, TargetSample) {
    loop {
        let img = random_image(rng, 16, 12, 90, 170);
        let src = channel_mean_std(&img).expect("non-empty");
        let channels = core::array::from_fn(|c| {
            let s: ChannelStats = src[c];
            let reach = img.pixels().map(|p| (f64::from(p[c]) - s.mean).abs()).fold(0.0, f64::max);
            let mean: f64 = rng.gen_range(60.0..200.0);
            let room = mean.min(255.0 - mean) - 1.0;
            let max_std = s.std * room / reach;
            ChannelStats { mean, std: rng.gen_range(0.25 * max_std..max_std) }
        });
        let target = TargetSample { channels };
        let quiet = degrade_with_targets(&img, src, target, &DegradeConfig::default())
            .is_ok_and(|t| t.mask.count_set() == 0);
        if quiet {
            return (img, target);
        }
    }
}

fn cost_rows() -> Vec<CheckRow> {
    let (mut mismatches, mut trials) = (0u64, 0u64);
    for c1 in [2u64, 4, 8] {
        for c2 in [2u64, 4, 8] {
            for k in [1u64, 3] {
                let base = LayerSpec::conv(c1, c2, k, 5, 6);
                for g in [1u64, 2, 4] {
                    if c1 % g != 0 || c2 % g != 0 {
                        continue;
                    }
                    trials += 1;
                    let x = Tensor::from_fn([1, c1 as usize, 5, 6], |[_, c, y, x]| (c + y + x) as f64);
                    let w = Tensor::from_fn([c2 as usize, (c1 / g) as usize, k as usize, k as usize], |_| 0.5);
                    let counted = Conv2dParams::grouped(w, None, 1, (k / 2) as usize, g as usize)
                        .and_then(|p| conv2d_forward_counted(&x, &p))
                        .map(|(_, ops)| ops.flops());
                    let spec = base.with_groups(g);
                    let closed = conv_flops_grouped(&spec);
                    let increment = flops_increment(&base, g);
                    let ok = match (counted, closed, increment, macs_increment(&base, g)) {
                        (Ok(n), Ok(f), Ok(inc), Ok(m)) => {
                            n == f
                                && inc == Exact::from_integer(f as i128 - conv_flops(&base) as i128)
                                && m == Exact::new((c1 * c2 * k * k) as i128 * (1 - g as i128), g as i128)
                        }
                        _ => false,
                    };
                    mismatches += u64::from(!ok);
                }
            }
        }
    }
    let spec = LayerSpec::conv(64, 64, 3, 32, 32);
    let half = flops_increment(&spec, 2).map(|f| f == Exact::new(-(conv_flops(&spec) as i128), 2)).unwrap_or(false);
    let best = increment_curve(&spec, &[1, 2, 4, 8, 16]).map(|c| c.best_step() == Some(0)).unwrap_or(false);
    vec![
        row("cost", "grid vs counted loop", trials, mismatches as f64, 0.0),
        row("cost", "F(2) = -flops/2", 1, f64::from(u8::from(!half)), 0.0),
        row("cost", "best step 1->2", 1, f64::from(u8::from(!best)), 0.0),
    ]
}

fn lapm_rows() -> Vec<CheckRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6c61_706d);
    let mut flips = 0usize;
    for _ in 0..20 {
        let data = (0..8 * 8 * 3).map(|_| rng.gen_range(0.0..0.02)).collect();
        let img = RgbFloatImage::from_unit(8, 8, data).expect("unit values");
        let lo = base_mask(&img, &LapmConfig { lambda: 5.0, ..LapmConfig::default() });
        let hi = base_mask(&img, &LapmConfig { lambda: 12.0, ..LapmConfig::default() });
        if let (Ok(lo), Ok(hi)) = (lo, hi) {
            flips += lo.as_raw().iter().zip(hi.as_raw()).filter(|(a, b)| a > b).count();
        }
    }
    vec![
        row("lapm", "trainable params - 4", 1, (LapmParams::TRAINABLE as f64 - 4.0).abs(), 0.0),
        row("lapm", "mask 1->0 flips", 20, flips as f64, 0.0),
    ]
}
