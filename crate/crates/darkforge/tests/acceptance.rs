//! Acceptance criteria 1-10. Runs without the libtest harness so that every
//! criterion prints its own result line; exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use darkforge::check::{run_checks, unclipped_pair, CheckOptions};
use darkforge::cli::{cmd_degrade, DegradeArgs, JobsArg};
use darkforge::corpus::StatsDocument;
use darkforge::imageio::save_png_rgb;
use darkforge::manifest::RunManifest;
use darkforge_core::cost::{
    conv_flops, conv_flops_grouped, flops_increment, fsl_layer_cost, increment_curve, lapm_cost, macs_increment,
    Exact, LayerSpec, LAPM_CONVENTION,
};
use darkforge_core::degrade::{color_ratios, degrade_with_targets, DegradeConfig, TargetSample};
use darkforge_core::fslconv::{fslconv_forward, stage1_forward, FslConvParams};
use darkforge_core::lapm::{base_mask, max_pool2, LapmConfig, LapmParams};
use darkforge_core::snir::{default_alpha, snir_forward, SnirParams};
use darkforge_core::stats::{channel_mean_std, summarize_corpus};
use darkforge_core::tensor::{conv2d_forward_counted, nearest_upsample, Conv2dParams};
use darkforge_core::truncnorm::TruncNormParams;
use darkforge_core::{ChannelStats, GrayPlane, RgbFloatImage, RgbImage, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rng(tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0x6163_6365_7074 ^ tag)
}

/// Mixed content: gradients, flat patches, saturated and near-black pixels.
fn synthetic_image(r: &mut ChaCha8Rng, w: usize, h: usize) -> RgbImage {
    let base: [f64; 3] = core::array::from_fn(|_| r.gen_range(20.0..235.0));
    let slope: [f64; 3] = core::array::from_fn(|_| r.gen_range(-3.0..3.0));
    let noise = r.gen_range(0.0..40.0);
    RgbImage::from_fn(w, h, |x, y| {
        if (x + 3 * y) % 17 == 0 {
            return if r.gen_bool(0.5) { [0, 0, 0] } else { [255, r.gen(), 255] };
        }
        core::array::from_fn(|c| {
            let v = base[c] + slope[c] * (x as f64 - y as f64) + r.gen_range(-noise..=noise);
            v.round().clamp(0.0, 255.0) as u8
        })
    })
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let cfg = DegradeConfig::default();
    let mut r = rng(1);
    let mut differing = 0usize;
    for i in 0..100 {
        let img = synthetic_image(&mut r, 24 + i % 17, 16 + i % 13);
        let src = channel_mean_std(&img).map_err(|e| e.to_string())?;
        let out = degrade_with_targets(&img, src, TargetSample::from(src), &cfg).map_err(|e| e.to_string())?.output;
        differing += out.as_raw().iter().zip(img.as_raw()).filter(|(a, b)| a != b).count();
    }
    let elapsed = start.elapsed();
    ensure(differing == 0, || format!("{differing} bytes differ"))?;
    ensure(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!("100 images, 0 bytes differ, {:.2} s", elapsed.as_secs_f64()))
}

fn criterion_2() -> Outcome {
    let cfg = DegradeConfig::default();
    let mut r = rng(2);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (img, target) = unclipped_pair(&mut r);
        let src = channel_mean_std(&img).map_err(|e| e.to_string())?;
        ensure(target.channels.iter().all(|c| c.std >= 1.0), || "target std below 1".into())?;
        // Independent no-clip check on the unrounded affine map.
        for p in img.pixels() {
            for c in 0..3 {
                let v = target.channels[c].std / src[c].std * (f64::from(p[c]) - src[c].mean) + target.channels[c].mean;
                ensure((0.0..=255.0).contains(&v), || format!("pair clips at {v}"))?;
            }
        }
        let t = degrade_with_targets(&img, src, target, &cfg).map_err(|e| e.to_string())?;
        let out = channel_mean_std(&t.output).map_err(|e| e.to_string())?;
        for (o, t) in out.iter().zip(&target.channels) {
            worst = worst.max((o.mean - t.mean).abs()).max((o.std - t.std).abs());
        }
    }
    ensure(worst <= 0.5, || format!("max deviation {worst:.4} > 0.5"))?;
    Ok(format!("100 pairs, max |mean/std deviation| {worst:.4}"))
}

fn criterion_3() -> Outcome {
    let cfg = DegradeConfig { tau_color: 0.1, ..DegradeConfig::default() };
    let mut r = rng(3);
    let (mut checked, mut zero_sum, mut worst) = (0usize, 0usize, 0.0f64);
    for _ in 0..50 {
        let img = synthetic_image(&mut r, 20, 15);
        let src = channel_mean_std(&img).map_err(|e| e.to_string())?;
        // Opposing per-channel shifts push the hue far from the source.
        let hi = r.gen_range(0..3);
        let targets = TargetSample::from(core::array::from_fn(|c| {
            if c == hi {
                ChannelStats { mean: r.gen_range(160.0..250.0), std: r.gen_range(1.0..80.0) }
            } else {
                ChannelStats { mean: r.gen_range(0.0..30.0), std: r.gen_range(1.0..40.0) }
            }
        }));
        let t = degrade_with_targets(&img, src, targets, &cfg).map_err(|e| e.to_string())?;
        let ro = color_ratios(&img, cfg.epsilon);
        for (i, _) in t.mask.as_raw().iter().enumerate().filter(|(_, m)| **m) {
            let px = &t.corrected[3 * i..3 * i + 3];
            let total: f64 = px.iter().sum();
            if total == 0.0 {
                zero_sum += 1;
                continue;
            }
            for (v, r) in px.iter().zip(ro.at(i)) {
                worst = worst.max((v / total - r).abs());
            }
            checked += 1;
        }
    }
    ensure(checked > 0, || "no masked pixels".into())?;
    ensure(worst <= 1e-6, || format!("max ratio deviation {worst:e} > 1e-6"))?;
    Ok(format!("{checked} masked pixels, max ratio deviation {worst:.2e} ({zero_sum} zero-intensity pixels have no ratio)"))
}

/// Simpson's rule over the truncated normal density.
fn oracle_moments(p: &TruncNormParams) -> (f64, f64) {
    let n = 40_000;
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

fn criterion_4() -> Outcome {
    let mut r = rng(4);
    let corpus: Vec<[ChannelStats; 3]> = (0..60)
        .map(|_| {
            core::array::from_fn(|c| ChannelStats {
                mean: r.gen_range(5.0..45.0) + 10.0 * c as f64 * r.gen::<f64>(),
                std: r.gen_range(2.0..20.0),
            })
        })
        .collect();
    let summary = summarize_corpus(&corpus).map_err(|e| e.to_string())?;
    let (mut mean_err, mut std_err) = (0.0f64, 0.0f64);
    for ch in summary.channels() {
        for p in [ch.mean_sampler(), ch.std_sampler()] {
            let draws: Vec<f64> = (0..100_000).map(|_| p.sample(&mut r)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
            if let Some(v) = draws.iter().find(|v| !(**v >= p.lower && **v <= p.upper)) {
                return Err(format!("draw {v} outside [{}, {}]", p.lower, p.upper));
            }
            let n = draws.len() as f64;
            let m = draws.iter().sum::<f64>() / n;
            let s = (draws.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
            let (om, os) = oracle_moments(&p);
            mean_err = mean_err.max((m - om).abs() / p.scale);
            std_err = std_err.max((s - os).abs() / os);
        }
    }
    ensure(mean_err <= 0.05, || format!("mean error {mean_err:.4}·scale"))?;
    ensure(std_err <= 0.05, || format!("std error {:.2}%", 100.0 * std_err))?;
    Ok(format!("6 samplers x 1e5 draws in bounds, mean err {mean_err:.4}·scale, std err {:.2}%", 100.0 * std_err))
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let report = run_checks(&CheckOptions::default());
    let elapsed = start.elapsed();
    let rows: BTreeMap<&str, _> =
        report.rows.iter().filter(|r| r.suite == "gradient").map(|r| (r.case.as_str(), r)).collect();
    let required = [
        ("conv2d", 1e-6),
        ("conv2d-grouped", 1e-6),
        ("batchnorm-provided", 1e-6),
        ("batchnorm", 1e-5),
        ("silu", 1e-5),
        ("sigmoid", 1e-5),
        ("fslconv", 1e-5),
        ("snir", 1e-5),
        ("lapm-texture", 1e-5),
    ];
    let mut worst = String::new();
    for (case, tol) in required {
        let row = rows.get(case).ok_or_else(|| format!("missing gradient case {case}"))?;
        ensure(row.trials >= 20, || format!("{case}: {} seeds", row.trials))?;
        ensure(row.note.is_none(), || format!("{case}: {}", row.note.clone().unwrap_or_default()))?;
        ensure(row.max_error < tol, || format!("{case}: max rel error {:e} >= {tol:e}", row.max_error))?;
        if case == "fslconv" {
            worst = format!("fslconv {:.2e}", row.max_error);
        }
    }
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!("{} cases x 20 seeds, worst {worst}, {:.1} s for the full battery", required.len(), elapsed.as_secs_f64()))
}

fn criterion_6() -> Outcome {
    let mut r = rng(6);
    for c in [4usize, 8, 16, 32, 64] {
        let p = FslConvParams::random(c, c, 1, &mut r).map_err(|e| e.to_string())?;
        let counted = p.stage1.weight.len() + p.stage2.weight.len();
        let standard = c * c * 9;
        let ratio = Exact::new(counted as i128, standard as i128);
        ensure(ratio == Exact::new(3, 4), || format!("C={c}: {counted}/{standard}"))?;
        let cost = fsl_layer_cost(c as u64, c as u64, 1, 8, 8).map_err(|e| e.to_string())?;
        ensure(cost.weight_ratio() == Exact::new(3, 4), || format!("C={c}: cost model ratio {}", cost.weight_ratio()))?;

        let x = Tensor::from_fn([2, c, 6, 6], |_| r.gen_range(-1.0..1.0));
        let y = fslconv_forward(&x, &p).map_err(|e| e.to_string())?;
        let g1 = stage1_forward(&x, &p).map_err(|e| e.to_string())?;
        let head = y.slice_channels(0..c / 2).map_err(|e| e.to_string())?;
        let same = head.as_raw().iter().zip(g1.as_raw()).all(|(a, b)| a.to_bits() == b.to_bits());
        ensure(same && head.dims() == g1.dims(), || format!("C={c}: output slice differs from stage 1"))?;
    }
    Ok("weights 3/4 for C in {4,8,16,32,64}, slice [0,C0) bit-exact".into())
}

fn counted_flops(c1: usize, c2: usize, k: usize, g: usize) -> Result<u128, String> {
    let (h, w) = (5, 7);
    let x = Tensor::from_fn([1, c1, h, w], |[_, c, y, x]| ((c * 29 + y * 5 + x) as f64 * 0.31).sin());
    let wt = Tensor::from_fn([c2, c1 / g, k, k], |[o, c, y, x]| ((o * 11 + c * 7 + y * 3 + x) as f64 * 0.17).cos());
    let p = Conv2dParams::grouped(wt, None, 1, k / 2, g).map_err(|e| e.to_string())?;
    let (_, ops) = conv2d_forward_counted(&x, &p).map_err(|e| e.to_string())?;
    Ok(ops.mults + ops.adds)
}

fn criterion_7() -> Outcome {
    let (h, w) = (5u64, 7u64);
    let mut cells = 0;
    for c1 in [2u64, 4, 8] {
        for c2 in [2u64, 4, 8] {
            for k in [1u64, 3] {
                let base = LayerSpec::conv(c1, c2, k, h, w);
                let standard = counted_flops(c1 as usize, c2 as usize, k as usize, 1)?;
                ensure(conv_flops(&base) == standard, || format!("{base:?}: {} vs {standard}", conv_flops(&base)))?;
                for g in [1u64, 2, 4] {
                    if c1 % g != 0 || c2 % g != 0 {
                        continue;
                    }
                    let grouped = counted_flops(c1 as usize, c2 as usize, k as usize, g as usize)?;
                    let spec = base.with_groups(g);
                    let formula = conv_flops_grouped(&spec).map_err(|e| e.to_string())?;
                    ensure(formula == grouped, || format!("{spec:?}: {formula} vs counted {grouped}"))?;
                    let f = flops_increment(&base, g).map_err(|e| e.to_string())?;
                    ensure(f == Exact::from_integer(grouped as i128 - standard as i128), || format!("F({g}) {spec:?}"))?;
                    // MACs = HW(C1+C2) + C1·C2·K²/g; the traffic term cancels in the difference.
                    let weights = (c1 * c2 * k * k) as i128;
                    let m = macs_increment(&base, g).map_err(|e| e.to_string())?;
                    ensure(m == Exact::new(weights, g as i128) - Exact::from_integer(weights), || format!("M({g}) {spec:?}"))?;
                    if g == 2 {
                        ensure(f == Exact::new(-(conv_flops(&base) as i128), 2), || format!("F(2) {spec:?}"))?;
                    }
                    cells += 1;
                }
            }
        }
    }
    let curve = increment_curve(&LayerSpec::conv(64, 64, 3, 40, 40), &[1, 2, 4, 8, 16, 32, 64])
        .map_err(|e| e.to_string())?;
    ensure(curve.best_step() == Some(0), || format!("best step index {:?}", curve.best_step()))?;
    Ok(format!("{cells} grid cells match the counted loop, F(2) = -flops/2, best step 1->2"))
}

fn random_dark_image(r: &mut ChaCha8Rng, w: usize, h: usize) -> RgbFloatImage {
    let level = r.gen_range(0.0005..0.01);
    let data = (0..w * h * 3).map(|_| (level * r.gen_range(0.0..2.0f64)).min(1.0)).collect();
    RgbFloatImage::from_unit(w, h, data).expect("unit values")
}

fn flips(lo: &GrayPlane, hi: &GrayPlane) -> usize {
    lo.as_raw().iter().zip(hi.as_raw()).filter(|(a, b)| **a == 1.0 && **b == 0.0).count()
}

fn criterion_8() -> Outcome {
    let params = LapmParams::default().to_array().len();
    ensure(params == 4 && LapmParams::TRAINABLE == 4, || format!("{params} parameters"))?;

    let cost = lapm_cost(640, 640, 5);
    let gflops = cost.total as f64 / 1e9;
    let ratio = gflops / 0.002184;
    ensure((0.1..=10.0).contains(&ratio), || format!("{gflops} GFLOPs is {ratio:.2}x the reference"))?;
    ensure(cost.convention == LAPM_CONVENTION && !cost.convention.is_empty(), || "convention missing".into())?;
    let json = serde_json::to_value(darkforge::costreport::lapm_report(640, 640, 5)).map_err(|e| e.to_string())?;
    ensure(json["convention"] == LAPM_CONVENTION, || "convention not embedded in the report".into())?;

    let mut r = rng(8);
    let lambdas = [1.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 16.0];
    let mut total_flips = 0;
    for _ in 0..50 {
        let img = random_dark_image(&mut r, 32, 24);
        let mut prev: Option<Vec<GrayPlane>> = None;
        for &lambda in &lambdas {
            let cfg = LapmConfig { lambda, levels: 3, ..LapmConfig::default() };
            let mut planes = vec![base_mask(&img, &cfg).map_err(|e| e.to_string())?];
            for _ in 0..cfg.levels {
                let next = max_pool2(planes.last().expect("base level"));
                planes.push(next);
            }
            if let Some(prev) = &prev {
                total_flips += prev.iter().zip(&planes).map(|(a, b)| flips(a, b)).sum::<usize>();
            }
            prev = Some(planes);
        }
    }
    ensure(total_flips == 0, || format!("{total_flips} mask 1->0 flips"))?;
    Ok(format!("4 parameters, {gflops:.6} GFLOPs at 640x640 ({ratio:.2}x reference), 0 flips over 50 images"))
}

fn criterion_9() -> Outcome {
    let mut r = rng(9);
    let (mut worst_energy, mut strict_checked) = (0.0f64, 0usize);
    for trial in 0..20 {
        let scale = 2 + trial % 3;
        let channels = 3;
        let x = Tensor::from_fn([2, channels, 4, 5], |_| r.gen_range(-2.0..2.0));
        let alpha = default_alpha(scale);
        let u = nearest_upsample(&x, scale).map_err(|e| e.to_string())?.scale(alpha);
        let energy = (u.sum() - x.sum()).abs() / x.as_raw().iter().map(|v| v.abs()).sum::<f64>();
        worst_energy = worst_energy.max(energy);

        let p = SnirParams::random(channels, scale, &mut r).map_err(|e| e.to_string())?;
        let y = snir_forward(&x, &p).map_err(|e| e.to_string())?;
        for (yv, uv) in y.as_raw().iter().zip(u.as_raw()) {
            if *uv != 0.0 {
                ensure(yv.abs() < uv.abs(), || format!("|Y| {yv} not below |alpha mu| {uv}"))?;
                strict_checked += 1;
            }
        }

        let zero = SnirParams::new(Tensor::zeros([channels, channels, 1, 1]), vec![0.0; channels], scale)
            .map_err(|e| e.to_string())?;
        let y0 = snir_forward(&x, &zero).map_err(|e| e.to_string())?;
        let same = y0.as_raw().iter().zip(u.as_raw()).all(|(a, b)| a.to_bits() == (0.5 * b).to_bits());
        ensure(same, || "W=0, b=0 output differs from 0.5·alpha·mu".into())?;
    }
    ensure(worst_energy <= 1e-9, || format!("energy error {worst_energy:e}"))?;
    Ok(format!("energy error {worst_energy:.1e}, {strict_checked} strict damping checks, zero gate = 0.5·alpha·mu"))
}

fn hash_tree(root: &Path) -> Result<BTreeMap<String, String>, String> {
    let mut out = BTreeMap::new();
    for entry in walkdir::WalkDir::new(root) {
        let entry = entry.map_err(|e| e.to_string())?;
        let rel = entry.path().strip_prefix(root).map_err(|e| e.to_string())?.to_string_lossy().replace('\\', "/");
        if entry.file_type().is_file() && rel != "manifest.json" {
            let bytes = std::fs::read(entry.path()).map_err(|e| e.to_string())?;
            out.insert(rel, hex::encode(Sha256::digest(&bytes)));
        }
    }
    Ok(out)
}

fn criterion_10() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let input = dir.path().join("input");
    let mut r = rng(10);
    for i in 0..200 {
        let img = synthetic_image(&mut r, 40, 30);
        let path = input.join(format!("set{}", i % 4)).join(format!("img_{i:03}.png"));
        save_png_rgb(&path, &img).map_err(|e| e.to_string())?;
    }
    let dark: Vec<[ChannelStats; 3]> = (0..40)
        .map(|_| core::array::from_fn(|_| ChannelStats { mean: r.gen_range(5.0..40.0), std: r.gen_range(2.0..15.0) }))
        .collect();
    let stats = dir.path().join("dark.json");
    let doc = StatsDocument::new(summarize_corpus(&dark).map_err(|e| e.to_string())?);
    std::fs::write(&stats, serde_json::to_vec(&doc).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;

    let mut runs = Vec::new();
    for (run, jobs) in [1usize, 8, 1, 8].into_iter().enumerate() {
        let output = dir.path().join(format!("out{run}"));
        let args = DegradeArgs {
            input: input.clone(),
            output: output.clone(),
            stats: stats.clone(),
            seed: Some(42),
            config: None,
            annotations_in: None,
            annotations_out: None,
            manifest: None,
            jobs: JobsArg { jobs: Some(jobs) },
        };
        cmd_degrade(&args, vec!["degrade".into()]).map_err(|e| format!("{e:?}"))?;
        let manifest = RunManifest::read(&output.join("manifest.json")).map_err(|e| e.to_string())?;
        let recorded: BTreeMap<String, String> =
            manifest.images.iter().map(|i| (i.output.clone(), i.sha256.clone())).collect();
        let on_disk = hash_tree(&output)?;
        ensure(recorded.len() == 200, || format!("run {run}: {} images in manifest", recorded.len()))?;
        ensure(recorded == on_disk, || format!("run {run}: manifest hashes differ from files on disk"))?;
        runs.push(on_disk);
    }
    ensure(runs.windows(2).all(|w| w[0] == w[1]), || "output hashes differ between runs".into())?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(120), || format!("took {elapsed:?}"))?;
    Ok(format!("200 images, jobs 1/8/1/8 identical hashes, {:.1} s", elapsed.as_secs_f64()))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("degradation identity", criterion_1),
        ("degradation fidelity", criterion_2),
        ("color correction", criterion_3),
        ("truncated-normal sampler", criterion_4),
        ("gradient suite", criterion_5),
        ("FSLConv parameters", criterion_6),
        ("cost-model oracle", criterion_7),
        ("LAPM claims", criterion_8),
        ("SNI-r invariants", criterion_9),
        ("end-to-end determinism", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {:>2} {name}: pass ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({why})", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
