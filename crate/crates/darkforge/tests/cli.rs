//! End-to-end runs of the `darkforge` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use darkforge::imageio::{load_rgb, save_png_rgb};
use darkforge::tensorfile;
use darkforge_core::RgbImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

fn darkforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_darkforge"))
        .args(args)
        .env_remove("DARKFORGE_JOBS")
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn darkforge")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 temp path")
}

fn write_corpus(root: &Path, n: usize, lo: u8, hi: u8, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let key = if i % 2 == 0 { format!("a/img{i}.png") } else { format!("b/img{i}.png") };
            let img = RgbImage::from_fn(12 + i, 9, |_, _| core::array::from_fn(|_| rng.gen_range(lo..=hi)));
            save_png_rgb(&root.join(&key), &img).unwrap();
            key
        })
        .collect()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Stats for a dark corpus, used as the degradation target.
fn dark_profile(dir: &Path) -> PathBuf {
    let dark = dir.join("dark");
    write_corpus(&dark, 6, 2, 60, 7);
    let stats = dir.join("dark.json");
    let out = darkforge(&["stats", "--input", p(&dark), "--output", p(&stats)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    stats
}

#[test]
fn usage_errors_exit_1_and_help_exits_0() {
    assert_eq!(code(&darkforge(&[])), 1);
    assert_eq!(code(&darkforge(&["frobnicate"])), 1);
    assert_eq!(code(&darkforge(&["stats"])), 1);
    assert_eq!(code(&darkforge(&["cost", "conv", "--c1", "4"])), 1);
    assert_eq!(code(&darkforge(&["--help"])), 0);
    assert_eq!(code(&darkforge(&["--version"])), 0);
}

#[test]
fn stats_writes_summary_csvs_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    write_corpus(&corpus, 5, 0, 255, 1);
    std::fs::write(corpus.join("a/broken.png"), b"not a png").unwrap();
    std::fs::write(corpus.join("notes.txt"), b"ignored").unwrap();
    let summary = dir.path().join("out/summary.json");
    let out = darkforge(&["stats", "--input", p(&corpus), "--output", p(&summary), "--jobs", "2"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let doc = read_json(&summary);
    assert_eq!(doc["schema_version"], 1);
    assert_eq!(doc["n_images"], 5);
    for ch in ["R", "G", "B"] {
        let c = &doc[ch];
        assert!(c["mean_min"].as_f64().unwrap() <= c["mean_median"].as_f64().unwrap());
        assert!(c["mean_median"].as_f64().unwrap() <= c["mean_max"].as_f64().unwrap());
    }

    let csv = std::fs::read_to_string(dir.path().join("out/summary_images.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "file,mean_R,std_R,mean_G,std_G,mean_B,std_B");
    assert_eq!(lines.len(), 6);
    assert!(lines[1].starts_with("a/img0.png,"));

    let hist = std::fs::read_to_string(dir.path().join("out/summary_histogram.csv")).unwrap();
    assert_eq!(hist.lines().count(), 257);
    let total: u64 = hist.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse::<u64>().unwrap()).sum();
    let pixels: usize = (0..5).map(|i| (12 + i) * 9).sum();
    assert_eq!(total, pixels as u64);

    let manifest = read_json(&dir.path().join("out/summary_manifest.json"));
    assert_eq!(manifest["schema_version"], 1);
    assert_eq!(manifest["skipped"].as_array().unwrap().len(), 1);
    assert_eq!(manifest["skipped"][0]["key"], "a/broken.png");
}

#[test]
fn stats_on_empty_corpus_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = darkforge(&["stats", "--input", p(dir.path()), "--output", p(&dir.path().join("s.json"))]);
    assert_eq!(code(&out), 2);
}

#[test]
fn degrade_rewrites_annotations_and_honors_config() {
    let dir = tempfile::tempdir().unwrap();
    let stats = dark_profile(dir.path());
    let input = dir.path().join("bright");
    let keys = write_corpus(&input, 4, 80, 250, 2);
    std::fs::rename(input.join(&keys[1]), input.join("b/img1.jpg.png")).unwrap();
    let jpg = RgbImage::from_fn(10, 8, |x, y| [(x * 20) as u8, (y * 25) as u8, 128]);
    image::save_buffer(input.join("b/img1.jpg"), jpg.as_raw(), 10, 8, image::ExtendedColorType::Rgb8).unwrap();
    std::fs::remove_file(input.join("b/img1.jpg.png")).unwrap();

    let ann_in = dir.path().join("ann.json");
    let doc = json!({
        "images": [
            {"id": 1, "file_name": "a/img0.png", "width": 12, "height": 9},
            {"id": 2, "file_name": "b/img1.jpg", "width": 10, "height": 8}
        ],
        "annotations": [{"id": 9, "image_id": 2, "bbox": [1, 2, 3, 4], "category_id": 1}],
        "categories": [{"id": 1, "name": "car"}]
    });
    std::fs::write(&ann_in, doc.to_string()).unwrap();
    let config = dir.path().join("degrade.cfg");
    std::fs::write(&config, "# tighter correction\ntau_color = 0.3\nseed = 11\n").unwrap();

    let output = dir.path().join("low");
    let ann_out = dir.path().join("low.json");
    let out = darkforge(&[
        "degrade", "--input", p(&input), "--output", p(&output), "--stats", p(&stats), "--config", p(&config),
        "--annotations-in", p(&ann_in), "--annotations-out", p(&ann_out),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let rewritten = read_json(&ann_out);
    assert_eq!(rewritten["images"][0]["file_name"], "a/img0.png");
    assert_eq!(rewritten["images"][1]["file_name"], "b/img1.png");
    assert_eq!(rewritten["annotations"], doc["annotations"]);
    assert_eq!(rewritten["categories"], doc["categories"]);

    let manifest = read_json(&output.join("manifest.json"));
    assert_eq!(manifest["seed"], 11);
    assert_eq!(manifest["config"]["tau_color"], 0.3);
    assert_eq!(manifest["images"].as_array().unwrap().len(), 4);
    let low = load_rgb(&output.join("b/img1.png")).unwrap();
    assert_eq!((low.width(), low.height()), (10, 8));
    let src_mean = f64::from(jpg.as_raw().iter().map(|&v| u32::from(v)).sum::<u32>()) / 240.0;
    let low_mean = f64::from(low.as_raw().iter().map(|&v| u32::from(v)).sum::<u32>()) / 240.0;
    assert!(low_mean < src_mean, "{low_mean} !< {src_mean}");

    // `--seed` overrides the config file and changes the output.
    let reseeded = dir.path().join("low2");
    let out = darkforge(&[
        "degrade", "--input", p(&input), "--output", p(&reseeded), "--stats", p(&stats), "--config", p(&config),
        "--seed", "12",
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(read_json(&reseeded.join("manifest.json"))["seed"], 12);
    assert_ne!(std::fs::read(output.join("a/img0.png")).unwrap(), std::fs::read(reseeded.join("a/img0.png")).unwrap());
}

#[test]
fn degrade_data_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let stats = dark_profile(dir.path());
    let input = dir.path().join("bright");
    write_corpus(&input, 2, 80, 250, 3);

    let ann_in = dir.path().join("ann.json");
    std::fs::write(&ann_in, json!({"images": [{"id": 1, "file_name": "missing.png"}]}).to_string()).unwrap();
    let out = darkforge(&[
        "degrade", "--input", p(&input), "--output", p(&dir.path().join("o1")), "--stats", p(&stats),
        "--annotations-in", p(&ann_in), "--annotations-out", p(&dir.path().join("o1.json")),
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.png"));

    let bad_cfg = dir.path().join("bad.cfg");
    std::fs::write(&bad_cfg, "tau = 0.3\n").unwrap();
    let out = darkforge(&[
        "degrade", "--input", p(&input), "--output", p(&dir.path().join("o2")), "--stats", p(&stats),
        "--config", p(&bad_cfg),
    ]);
    assert_eq!(code(&out), 2);

    let nested = input.join("out");
    let out = darkforge(&["degrade", "--input", p(&input), "--output", p(&nested), "--stats", p(&stats)]);
    assert_eq!(code(&out), 2);

    let out = darkforge(&[
        "degrade", "--input", p(&input), "--output", p(&dir.path().join("o3")), "--stats", p(&dir.path().join("nope.json")),
    ]);
    assert_eq!(code(&out), 2);

    // One side of the annotation pair alone is a usage error.
    let out = darkforge(&[
        "degrade", "--input", p(&input), "--output", p(&dir.path().join("o4")), "--stats", p(&stats),
        "--annotations-in", p(&ann_in),
    ]);
    assert_eq!(code(&out), 1);
}

#[test]
fn lapm_exports_halving_pyramid() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("night.png");
    let img = RgbImage::from_fn(64, 64, |x, y| if (8..24).contains(&x) && (40..56).contains(&y) { [2, 3, 1] } else { [0, 0, 0] });
    save_png_rgb(&input, &img).unwrap();
    let out_dir = dir.path().join("lapm");
    let out = darkforge(&["lapm", "--input", p(&input), "--output", p(&out_dir), "--w", "-0.5"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let sidecar = read_json(&out_dir.join("lapm.json"));
    assert_eq!(sidecar["schema_version"], 1);
    assert_eq!(sidecar["trainable_parameters"], 4);
    assert_eq!(sidecar["params"]["w"], -0.5);
    let base = load_rgb(&out_dir.join("mask_0.png")).unwrap();
    assert_eq!((base.width(), base.height()), (64, 64));
    assert_eq!(base.pixel(10, 45), [255, 255, 255]);
    assert_eq!(base.pixel(40, 10), [0, 0, 0]);
    for level in 1..=5u32 {
        let side = 64 >> level;
        let mask = load_rgb(&out_dir.join(format!("mask_{level}.png"))).unwrap();
        assert_eq!((mask.width(), mask.height()), (side, side));
        let texture = tensorfile::read(&out_dir.join(format!("texture_{level}.f64"))).unwrap();
        assert_eq!(texture.dims, vec![side, side]);
        assert_eq!(sidecar["pyramid"][level as usize - 1]["width"], side);
    }
    assert!(!out_dir.join("mask_6.png").exists());

    let tiny = dir.path().join("tiny.png");
    save_png_rgb(&tiny, &RgbImage::filled(16, 16, [1, 1, 1])).unwrap();
    let out = darkforge(&["lapm", "--input", p(&tiny), "--output", p(&dir.path().join("t"))]);
    assert_eq!(code(&out), 2);
    let out = darkforge(&["lapm", "--input", p(&input), "--output", p(&dir.path().join("u")), "--tau", "0"]);
    assert_eq!(code(&out), 1);
}

fn stdout_json(out: &Output) -> Value {
    assert_eq!(code(out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

#[test]
fn cost_reports() {
    let conv = stdout_json(&darkforge(&["cost", "conv", "--c1", "64", "--c2", "64", "--hw", "32", "--g", "2"]));
    assert_eq!(conv["schema_version"], 1);
    assert_eq!(conv["flops"], 75_497_472u64);
    assert_eq!(conv["flops_grouped"], 75_497_472u64 / 2);
    assert_eq!(conv["F"], -(75_497_472i64 / 2));
    assert_eq!(conv["M"], -(64 * 64 * 9 / 2));
    assert_eq!(conv["best_step"], "1->2");
    assert!(conv["convention"].as_str().unwrap().contains("FLOPs"));

    let plain = stdout_json(&darkforge(&["cost", "conv", "--c1", "8", "--c2", "16", "--h", "5", "--w", "7", "--g", "1"]));
    assert_eq!(plain["F"], 0);
    assert_eq!(plain["M"], 0);
    assert_eq!(plain["flops"], 2 * 8 * 16 * 9 * 35);

    let fsl = stdout_json(&darkforge(&["cost", "fsl", "--c1", "8", "--c2", "8", "--hw", "10"]));
    assert_eq!(fsl["weight_ratio"], "3/4");
    assert_eq!(fsl["weight_ratio_f64"], 0.75);

    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("lapm.json");
    let out = darkforge(&["cost", "lapm", "--hw", "640", "--output", p(&report)]);
    assert_eq!(code(&out), 0);
    let lapm = read_json(&report);
    assert_eq!(lapm["total"], 5_596_000u64);
    assert!(lapm["convention"].as_str().unwrap().starts_with("lapm-ops-v1"));

    let csv = dir.path().join("curve.csv");
    let out = darkforge(&["cost", "conv", "--c1", "4", "--c2", "4", "--hw", "8", "--curve", "1,2,4", "--csv", p(&csv)]);
    assert_eq!(code(&out), 0);
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 4);

    assert_eq!(code(&darkforge(&["cost", "conv", "--c1", "6", "--c2", "8", "--hw", "4", "--g", "4"])), 1);
    assert_eq!(code(&darkforge(&["cost", "conv", "--c1", "4", "--c2", "4"])), 1);

    let net = stdout_json(&darkforge(&["cost", "network", "--backbone", "small", "--side", "320", "--lapm-levels", "3"]));
    assert!(net["backbone"]["total_flops"].as_u64().unwrap() > 0);
    assert!(net["lapm_branch"].is_object());
}

#[test]
fn check_passes_and_perturbation_fails() {
    let out = darkforge(&["check", "--seeds", "3"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).contains("all suites passed"));

    let out = darkforge(&["check", "--seeds", "3", "--perturb", "snir"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("gradient/snir"));

    assert_eq!(code(&darkforge(&["check", "--perturb", "nonsense"])), 1);
}
