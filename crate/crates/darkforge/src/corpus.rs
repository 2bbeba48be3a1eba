//! Corpus-scale statistics and degradation over a directory tree.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use darkforge_core::degrade::{degrade_image, DegradeConfig};
use darkforge_core::stats::{channel_mean_std, summarize_corpus};
use darkforge_core::{ChannelStats, ChannelStatsSummary, RgbImage};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imageio::{encode_png_rgb, list_images, load_rgb, write_file, CorpusEntry};
use crate::manifest::{sha256_hex, ImageRecord, SkippedFile, SCHEMA_VERSION};

/// Summary JSON as written to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsDocument {
    #[serde(default = "current_schema")]
    pub schema_version: u32,
    #[serde(flatten)]
    pub summary: ChannelStatsSummary,
}

fn current_schema() -> u32 {
    SCHEMA_VERSION
}

impl StatsDocument {
    pub fn new(summary: ChannelStatsSummary) -> Self {
        Self { schema_version: SCHEMA_VERSION, summary }
    }

    /// Reads and validates a summary.
    pub fn read(path: &Path) -> Result<ChannelStatsSummary> {
        let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
        let doc: Self = serde_json::from_str(&text).map_err(Error::json(path))?;
        doc.summary.validate()?;
        Ok(doc.summary)
    }
}

pub type Histogram = [[u64; 256]; 3];

#[derive(Debug, Clone, PartialEq)]
pub struct ImageStats {
    pub key: String,
    pub stats: [ChannelStats; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusStats {
    pub summary: ChannelStatsSummary,
    /// Sorted by key.
    pub images: Vec<ImageStats>,
    pub histogram: Histogram,
    pub skipped: Vec<SkippedFile>,
}

pub fn thread_pool(jobs: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build().expect("thread pool")
}

fn histogram(img: &RgbImage) -> Histogram {
    let mut h = [[0u64; 256]; 3];
    for px in img.pixels() {
        for c in 0..3 {
            h[c][usize::from(px[c])] += 1;
        }
    }
    h
}

fn skip(entry: &CorpusEntry, err: &Error) -> SkippedFile {
    log::warn!("skipping {}: {err}", entry.path.display());
    SkippedFile { key: entry.key.clone(), reason: err.to_string() }
}

pub fn collect_stats(root: &Path, jobs: usize) -> Result<CorpusStats> {
    let entries = list_images(root)?;
    let results: Vec<_> = thread_pool(jobs).install(|| {
        entries
            .par_iter()
            .map(|e| {
                let img = load_rgb(&e.path)?;
                let stats = channel_mean_std(&img)?;
                Ok((ImageStats { key: e.key.clone(), stats }, histogram(&img)))
            })
            .collect::<Vec<Result<_>>>()
    });
    let mut images = Vec::new();
    let mut skipped = Vec::new();
    let mut hist = [[0u64; 256]; 3];
    for (entry, result) in entries.iter().zip(results) {
        match result {
            Ok((stats, h)) => {
                for c in 0..3 {
                    for b in 0..256 {
                        hist[c][b] += h[c][b];
                    }
                }
                images.push(stats);
            }
            Err(e) => skipped.push(skip(entry, &e)),
        }
    }
    if images.is_empty() {
        return Err(Error::NoImages(root.to_path_buf()));
    }
    let per_image: Vec<_> = images.iter().map(|s| s.stats).collect();
    let summary = summarize_corpus(&per_image)?;
    Ok(CorpusStats { summary, images, histogram: hist, skipped })
}

/// `file,mean_R,std_R,mean_G,std_G,mean_B,std_B`.
pub fn write_image_csv(path: &Path, images: &[ImageStats]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["file", "mean_R", "std_R", "mean_G", "std_G", "mean_B", "std_B"])?;
    for img in images {
        let mut row = vec![img.key.clone()];
        for s in &img.stats {
            row.push(s.mean.to_string());
            row.push(s.std.to_string());
        }
        w.write_record(&row)?;
    }
    write_file(path, &finish(w)?)
}

/// 256 rows `value,R,G,B` of pixel counts over the corpus.
pub fn write_histogram_csv(path: &Path, hist: &Histogram) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["value", "R", "G", "B"])?;
    for (v, ((r, g), b)) in hist[0].iter().zip(&hist[1]).zip(&hist[2]).enumerate() {
        w.write_record([v.to_string(), r.to_string(), g.to_string(), b.to_string()])?;
    }
    write_file(path, &finish(w)?)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner().map_err(|e| Error::Csv(e.into_error().into()))
}

/// Output path of an input key: same relative path with a `.png` extension.
pub fn output_key(key: &str) -> String {
    match key.rsplit_once('.') {
        Some((stem, _)) if !stem.is_empty() && !stem.ends_with('/') => format!("{stem}.png"),
        _ => format!("{key}.png"),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegradeOutcome {
    /// Sorted by key.
    pub images: Vec<ImageRecord>,
    pub skipped: Vec<SkippedFile>,
}

impl DegradeOutcome {
    /// Input key → output key for every degraded image.
    pub fn file_map(&self) -> HashMap<String, String> {
        self.images.iter().map(|r| (r.key.clone(), r.output.clone())).collect()
    }
}

/// Refuses an output root at or below the input root so the input tree is never written.
pub fn check_disjoint(input: &Path, output: &Path) -> Result<()> {
    let input_abs = std::fs::canonicalize(input).map_err(Error::io(input))?;
    let mut probe = Some(output);
    let mut suffix: Vec<&std::ffi::OsStr> = Vec::new();
    // The output directory may not exist yet: canonicalize its nearest existing ancestor.
    while let Some(p) = probe {
        if let Ok(abs) = std::fs::canonicalize(p) {
            let full: PathBuf = suffix.iter().rev().fold(abs, |acc, s| acc.join(s));
            if full.starts_with(&input_abs) {
                return Err(Error::NestedOutput { input: input.to_path_buf(), output: output.to_path_buf() });
            }
            return Ok(());
        }
        if let Some(name) = p.file_name() {
            suffix.push(name);
        }
        probe = p.parent().filter(|q| !q.as_os_str().is_empty());
    }
    Ok(())
}

/// Degrades every image under `input` into `output` as PNG. Each image draws
/// from its own stream keyed by its relative path, so `jobs` never affects results.
pub fn degrade_corpus(
    input: &Path,
    output: &Path,
    summary: &ChannelStatsSummary,
    cfg: &DegradeConfig,
    jobs: usize,
) -> Result<DegradeOutcome> {
    summary.validate()?;
    cfg.validate()?;
    check_disjoint(input, output)?;
    let entries = list_images(input)?;
    let mut owners: BTreeMap<String, &str> = BTreeMap::new();
    for e in &entries {
        if let Some(prev) = owners.insert(output_key(&e.key), &e.key) {
            return Err(Error::Format {
                path: input.to_path_buf(),
                message: format!("{prev} and {} map to the same output {}", e.key, output_key(&e.key)),
            });
        }
    }
    let results: Vec<Result<ImageRecord>> = thread_pool(jobs).install(|| {
        entries
            .par_iter()
            .map(|e| {
                let img = load_rgb(&e.path)?;
                let out = degrade_image(&img, summary, cfg, &e.key)?;
                let bytes = encode_png_rgb(&out)?;
                let out_key = output_key(&e.key);
                write_file(&output.join(&out_key), &bytes)?;
                Ok(ImageRecord { key: e.key.clone(), output: out_key, sha256: sha256_hex(&bytes) })
            })
            .collect()
    });
    let mut images = Vec::new();
    let mut skipped = Vec::new();
    for (entry, result) in entries.iter().zip(results) {
        match result {
            Ok(rec) => images.push(rec),
            Err(e @ (Error::Decode { .. } | Error::Core(darkforge_core::Error::EmptyImage))) => {
                skipped.push(skip(entry, &e))
            }
            Err(e) => return Err(e),
        }
    }
    if images.is_empty() {
        return Err(Error::NoImages(input.to_path_buf()));
    }
    Ok(DegradeOutcome { images, skipped })
}
