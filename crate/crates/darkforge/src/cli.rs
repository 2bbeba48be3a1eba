//! Command-line front end. [`run`] returns the process exit code.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use darkforge_core::cost::{backbone_layers, lapm_branch_layers, Backbone, LayerKind, LayerSpec};
use darkforge_core::lapm::{LapmConfig, LapmParams};
use serde_json::json;

use crate::annotations::{passthrough_annotations, read_json};
use crate::check::{gradient_case_names, run_checks, CheckOptions};
use crate::config::load_degrade_config;
use crate::corpus::{collect_stats, degrade_corpus, write_histogram_csv, write_image_csv, StatsDocument};
use crate::costreport::{conv_report, curve_csv, fsl_report, lapm_report, network_report};
use crate::error::Error;
use crate::imageio::{load_rgb, write_file};
use crate::lapmexport::export_lapm;
use crate::manifest::{write_json, RunManifest};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "darkforge", version, about = "Low-light corpus synthesis, photoreceptive masks and conv cost reports")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-channel statistics of an image corpus.
    Stats(StatsArgs),
    /// Degrade a well-lit corpus toward a statistics profile.
    Degrade(DegradeArgs),
    /// Photosensitive mask pyramid and texture planes of one image.
    Lapm(LapmArgs),
    /// Analytical FLOPs / MACs reports.
    Cost(CostArgs),
    /// Run the embedded verification battery.
    Check(CheckArgs),
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[derive(Debug, Args)]
pub struct JobsArg {
    /// Worker threads (default: logical CPUs).
    #[arg(long, env = "DARKFORGE_JOBS")]
    pub jobs: Option<usize>,
}

impl JobsArg {
    fn resolve(&self) -> usize {
        self.jobs.filter(|&j| j > 0).unwrap_or_else(default_jobs)
    }
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Corpus root, searched recursively for PNG/JPEG files.
    #[arg(long)]
    pub input: PathBuf,
    /// Summary JSON path.
    #[arg(long)]
    pub output: PathBuf,
    /// Per-image CSV (default: `<output stem>_images.csv`).
    #[arg(long)]
    pub per_image_csv: Option<PathBuf>,
    /// 256-bin histogram CSV (default: `<output stem>_histogram.csv`).
    #[arg(long)]
    pub histogram_csv: Option<PathBuf>,
    /// Run manifest (default: `<output stem>_manifest.json`).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[command(flatten)]
    pub jobs: JobsArg,
}

#[derive(Debug, Args)]
pub struct DegradeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Target statistics profile written by `stats`.
    #[arg(long)]
    pub stats: PathBuf,
    /// Overrides the seed from `--config`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Flat key = value file (tau_color, epsilon, seed, sigma_floor).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// COCO-style annotations whose `file_name`s are input-relative paths.
    #[arg(long, requires = "annotations_out")]
    pub annotations_in: Option<PathBuf>,
    #[arg(long, requires = "annotations_in")]
    pub annotations_out: Option<PathBuf>,
    /// Run manifest (default: `<output>/manifest.json`).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[command(flatten)]
    pub jobs: JobsArg,
}

#[derive(Debug, Args)]
pub struct LapmArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 8.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.02)]
    pub tau: f64,
    #[arg(long, default_value_t = 5)]
    pub levels: u32,
    #[arg(long, default_value_t = 1e-8)]
    pub eps: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub w: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub bias: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub beta: f64,
}

#[derive(Debug, Args)]
pub struct CostArgs {
    #[command(subcommand)]
    pub kind: CostCommand,
    /// Write the JSON report here instead of standard output.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Dims {
    /// Square output side; `--h` / `--w` override either side.
    #[arg(long)]
    pub hw: Option<u64>,
    #[arg(long)]
    pub h: Option<u64>,
    #[arg(long)]
    pub w: Option<u64>,
}

impl Dims {
    fn resolve(&self) -> Result<(u64, u64), Failure> {
        match (self.h.or(self.hw), self.w.or(self.hw)) {
            (Some(h), Some(w)) if h > 0 && w > 0 => Ok((h, w)),
            (Some(_), Some(_)) => Err(Failure::Usage("spatial dims must be positive".into())),
            _ => Err(Failure::Usage("give --hw or both --h and --w".into())),
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum CostCommand {
    /// Standard and grouped convolution with the F(g) / M(g) curve.
    Conv {
        #[arg(long)]
        c1: u64,
        #[arg(long)]
        c2: u64,
        /// Square kernel size; `--kh` / `--kw` override.
        #[arg(long, default_value_t = 3)]
        k: u64,
        #[arg(long)]
        kh: Option<u64>,
        #[arg(long)]
        kw: Option<u64>,
        #[command(flatten)]
        dims: Dims,
        #[arg(long, default_value_t = 1)]
        g: u64,
        #[arg(long, default_value_t = 1)]
        stride: u64,
        /// Split factors of the exported curve.
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16,32,64")]
        curve: Vec<u64>,
        /// Also write the curve as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Two-stage split block against a single 3x3 conv.
    Fsl {
        #[arg(long)]
        c1: u64,
        #[arg(long)]
        c2: u64,
        #[arg(long, default_value_t = 1)]
        stride: u64,
        #[command(flatten)]
        dims: Dims,
    },
    /// Photoreceptive branch under the documented op convention.
    Lapm {
        #[command(flatten)]
        dims: Dims,
        #[arg(long, default_value_t = 5)]
        levels: u32,
    },
    /// Totals over a layer chain: a built-in backbone or a JSON list of layer specs.
    Network {
        #[arg(long, value_enum, conflicts_with = "layers")]
        backbone: Option<BackboneArg>,
        #[arg(long, default_value_t = 640)]
        side: u64,
        /// Also report the mask branch with this many levels as a separate chain.
        #[arg(long)]
        lapm_levels: Option<u32>,
        #[arg(long)]
        layers: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BackboneArg {
    Small,
    Large,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Random seeds per gradient case.
    #[arg(long, default_value_t = 20)]
    pub seeds: u64,
    /// Scales one gradient case's analytic result to confirm the battery can fail.
    #[arg(long, hide = true)]
    pub perturb: Option<String>,
}

/// A failed command, classified by exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
    Verification(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => EXIT_USAGE,
            Self::Data(_) => EXIT_DATA,
            Self::Verification(_) => EXIT_VERIFY,
        }
    }

    fn message(&self) -> &str {
        match self {
            Self::Usage(m) | Self::Data(m) | Self::Verification(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self::Data(e.to_string())
    }
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let command: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match dispatch(cli.command, command) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.exit_code()
        }
    }
}

pub fn dispatch(command: Command, argv: Vec<String>) -> Result<(), Failure> {
    match command {
        Command::Stats(a) => cmd_stats(&a, argv),
        Command::Degrade(a) => cmd_degrade(&a, argv),
        Command::Lapm(a) => cmd_lapm(&a),
        Command::Cost(a) => cmd_cost(&a),
        Command::Check(a) => cmd_check(&a),
    }
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "stats".into());
    path.with_file_name(format!("{stem}{suffix}"))
}

pub fn cmd_stats(a: &StatsArgs, argv: Vec<String>) -> Result<(), Failure> {
    let start = Instant::now();
    let jobs = a.jobs.resolve();
    let corpus = collect_stats(&a.input, jobs)?;
    write_json(&a.output, &StatsDocument::new(corpus.summary))?;
    let per_image = a.per_image_csv.clone().unwrap_or_else(|| sibling(&a.output, "_images.csv"));
    let histogram = a.histogram_csv.clone().unwrap_or_else(|| sibling(&a.output, "_histogram.csv"));
    write_image_csv(&per_image, &corpus.images)?;
    write_histogram_csv(&histogram, &corpus.histogram)?;
    let config = json!({
        "input": a.input, "output": a.output, "per_image_csv": per_image, "histogram_csv": histogram, "jobs": jobs,
        "images": corpus.images.len(),
    });
    let mut manifest = RunManifest::new(argv, config, None);
    manifest.skipped = corpus.skipped;
    manifest.duration_secs = start.elapsed().as_secs_f64();
    manifest.write(&a.manifest.clone().unwrap_or_else(|| sibling(&a.output, "_manifest.json")))?;
    log::info!("summarized {} images ({} skipped)", corpus.images.len(), manifest.skipped.len());
    Ok(())
}

pub fn cmd_degrade(a: &DegradeArgs, argv: Vec<String>) -> Result<(), Failure> {
    let start = Instant::now();
    let summary = StatsDocument::read(&a.stats)?;
    let mut cfg = match &a.config {
        Some(p) => load_degrade_config(p)?,
        None => Default::default(),
    };
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    let annotations = a.annotations_in.as_deref().map(read_json).transpose()?;
    let jobs = a.jobs.resolve();
    let outcome = degrade_corpus(&a.input, &a.output, &summary, &cfg, jobs)?;
    let config = json!({
        "input": a.input, "output": a.output, "stats": a.stats, "jobs": jobs,
        "tau_color": cfg.tau_color, "epsilon": cfg.epsilon, "sigma_floor": cfg.sigma_floor,
    });
    let mut manifest = RunManifest::new(argv, config, Some(cfg.seed));
    if let (Some(doc), Some(out)) = (annotations, &a.annotations_out) {
        let rewritten = passthrough_annotations(doc, &outcome.file_map())?;
        write_json(out, &rewritten)?;
        manifest.annotations = out.display().to_string();
    }
    manifest.images = outcome.images;
    manifest.skipped = outcome.skipped;
    manifest.duration_secs = start.elapsed().as_secs_f64();
    manifest.write(&a.manifest.clone().unwrap_or_else(|| a.output.join("manifest.json")))?;
    log::info!("degraded {} images ({} skipped) with seed {}", manifest.images.len(), manifest.skipped.len(), cfg.seed);
    Ok(())
}

pub fn cmd_lapm(a: &LapmArgs) -> Result<(), Failure> {
    let cfg = LapmConfig { lambda: a.lambda, tau_photon: a.tau, eps: a.eps, levels: a.levels };
    cfg.validate().map_err(usage)?;
    let params = LapmParams { w: a.w, bias: a.bias, gamma: a.gamma, beta: a.beta };
    let img = load_rgb(&a.input)?;
    let sidecar = export_lapm(&img, &a.output, &cfg, &params)?;
    log::info!("wrote {} pyramid levels to {}", sidecar.pyramid.len(), a.output.display());
    Ok(())
}

/// A closed pipe (`darkforge cost ... | head`) is not an error.
fn stdout(text: &str) -> Result<(), Failure> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Failure::Data(format!("stdout: {e}"))),
        _ => Ok(()),
    }
}

fn emit(value: &impl serde::Serialize, output: Option<&Path>) -> Result<(), Failure> {
    match output {
        Some(p) => write_json(p, value).map_err(Failure::from),
        None => {
            let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Data(e.to_string()))?;
            stdout(&format!("{text}\n"))
        }
    }
}

pub fn cmd_cost(a: &CostArgs) -> Result<(), Failure> {
    let out = a.output.as_deref();
    match &a.kind {
        CostCommand::Conv { c1, c2, k, kh, kw, dims, g, stride, curve, csv } => {
            let (h, w) = dims.resolve()?;
            let spec = LayerSpec {
                c_in: *c1,
                c_out: *c2,
                kh: kh.unwrap_or(*k),
                kw: kw.unwrap_or(*k),
                h,
                w,
                stride: *stride,
                groups: *g,
                kind: LayerKind::StandardConv,
            };
            let (report, inc) = conv_report(&spec, curve).map_err(usage)?;
            if let Some(path) = csv {
                let bytes = curve_csv(&inc).map_err(|e| Failure::Data(e.to_string()))?;
                write_file(path, &bytes)?;
            }
            emit(&report, out)
        }
        CostCommand::Fsl { c1, c2, stride, dims } => {
            let (h, w) = dims.resolve()?;
            emit(&fsl_report(*c1, *c2, *stride, h, w).map_err(usage)?, out)
        }
        CostCommand::Lapm { dims, levels } => {
            let (h, w) = dims.resolve()?;
            emit(&lapm_report(h, w, *levels), out)
        }
        CostCommand::Network { backbone, side, lapm_levels, layers } => {
            let chain = match (backbone, layers) {
                (_, Some(path)) => {
                    let text = std::fs::read_to_string(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
                    serde_json::from_str::<Vec<LayerSpec>>(&text)
                        .map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?
                }
                (Some(BackboneArg::Small), None) => backbone_layers(Backbone::Small, *side),
                (Some(BackboneArg::Large), None) => backbone_layers(Backbone::Large, *side),
                (None, None) => return Err(Failure::Usage("give --backbone or --layers".into())),
            };
            let main = network_report(&chain).map_err(|e| Failure::Data(e.to_string()))?;
            match lapm_levels {
                None => emit(&main, out),
                Some(levels) => {
                    let branch = network_report(&lapm_branch_layers(*side, *levels)).map_err(usage)?;
                    emit(&json!({ "backbone": main, "lapm_branch": branch }), out)
                }
            }
        }
    }
}

pub fn cmd_check(a: &CheckArgs) -> Result<(), Failure> {
    if let Some(name) = &a.perturb {
        if !gradient_case_names().contains(&name.as_str()) {
            return Err(Failure::Usage(format!("unknown case {name}; one of {}", gradient_case_names().join(", "))));
        }
    }
    if a.seeds == 0 {
        return Err(Failure::Usage("--seeds must be >= 1".into()));
    }
    let report = run_checks(&CheckOptions { seeds: a.seeds, perturb: a.perturb.clone() });
    stdout(&report.table())?;
    if report.passed() {
        stdout("all suites passed\n")?;
        Ok(())
    } else {
        let names: Vec<String> = report.failures().map(|r| format!("{}/{}", r.suite, r.case)).collect();
        Err(Failure::Verification(format!("failed: {}", names.join(", "))))
    }
}
