//! `lowlight` command-line tool.
//!
//! Subcommands:
//!
//! * `gen`    build a paired dataset from a directory of normal-light images
//! * `eval`   score predictions against references (PSNR / SSIM)
//! * `crf`    inspect a DoRF-style response-curve file
//! * `verify` recheck a generated dataset against its manifest
//!
//! Logs and progress go to stderr. Machine-readable results go to files.

use std::ffi::OsString;
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use lowlight_core::crf::load_dorf;
use lowlight_core::dataset::{self, GenerateOptions, Manifest};
use lowlight_core::metrics::{self, EvalPair};
use lowlight_core::{Ablation, Error, ErrorClass, PipelineConfig};

/// Process exit status for every command path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    Usage = 1,
    Data = 2,
    Io = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

impl From<&Error> for ExitStatus {
    fn from(e: &Error) -> Self {
        match e.class() {
            ErrorClass::Usage => ExitStatus::Usage,
            ErrorClass::Data => ExitStatus::Data,
            ErrorClass::Io => ExitStatus::Io,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "lowlight",
    version,
    about = "Synthetic low-light pair generation and evaluation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a paired (dark, bright) dataset from an image directory.
    Gen(GenArgs),
    /// Compute PSNR and SSIM for prediction/reference pairs.
    Eval(EvalArgs),
    /// List the curves of a DoRF-style file.
    Crf(CrfArgs),
    /// Recompute the corpus mean and replay every record of a manifest.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Directory of normal-light source images.
    #[arg(long, value_name = "DIR")]
    pub input: PathBuf,
    /// Output directory for PNG pairs and the manifest.
    #[arg(long, value_name = "DIR")]
    pub output: PathBuf,
    /// Global seed; image i uses a stream derived from (seed, i).
    #[arg(long, value_name = "N")]
    pub seed: u64,
    /// Pipeline configuration (TOML). Defaults are used when omitted.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Disable one pipeline stage: proposed, no_epsilon, no_noise, no_crf, no_k, no_lab.
    #[arg(long, value_name = "TAG")]
    pub ablation: Option<String>,
    /// Use at most N images (after lexicographic ordering).
    #[arg(long, value_name = "N")]
    pub limit: Option<usize>,
    /// Worker threads (0 = one per core). Does not affect the output.
    #[arg(long, value_name = "N", default_value_t = 0)]
    pub workers: usize,
    /// Side length of the square crops; overrides the config file.
    #[arg(long, value_name = "PX")]
    pub size: Option<usize>,
    /// DoRF-style response-curve file; overrides the config file.
    #[arg(long, value_name = "FILE")]
    pub dorf: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory of predicted images (paired with --gt by file name).
    #[arg(long, value_name = "DIR", requires = "gt", conflicts_with = "manifest")]
    pub pred: Option<PathBuf>,
    /// Directory of reference images.
    #[arg(long, value_name = "DIR", requires = "pred")]
    pub gt: Option<PathBuf>,
    /// Evaluate a generated dataset: its dark images against its bright images.
    #[arg(long, value_name = "FILE", required_unless_present = "pred")]
    pub manifest: Option<PathBuf>,
    /// Report path (JSON); a CSV table is written alongside.
    #[arg(long, value_name = "FILE")]
    pub report: PathBuf,
    /// Worker threads (0 = one per core).
    #[arg(long, value_name = "N", default_value_t = 0)]
    pub workers: usize,
}

#[derive(Debug, Args)]
pub struct CrfArgs {
    /// DoRF-style curve file.
    #[arg(long, value_name = "FILE")]
    pub dorf: PathBuf,
    /// Also print each curve's max |apply(invert(x)) - x| over a 1024-point grid.
    #[arg(long)]
    pub roundtrip: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Manifest written by `gen`.
    #[arg(long, value_name = "FILE")]
    pub manifest: PathBuf,
}

/// Parses `args` (including the program name) and runs the command, writing
/// human-readable output to `out`.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> ExitStatus
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitStatus::Success
                }
                _ => ExitStatus::Usage,
            };
        }
    };
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(&a, out),
        Command::Eval(a) => cmd_eval(&a, out),
        Command::Crf(a) => cmd_crf(&a, out),
        Command::Verify(a) => cmd_verify(&a, out),
    };
    match result {
        Ok(status) => status,
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            ExitStatus::from(&e)
        }
    }
}

/// Config file, then flag overrides.
pub fn effective_config(args: &GenArgs) -> Result<PipelineConfig, Error> {
    let mut config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            PipelineConfig::from_toml(&text)?
        }
        None => PipelineConfig::default(),
    };
    if let Some(tag) = &args.ablation {
        config = config.with_ablation(tag.parse::<Ablation>()?);
    }
    if let Some(size) = args.size {
        config.size = size;
    }
    if let Some(dorf) = &args.dorf {
        config.crf_database = Some(dorf.clone());
    }
    config.validate()?;
    Ok(config)
}

pub fn cmd_gen(args: &GenArgs, out: &mut dyn Write) -> Result<ExitStatus, Error> {
    let config = effective_config(args)?;
    if !args.input.is_dir() {
        return Err(Error::Empty(format!(
            "input {} is not a readable directory",
            args.input.display()
        )));
    }
    let opts = GenerateOptions {
        input: args.input.clone(),
        output: args.output.clone(),
        config,
        seed: args.seed,
        workers: args.workers,
        limit: args.limit,
    };
    let summary = dataset::generate(&opts)?;
    let m = &summary.manifest;
    let rate = m.records.len() as f64 / summary.elapsed_secs.max(1e-9);
    let _ = writeln!(out, "pairs written:         {}", m.records.len());
    let _ = writeln!(out, "skipped (degenerate):  {}", m.skipped.len());
    let _ = writeln!(out, "skipped (non-image):   {}", summary.ingest_skipped);
    let _ = writeln!(out, "corpus mean intensity: {:.6}", m.corpus_mean_intensity);
    let _ = writeln!(
        out,
        "wall time:             {:.2} s ({rate:.1} pairs/s)",
        summary.elapsed_secs
    );
    let _ = writeln!(
        out,
        "manifest:              {}",
        summary.manifest_path.display()
    );
    Ok(ExitStatus::Success)
}

pub fn cmd_eval(args: &EvalArgs, out: &mut dyn Write) -> Result<ExitStatus, Error> {
    let (source, pairs, config, unmatched): (String, Vec<EvalPair>, _, Vec<String>) =
        match (&args.manifest, &args.pred, &args.gt) {
            (Some(path), _, _) => {
                let manifest = Manifest::read(path)?;
                let dir = path.parent().unwrap_or(Path::new("."));
                let pairs = manifest.eval_pairs(dir);
                (
                    path.display().to_string(),
                    pairs,
                    Some(manifest.config),
                    vec![],
                )
            }
            (None, Some(pred), Some(gt)) => {
                for d in [pred, gt] {
                    if !d.is_dir() {
                        return Err(Error::Io {
                            path: d.clone(),
                            source: std::io::Error::new(
                                std::io::ErrorKind::NotFound,
                                "not a directory",
                            ),
                        });
                    }
                }
                let pairing = metrics::pairs_from_dirs(pred, gt)?;
                let source = format!("{} vs {}", pred.display(), gt.display());
                (source, pairing.pairs, None, pairing.unmatched)
            }
            _ => {
                return Err(Error::InvalidParam(
                    "either --manifest or --pred/--gt is required".into(),
                ))
            }
        };
    for name in &unmatched {
        log::warn!("unmatched file skipped: {name}");
        eprintln!("warning: unmatched file skipped: {name}");
    }
    let mut report = metrics::evaluate_pairs(source, &pairs, config, args.workers)?;
    report
        .skipped
        .extend(unmatched.into_iter().map(|id| metrics::SkippedPair {
            id,
            reason: "no file with the same name in the other directory".into(),
        }));
    let table = report.write(&args.report)?;
    let a = &report.aggregate;
    let _ = writeln!(out, "pairs:     {}", a.count);
    let _ = writeln!(out, "skipped:   {}", report.skipped.len());
    let _ = writeln!(out, "mean psnr: {:.4} dB", a.mean_psnr);
    let _ = writeln!(out, "mean ssim: {:.6}", a.mean_ssim);
    let _ = writeln!(
        out,
        "report:    {} (+ {})",
        args.report.display(),
        table.display()
    );
    Ok(ExitStatus::Success)
}

pub fn cmd_crf(args: &CrfArgs, out: &mut dyn Write) -> Result<ExitStatus, Error> {
    let file = fs::File::open(&args.dorf).map_err(|e| Error::Io {
        path: args.dorf.clone(),
        source: e,
    })?;
    let load = load_dorf(BufReader::new(file), args.dorf.display().to_string())?;
    for r in &load.report.repaired {
        eprintln!(
            "warning: curve `{}` repaired to nondecreasing (max violation {:e})",
            r.id, r.max_violation
        );
    }
    let mut worst = 0.0f64;
    for c in load.database.curves() {
        if args.roundtrip {
            let err = c.round_trip_error();
            worst = worst.max(err);
            let _ = writeln!(out, "{}\t{err:.3e}", c.id());
        } else {
            let _ = writeln!(out, "{}", c.id());
        }
    }
    if args.roundtrip {
        let _ = writeln!(
            out,
            "curves: {}  max round-trip error: {worst:.3e}",
            load.database.len()
        );
    }
    Ok(ExitStatus::Success)
}

pub fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write) -> Result<ExitStatus, Error> {
    let v = dataset::verify(&args.manifest)?;
    let mean_diff = (v.recomputed_mean_intensity - v.stored_mean_intensity).abs();
    let _ = writeln!(out, "records:                 {}", v.records);
    let _ = writeln!(
        out,
        "stored mean intensity:   {:.9}",
        v.stored_mean_intensity
    );
    let _ = writeln!(
        out,
        "recomputed mean:         {:.9}",
        v.recomputed_mean_intensity
    );
    let _ = writeln!(
        out,
        "max replay difference:   {} (8-bit levels)",
        v.max_replay_diff
    );
    if mean_diff > 1e-6 || v.max_replay_diff > 1 {
        eprintln!("verification failed");
        return Ok(ExitStatus::Data);
    }
    Ok(ExitStatus::Success)
}
