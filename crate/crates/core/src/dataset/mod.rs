//! Corpus ingestion and paired-dataset persistence.
//!
//! `generate` materializes a dataset directory:
//!
//! ```text
//! out/
//!   000000_bright.png   H, 8-bit sRGB
//!   000000_dark.png     L = clamp(k · low_H), 8-bit sRGB
//!   ...
//!   manifest.json
//! ```
//!
//! Image `i` draws all of its randomness from a stream derived from
//! `(global_seed, i)`, so the output does not depend on the worker count.

mod resize;

pub use resize::{center_crop, prepare, resize_bilinear};

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::color::{normalize_pm1, rgb_to_lab};
use crate::crf::{load_dorf, CrfDatabase};
use crate::degrade::{
    render_pair, synthesize_pair, DegradeParams, PipelineConfig, SynthesizedPair,
};
use crate::error::{Error, Result};
use crate::image::ImageF;
use crate::io::{load_image, probe_image, save_png, to_precise_json, write_atomic};
use crate::metrics::EvalPair;
use crate::rng::image_rng;

pub const MANIFEST_VERSION: &str = "1";
pub const MANIFEST_FILE: &str = "manifest.json";

/// One persisted pair. Image paths are relative to the manifest directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub index: usize,
    pub source_path: PathBuf,
    pub bright_path: PathBuf,
    pub dark_path: PathBuf,
    pub k: f64,
    pub params: DegradeParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedImage {
    pub index: usize,
    pub source_path: PathBuf,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub global_seed: u64,
    pub config: PipelineConfig,
    /// Mean over every sample of every stored bright image, in `[0, 1]`.
    pub corpus_mean_intensity: f64,
    pub records: Vec<PairRecord>,
    pub skipped: Vec<SkippedImage>,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        to_precise_json(self)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Manifest = serde_json::from_str(&text).map_err(|e| Error::Decode {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        m.config.validate()?;
        Ok(m)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json().as_bytes())
    }

    /// (prediction = dark, reference = bright) pairs for evaluation.
    pub fn eval_pairs(&self, dir: &Path) -> Vec<EvalPair> {
        self.records
            .iter()
            .map(|r| EvalPair {
                id: format!("{:06}", r.index),
                pred: dir.join(&r.dark_path),
                gt: dir.join(&r.bright_path),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingest {
    pub paths: Vec<PathBuf>,
    /// Files that were not decodable images.
    pub skipped: usize,
}

/// Lists decodable images directly inside `dir` in lexicographic order.
pub fn ingest(dir: &Path, limit: Option<usize>) -> Result<Ingest> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<_>>()?;
    entries.retain(|p| p.is_file());
    entries.sort();
    let mut paths = Vec::new();
    let mut skipped = 0;
    for p in entries {
        if probe_image(&p) {
            paths.push(p);
        } else {
            skipped += 1;
        }
    }
    if skipped > 0 {
        log::info!(
            "ingest: skipped {skipped} non-image file(s) in {}",
            dir.display()
        );
    }
    if paths.is_empty() {
        return Err(Error::Empty(format!(
            "no decodable images in {}",
            dir.display()
        )));
    }
    if let Some(n) = limit {
        paths.truncate(n);
    }
    Ok(Ingest { paths, skipped })
}

/// The configured measured curves, or the built-in power-law family.
pub fn load_database(config: &PipelineConfig) -> Result<CrfDatabase> {
    match &config.crf_database {
        Some(path) => {
            let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
            let load = load_dorf(BufReader::new(file), path.display().to_string())?;
            for r in &load.report.repaired {
                log::warn!(
                    "curve `{}` (record {}) repaired to nondecreasing, max violation {:e}",
                    r.id,
                    r.record,
                    r.max_violation
                );
            }
            Ok(load.database)
        }
        None => Ok(CrfDatabase::synthetic()),
    }
}

/// Model-input convention for a pair: `(dark input, bright target)`, both
/// scaled to `[-1, 1]`, in LAB when `lab` is set and RGB otherwise.
pub fn model_inputs(pair: &SynthesizedPair, lab: bool) -> Result<(ImageF, ImageF)> {
    let convert = |img: &ImageF| -> Result<ImageF> {
        if lab {
            normalize_pm1(&rgb_to_lab(img)?)
        } else {
            normalize_pm1(img)
        }
    };
    Ok((convert(&pair.dark)?, convert(&pair.bright)?))
}

#[derive(Debug, Clone)]
pub struct GenerateOptions {
    pub input: PathBuf,
    pub output: PathBuf,
    pub config: PipelineConfig,
    pub seed: u64,
    /// 0 = one worker per core.
    pub workers: usize,
    pub limit: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct GenerateSummary {
    pub manifest: Manifest,
    pub manifest_path: PathBuf,
    pub ingest_skipped: usize,
    pub elapsed_secs: f64,
}

enum Outcome {
    Pair {
        record: PairRecord,
        bright_sum: u64,
        samples: u64,
    },
    Skipped(SkippedImage),
}

pub fn bright_name(index: usize) -> String {
    format!("{index:06}_bright.png")
}

pub fn dark_name(index: usize) -> String {
    format!("{index:06}_dark.png")
}

fn process_one(
    index: usize,
    source: &Path,
    db: &CrfDatabase,
    opts: &GenerateOptions,
) -> Result<Outcome> {
    let skip = |reason: String| {
        log::warn!("skipping {}: {reason}", source.display());
        Ok(Outcome::Skipped(SkippedImage {
            index,
            source_path: source.to_path_buf(),
            reason,
        }))
    };
    let img = match load_image(source) {
        Ok(img) => img,
        Err(e @ Error::Decode { .. }) => return skip(e.to_string()),
        Err(e) => return Err(e),
    };
    let img = prepare(&img, opts.config.size)?;
    let mut rng = image_rng(opts.seed, index as u64);
    let pair = match synthesize_pair(&img, db, &opts.config, &mut rng) {
        Ok(p) => p,
        Err(e @ Error::Degenerate { .. }) => return skip(e.to_string()),
        Err(e) => return Err(e),
    };
    let (bright_path, dark_path) = (
        PathBuf::from(bright_name(index)),
        PathBuf::from(dark_name(index)),
    );
    save_png(&opts.output.join(&bright_path), &pair.bright)?;
    save_png(&opts.output.join(&dark_path), &pair.dark)?;
    let bytes = pair.bright.to_u8();
    Ok(Outcome::Pair {
        bright_sum: bytes.iter().map(|&b| b as u64).sum(),
        samples: bytes.len() as u64,
        record: PairRecord {
            index,
            source_path: source.to_path_buf(),
            bright_path,
            dark_path,
            k: pair.k,
            params: pair.params,
        },
    })
}

/// Runs ingest → prepare → synthesize → write over the whole corpus and
/// writes the manifest last.
pub fn generate(opts: &GenerateOptions) -> Result<GenerateSummary> {
    let start = Instant::now();
    opts.config.validate()?;
    let ingest = ingest(&opts.input, opts.limit)?;
    let db = load_database(&opts.config)?;
    log::info!(
        "generating {} pairs with {} response curves from {}",
        ingest.paths.len(),
        db.len(),
        db.source()
    );
    fs::create_dir_all(&opts.output).map_err(|e| Error::io(&opts.output, e))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| Error::InvalidParam(format!("thread pool: {e}")))?;
    let outcomes: Vec<Result<Outcome>> = pool.install(|| {
        ingest
            .paths
            .par_iter()
            .enumerate()
            .map(|(i, p)| process_one(i, p, &db, opts))
            .collect()
    });

    let mut records = Vec::new();
    let mut skipped = Vec::new();
    let (mut sum, mut samples) = (0u64, 0u64);
    for outcome in outcomes {
        match outcome {
            Ok(Outcome::Pair {
                record,
                bright_sum,
                samples: n,
            }) => {
                sum += bright_sum;
                samples += n;
                records.push(record);
            }
            Ok(Outcome::Skipped(s)) => skipped.push(s),
            Err(e) => {
                log::warn!(
                    "generation aborted; partial output left in {}",
                    opts.output.display()
                );
                return Err(e);
            }
        }
    }
    if records.is_empty() {
        return Err(Error::Empty("every input image was skipped".into()));
    }
    let manifest = Manifest {
        version: MANIFEST_VERSION.to_string(),
        global_seed: opts.seed,
        config: opts.config.clone(),
        corpus_mean_intensity: sum as f64 / (255.0 * samples as f64),
        records,
        skipped,
    };
    let manifest_path = opts.output.join(MANIFEST_FILE);
    manifest.write(&manifest_path)?;
    log::info!("wrote {}", manifest_path.display());
    Ok(GenerateSummary {
        manifest,
        manifest_path,
        ingest_skipped: ingest.skipped,
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}

/// Re-renders a record's dark image from its stored parameters and returns
/// the largest 8-bit channel difference against the stored file.
pub fn replay_record(
    manifest_dir: &Path,
    manifest: &Manifest,
    record: &PairRecord,
    db: &CrfDatabase,
) -> Result<u8> {
    let source = prepare(&load_image(&record.source_path)?, manifest.config.size)?;
    let pair = render_pair(&source, db, &manifest.config, &record.params)?;
    let stored = load_image(&manifest_dir.join(&record.dark_path))?;
    if !stored.same_shape(&pair.dark) {
        return Err(Error::ShapeMismatch {
            left: stored.shape_string(),
            right: pair.dark.shape_string(),
        });
    }
    Ok(stored
        .to_u8()
        .iter()
        .zip(pair.dark.to_u8())
        .map(|(a, b)| a.abs_diff(b))
        .max()
        .unwrap_or(0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verification {
    pub records: usize,
    pub stored_mean_intensity: f64,
    pub recomputed_mean_intensity: f64,
    pub max_replay_diff: u8,
}

/// Recomputes the corpus mean from the stored bright images and replays
/// every record.
pub fn verify(manifest_path: &Path) -> Result<Verification> {
    let manifest = Manifest::read(manifest_path)?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let db = load_database(&manifest.config)?;
    let results: Vec<Result<(f64, usize, u8)>> = manifest
        .records
        .par_iter()
        .map(|r| {
            let bright = load_image(&dir.join(&r.bright_path))?;
            let diff = replay_record(dir, &manifest, r, &db)?;
            Ok((bright.samples().iter().sum::<f64>(), bright.len(), diff))
        })
        .collect();
    let (mut sum, mut n, mut worst) = (0.0, 0usize, 0u8);
    for r in results {
        let (s, len, d) = r?;
        sum += s;
        n += len;
        worst = worst.max(d);
    }
    Ok(Verification {
        records: manifest.records.len(),
        stored_mean_intensity: manifest.corpus_mean_intensity,
        recomputed_mean_intensity: if n == 0 { 0.0 } else { sum / n as f64 },
        max_replay_diff: worst,
    })
}

/// One streamed training example in model-input convention.
#[derive(Debug, Clone)]
pub struct TrainingSample {
    pub index: usize,
    pub source_path: PathBuf,
    /// Dark input `L`, in `[-1, 1]`.
    pub input: ImageF,
    /// Bright target `H`, in `[-1, 1]`.
    pub target: ImageF,
    pub k: f64,
    pub params: DegradeParams,
}

/// On-the-fly pair generation without touching the disk. Degenerate images
/// are skipped; decode failures are yielded as errors.
pub struct PairStream {
    paths: Vec<PathBuf>,
    db: CrfDatabase,
    config: PipelineConfig,
    seed: u64,
    next: usize,
}

impl PairStream {
    pub fn new(
        paths: Vec<PathBuf>,
        db: CrfDatabase,
        config: PipelineConfig,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        Ok(PairStream {
            paths,
            db,
            config,
            seed,
            next: 0,
        })
    }

    fn build(&self, index: usize) -> Result<Option<TrainingSample>> {
        let path = &self.paths[index];
        let img = prepare(&load_image(path)?, self.config.size)?;
        let mut rng = image_rng(self.seed, index as u64);
        let pair = match synthesize_pair(&img, &self.db, &self.config, &mut rng) {
            Ok(p) => p,
            Err(Error::Degenerate { .. }) => return Ok(None),
            Err(e) => return Err(e),
        };
        let (input, target) = model_inputs(&pair, self.config.lab)?;
        Ok(Some(TrainingSample {
            index,
            source_path: path.clone(),
            input,
            target,
            k: pair.k,
            params: pair.params,
        }))
    }
}

impl Iterator for PairStream {
    type Item = Result<TrainingSample>;

    fn next(&mut self) -> Option<Self::Item> {
        while self.next < self.paths.len() {
            let i = self.next;
            self.next += 1;
            match self.build(i) {
                Ok(Some(s)) => return Some(Ok(s)),
                Ok(None) => log::debug!("stream: skipping degenerate image {i}"),
                Err(e) => return Some(Err(e)),
            }
        }
        None
    }
}
