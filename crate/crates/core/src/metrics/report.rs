use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{psnr, ssim, DEFAULT_LAMBDA, PSNR_CAP_DB};
use crate::degrade::PipelineConfig;
use crate::error::{Error, Result};
use crate::io::{has_image_extension, load_image, to_precise_json, write_atomic};

/// One prediction/reference pair to score.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalPair {
    pub id: String,
    pub pred: PathBuf,
    pub gt: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub id: String,
    /// dB, capped at [`PSNR_CAP_DB`].
    pub psnr: f64,
    pub ssim: f64,
    /// Prediction and reference were sample-for-sample equal.
    pub identical: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub count: usize,
    pub mean_psnr: f64,
    pub mean_ssim: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedPair {
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub source: String,
    pub psnr_cap_db: f64,
    /// L1 weight of the training objective these pairs are meant for.
    pub lambda: f64,
    pub per_image: Vec<PairScore>,
    pub aggregate: Aggregate,
    pub skipped: Vec<SkippedPair>,
    /// Pipeline configuration of the evaluated dataset, when known.
    pub config: Option<PipelineConfig>,
}

impl MetricReport {
    pub fn from_scores(
        source: impl Into<String>,
        per_image: Vec<PairScore>,
        skipped: Vec<SkippedPair>,
        config: Option<PipelineConfig>,
    ) -> Self {
        let n = per_image.len();
        let (mean_psnr, mean_ssim) = if n == 0 {
            (0.0, 0.0)
        } else {
            (
                per_image.iter().map(|s| s.psnr).sum::<f64>() / n as f64,
                per_image.iter().map(|s| s.ssim).sum::<f64>() / n as f64,
            )
        };
        MetricReport {
            source: source.into(),
            psnr_cap_db: PSNR_CAP_DB,
            lambda: DEFAULT_LAMBDA,
            per_image,
            aggregate: Aggregate {
                count: n,
                mean_psnr,
                mean_ssim,
            },
            skipped,
            config,
        }
    }

    pub fn to_json(&self) -> String {
        to_precise_json(self)
    }

    /// One row per pair: `id,psnr,ssim`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["id", "psnr", "ssim"])
            .expect("in-memory write");
        for s in &self.per_image {
            w.write_record([
                s.id.clone(),
                format!("{:.16e}", s.psnr),
                format!("{:.16e}", s.ssim),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is UTF-8")
    }

    /// Writes the JSON report to `path` and the flat table next to it with a
    /// `.csv` extension (or the reverse when `path` itself ends in `.csv`).
    /// Returns the table path.
    pub fn write(&self, path: &Path) -> Result<PathBuf> {
        let is_csv = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
        let (json_path, csv_path) = if is_csv {
            (path.with_extension("json"), path.to_path_buf())
        } else {
            (path.to_path_buf(), path.with_extension("csv"))
        };
        write_atomic(&json_path, self.to_json().as_bytes())?;
        write_atomic(&csv_path, self.to_csv().as_bytes())?;
        Ok(csv_path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Decode {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

fn score_pair(pair: &EvalPair) -> Result<PairScore> {
    let pred = load_image(&pair.pred)?;
    let gt = load_image(&pair.gt)?;
    let p = psnr(&pred, &gt)?;
    let s = ssim(&pred, &gt)?;
    Ok(PairScore {
        id: pair.id.clone(),
        psnr: p.min(PSNR_CAP_DB),
        ssim: s,
        identical: p.is_infinite(),
    })
}

/// Scores every pair in parallel. Pairs that cannot be decoded or compared
/// are skipped with a reason; results keep input order regardless of
/// `workers` (0 = one per core).
pub fn evaluate_pairs(
    source: impl Into<String>,
    pairs: &[EvalPair],
    config: Option<PipelineConfig>,
    workers: usize,
) -> Result<MetricReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParam(format!("thread pool: {e}")))?;
    let results: Vec<Result<PairScore>> =
        pool.install(|| pairs.par_iter().map(score_pair).collect());
    let mut scores = Vec::with_capacity(pairs.len());
    let mut skipped = Vec::new();
    for (pair, r) in pairs.iter().zip(results) {
        match r {
            Ok(s) => scores.push(s),
            Err(Error::Io { path, source }) => {
                return Err(Error::Io { path, source });
            }
            Err(e) => {
                log::warn!("skipping pair {}: {e}", pair.id);
                skipped.push(SkippedPair {
                    id: pair.id.clone(),
                    reason: e.to_string(),
                });
            }
        }
    }
    Ok(MetricReport::from_scores(source, scores, skipped, config))
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PairingReport {
    pub pairs: Vec<EvalPair>,
    /// File names present in only one of the two directories.
    pub unmatched: Vec<String>,
}

fn image_files(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.is_file() && has_image_extension(&path) {
            out.insert(entry.file_name().to_string_lossy().into_owned(), path);
        }
    }
    Ok(out)
}

/// Pairs files with the same name in `pred_dir` and `gt_dir`.
pub fn pairs_from_dirs(pred_dir: &Path, gt_dir: &Path) -> Result<PairingReport> {
    let preds = image_files(pred_dir)?;
    let gts = image_files(gt_dir)?;
    let mut report = PairingReport::default();
    for (name, pred) in &preds {
        match gts.get(name) {
            Some(gt) => report.pairs.push(EvalPair {
                id: name.clone(),
                pred: pred.clone(),
                gt: gt.clone(),
            }),
            None => report.unmatched.push(name.clone()),
        }
    }
    for name in gts.keys() {
        if !preds.contains_key(name) {
            report.unmatched.push(name.clone());
        }
    }
    report.unmatched.sort();
    Ok(report)
}
