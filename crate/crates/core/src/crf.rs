//! Camera response curves: DoRF-style loading, forward application and
//! monotone inversion.
//!
//! A curve is sampled at 1024 irradiance points in `[0, 1]`. Both directions
//! are evaluated by piecewise-linear interpolation. Where the brightness
//! samples are flat, inversion returns the left end of the flat run.

use std::collections::HashSet;
use std::io::BufRead;

use rand::Rng;

use crate::error::{Error, Result};
use crate::image::{ColorSpace, ImageF, ValueRange};

pub const CURVE_SAMPLES: usize = 1024;

const ENDPOINT_TOLERANCE: f64 = 1e-3;
const IRRADIANCE_TOLERANCE: f64 = 1e-6;
/// Decreases smaller than this are float noise and are not reported.
const MONOTONE_TOLERANCE: f64 = 1e-12;

pub const IDENTITY_ID: &str = "identity";

#[derive(Debug, Clone, PartialEq)]
pub struct ResponseCurve {
    id: String,
    irradiance: Vec<f64>,
    brightness: Vec<f64>,
}

impl ResponseCurve {
    /// Validates the sample vectors. Brightness must already be nondecreasing;
    /// use [`project_monotone`] first for raw measurements.
    pub fn new(id: impl Into<String>, irradiance: Vec<f64>, brightness: Vec<f64>) -> Result<Self> {
        let id = id.into();
        let bad = |msg: String| Error::InvalidParam(format!("curve `{id}`: {msg}"));
        if irradiance.len() != CURVE_SAMPLES || brightness.len() != CURVE_SAMPLES {
            return Err(bad(format!(
                "expected {CURVE_SAMPLES} samples, got {} irradiance / {} brightness",
                irradiance.len(),
                brightness.len()
            )));
        }
        if irradiance.iter().chain(&brightness).any(|v| !v.is_finite()) {
            return Err(bad("non-finite sample".into()));
        }
        if irradiance[0].abs() > IRRADIANCE_TOLERANCE
            || (irradiance[CURVE_SAMPLES - 1] - 1.0).abs() > IRRADIANCE_TOLERANCE
        {
            return Err(bad("irradiance must span [0, 1]".into()));
        }
        if irradiance.windows(2).any(|w| w[1] <= w[0]) {
            return Err(bad("irradiance must be strictly increasing".into()));
        }
        if brightness.windows(2).any(|w| w[1] < w[0]) {
            return Err(bad("brightness must be nondecreasing".into()));
        }
        if brightness[0] > ENDPOINT_TOLERANCE
            || brightness[0] < 0.0
            || brightness[CURVE_SAMPLES - 1] < 1.0 - ENDPOINT_TOLERANCE
            || brightness[CURVE_SAMPLES - 1] > 1.0 + ENDPOINT_TOLERANCE
        {
            return Err(bad(format!(
                "brightness endpoints {} / {} are not 0 / 1",
                brightness[0],
                brightness[CURVE_SAMPLES - 1]
            )));
        }
        Ok(ResponseCurve {
            id,
            irradiance,
            brightness,
        })
    }

    pub fn identity() -> Self {
        let mut c = gamma_curve(1.0).expect("unit exponent is in range");
        c.id = IDENTITY_ID.to_string();
        c
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn irradiance(&self) -> &[f64] {
        &self.irradiance
    }

    pub fn brightness(&self) -> &[f64] {
        &self.brightness
    }

    /// Forward response for one irradiance value (clamped to `[0, 1]`).
    pub fn apply_scalar(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        let irr = &self.irradiance;
        // first index with irr[j] > x
        let j = irr.partition_point(|&v| v <= x);
        let out = if j == 0 {
            self.brightness[0]
        } else if j == irr.len() {
            self.brightness[irr.len() - 1]
        } else {
            let (x0, x1) = (irr[j - 1], irr[j]);
            let (y0, y1) = (self.brightness[j - 1], self.brightness[j]);
            y0 + (y1 - y0) * (x - x0) / (x1 - x0)
        };
        out.clamp(0.0, 1.0)
    }

    /// Inverse response for one brightness value. Flat runs resolve to their
    /// leftmost irradiance.
    pub fn invert_scalar(&self, y: f64) -> f64 {
        let b = &self.brightness;
        // first index with b[j] >= y
        let j = b.partition_point(|&v| v < y);
        let out = if j == 0 {
            self.irradiance[0]
        } else if j == b.len() {
            self.irradiance[b.len() - 1]
        } else if b[j] == y {
            self.irradiance[j]
        } else {
            // b[j-1] < y < b[j]
            let (y0, y1) = (b[j - 1], b[j]);
            let (x0, x1) = (self.irradiance[j - 1], self.irradiance[j]);
            x0 + (x1 - x0) * (y - y0) / (y1 - y0)
        };
        out.clamp(0.0, 1.0)
    }

    /// Max `|apply(invert(x)) - x|` over a uniform 1024-point grid.
    pub fn round_trip_error(&self) -> f64 {
        (0..CURVE_SAMPLES)
            .map(|i| {
                let x = i as f64 / (CURVE_SAMPLES - 1) as f64;
                (self.apply_scalar(self.invert_scalar(x)) - x).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Synthetic power-law response `brightness = irradiance^(1/gc)`.
pub fn gamma_curve(gc: f64) -> Result<ResponseCurve> {
    if !(gc > 0.1 && gc < 10.0) {
        return Err(Error::InvalidParam(format!(
            "gamma curve exponent {gc} outside (0.1, 10)"
        )));
    }
    let irradiance = uniform_grid();
    let brightness = irradiance.iter().map(|x| x.powf(1.0 / gc)).collect();
    ResponseCurve::new(format!("gamma_{gc}"), irradiance, brightness)
}

fn uniform_grid() -> Vec<f64> {
    (0..CURVE_SAMPLES)
        .map(|i| i as f64 / (CURVE_SAMPLES - 1) as f64)
        .collect()
}

/// Forward CRF on every sample. The output is display-referred brightness.
pub fn apply(curve: &ResponseCurve, img: &ImageF) -> Result<ImageF> {
    img.expect_tags(
        "crf apply",
        &[ColorSpace::LinearRgb, ColorSpace::Srgb],
        ValueRange::Unit,
    )?;
    let out = img
        .samples()
        .iter()
        .map(|&v| curve.apply_scalar(v))
        .collect();
    img.with_samples(out, ColorSpace::Srgb, ValueRange::Unit)
}

/// Inverse CRF on every sample, producing a linear image.
pub fn invert(curve: &ResponseCurve, img: &ImageF) -> Result<ImageF> {
    img.expect_tags(
        "crf invert",
        &[ColorSpace::Srgb, ColorSpace::LinearRgb],
        ValueRange::Unit,
    )?;
    let out = img
        .samples()
        .iter()
        .map(|&v| curve.invert_scalar(v))
        .collect();
    img.with_samples(out, ColorSpace::LinearRgb, ValueRange::Unit)
}

/// Replaces each sample with the running maximum. Returns the largest
/// decrease that was removed.
pub fn project_monotone(values: &mut [f64]) -> f64 {
    let mut worst = 0.0f64;
    let mut running = f64::NEG_INFINITY;
    for v in values.iter_mut() {
        if *v < running {
            worst = worst.max(running - *v);
            *v = running;
        } else {
            running = *v;
        }
    }
    worst
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrfDatabase {
    curves: Vec<ResponseCurve>,
    source: String,
}

impl CrfDatabase {
    pub fn new(curves: Vec<ResponseCurve>, source: impl Into<String>) -> Result<Self> {
        if curves.is_empty() {
            return Err(Error::Empty("CRF database has no curves".into()));
        }
        let mut seen = HashSet::new();
        for c in &curves {
            if !seen.insert(c.id.as_str()) {
                return Err(Error::InvalidParam(format!(
                    "duplicate curve id `{}`",
                    c.id
                )));
            }
        }
        Ok(CrfDatabase {
            curves,
            source: source.into(),
        })
    }

    /// Power-law family used when no measured database is configured.
    pub fn synthetic() -> Self {
        let curves = [1.4, 1.8, 2.0, 2.2, 2.4, 2.6, 3.0]
            .iter()
            .map(|&gc| gamma_curve(gc).expect("exponents are in range"))
            .collect();
        CrfDatabase::new(curves, "synthetic").expect("synthetic ids are unique")
    }

    pub fn curves(&self) -> &[ResponseCurve] {
        &self.curves
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&ResponseCurve> {
        self.curves.iter().find(|c| c.id == id)
    }

    /// Uniform draw over the curves.
    pub fn sample_curve<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<&ResponseCurve> {
        if self.curves.is_empty() {
            return Err(Error::Empty(
                "cannot sample from an empty CRF database".into(),
            ));
        }
        Ok(&self.curves[rng.random_range(0..self.curves.len())])
    }
}

/// A curve whose brightness samples had to be projected onto a
/// nondecreasing sequence at load time.
#[derive(Debug, Clone, PartialEq)]
pub struct RepairedCurve {
    pub record: usize,
    pub id: String,
    pub max_violation: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadReport {
    pub repaired: Vec<RepairedCurve>,
    /// Duplicate names that were disambiguated with a `#n` suffix.
    pub renamed: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DorfLoad {
    pub database: CrfDatabase,
    pub report: LoadReport,
}

/// Parses a DoRF-style text stream.
///
/// Each record is a name line, an auxiliary line, a line starting with
/// `I =` followed by 1024 floats and a line starting with `B =` followed by
/// 1024 floats. Floats may continue on the lines that follow their header.
pub fn load_dorf<R: BufRead>(reader: R, source: impl Into<String>) -> Result<DorfLoad> {
    let mut lines = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse {
            record: 0,
            message: format!("read error at line {}: {e}", n + 1),
        })?;
        let trimmed = line.trim();
        if !trimmed.is_empty() {
            lines.push(trimmed.to_string());
        }
    }
    if lines.is_empty() {
        return Err(Error::Empty("DoRF stream contains no records".into()));
    }

    let mut curves = Vec::new();
    let mut report = LoadReport::default();
    let mut used = HashSet::new();
    let mut pos = 0;
    let mut record = 0;
    while pos < lines.len() {
        let err = |message: String| Error::Parse { record, message };
        let name = lines[pos].clone();
        if name.starts_with("I =") || name.starts_with("B =") {
            return Err(err(format!(
                "expected a curve name, found `{}`",
                truncate(&name)
            )));
        }
        pos += 1;
        if pos >= lines.len() {
            return Err(err("truncated record after name line".into()));
        }
        pos += 1; // auxiliary info line
        let irradiance = read_vector(&lines, &mut pos, "I", record)?;
        let mut brightness = read_vector(&lines, &mut pos, "B", record)?;

        let violation = project_monotone(&mut brightness);
        let mut id = name.clone();
        let mut n = 2;
        while used.contains(&id) {
            id = format!("{name}#{n}");
            n += 1;
        }
        if id != name {
            report.renamed.push((name.clone(), id.clone()));
        }
        if violation > MONOTONE_TOLERANCE {
            report.repaired.push(RepairedCurve {
                record,
                id: id.clone(),
                max_violation: violation,
            });
        }
        let curve = ResponseCurve::new(id.clone(), irradiance, brightness).map_err(|e| {
            err(match e {
                Error::InvalidParam(m) => m,
                other => other.to_string(),
            })
        })?;
        used.insert(id);
        curves.push(curve);
        record += 1;
    }
    Ok(DorfLoad {
        database: CrfDatabase::new(curves, source)?,
        report,
    })
}

fn read_vector(lines: &[String], pos: &mut usize, tag: &str, record: usize) -> Result<Vec<f64>> {
    let err = |message: String| Error::Parse { record, message };
    let header = lines
        .get(*pos)
        .ok_or_else(|| err(format!("missing `{tag} =` line")))?;
    let rest = header
        .strip_prefix(tag)
        .map(str::trim_start)
        .and_then(|r| r.strip_prefix('='))
        .ok_or_else(|| err(format!("expected `{tag} =`, found `{}`", truncate(header))))?;
    *pos += 1;
    let mut values = Vec::with_capacity(CURVE_SAMPLES);
    parse_floats(rest, &mut values).map_err(|m| err(format!("{tag}: {m}")))?;
    while values.len() < CURVE_SAMPLES {
        match lines.get(*pos) {
            Some(line) if is_numeric_line(line) => {
                parse_floats(line, &mut values).map_err(|m| err(format!("{tag}: {m}")))?;
                *pos += 1;
            }
            _ => break,
        }
    }
    if values.len() != CURVE_SAMPLES {
        return Err(err(format!(
            "{tag}: expected {CURVE_SAMPLES} values, found {}",
            values.len()
        )));
    }
    Ok(values)
}

fn is_numeric_line(line: &str) -> bool {
    line.split_whitespace()
        .next()
        .is_some_and(|t| t.parse::<f64>().is_ok())
}

fn parse_floats(text: &str, out: &mut Vec<f64>) -> std::result::Result<(), String> {
    for tok in text.split_whitespace() {
        let v = tok
            .parse::<f64>()
            .map_err(|_| format!("cannot parse `{}` as a float", truncate(tok)))?;
        out.push(v);
    }
    Ok(())
}

fn truncate(s: &str) -> String {
    s.chars().take(40).collect()
}

/// Serializes curves in the same layout [`load_dorf`] reads.
pub fn write_dorf<W: std::io::Write>(curves: &[ResponseCurve], mut out: W) -> std::io::Result<()> {
    for c in curves {
        writeln!(out, "{}", c.id)?;
        writeln!(out, "graph")?;
        write!(out, "I =")?;
        for v in &c.irradiance {
            write!(out, " {v:e}")?;
        }
        writeln!(out)?;
        write!(out, "B =")?;
        for v in &c.brightness {
            write!(out, " {v:e}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}
