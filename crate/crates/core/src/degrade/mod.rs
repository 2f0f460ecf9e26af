//! Synthetic low-light pair generation.
//!
//! A normal-light image is brightened by `1 + ε` to give the target `H`,
//! linearized through an inverse response curve, corrupted with shot and
//! read noise, darkened by γ and re-rendered through a forward curve to give
//! `low_H`. The dark input `L` is `low_H` rescaled by
//! `k = mean(H) / mean(low_H)`. Every stage that can leave `[0, 1]` clamps.

mod config;

pub use config::{ablation_config, Ablation, Interval, PipelineConfig};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::crf::{self, CrfDatabase, ResponseCurve, IDENTITY_ID};
use crate::error::{Error, Result};
use crate::image::{ColorSpace, ImageF, ValueRange};
use crate::rng::rng_from_seed;

/// Means at or below this are treated as black.
pub const DEGENERATE_MEAN: f64 = 1e-8;

/// The random draw behind one synthesized pair. Together with the source
/// image and the curve database it determines the pair exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegradeParams {
    pub epsilon: f64,
    pub gamma: f64,
    pub crf_inv_id: String,
    pub crf_fwd_id: String,
    pub shot_strength: f64,
    pub read_sigma: f64,
    /// Seeds the noise stream.
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams {
    pub shot_strength: f64,
    pub read_sigma: f64,
}

impl NoiseParams {
    pub const NONE: NoiseParams = NoiseParams {
        shot_strength: 0.0,
        read_sigma: 0.0,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseOrder {
    /// Noise on the linearized image, then γ.
    #[default]
    BeforeGamma,
    /// γ first, then noise on the darkened signal.
    AfterGamma,
}

/// Heteroscedastic Gaussian approximation of Poisson–Gaussian sensor noise:
/// each sample `x` gets `N(0, shot·x + read²)` added, then is clamped.
pub fn add_noise<R: Rng + ?Sized>(img: &ImageF, noise: NoiseParams, rng: &mut R) -> Result<ImageF> {
    img.expect_tags("add_noise", &[ColorSpace::LinearRgb], ValueRange::Unit)?;
    let NoiseParams {
        shot_strength,
        read_sigma,
    } = noise;
    if !(shot_strength >= 0.0 && read_sigma >= 0.0) {
        return Err(Error::InvalidParam(format!(
            "noise strengths must be non-negative, got shot={shot_strength} read={read_sigma}"
        )));
    }
    let read_var = read_sigma * read_sigma;
    let out = img
        .samples()
        .iter()
        .map(|&x| {
            let sd = (shot_strength * x + read_var).sqrt();
            if sd == 0.0 {
                return x;
            }
            let n: f64 = StandardNormal.sample(rng);
            (x + sd * n).clamp(0.0, 1.0)
        })
        .collect();
    img.with_samples(out, ColorSpace::LinearRgb, ValueRange::Unit)
}

fn scale_clamped(img: &ImageF, factor: f64, colorspace: ColorSpace) -> Result<ImageF> {
    let out = img
        .samples()
        .iter()
        .map(|&v| (v * factor).clamp(0.0, 1.0))
        .collect();
    img.with_samples(out, colorspace, ValueRange::Unit)
}

/// The low-light camera model: `f(γ · noise(g⁻¹(img)))` by default, or
/// `f(noise(γ · g⁻¹(img)))` with [`NoiseOrder::AfterGamma`].
pub fn low_light<R: Rng + ?Sized>(
    img: &ImageF,
    gamma: f64,
    inverse: &ResponseCurve,
    forward: &ResponseCurve,
    noise: NoiseParams,
    order: NoiseOrder,
    rng: &mut R,
) -> Result<ImageF> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidParam(format!("gamma {gamma} outside (0, 1]")));
    }
    let linear = crf::invert(inverse, img)?;
    let dark = match order {
        NoiseOrder::BeforeGamma => {
            let noisy = add_noise(&linear, noise, rng)?;
            scale_clamped(&noisy, gamma, ColorSpace::LinearRgb)?
        }
        NoiseOrder::AfterGamma => {
            let darker = scale_clamped(&linear, gamma, ColorSpace::LinearRgb)?;
            add_noise(&darker, noise, rng)?
        }
    };
    crf::apply(forward, &dark)
}

/// `mean(bright) / mean(dark)`.
pub fn compute_k(bright: &ImageF, dark: &ImageF) -> Result<f64> {
    bright.ensure_same_shape(dark)?;
    let dark_mean = dark.mean();
    if dark_mean <= DEGENERATE_MEAN {
        return Err(Error::Degenerate {
            mean: dark_mean,
            threshold: DEGENERATE_MEAN,
        });
    }
    Ok(bright.mean() / dark_mean)
}

/// Output of one synthesis run.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesizedPair {
    /// Target image `H`.
    pub bright: ImageF,
    /// Model input `L = clamp(k · low_H)`.
    pub dark: ImageF,
    /// `low_H` before k-scaling.
    pub low: ImageF,
    pub k: f64,
    pub params: DegradeParams,
}

/// Uniform draw from the open interval; a pinned interval returns its value.
fn uniform_open<R: Rng + ?Sized>(rng: &mut R, i: Interval) -> f64 {
    if i.is_fixed() {
        return i.lo;
    }
    loop {
        let v = i.lo + (i.hi - i.lo) * rng.random::<f64>();
        if v > i.lo && v < i.hi {
            return v;
        }
    }
}

fn log_uniform<R: Rng + ?Sized>(rng: &mut R, i: Interval) -> f64 {
    if i.is_fixed() {
        return i.lo;
    }
    let (a, b) = (i.lo.ln(), i.hi.ln());
    (a + (b - a) * rng.random::<f64>()).exp().clamp(i.lo, i.hi)
}

/// Draws every random quantity for one pair. The draw order is fixed so
/// parameter streams are stable across releases.
pub fn sample_params<R: Rng + ?Sized>(
    db: &CrfDatabase,
    config: &PipelineConfig,
    rng: &mut R,
) -> Result<DegradeParams> {
    let epsilon = uniform_open(rng, config.epsilon);
    let gamma = uniform_open(rng, config.gamma);
    let (crf_inv_id, crf_fwd_id) = if config.crf {
        let inv = db.sample_curve(rng)?.id().to_string();
        let fwd = db.sample_curve(rng)?.id().to_string();
        (inv, fwd)
    } else {
        (IDENTITY_ID.to_string(), IDENTITY_ID.to_string())
    };
    let shot_strength = log_uniform(rng, config.shot_strength);
    let read_sigma = log_uniform(rng, config.read_sigma);
    let seed = rng.random::<u64>();
    Ok(DegradeParams {
        epsilon,
        gamma,
        crf_inv_id,
        crf_fwd_id,
        shot_strength,
        read_sigma,
        seed,
    })
}

fn resolve_curve(db: &CrfDatabase, id: &str) -> Result<ResponseCurve> {
    if let Some(c) = db.get(id) {
        return Ok(c.clone());
    }
    if id == IDENTITY_ID {
        return Ok(ResponseCurve::identity());
    }
    Err(Error::UnknownCurve(id.to_string()))
}

/// Deterministically renders the pair described by `params`.
pub fn render_pair(
    img: &ImageF,
    db: &CrfDatabase,
    config: &PipelineConfig,
    params: &DegradeParams,
) -> Result<SynthesizedPair> {
    img.expect_tags("synthesize_pair", &[ColorSpace::Srgb], ValueRange::Unit)?;
    let inverse = resolve_curve(db, &params.crf_inv_id)?;
    let forward = resolve_curve(db, &params.crf_fwd_id)?;
    let order = if config.noise_after_gamma {
        NoiseOrder::AfterGamma
    } else {
        NoiseOrder::BeforeGamma
    };
    let noise = NoiseParams {
        shot_strength: params.shot_strength,
        read_sigma: params.read_sigma,
    };

    let bright = scale_clamped(img, 1.0 + params.epsilon, ColorSpace::Srgb)?;
    let mut rng = rng_from_seed(params.seed);
    let low = low_light(
        &bright,
        params.gamma,
        &inverse,
        &forward,
        noise,
        order,
        &mut rng,
    )?;
    let k = compute_k(&bright, &low)?;
    let k = if config.constant_k { k } else { 1.0 };
    let dark = scale_clamped(&low, k, ColorSpace::Srgb)?;
    Ok(SynthesizedPair {
        bright,
        dark,
        low,
        k,
        params: params.clone(),
    })
}

/// Draws parameters from `rng` and renders the pair.
pub fn synthesize_pair<R: Rng + ?Sized>(
    img: &ImageF,
    db: &CrfDatabase,
    config: &PipelineConfig,
    rng: &mut R,
) -> Result<SynthesizedPair> {
    let params = sample_params(db, config, rng)?;
    render_pair(img, db, config, &params)
}
