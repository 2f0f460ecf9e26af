//! Reference quality metrics, training-loss formulas and the non-reference
//! brightness constant.

mod losses;
mod report;

pub use losses::{
    cgan_losses, combined_objective, l1_loss, l2_loss, perceptual_loss, AvgPoolExtractor,
    DiscriminatorScores, FeatureExtractor, FeatureVolume, IdentityExtractor, DEFAULT_LAMBDA,
    SCORE_EPS,
};
pub use report::{
    evaluate_pairs, pairs_from_dirs, Aggregate, EvalPair, MetricReport, PairScore, PairingReport,
    SkippedPair,
};

use crate::degrade::DEGENERATE_MEAN;
use crate::error::{Error, Result};
use crate::image::{ImageF, ValueRange};

/// PSNR reported for identical images.
pub const PSNR_CAP_DB: f64 = 99.0;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

fn expect_comparable(pred: &ImageF, gt: &ImageF) -> Result<()> {
    pred.ensure_same_shape(gt)?;
    for img in [pred, gt] {
        if img.range() != ValueRange::Unit {
            return Err(Error::contract(format!(
                "quality metrics expect UNIT images, got {:?}",
                img.range()
            )));
        }
    }
    Ok(())
}

/// Neumaier-compensated sum.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub fn mse(pred: &ImageF, gt: &ImageF) -> Result<f64> {
    pred.ensure_same_shape(gt)?;
    let sum = compensated_sum(
        pred.samples()
            .iter()
            .zip(gt.samples())
            .map(|(a, b)| (a - b) * (a - b)),
    );
    Ok(sum / pred.len() as f64)
}

/// Peak signal-to-noise ratio in dB with a peak of 1.0. Identical images
/// give `f64::INFINITY`; reports cap it at [`PSNR_CAP_DB`].
pub fn psnr(pred: &ImageF, gt: &ImageF) -> Result<f64> {
    expect_comparable(pred, gt)?;
    let mse = mse(pred, gt)?;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (1.0 / mse).log10())
}

pub fn gaussian_window(size: usize, sigma: f64) -> Vec<f64> {
    let center = (size as f64 - 1.0) / 2.0;
    let w: Vec<f64> = (0..size)
        .map(|i| {
            let d = i as f64 - center;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

/// "Valid" separable filtering of one channel plane.
fn filter_valid(plane: &[f64], width: usize, height: usize, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let ow = width - n + 1;
    let oh = height - n + 1;
    let mut horiz = vec![0.0; ow * height];
    for y in 0..height {
        let row = &plane[y * width..(y + 1) * width];
        for x in 0..ow {
            horiz[y * ow + x] = k.iter().zip(&row[x..x + n]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for (i, &kv) in k.iter().enumerate() {
            let src = &horiz[(y + i) * ow..(y + i + 1) * ow];
            let dst = &mut out[y * ow..(y + 1) * ow];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += kv * s;
            }
        }
    }
    out
}

fn channel_plane(img: &ImageF, c: usize) -> Vec<f64> {
    img.samples()
        .iter()
        .skip(c)
        .step_by(img.channels())
        .copied()
        .collect()
}

/// Single-scale SSIM: 11×11 Gaussian window (σ = 1.5), K1 = 0.01, K2 = 0.03,
/// dynamic range 1. Averaged over every valid window position of every
/// channel.
pub fn ssim(pred: &ImageF, gt: &ImageF) -> Result<f64> {
    expect_comparable(pred, gt)?;
    let (w, h) = (pred.width(), pred.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::contract(format!(
            "ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {w}x{h}"
        )));
    }
    let k = gaussian_window(SSIM_WINDOW, SSIM_SIGMA);
    let c1 = (SSIM_K1 * 1.0).powi(2);
    let c2 = (SSIM_K2 * 1.0).powi(2);
    let mut total = 0.0;
    let mut count = 0usize;
    for c in 0..pred.channels() {
        let x = channel_plane(pred, c);
        let y = channel_plane(gt, c);
        let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
        let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
        let xy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a * b).collect();
        let mu_x = filter_valid(&x, w, h, &k);
        let mu_y = filter_valid(&y, w, h, &k);
        let e_xx = filter_valid(&xx, w, h, &k);
        let e_yy = filter_valid(&yy, w, h, &k);
        let e_xy = filter_valid(&xy, w, h, &k);
        for i in 0..mu_x.len() {
            let (mx, my) = (mu_x[i], mu_y[i]);
            let vx = e_xx[i] - mx * mx;
            let vy = e_yy[i] - my * my;
            let cxy = e_xy[i] - mx * my;
            let num = (2.0 * mx * my + c1) * (2.0 * cxy + c2);
            let den = (mx * mx + my * my + c1) * (vx + vy + c2);
            total += num / den;
        }
        count += mu_x.len();
    }
    Ok((total / count as f64).clamp(-1.0, 1.0))
}

/// Brightness constant for an input with no reference: the factor that
/// lifts the input's mean to the training corpus mean intensity.
pub fn estimate_k_nonref(corpus_mean_intensity: f64, input: &ImageF) -> Result<f64> {
    if !(corpus_mean_intensity > 0.0 && corpus_mean_intensity <= 1.0) {
        return Err(Error::InvalidParam(format!(
            "corpus mean intensity {corpus_mean_intensity} outside (0, 1]"
        )));
    }
    let mean = input.mean();
    if mean <= DEGENERATE_MEAN {
        return Err(Error::Degenerate {
            mean,
            threshold: DEGENERATE_MEAN,
        });
    }
    Ok(corpus_mean_intensity / mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::ColorSpace;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(w: usize, h: usize, seed: u64) -> ImageF {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ImageF::srgb(w, h, (0..w * h * 3).map(|_| rng.random::<f64>()).collect()).unwrap()
    }

    fn constant(w: usize, h: usize, v: f64) -> ImageF {
        ImageF::filled(w, h, 3, v, ColorSpace::Srgb, ValueRange::Unit).unwrap()
    }

    #[test]
    fn psnr_cases() {
        let a = random(8, 8, 1);
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
        let p = psnr(&constant(4, 4, 0.3), &constant(4, 4, 0.4)).unwrap();
        assert!((p - 20.0).abs() < 1e-9, "{p}");
        assert_eq!(
            psnr(&constant(8, 8, 0.0), &constant(8, 8, 0.1)).unwrap(),
            20.0
        );
        assert!(psnr(&a, &random(4, 4, 1)).is_err());
        let b = random(8, 8, 2);
        assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
    }

    #[test]
    fn ssim_identity_and_constants() {
        let a = random(16, 16, 3);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-9);
        let c = constant(12, 12, 0.5);
        assert!((ssim(&c, &c).unwrap() - 1.0).abs() < 1e-12);
        assert!(ssim(&random(10, 16, 1), &random(10, 16, 2)).is_err());
        let b = random(16, 16, 4);
        let (ab, ba) = (ssim(&a, &b).unwrap(), ssim(&b, &a).unwrap());
        assert!((ab - ba).abs() < 1e-12);
        assert!((-1.0..=1.0).contains(&ab));
        // anti-correlated images score below zero
        let inv = a
            .with_samples(
                a.samples().iter().map(|v| 1.0 - v).collect(),
                ColorSpace::Srgb,
                ValueRange::Unit,
            )
            .unwrap();
        assert!(ssim(&a, &inv).unwrap() < 0.0);
    }

    #[test]
    fn window_is_normalized_and_symmetric() {
        let w = gaussian_window(11, 1.5);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for i in 0..11 {
            assert_eq!(w[i], w[10 - i]);
        }
    }

    #[test]
    fn nonref_k() {
        let img = constant(4, 4, 0.4);
        assert!((estimate_k_nonref(0.4, &img).unwrap() - 1.0).abs() < 1e-12);
        let dim = constant(4, 4, 0.05);
        assert!((estimate_k_nonref(0.4, &dim).unwrap() - 8.0).abs() < 1e-12);
        assert!(matches!(
            estimate_k_nonref(0.4, &constant(4, 4, 0.0)),
            Err(Error::Degenerate { .. })
        ));
        assert!(estimate_k_nonref(0.0, &img).is_err());
        assert!(estimate_k_nonref(1.5, &img).is_err());
        let r = random(8, 8, 9);
        let k = estimate_k_nonref(0.45, &r).unwrap();
        assert!((k * r.mean() - 0.45).abs() < 1e-9);
    }
}
