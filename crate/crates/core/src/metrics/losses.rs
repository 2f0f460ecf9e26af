//! Pixel, feature and adversarial losses as pure functions over arrays.

use crate::error::{Error, Result};
use crate::image::ImageF;

/// Weight of the L1 term in the combined generator objective.
pub const DEFAULT_LAMBDA: f64 = 100.0;

/// Discriminator outputs are clamped into `[SCORE_EPS, 1 - SCORE_EPS]`.
pub const SCORE_EPS: f64 = 1e-7;

fn sum_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Mean absolute difference over all samples.
pub fn l1_loss(pred: &ImageF, gt: &ImageF) -> Result<f64> {
    pred.ensure_same_shape(gt)?;
    Ok(sum_abs_diff(pred.samples(), gt.samples()) / pred.len() as f64)
}

/// Mean squared difference over all samples.
pub fn l2_loss(pred: &ImageF, gt: &ImageF) -> Result<f64> {
    pred.ensure_same_shape(gt)?;
    let sum: f64 = pred
        .samples()
        .iter()
        .zip(gt.samples())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(sum / pred.len() as f64)
}

/// A `c × h × w` feature map, stored in the same interleaved order as
/// [`ImageF`].
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVolume {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl FeatureVolume {
    pub fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A bank of named, deterministic feature transforms.
pub trait FeatureExtractor: Send + Sync {
    fn layers(&self) -> Vec<String>;

    fn extract(&self, layer: &str, img: &ImageF) -> Result<FeatureVolume>;
}

/// Single layer `identity` returning the image samples unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityExtractor;

impl FeatureExtractor for IdentityExtractor {
    fn layers(&self) -> Vec<String> {
        vec!["identity".into()]
    }

    fn extract(&self, layer: &str, img: &ImageF) -> Result<FeatureVolume> {
        if layer != "identity" {
            return Err(Error::UnknownLayer(layer.to_string()));
        }
        Ok(FeatureVolume {
            channels: img.channels(),
            height: img.height(),
            width: img.width(),
            data: img.samples().to_vec(),
        })
    }
}

/// Stride-1 "valid" box averaging with a square kernel, one layer per
/// kernel size (`avgpool3`, ...).
#[derive(Debug, Clone)]
pub struct AvgPoolExtractor {
    sizes: Vec<usize>,
}

impl AvgPoolExtractor {
    pub fn new(sizes: Vec<usize>) -> Self {
        AvgPoolExtractor { sizes }
    }

    fn pool(size: usize, img: &ImageF) -> Result<FeatureVolume> {
        let (w, h, c) = (img.width(), img.height(), img.channels());
        if w < size || h < size {
            return Err(Error::contract(format!(
                "avgpool{size} needs at least {size}x{size} pixels"
            )));
        }
        let (ow, oh) = (w - size + 1, h - size + 1);
        let norm = 1.0 / (size * size) as f64;
        let mut data = Vec::with_capacity(ow * oh * c);
        for y in 0..oh {
            for x in 0..ow {
                for ch in 0..c {
                    let mut acc = 0.0;
                    for dy in 0..size {
                        for dx in 0..size {
                            acc += img.pixel(x + dx, y + dy)[ch];
                        }
                    }
                    data.push(acc * norm);
                }
            }
        }
        Ok(FeatureVolume {
            channels: c,
            height: oh,
            width: ow,
            data,
        })
    }
}

impl Default for AvgPoolExtractor {
    fn default() -> Self {
        AvgPoolExtractor::new(vec![3])
    }
}

impl FeatureExtractor for AvgPoolExtractor {
    fn layers(&self) -> Vec<String> {
        self.sizes.iter().map(|s| format!("avgpool{s}")).collect()
    }

    fn extract(&self, layer: &str, img: &ImageF) -> Result<FeatureVolume> {
        let size = layer
            .strip_prefix("avgpool")
            .and_then(|s| s.parse::<usize>().ok())
            .filter(|s| self.sizes.contains(s))
            .ok_or_else(|| Error::UnknownLayer(layer.to_string()))?;
        Self::pool(size, img)
    }
}

/// Feature-space L1 distance normalized by the feature volume size.
pub fn perceptual_loss(
    extractor: &dyn FeatureExtractor,
    layer: &str,
    pred: &ImageF,
    gt: &ImageF,
) -> Result<f64> {
    pred.ensure_same_shape(gt)?;
    let fp = extractor.extract(layer, pred)?;
    let fg = extractor.extract(layer, gt)?;
    if (fp.channels, fp.height, fp.width) != (fg.channels, fg.height, fg.width) {
        return Err(Error::ShapeMismatch {
            left: format!("{}x{}x{}", fp.width, fp.height, fp.channels),
            right: format!("{}x{}x{}", fg.width, fg.height, fg.channels),
        });
    }
    Ok(sum_abs_diff(&fp.data, &fg.data) / fp.len() as f64)
}

/// Discriminator probabilities for real targets and generated outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorScores {
    real: Vec<f64>,
    fake: Vec<f64>,
}

impl DiscriminatorScores {
    /// Clamps every score into `[SCORE_EPS, 1 - SCORE_EPS]`.
    pub fn new(real: Vec<f64>, fake: Vec<f64>) -> Result<Self> {
        if real.is_empty() || fake.is_empty() {
            return Err(Error::Empty(
                "discriminator score arrays must be non-empty".into(),
            ));
        }
        if real.iter().chain(&fake).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParam(
                "discriminator scores must be finite".into(),
            ));
        }
        let clamp = |v: Vec<f64>| -> Vec<f64> {
            v.into_iter()
                .map(|s| s.clamp(SCORE_EPS, 1.0 - SCORE_EPS))
                .collect()
        };
        Ok(DiscriminatorScores {
            real: clamp(real),
            fake: clamp(fake),
        })
    }

    pub fn real(&self) -> &[f64] {
        &self.real
    }

    pub fn fake(&self) -> &[f64] {
        &self.fake
    }
}

fn mean_of(v: impl Iterator<Item = f64>, n: usize) -> f64 {
    v.sum::<f64>() / n as f64
}

/// Returns `(d_loss, g_loss)`.
///
/// `d_loss = -mean(ln D(y)) - mean(ln(1 - D(G(x))))` is the negated
/// adversarial objective the discriminator maximizes. The generator uses the
/// non-saturating form `g_loss = -mean(ln D(G(x)))`.
pub fn cgan_losses(scores: &DiscriminatorScores) -> (f64, f64) {
    let (real, fake) = (&scores.real, &scores.fake);
    let d_loss = -mean_of(real.iter().map(|s| s.ln()), real.len())
        - mean_of(fake.iter().map(|s| (1.0 - s).ln()), fake.len());
    let g_loss = -mean_of(fake.iter().map(|s| s.ln()), fake.len());
    (d_loss, g_loss)
}

/// `g_loss + lambda · l1`. `lambda` must be non-negative.
pub fn combined_objective(g_loss: f64, l1: f64, lambda: f64) -> f64 {
    debug_assert!(lambda >= 0.0, "lambda must be non-negative");
    g_loss + lambda * l1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::{ColorSpace, ValueRange};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::LN_2;

    fn random(w: usize, h: usize, seed: u64) -> ImageF {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ImageF::srgb(w, h, (0..w * h * 3).map(|_| rng.random::<f64>()).collect()).unwrap()
    }

    fn constant(v: f64) -> ImageF {
        ImageF::filled(5, 5, 3, v, ColorSpace::Srgb, ValueRange::Unit).unwrap()
    }

    #[test]
    fn pixel_losses() {
        let a = random(6, 6, 1);
        assert_eq!(l1_loss(&a, &a).unwrap(), 0.0);
        assert_eq!(l2_loss(&a, &a).unwrap(), 0.0);
        let l1 = l1_loss(&constant(0.7), &constant(0.5)).unwrap();
        let l2 = l2_loss(&constant(0.7), &constant(0.5)).unwrap();
        assert!((l1 - 0.2).abs() < 1e-12 && (l2 - 0.04).abs() < 1e-12);
        assert!(l1_loss(&a, &random(5, 6, 1)).is_err());

        let b = random(6, 6, 2);
        let (mut s1, mut s2) = (0.0, 0.0);
        for y in 0..6 {
            for x in 0..6 {
                for c in 0..3 {
                    let d = a.pixel(x, y)[c] - b.pixel(x, y)[c];
                    s1 += d.abs();
                    s2 += d * d;
                }
            }
        }
        assert!((l1_loss(&a, &b).unwrap() - s1 / 108.0).abs() < 1e-12);
        assert!((l2_loss(&a, &b).unwrap() - s2 / 108.0).abs() < 1e-12);
    }

    #[test]
    fn perceptual_identity_equals_l1() {
        let a = random(9, 7, 3);
        let b = random(9, 7, 4);
        let p = perceptual_loss(&IdentityExtractor, "identity", &a, &b).unwrap();
        assert_eq!(p, l1_loss(&a, &b).unwrap());
        assert_eq!(
            perceptual_loss(&AvgPoolExtractor::default(), "avgpool3", &a, &a).unwrap(),
            0.0
        );
        assert!(matches!(
            perceptual_loss(&IdentityExtractor, "conv1", &a, &b),
            Err(Error::UnknownLayer(_))
        ));
        assert!(matches!(
            perceptual_loss(&AvgPoolExtractor::default(), "avgpool5", &a, &b),
            Err(Error::UnknownLayer(_))
        ));
    }

    #[test]
    fn perceptual_avgpool_matches_direct_oracle() {
        let a = random(10, 8, 5);
        let b = random(10, 8, 6);
        // pool each image independently, then normalized L1 over the pooled volume
        let pooled = |img: &ImageF| {
            let mut out = vec![];
            for y in 0..6 {
                for x in 0..8 {
                    for c in 0..3 {
                        let mut s = 0.0;
                        for j in 0..3 {
                            for i in 0..3 {
                                s += img.samples()[((y + j) * 10 + (x + i)) * 3 + c];
                            }
                        }
                        out.push(s / 9.0);
                    }
                }
            }
            out
        };
        let (pa, pb) = (pooled(&a), pooled(&b));
        let expected: f64 =
            pa.iter().zip(&pb).map(|(x, y)| (x - y).abs()).sum::<f64>() / (3.0 * 6.0 * 8.0);
        let got = perceptual_loss(&AvgPoolExtractor::default(), "avgpool3", &a, &b).unwrap();
        assert!((got - expected).abs() < 1e-10);
    }

    #[test]
    fn adversarial_losses() {
        let s = DiscriminatorScores::new(vec![0.5; 16], vec![0.5; 16]).unwrap();
        let (d, g) = cgan_losses(&s);
        assert!((d - 2.0 * LN_2).abs() < 1e-12);
        assert!((g - LN_2).abs() < 1e-12);

        let perfect = DiscriminatorScores::new(vec![1.0; 4], vec![0.0; 4]).unwrap();
        assert_eq!(perfect.real()[0], 1.0 - SCORE_EPS);
        assert_eq!(perfect.fake()[0], SCORE_EPS);
        let (d, _) = cgan_losses(&perfect);
        assert!(d < 1e-6);

        assert!(DiscriminatorScores::new(vec![], vec![0.5]).is_err());
        assert!(DiscriminatorScores::new(vec![f64::NAN], vec![0.5]).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let real: Vec<f64> = (0..32).map(|_| rng.random_range(0.01..0.99)).collect();
        let fake: Vec<f64> = (0..20).map(|_| rng.random_range(0.01..0.99)).collect();
        let s = DiscriminatorScores::new(real.clone(), fake.clone()).unwrap();
        let (d, g) = cgan_losses(&s);
        let mut d_oracle = 0.0;
        for r in &real {
            d_oracle -= r.ln() / 32.0;
        }
        for f in &fake {
            d_oracle -= (1.0 - f).ln() / 20.0;
        }
        let g_oracle = fake.iter().map(|f| -f.ln()).sum::<f64>() / 20.0;
        assert!((d - d_oracle).abs() < 1e-12);
        assert!((g - g_oracle).abs() < 1e-12);
    }

    #[test]
    fn combined_objective_values() {
        assert_eq!(combined_objective(0.7, 0.3, 0.0), 0.7);
        assert!((combined_objective(0.5, 0.01, DEFAULT_LAMBDA) - 1.5).abs() < 1e-12);
        assert_eq!(DEFAULT_LAMBDA, 100.0);
        // linear in each argument
        let f = |g, l| combined_objective(g, l, DEFAULT_LAMBDA);
        assert!((f(0.2 + 0.3, 0.1) - (f(0.2, 0.1) + 0.3)).abs() < 1e-12);
        assert!((f(0.2, 0.05 + 0.02) - (f(0.2, 0.05) + 2.0)).abs() < 1e-12);
    }
}
