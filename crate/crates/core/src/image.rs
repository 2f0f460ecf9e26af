//! Floating-point image container shared by every stage of the pipeline.
//!
//! Samples are stored as `f64`, interleaved and row-major: the sample for
//! channel `c` of pixel `(x, y)` lives at `(y * width + x) * channels + c`.
//! Every module uses this layout; there is no planar variant.
//!
//! An [`ImageF`] is immutable once constructed. Transformations either borrow
//! it and allocate a new image, or consume it (`map_samples`) and reuse the
//! buffer, so exclusive ownership during mutation is visible in the types.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed when checking that samples respect a bounded range tag.
pub const RANGE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColorSpace {
    /// Display-encoded sRGB (or any display-referred "brightness" values).
    Srgb,
    LinearRgb,
    Lab,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueRange {
    /// `[0, 1]`
    Unit,
    /// `[-1, 1]`
    Pm1,
    /// L in `[0, 100]`, a and b unbounded.
    LabNative,
}

impl ValueRange {
    fn bounds(self) -> Option<(f64, f64)> {
        match self {
            ValueRange::Unit => Some((0.0, 1.0)),
            ValueRange::Pm1 => Some((-1.0, 1.0)),
            ValueRange::LabNative => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageF {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
    colorspace: ColorSpace,
    range: ValueRange,
}

impl ImageF {
    /// Builds an image after checking every invariant: non-zero size, one or
    /// three channels, finite samples inside the declared range.
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        data: Vec<f64>,
        colorspace: ColorSpace,
        range: ValueRange,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::contract(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::contract(format!(
                "channel count must be 1 or 3, got {channels}"
            )));
        }
        if colorspace == ColorSpace::Lab && channels != 3 {
            return Err(Error::contract("LAB images need three channels"));
        }
        let expected = width * height * channels;
        if data.len() != expected {
            return Err(Error::contract(format!(
                "expected {expected} samples for {width}x{height}x{channels}, got {}",
                data.len()
            )));
        }
        let img = ImageF {
            width,
            height,
            channels,
            data,
            colorspace,
            range,
        };
        img.check_samples()?;
        Ok(img)
    }

    /// Constant-valued image.
    pub fn filled(
        width: usize,
        height: usize,
        channels: usize,
        value: f64,
        colorspace: ColorSpace,
        range: ValueRange,
    ) -> Result<Self> {
        Self::new(
            width,
            height,
            channels,
            vec![value; width * height * channels],
            colorspace,
            range,
        )
    }

    /// Convenience constructor for the common sRGB `[0, 1]` case.
    pub fn srgb(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(width, height, 3, data, ColorSpace::Srgb, ValueRange::Unit)
    }

    fn check_samples(&self) -> Result<()> {
        if let Some(i) = self.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::contract(format!("sample {i} is not finite")));
        }
        if let Some((lo, hi)) = self.range.bounds() {
            let lo = lo - RANGE_TOLERANCE;
            let hi = hi + RANGE_TOLERANCE;
            if let Some(i) = self.data.iter().position(|&v| v < lo || v > hi) {
                return Err(Error::contract(format!(
                    "sample {i} = {} outside {:?} range",
                    self.data[i], self.range
                )));
            }
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn colorspace(&self) -> ColorSpace {
        self.colorspace
    }

    pub fn range(&self) -> ValueRange {
        self.range
    }

    pub fn samples(&self) -> &[f64] {
        &self.data
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let start = (y * self.width + x) * self.channels;
        &self.data[start..start + self.channels]
    }

    pub fn same_shape(&self, other: &ImageF) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub fn shape_string(&self) -> String {
        format!("{}x{}x{}", self.width, self.height, self.channels)
    }

    pub(crate) fn ensure_same_shape(&self, other: &ImageF) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                left: self.shape_string(),
                right: other.shape_string(),
            })
        }
    }

    pub(crate) fn expect_tags(
        &self,
        op: &str,
        colorspaces: &[ColorSpace],
        range: ValueRange,
    ) -> Result<()> {
        if !colorspaces.contains(&self.colorspace) || self.range != range {
            return Err(Error::contract(format!(
                "{op} expects {colorspaces:?}/{range:?}, got {:?}/{:?}",
                self.colorspace, self.range
            )));
        }
        Ok(())
    }

    /// Mean over all samples.
    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Consumes the image, rewrites every sample and retags it. The result is
    /// re-validated against the new tags.
    pub fn map_samples(
        self,
        colorspace: ColorSpace,
        range: ValueRange,
        f: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        let mut data = self.data;
        for v in data.iter_mut() {
            *v = f(*v);
        }
        Self::new(
            self.width,
            self.height,
            self.channels,
            data,
            colorspace,
            range,
        )
    }

    /// Same shape, new samples and tags.
    pub fn with_samples(
        &self,
        data: Vec<f64>,
        colorspace: ColorSpace,
        range: ValueRange,
    ) -> Result<Self> {
        Self::new(
            self.width,
            self.height,
            self.channels,
            data,
            colorspace,
            range,
        )
    }

    /// Same samples with different tags, re-validated.
    pub fn retag(self, colorspace: ColorSpace, range: ValueRange) -> Result<Self> {
        Self::new(
            self.width,
            self.height,
            self.channels,
            self.data,
            colorspace,
            range,
        )
    }

    /// Quantizes a UNIT image to 8-bit values, rounding to nearest.
    pub fn to_u8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| quantize_u8(v)).collect()
    }

    /// Inverse of [`ImageF::to_u8`] for three-channel sRGB buffers.
    pub fn from_rgb8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        Self::srgb(
            width,
            height,
            bytes.iter().map(|&b| b as f64 / 255.0).collect(),
        )
    }
}

pub fn quantize_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(ImageF::filled(0, 4, 3, 0.0, ColorSpace::Srgb, ValueRange::Unit).is_err());
        assert!(ImageF::filled(4, 4, 2, 0.0, ColorSpace::Srgb, ValueRange::Unit).is_err());
        assert!(ImageF::new(2, 2, 3, vec![0.0; 11], ColorSpace::Srgb, ValueRange::Unit).is_err());
        assert!(ImageF::filled(2, 2, 1, 50.0, ColorSpace::Lab, ValueRange::LabNative).is_err());
    }

    #[test]
    fn rejects_non_finite_and_out_of_range() {
        let mut data = vec![0.5; 12];
        data[3] = f64::NAN;
        assert!(ImageF::srgb(2, 2, data).is_err());
        let mut data = vec![0.5; 12];
        data[7] = 1.01;
        assert!(ImageF::srgb(2, 2, data).is_err());
        // within tolerance
        let mut data = vec![0.5; 12];
        data[7] = 1.0 + 5e-7;
        assert!(ImageF::srgb(2, 2, data).is_ok());
        assert!(ImageF::filled(2, 2, 3, 250.0, ColorSpace::Lab, ValueRange::LabNative).is_ok());
    }

    #[test]
    fn interleaved_layout() {
        let data: Vec<f64> = (0..12).map(|i| i as f64 / 12.0).collect();
        let img = ImageF::srgb(2, 2, data).unwrap();
        assert_eq!(img.pixel(1, 0), &[3.0 / 12.0, 4.0 / 12.0, 5.0 / 12.0]);
        assert_eq!(img.pixel(0, 1)[0], 6.0 / 12.0);
    }

    #[test]
    fn u8_round_trip() {
        let bytes: Vec<u8> = (0..=255u8).chain(0..=255u8).chain(0..=255u8).collect();
        let img = ImageF::from_rgb8(16, 16, &bytes).unwrap();
        assert_eq!(img.to_u8(), bytes);
    }
}
