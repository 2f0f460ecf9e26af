//! sRGB, linear RGB and CIELAB conversions, plus the `[-1, 1]` model-input
//! normalization.
//!
//! CIELAB uses the D65 white point (2° observer). The white point is taken as
//! the row sums of the sRGB→XYZ matrix so that the gray axis maps exactly to
//! a = b = 0. Out-of-gamut LAB values are clamped per channel in linear RGB
//! on the way back.

use std::sync::LazyLock;

use crate::error::{Error, Result};
use crate::image::{ColorSpace, ImageF, ValueRange};

/// Chroma divisor used when mapping LAB a/b onto `[-1, 1]`.
pub const LAB_CHROMA_SCALE: f64 = 110.0;
/// Half of the L* extent; `L / 50 - 1` maps `[0, 100]` onto `[-1, 1]`.
pub const LAB_LIGHTNESS_HALF: f64 = 50.0;

const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
];

static XYZ_TO_RGB: LazyLock<[[f64; 3]; 3]> = LazyLock::new(|| invert3(&RGB_TO_XYZ));

static WHITE: LazyLock<[f64; 3]> = LazyLock::new(|| {
    let r = &RGB_TO_XYZ;
    [
        r[0][0] + r[0][1] + r[0][2],
        r[1][0] + r[1][1] + r[1][2],
        r[2][0] + r[2][1] + r[2][2],
    ]
});

const LAB_DELTA: f64 = 6.0 / 29.0;

fn invert3(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let inv = 1.0 / det;
    [
        [
            (m[1][1] * m[2][2] - m[1][2] * m[2][1]) * inv,
            (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * inv,
            (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * inv,
        ],
        [
            (m[1][2] * m[2][0] - m[1][0] * m[2][2]) * inv,
            (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * inv,
            (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * inv,
        ],
        [
            (m[1][0] * m[2][1] - m[1][1] * m[2][0]) * inv,
            (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * inv,
            (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * inv,
        ],
    ]
}

#[inline]
fn mul3(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

/// sRGB electro-optical transfer for one sample.
#[inline]
pub fn srgb_eotf(v: f64) -> f64 {
    if v <= 0.04045 {
        v / 12.92
    } else {
        ((v + 0.055) / 1.055).powf(2.4)
    }
}

/// Inverse of [`srgb_eotf`].
#[inline]
pub fn srgb_oetf(v: f64) -> f64 {
    if v <= 0.0031308 {
        v * 12.92
    } else {
        1.055 * v.powf(1.0 / 2.4) - 0.055
    }
}

#[inline]
fn lab_f(t: f64) -> f64 {
    if t > LAB_DELTA * LAB_DELTA * LAB_DELTA {
        t.cbrt()
    } else {
        t / (3.0 * LAB_DELTA * LAB_DELTA) + 4.0 / 29.0
    }
}

#[inline]
fn lab_f_inv(t: f64) -> f64 {
    if t > LAB_DELTA {
        t * t * t
    } else {
        3.0 * LAB_DELTA * LAB_DELTA * (t - 4.0 / 29.0)
    }
}

/// One sRGB `[0, 1]` triple to L*a*b*.
pub fn srgb_pixel_to_lab(rgb: [f64; 3]) -> [f64; 3] {
    let lin = [srgb_eotf(rgb[0]), srgb_eotf(rgb[1]), srgb_eotf(rgb[2])];
    let xyz = mul3(&RGB_TO_XYZ, lin);
    let w = &*WHITE;
    let fx = lab_f(xyz[0] / w[0]);
    let fy = lab_f(xyz[1] / w[1]);
    let fz = lab_f(xyz[2] / w[2]);
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// One L*a*b* triple to sRGB, clamped into `[0, 1]`.
pub fn lab_pixel_to_srgb(lab: [f64; 3]) -> [f64; 3] {
    let fy = (lab[0] + 16.0) / 116.0;
    let fx = fy + lab[1] / 500.0;
    let fz = fy - lab[2] / 200.0;
    let w = &*WHITE;
    let xyz = [
        w[0] * lab_f_inv(fx),
        w[1] * lab_f_inv(fy),
        w[2] * lab_f_inv(fz),
    ];
    let lin = mul3(&XYZ_TO_RGB, xyz);
    lin.map(|c| srgb_oetf(c.clamp(0.0, 1.0)).clamp(0.0, 1.0))
}

pub fn srgb_to_linear(img: &ImageF) -> Result<ImageF> {
    img.expect_tags("srgb_to_linear", &[ColorSpace::Srgb], ValueRange::Unit)?;
    img.clone()
        .map_samples(ColorSpace::LinearRgb, ValueRange::Unit, srgb_eotf)
}

pub fn linear_to_srgb(img: &ImageF) -> Result<ImageF> {
    img.expect_tags("linear_to_srgb", &[ColorSpace::LinearRgb], ValueRange::Unit)?;
    img.clone()
        .map_samples(ColorSpace::Srgb, ValueRange::Unit, |v| {
            srgb_oetf(v.clamp(0.0, 1.0))
        })
}

pub fn rgb_to_lab(img: &ImageF) -> Result<ImageF> {
    img.expect_tags("rgb_to_lab", &[ColorSpace::Srgb], ValueRange::Unit)?;
    if img.channels() != 3 {
        return Err(Error::contract("rgb_to_lab needs a three-channel image"));
    }
    let mut out = Vec::with_capacity(img.len());
    for px in img.samples().chunks_exact(3) {
        out.extend_from_slice(&srgb_pixel_to_lab([px[0], px[1], px[2]]));
    }
    img.with_samples(out, ColorSpace::Lab, ValueRange::LabNative)
}

pub fn lab_to_rgb(img: &ImageF) -> Result<ImageF> {
    img.expect_tags("lab_to_rgb", &[ColorSpace::Lab], ValueRange::LabNative)?;
    let mut out = Vec::with_capacity(img.len());
    for px in img.samples().chunks_exact(3) {
        out.extend_from_slice(&lab_pixel_to_srgb([px[0], px[1], px[2]]));
    }
    img.with_samples(out, ColorSpace::Srgb, ValueRange::Unit)
}

/// Affine map onto `[-1, 1]`.
///
/// UNIT images use `2x - 1`. LAB images use `L / 50 - 1` for lightness and
/// `a / 110`, `b / 110` for chroma, which covers the sRGB gamut.
pub fn normalize_pm1(img: &ImageF) -> Result<ImageF> {
    match (img.colorspace(), img.range()) {
        (ColorSpace::Lab, ValueRange::LabNative) => {
            let out = img
                .samples()
                .chunks_exact(3)
                .flat_map(|px| {
                    [
                        px[0] / LAB_LIGHTNESS_HALF - 1.0,
                        px[1] / LAB_CHROMA_SCALE,
                        px[2] / LAB_CHROMA_SCALE,
                    ]
                })
                .collect();
            img.with_samples(out, ColorSpace::Lab, ValueRange::Pm1)
        }
        (cs, ValueRange::Unit) if cs != ColorSpace::Lab => {
            img.clone()
                .map_samples(cs, ValueRange::Pm1, |v| v * 2.0 - 1.0)
        }
        (cs, r) => Err(Error::contract(format!(
            "normalize_pm1 expects a UNIT or native LAB image, got {cs:?}/{r:?}"
        ))),
    }
}

/// Exact inverse of [`normalize_pm1`].
pub fn denormalize_pm1(img: &ImageF) -> Result<ImageF> {
    if img.range() != ValueRange::Pm1 {
        return Err(Error::contract(format!(
            "denormalize_pm1 expects a PM1 image, got {:?}",
            img.range()
        )));
    }
    match img.colorspace() {
        ColorSpace::Lab => {
            let out = img
                .samples()
                .chunks_exact(3)
                .flat_map(|px| {
                    [
                        (px[0] + 1.0) * LAB_LIGHTNESS_HALF,
                        px[1] * LAB_CHROMA_SCALE,
                        px[2] * LAB_CHROMA_SCALE,
                    ]
                })
                .collect();
            img.with_samples(out, ColorSpace::Lab, ValueRange::LabNative)
        }
        cs => img
            .clone()
            .map_samples(cs, ValueRange::Unit, |v| (v + 1.0) * 0.5),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn constant(v: f64) -> ImageF {
        ImageF::filled(4, 4, 3, v, ColorSpace::Srgb, ValueRange::Unit).unwrap()
    }

    fn lab_of(rgb: [f64; 3]) -> [f64; 3] {
        let img = ImageF::srgb(1, 1, rgb.to_vec()).unwrap();
        let lab = rgb_to_lab(&img).unwrap();
        [lab.samples()[0], lab.samples()[1], lab.samples()[2]]
    }

    #[test]
    fn eotf_fixed_points_and_midpoint() {
        let zeros = srgb_to_linear(&constant(0.0)).unwrap();
        assert!(zeros.samples().iter().all(|&v| v == 0.0));
        let ones = srgb_to_linear(&constant(1.0)).unwrap();
        assert!(ones.samples().iter().all(|&v| (v - 1.0).abs() < 1e-12));
        let half = srgb_to_linear(&constant(0.5)).unwrap();
        let expected = ((0.5f64 + 0.055) / 1.055).powf(2.4);
        assert!((expected - 0.2140).abs() < 1e-4);
        assert!(half.samples().iter().all(|&v| (v - expected).abs() < 1e-12));
        assert_eq!(half.colorspace(), ColorSpace::LinearRgb);
    }

    #[test]
    fn eotf_grid_round_trip() {
        for i in 0..1024 {
            let x = i as f64 / 1023.0;
            assert!((srgb_oetf(srgb_eotf(x)) - x).abs() < 1e-6);
            assert!((srgb_eotf(srgb_oetf(x)) - x).abs() < 1e-6);
        }
    }

    #[test]
    fn wrong_tags_are_rejected() {
        let lin = srgb_to_linear(&constant(0.5)).unwrap();
        assert!(srgb_to_linear(&lin).is_err());
        assert!(rgb_to_lab(&lin).is_err());
        let gray = ImageF::filled(2, 2, 1, 0.5, ColorSpace::Srgb, ValueRange::Unit).unwrap();
        assert!(rgb_to_lab(&gray).is_err());
        assert!(lab_to_rgb(&constant(0.5)).is_err());
    }

    #[test]
    fn lab_anchor_points() {
        let white = lab_of([1.0, 1.0, 1.0]);
        assert!((white[0] - 100.0).abs() < 1e-3);
        assert!(white[1].abs() < 1e-3 && white[2].abs() < 1e-3);
        assert_eq!(lab_of([0.0, 0.0, 0.0]), [0.0, 0.0, 0.0]);

        // Y = EOTF(0.5) = 0.21404; L = 116 * Y^(1/3) - 16.
        let y = ((0.5f64 + 0.055) / 1.055).powf(2.4);
        let l_expected = 116.0 * y.cbrt() - 16.0;
        assert!((l_expected - 53.39).abs() < 0.01);
        let gray = lab_of([0.5, 0.5, 0.5]);
        assert!((gray[0] - l_expected).abs() < 1e-4);
        assert!(gray[1].abs() < 1e-3 && gray[2].abs() < 1e-3);
    }

    #[test]
    fn lab_back_to_rgb_anchor_points() {
        let img = ImageF::new(
            2,
            1,
            3,
            vec![100.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            ColorSpace::Lab,
            ValueRange::LabNative,
        )
        .unwrap();
        let rgb = lab_to_rgb(&img).unwrap();
        assert!(rgb.samples()[..3].iter().all(|&v| (v - 1.0).abs() < 1e-3));
        assert!(rgb.samples()[3..].iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn out_of_gamut_lab_is_clamped() {
        let img = ImageF::new(
            1,
            1,
            3,
            vec![50.0, 150.0, -150.0],
            ColorSpace::Lab,
            ValueRange::LabNative,
        )
        .unwrap();
        let rgb = lab_to_rgb(&img).unwrap();
        assert!(rgb.samples().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn random_pixels_round_trip_through_lab() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(64);
        let data: Vec<f64> = (0..64 * 3).map(|_| rng.random::<f64>()).collect();
        let img = ImageF::srgb(8, 8, data).unwrap();
        let back = lab_to_rgb(&rgb_to_lab(&img).unwrap()).unwrap();
        let max_err = img
            .samples()
            .iter()
            .zip(back.samples())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max_err <= 1e-4, "max abs error {max_err}");
    }

    #[test]
    fn normalize_endpoints() {
        let img = ImageF::srgb(1, 1, vec![0.0, 0.5, 1.0]).unwrap();
        let n = normalize_pm1(&img).unwrap();
        assert_eq!(n.samples(), &[-1.0, 0.0, 1.0]);
        assert_eq!(n.range(), ValueRange::Pm1);
        let lab = ImageF::new(
            1,
            1,
            3,
            vec![100.0, -110.0, 55.0],
            ColorSpace::Lab,
            ValueRange::LabNative,
        )
        .unwrap();
        let n = normalize_pm1(&lab).unwrap();
        assert_eq!(n.samples(), &[1.0, -1.0, 0.5]);
        assert_eq!(denormalize_pm1(&n).unwrap().samples(), lab.samples());
        assert!(normalize_pm1(&n).is_err());
    }

    #[test]
    fn normalize_round_trip_1000_samples() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1000);
        let data: Vec<f64> = (0..1000).map(|_| rng.random::<f64>()).collect();
        let img = ImageF::new(1000, 1, 1, data, ColorSpace::LinearRgb, ValueRange::Unit).unwrap();
        let back = denormalize_pm1(&normalize_pm1(&img).unwrap()).unwrap();
        assert_eq!(back.range(), ValueRange::Unit);
        for (a, b) in img.samples().iter().zip(back.samples()) {
            assert!((a - b).abs() <= 1e-7);
        }
    }

    proptest! {
        #[test]
        fn gray_axis_is_neutral_and_monotone(g in 0.0f64..=1.0, dg in 0.0f64..0.1) {
            let lab = lab_of([g, g, g]);
            prop_assert!(lab[1].abs() <= 1e-3 && lab[2].abs() <= 1e-3);
            let h = (g + dg).min(1.0);
            let lab2 = lab_of([h, h, h]);
            prop_assert!(lab2[0] >= lab[0]);
        }

        #[test]
        fn lab_pixel_round_trip(r in 0.0f64..=1.0, g in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let back = lab_pixel_to_srgb(srgb_pixel_to_lab([r, g, b]));
            prop_assert!((back[0] - r).abs() < 1e-4);
            prop_assert!((back[1] - g).abs() < 1e-4);
            prop_assert!((back[2] - b).abs() < 1e-4);
        }
    }
}
