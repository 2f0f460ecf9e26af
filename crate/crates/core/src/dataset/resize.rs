use crate::error::{Error, Result};
use crate::image::ImageF;

/// Bilinear resampling with pixel-center alignment: output pixel `i` samples
/// source coordinate `(i + 0.5) · in / out - 0.5`, clamped to the image.
pub fn resize_bilinear(img: &ImageF, width: usize, height: usize) -> Result<ImageF> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidParam(
            "resize target must be non-empty".into(),
        ));
    }
    if width == img.width() && height == img.height() {
        return Ok(img.clone());
    }
    let xs = axis_taps(img.width(), width);
    let ys = axis_taps(img.height(), height);
    let c = img.channels();
    let mut out = Vec::with_capacity(width * height * c);
    for &(y0, y1, ty) in &ys {
        for &(x0, x1, tx) in &xs {
            let p00 = img.pixel(x0, y0);
            let p10 = img.pixel(x1, y0);
            let p01 = img.pixel(x0, y1);
            let p11 = img.pixel(x1, y1);
            for ch in 0..c {
                let top = p00[ch] + (p10[ch] - p00[ch]) * tx;
                let bottom = p01[ch] + (p11[ch] - p01[ch]) * tx;
                out.push(top + (bottom - top) * ty);
            }
        }
    }
    ImageF::new(width, height, c, out, img.colorspace(), img.range())
}

fn axis_taps(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            let s = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
            let i0 = s.floor() as usize;
            let i1 = (i0 + 1).min(src - 1);
            (i0, i1, s - i0 as f64)
        })
        .collect()
}

pub fn center_crop(img: &ImageF, width: usize, height: usize) -> Result<ImageF> {
    if width > img.width() || height > img.height() || width == 0 || height == 0 {
        return Err(Error::InvalidParam(format!(
            "cannot crop {}x{} to {width}x{height}",
            img.width(),
            img.height()
        )));
    }
    let x0 = (img.width() - width) / 2;
    let y0 = (img.height() - height) / 2;
    let c = img.channels();
    let mut out = Vec::with_capacity(width * height * c);
    for y in y0..y0 + height {
        let start = (y * img.width() + x0) * c;
        out.extend_from_slice(&img.samples()[start..start + width * c]);
    }
    ImageF::new(width, height, c, out, img.colorspace(), img.range())
}

/// Scales the shorter side to `size` (bilinear) and center-crops to
/// `size × size`.
pub fn prepare(img: &ImageF, size: usize) -> Result<ImageF> {
    if size == 0 {
        return Err(Error::InvalidParam("size must be positive".into()));
    }
    let (w, h) = (img.width(), img.height());
    let (rw, rh) = if w <= h {
        (
            size,
            ((h as f64 * size as f64 / w as f64).round() as usize).max(size),
        )
    } else {
        (
            ((w as f64 * size as f64 / h as f64).round() as usize).max(size),
            size,
        )
    };
    let resized = resize_bilinear(img, rw, rh)?;
    center_crop(&resized, size, size)
}
