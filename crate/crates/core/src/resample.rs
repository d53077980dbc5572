//! Resampling of embeddings (bilinear) and masks (nearest neighbor).
//!
//! Both use the half-pixel-centered grid: output pixel `o` samples the source
//! coordinate `(o + 0.5) * scale - 0.5`, clamped to the source extent.

use crate::error::{Error, Result};
use crate::tensor::{ObjectMask, Tensor3};

#[inline]
fn source_coord(o: usize, scale: f64, len: usize) -> f64 {
    ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, len.saturating_sub(1) as f64)
}

/// Bilinear taps along one axis: `(i0, i1, frac)`.
fn linear_taps(out_len: usize, in_len: usize, scale: f64) -> Vec<(usize, usize, f64)> {
    (0..out_len)
        .map(|o| {
            let s = source_coord(o, scale, in_len);
            let i0 = s.floor() as usize;
            let i1 = (i0 + 1).min(in_len - 1);
            (i0, i1, s - i0 as f64)
        })
        .collect()
}

/// Nearest source index; a sample exactly halfway resolves to the lower index.
fn nearest_taps(out_len: usize, in_len: usize, scale: f64) -> Vec<usize> {
    (0..out_len)
        .map(|o| {
            let s = source_coord(o, scale, in_len);
            ((s - 0.5).ceil().max(0.0) as usize).min(in_len - 1)
        })
        .collect()
}

fn bilinear(t: &Tensor3, out_h: usize, out_w: usize, scale_y: f64, scale_x: f64) -> Tensor3 {
    let (h, w, c) = t.dims();
    if out_h == 0 || out_w == 0 || h == 0 || w == 0 {
        return Tensor3::zeros(out_h, out_w, c);
    }
    let ys = linear_taps(out_h, h, scale_y);
    let xs = linear_taps(out_w, w, scale_x);
    let mut data = Vec::with_capacity(out_h * out_w * c);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            let (p00, p01) = (t.pixel(x0, y0), t.pixel(x1, y0));
            let (p10, p11) = (t.pixel(x0, y1), t.pixel(x1, y1));
            for ch in 0..c {
                // lerp form keeps constant regions exactly constant
                let top = p00[ch] as f64 + fx * (p01[ch] as f64 - p00[ch] as f64);
                let bot = p10[ch] as f64 + fx * (p11[ch] as f64 - p10[ch] as f64);
                data.push((top + fy * (bot - top)) as f32);
            }
        }
    }
    Tensor3::from_raw(out_h, out_w, c, data)
}

fn nearest(m: &ObjectMask, out_h: usize, out_w: usize, scale_y: f64, scale_x: f64) -> ObjectMask {
    let (h, w) = m.dims();
    if out_h == 0 || out_w == 0 || h == 0 || w == 0 {
        return ObjectMask::background(out_h, out_w);
    }
    let ys = nearest_taps(out_h, h, scale_y);
    let xs = nearest_taps(out_w, w, scale_x);
    ObjectMask::from_fn(out_h, out_w, |oy, ox| m.get(xs[ox], ys[oy]))
}

/// Bilinear downsampling by an integer factor; output dims are `ceil(in / factor)`.
pub fn downsample_embedding(e: &Tensor3, factor: usize) -> Result<Tensor3> {
    if factor == 0 {
        return Err(Error::ZeroFactor);
    }
    if factor == 1 {
        return Ok(e.clone());
    }
    let out_h = e.height().div_ceil(factor);
    let out_w = e.width().div_ceil(factor);
    Ok(bilinear(e, out_h, out_w, factor as f64, factor as f64))
}

/// Nearest-neighbor downsampling on the same grid as [`downsample_embedding`].
pub fn downsample_mask(m: &ObjectMask, factor: usize) -> Result<ObjectMask> {
    if factor == 0 {
        return Err(Error::ZeroFactor);
    }
    if factor == 1 {
        return Ok(m.clone());
    }
    let out_h = m.height().div_ceil(factor);
    let out_w = m.width().div_ceil(factor);
    Ok(nearest(m, out_h, out_w, factor as f64, factor as f64))
}

/// Bilinear resize to arbitrary dims; the scale per axis is `in / out`.
pub fn resize_embedding(e: &Tensor3, out_h: usize, out_w: usize) -> Tensor3 {
    if (out_h, out_w) == (e.height(), e.width()) {
        return e.clone();
    }
    let sy = e.height() as f64 / out_h.max(1) as f64;
    let sx = e.width() as f64 / out_w.max(1) as f64;
    bilinear(e, out_h, out_w, sy, sx)
}

pub fn resize_mask(m: &ObjectMask, out_h: usize, out_w: usize) -> ObjectMask {
    if (out_h, out_w) == m.dims() {
        return m.clone();
    }
    let sy = m.height() as f64 / out_h.max(1) as f64;
    let sx = m.width() as f64 / out_w.max(1) as f64;
    nearest(m, out_h, out_w, sy, sx)
}
