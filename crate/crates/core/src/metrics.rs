//! Region similarity (Jaccard), boundary F-measure and the bootstrapped
//! cross-entropy loss.
//!
//! Boundaries are 4-connected: an object pixel belongs to the boundary when
//! one of its four neighbors is outside the object, pixels beyond the frame
//! edge counting as outside. A boundary pixel is matched when some pixel of
//! the other boundary lies within Euclidean distance `tol`.

use crate::error::{Error, Result};
use crate::tensor::{ObjectMask, Tensor3};

pub const DEFAULT_BOOTSTRAP_RATIO: f64 = 0.15;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScorePair {
    pub j: f64,
    pub f: f64,
    pub jf: f64,
}

impl ScorePair {
    pub fn new(j: f64, f: f64) -> Self {
        Self { j, f, jf: (j + f) / 2.0 }
    }
}

fn check_dims(pred: &ObjectMask, gt: &ObjectMask) -> Result<()> {
    if pred.dims() != gt.dims() {
        return Err(Error::dims(format!("prediction is {:?}, ground truth is {:?}", pred.dims(), gt.dims())));
    }
    Ok(())
}

/// Intersection over union of `object` in both masks; 1 when both are empty.
pub fn jaccard(pred: &ObjectMask, gt: &ObjectMask, object: u16) -> Result<f64> {
    check_dims(pred, gt)?;
    let (mut inter, mut union) = (0usize, 0usize);
    for (&p, &g) in pred.labels().iter().zip(gt.labels()) {
        let (p, g) = (p == object, g == object);
        inter += (p && g) as usize;
        union += (p || g) as usize;
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// Boundary pixel map of `object`, row-major.
pub fn boundary_map(m: &ObjectMask, object: u16) -> Vec<bool> {
    let (h, w) = m.dims();
    let inside = |x: isize, y: isize| {
        x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h && m.get(x as usize, y as usize) == object
    };
    let mut out = vec![false; h * w];
    for y in 0..h {
        for x in 0..w {
            if m.get(x, y) != object {
                continue;
            }
            let (xi, yi) = (x as isize, y as isize);
            out[y * w + x] =
                !(inside(xi - 1, yi) && inside(xi + 1, yi) && inside(xi, yi - 1) && inside(xi, yi + 1));
        }
    }
    out
}

/// Default tolerance: 0.8% of the image diagonal, rounded up, at least 1.
pub fn default_tolerance(height: usize, width: usize) -> f64 {
    let diag = ((height * height + width * width) as f64).sqrt();
    (0.008 * diag).ceil().max(1.0)
}

/// Number of `from` boundary pixels with a `to` boundary pixel within `tol`.
fn matched(from: &[bool], to: &[bool], h: usize, w: usize, tol: f64) -> usize {
    let r = tol.floor() as isize;
    let tol2 = tol * tol;
    let mut disk = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if ((dx * dx + dy * dy) as f64) <= tol2 {
                disk.push((dx, dy));
            }
        }
    }
    let mut count = 0;
    for y in 0..h {
        for x in 0..w {
            if !from[y * w + x] {
                continue;
            }
            let hit = disk.iter().any(|&(dx, dy)| {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                nx >= 0
                    && ny >= 0
                    && (nx as usize) < w
                    && (ny as usize) < h
                    && to[ny as usize * w + nx as usize]
            });
            count += hit as usize;
        }
    }
    count
}

/// Boundary F-measure of `object` at tolerance `tol` pixels.
pub fn boundary_f(pred: &ObjectMask, gt: &ObjectMask, object: u16, tol: f64) -> Result<f64> {
    check_dims(pred, gt)?;
    if !(tol.is_finite() && tol >= 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {tol} must be non-negative")));
    }
    let (h, w) = pred.dims();
    let pb = boundary_map(pred, object);
    let gb = boundary_map(gt, object);
    let np = pb.iter().filter(|&&b| b).count();
    let ng = gb.iter().filter(|&&b| b).count();
    if np == 0 && ng == 0 {
        return Ok(1.0);
    }
    if np == 0 || ng == 0 {
        return Ok(0.0);
    }
    let precision = matched(&pb, &gb, h, w, tol) as f64 / np as f64;
    let recall = matched(&gb, &pb, h, w, tol) as f64 / ng as f64;
    Ok(if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) })
}

pub fn score(pred: &ObjectMask, gt: &ObjectMask, object: u16, tol: f64) -> Result<ScorePair> {
    Ok(ScorePair::new(jaccard(pred, gt, object)?, boundary_f(pred, gt, object, tol)?))
}

/// `ceil(ratio * n)`, treating products within rounding noise of an integer
/// as that integer (0.15 * 20 is 3.0000000000000004 in binary).
fn hardest_count(ratio: f64, n: usize) -> usize {
    let x = ratio * n as f64;
    let nearest = x.round();
    let k = if (x - nearest).abs() <= 1e-9 * nearest.max(1.0) { nearest } else { x.ceil() };
    (k as usize).clamp(1, n)
}

/// Mean of the `ceil(ratio * n)` largest per-pixel losses.
pub fn bootstrapped_ce(losses: &[f32], ratio: f64) -> Result<f64> {
    if losses.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::BadRatio(ratio));
    }
    if let Some(v) = losses.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::InvalidArgument(format!("loss {v} must be finite and non-negative")));
    }
    let mut sorted = losses.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let k = hardest_count(ratio, losses.len());
    Ok(sorted[..k].iter().map(|&v| v as f64).sum::<f64>() / k as f64)
}

/// Bootstrapped loss over a one-channel `H x W` loss map.
pub fn bootstrapped_ce_map(losses: &Tensor3, ratio: f64) -> Result<f64> {
    if losses.channels() != 1 {
        return Err(Error::dims(format!("loss map must have 1 channel, got {}", losses.channels())));
    }
    bootstrapped_ce(losses.data(), ratio)
}

/// `-log softmax(logits)[label]` with max subtraction.
pub fn cross_entropy(logits: &[f32], label: usize) -> Result<f32> {
    if label >= logits.len() {
        return Err(Error::InvalidArgument(format!(
            "label {label} out of range for {} classes",
            logits.len()
        )));
    }
    let max = logits.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v as f64));
    let log_sum = logits.iter().map(|&v| (v as f64 - max).exp()).sum::<f64>().ln();
    Ok((log_sum - (logits[label] as f64 - max)) as f32)
}

/// Per-pixel cross-entropy of `H x W x K` logits against label ids `0..K`.
pub fn pixel_cross_entropy(logits: &Tensor3, labels: &ObjectMask) -> Result<Tensor3> {
    let (h, w, k) = logits.dims();
    if labels.dims() != (h, w) {
        return Err(Error::dims("logits and labels differ in size"));
    }
    let data = (0..h * w)
        .map(|i| cross_entropy(&logits.data()[i * k..(i + 1) * k], labels.labels()[i] as usize))
        .collect::<Result<Vec<_>>>()?;
    Tensor3::new(h, w, 1, data)
}
