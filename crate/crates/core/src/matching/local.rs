use rayon::prelude::*;

use super::{check_channels, check_mask, AtrousSpec, WindowSet, EMPTY_MATCH};
use crate::distance::{distance_from_squared, squared_distance, MatchParams};
use crate::error::{Error, Result};
use crate::tensor::{ObjectMask, Tensor3};

/// Local foreground/background maps, one pair per window size.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalMaps {
    pub windows: Vec<usize>,
    pub fg: Vec<Tensor3>,
    pub bg: Vec<Tensor3>,
    pub referred: u64,
}

/// Minimum squared distances of one query, bucketed by Chebyshev ring
/// `max(|dx|, |dy|)`. A window of radius `k` is the union of rings `0..=k`.
struct Rings {
    fg: Vec<f32>,
    bg: Vec<f32>,
}

impl Rings {
    fn new(radius: usize) -> Self {
        Self { fg: vec![f32::INFINITY; radius + 1], bg: vec![f32::INFINITY; radius + 1] }
    }

    fn reset(&mut self) {
        self.fg.fill(f32::INFINITY);
        self.bg.fill(f32::INFINITY);
    }
}

/// Signed offsets `-k..=k` that are multiples of `step`.
fn offsets(k: usize, step: usize) -> Vec<isize> {
    let reach = (k / step * step) as isize;
    (-reach..=reach).step_by(step).collect()
}

/// Multi-local matching of the current frame against the previous frame.
///
/// Distances are evaluated once inside the largest window; smaller windows
/// take running minima over the inner rings of that same distance field. With
/// atrous factor `l` only offsets that are multiples of `l` from the query
/// pixel are visited. The atrous origin only affects global matching.
pub fn multi_local_match(
    cur: &Tensor3,
    prev: &Tensor3,
    prev_mask: &ObjectMask,
    object: u16,
    windows: &WindowSet,
    params: MatchParams,
    atrous: AtrousSpec,
) -> Result<LocalMaps> {
    if windows.is_empty() {
        return Err(Error::EmptyWindowSet);
    }
    check_channels(cur, prev, "previous embedding")?;
    check_mask(prev, prev_mask, "previous")?;
    if (cur.height(), cur.width()) != (prev.height(), prev.width()) {
        return Err(Error::dims(format!(
            "current frame is {}x{}, previous frame is {}x{}",
            cur.height(),
            cur.width(),
            prev.height(),
            prev.width()
        )));
    }
    let (h, w, _) = cur.dims();
    let sizes = windows.sizes();
    let n = sizes.len();
    let radius = windows.largest();
    let steps = offsets(radius, atrous.factor());

    // per row: n fg maps then n bg maps, each `w` wide
    let rows: Vec<(Vec<f32>, u64)> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut out = vec![EMPTY_MATCH; 2 * n * w];
            let mut rings = Rings::new(radius);
            let mut referred = 0u64;
            for x in 0..w {
                rings.reset();
                let q = cur.pixel(x, y);
                for &dy in &steps {
                    let Some(py) = y.checked_add_signed(dy).filter(|&v| v < h) else {
                        continue;
                    };
                    for &dx in &steps {
                        let Some(px) = x.checked_add_signed(dx).filter(|&v| v < w) else {
                            continue;
                        };
                        let d = squared_distance(q, prev.pixel(px, py));
                        let ring = dx.unsigned_abs().max(dy.unsigned_abs());
                        let slot = if prev_mask.get(px, py) == object {
                            &mut rings.fg[ring]
                        } else {
                            &mut rings.bg[ring]
                        };
                        if d < *slot {
                            *slot = d;
                        }
                        referred += 1;
                    }
                }
                let (mut fg_min, mut bg_min) = (f32::INFINITY, f32::INFINITY);
                let mut next_ring = 0;
                for (i, &k) in sizes.iter().enumerate() {
                    while next_ring <= k {
                        fg_min = fg_min.min(rings.fg[next_ring]);
                        bg_min = bg_min.min(rings.bg[next_ring]);
                        next_ring += 1;
                    }
                    if fg_min.is_finite() {
                        out[i * w + x] = distance_from_squared(fg_min, params.bias_fg);
                    }
                    if bg_min.is_finite() {
                        out[(n + i) * w + x] = distance_from_squared(bg_min, params.bias_bg);
                    }
                }
            }
            (out, referred)
        })
        .collect();

    let mut fg: Vec<Vec<f32>> = vec![Vec::with_capacity(h * w); n];
    let mut bg: Vec<Vec<f32>> = vec![Vec::with_capacity(h * w); n];
    let mut referred = 0u64;
    for (row, count) in rows {
        referred += count;
        for i in 0..n {
            fg[i].extend_from_slice(&row[i * w..(i + 1) * w]);
            bg[i].extend_from_slice(&row[(n + i) * w..(n + i + 1) * w]);
        }
    }
    Ok(LocalMaps {
        windows: sizes.to_vec(),
        fg: fg.into_iter().map(|d| Tensor3::from_raw(h, w, 1, d)).collect(),
        bg: bg.into_iter().map(|d| Tensor3::from_raw(h, w, 1, d)).collect(),
        referred,
    })
}
