//! Brute-force reference for the matching kernels.
//!
//! Every map entry is evaluated literally: loop over all candidate pixels,
//! apply the exp form of the distance in f64, keep the minimum. Each window
//! is scanned on its own, with no sharing between windows or maps. Only
//! meant for small frames.

use super::{check_channels, check_mask, AtrousSpec, MatchInputs, MatchOutput, WindowSet, EMPTY_MATCH};
use crate::distance::MatchParams;
use crate::error::{Error, Result};
use crate::tensor::Tensor3;

pub const ORACLE_MAX_PIXELS: usize = 4096;

fn exp_distance(a: &[f32], b: &[f32], bias: f32) -> f64 {
    let mut d2 = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        let d = *x as f64 - *y as f64;
        d2 += d * d;
    }
    1.0 - 2.0 / (1.0 + (d2 + bias as f64).exp())
}

fn to_map(h: usize, w: usize, v: Vec<f64>) -> Tensor3 {
    Tensor3::from_raw(h, w, 1, v.into_iter().map(|x| x as f32).collect())
}

pub fn oracle_match(
    inputs: MatchInputs<'_>,
    object: u16,
    windows: &WindowSet,
    params: MatchParams,
    atrous: AtrousSpec,
) -> Result<MatchOutput> {
    let MatchInputs { current: cur, reference, reference_mask, previous, previous_mask } = inputs;
    for t in [cur, reference, previous] {
        if t.pixel_count() > ORACLE_MAX_PIXELS {
            return Err(Error::InputTooLarge { pixels: t.pixel_count(), limit: ORACLE_MAX_PIXELS });
        }
    }
    check_channels(cur, reference, "reference embedding")?;
    check_channels(cur, previous, "previous embedding")?;
    check_mask(reference, reference_mask, "reference")?;
    check_mask(previous, previous_mask, "previous")?;
    if (cur.height(), cur.width()) != (previous.height(), previous.width()) {
        return Err(Error::dims("current and previous frames differ in size"));
    }

    let (h, w, _) = cur.dims();
    let l = atrous.factor() as isize;
    let origin = atrous.origin() as isize;
    let mut referred = 0u64;

    let mut gfg = vec![f64::INFINITY; h * w];
    let mut gbg = vec![f64::INFINITY; h * w];
    for py in 0..h {
        for px in 0..w {
            let e_p = cur.pixel(px, py);
            for qy in 0..reference.height() {
                for qx in 0..reference.width() {
                    let (gx, gy) = (qx as isize - origin, qy as isize - origin);
                    if gx < 0 || gy < 0 || gx % l != 0 || gy % l != 0 {
                        continue;
                    }
                    referred += 1;
                    let i = py * w + px;
                    if reference_mask.get(qx, qy) == object {
                        gfg[i] = gfg[i].min(exp_distance(e_p, reference.pixel(qx, qy), params.bias_fg));
                    } else {
                        gbg[i] = gbg[i].min(exp_distance(e_p, reference.pixel(qx, qy), params.bias_bg));
                    }
                }
            }
        }
    }
    let fallback = |v: f64| if v.is_finite() { v } else { EMPTY_MATCH as f64 };

    let mut local_fg = Vec::new();
    let mut local_bg = Vec::new();
    for &k in windows.sizes() {
        let k = k as isize;
        let mut lfg = vec![f64::INFINITY; h * w];
        let mut lbg = vec![f64::INFINITY; h * w];
        for py in 0..h {
            for px in 0..w {
                let e_p = cur.pixel(px, py);
                for qy in 0..h {
                    for qx in 0..w {
                        let dx = qx as isize - px as isize;
                        let dy = qy as isize - py as isize;
                        if dx.abs() > k || dy.abs() > k || dx % l != 0 || dy % l != 0 {
                            continue;
                        }
                        if k as usize == windows.largest() {
                            referred += 1;
                        }
                        let i = py * w + px;
                        if previous_mask.get(qx, qy) == object {
                            lfg[i] = lfg[i].min(exp_distance(e_p, previous.pixel(qx, qy), params.bias_fg));
                        } else {
                            lbg[i] = lbg[i].min(exp_distance(e_p, previous.pixel(qx, qy), params.bias_bg));
                        }
                    }
                }
            }
        }
        local_fg.push(to_map(h, w, lfg.into_iter().map(fallback).collect()));
        local_bg.push(to_map(h, w, lbg.into_iter().map(fallback).collect()));
    }

    Ok(MatchOutput {
        global_fg: to_map(h, w, gfg.into_iter().map(fallback).collect()),
        global_bg: to_map(h, w, gbg.into_iter().map(fallback).collect()),
        windows: windows.sizes().to_vec(),
        local_fg,
        local_bg,
        referred_pixels: referred,
    })
}
