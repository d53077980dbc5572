use rayon::prelude::*;

use super::{check_channels, check_mask, AtrousSpec, EMPTY_MATCH};
use crate::distance::{distance_from_squared, squared_distance, MatchParams};
use crate::error::Result;
use crate::tensor::{partition_pixels, ObjectMask, Tensor3};

/// Global foreground/background maps for one object.
#[derive(Clone, Debug, PartialEq)]
pub struct GlobalMaps {
    pub fg: Tensor3,
    pub bg: Tensor3,
    pub referred: u64,
}

/// Candidate embeddings packed contiguously, `channels` floats each.
struct Candidates {
    data: Vec<f32>,
    count: usize,
}

impl Candidates {
    fn with_capacity(n: usize, channels: usize) -> Self {
        Self { data: Vec::with_capacity(n * channels), count: 0 }
    }

    fn push(&mut self, e: &[f32]) {
        self.data.extend_from_slice(e);
        self.count += 1;
    }
}

/// Minimum squared distance from `query` to any packed candidate.
#[inline]
fn min_squared(query: &[f32], cands: &Candidates) -> Option<f32> {
    if cands.count == 0 {
        return None;
    }
    let c = query.len();
    if c == 0 {
        return Some(0.0);
    }
    let mut best = f32::INFINITY;
    for cand in cands.data.chunks_exact(c) {
        let d = squared_distance(query, cand);
        if d < best {
            best = d;
        }
    }
    Some(best)
}

/// Distance is increasing in the squared norm, so the minimum distance is the
/// distance of the minimum squared norm.
fn run_queries(cur: &Tensor3, fg: &Candidates, bg: &Candidates, params: MatchParams) -> GlobalMaps {
    let (h, w, _) = cur.dims();
    let mut fg_map = vec![0.0f32; h * w];
    let mut bg_map = vec![0.0f32; h * w];
    if w > 0 {
        fg_map.par_chunks_mut(w).zip(bg_map.par_chunks_mut(w)).enumerate().for_each(
            |(y, (fg_row, bg_row))| {
                for x in 0..w {
                    let q = cur.pixel(x, y);
                    fg_row[x] =
                        min_squared(q, fg).map_or(EMPTY_MATCH, |d| distance_from_squared(d, params.bias_fg));
                    bg_row[x] =
                        min_squared(q, bg).map_or(EMPTY_MATCH, |d| distance_from_squared(d, params.bias_bg));
                }
            },
        );
    }
    GlobalMaps {
        fg: Tensor3::from_raw(h, w, 1, fg_map),
        bg: Tensor3::from_raw(h, w, 1, bg_map),
        referred: (h * w) as u64 * (fg.count + bg.count) as u64,
    }
}

/// Global matching of every current-frame pixel against the (atrous-thinned)
/// reference frame.
pub fn global_match(
    cur: &Tensor3,
    reference: &Tensor3,
    ref_mask: &ObjectMask,
    object: u16,
    params: MatchParams,
    atrous: AtrousSpec,
) -> Result<GlobalMaps> {
    check_channels(cur, reference, "reference embedding")?;
    check_mask(reference, ref_mask, "reference")?;
    let c = reference.channels();
    let (h, w) = ref_mask.dims();
    let mut fg = Candidates::with_capacity(0, c);
    let mut bg = Candidates::with_capacity(h * w / (atrous.factor() * atrous.factor()), c);
    for y in (0..h).filter(|&y| atrous.on_grid(y)) {
        for x in (0..w).filter(|&x| atrous.on_grid(x)) {
            if ref_mask.get(x, y) == object {
                fg.push(reference.pixel(x, y));
            } else {
                bg.push(reference.pixel(x, y));
            }
        }
    }
    Ok(run_queries(cur, &fg, &bg, params))
}

/// Dense global matching built directly from the pixel partition, with no
/// grid selection at all. `global_match` with factor 1 must agree bit for bit.
pub fn global_match_dense(
    cur: &Tensor3,
    reference: &Tensor3,
    ref_mask: &ObjectMask,
    object: u16,
    params: MatchParams,
) -> Result<GlobalMaps> {
    check_channels(cur, reference, "reference embedding")?;
    check_mask(reference, ref_mask, "reference")?;
    let part = partition_pixels(ref_mask, object);
    let c = reference.channels();
    let gather = |pixels: &[(usize, usize)]| {
        let mut cands = Candidates::with_capacity(pixels.len(), c);
        for &(x, y) in pixels {
            cands.push(reference.pixel(x, y));
        }
        cands
    };
    let fg = gather(&part.fg_indices);
    let bg = gather(&part.bg_indices);
    Ok(run_queries(cur, &fg, &bg, params))
}

/// Sizes of the atrous foreground set and of the atrous-thinned relative
/// background of `object`.
pub fn count_atrous_candidates(mask: &ObjectMask, object: u16, atrous: AtrousSpec) -> (usize, usize) {
    let (h, w) = mask.dims();
    let mut fg = 0;
    let mut bg = 0;
    for y in (0..h).filter(|&y| atrous.on_grid(y)) {
        for x in (0..w).filter(|&x| atrous.on_grid(x)) {
            if mask.get(x, y) == object {
                fg += 1;
            } else {
                bg += 1;
            }
        }
    }
    (fg, bg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn all_fg(n: usize) -> ObjectMask {
        ObjectMask::from_fn(n, n, |_, _| 1)
    }

    #[test]
    fn self_match_is_zero() {
        let e = Tensor3::from_fn(5, 4, 3, |y, x, c| (y * 13 + x * 5 + c) as f32 * 0.1).unwrap();
        let m = ObjectMask::from_fn(5, 4, |y, _| (y % 2) as u16);
        let g = global_match(&e, &e, &m, 1, MatchParams::default(), AtrousSpec::DENSE).unwrap();
        // pixels whose own embedding is foreground match themselves
        for y in (1..5).step_by(2) {
            for x in 0..4 {
                assert_eq!(g.fg.get(y, x, 0), 0.0);
            }
        }
        let full = all_fg(4);
        let e = Tensor3::from_fn(4, 4, 2, |y, x, c| (y + 2 * x + c) as f32).unwrap();
        let g = global_match(&e, &e, &full, 1, MatchParams::default(), AtrousSpec::DENSE).unwrap();
        assert!(g.fg.data().iter().all(|&v| v == 0.0));
        assert!(g.bg.data().iter().all(|&v| v == EMPTY_MATCH));
    }

    #[test]
    fn absent_object_is_all_ones() {
        let e = Tensor3::filled(3, 3, 2, 0.5);
        let m = ObjectMask::background(3, 3);
        let g = global_match(&e, &e, &m, 4, MatchParams::default(), AtrousSpec::DENSE).unwrap();
        assert!(g.fg.data().iter().all(|&v| v == 1.0));
        assert!(g.bg.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_by_two_reference_single_query() {
        // candidates at squared distances 4, 1 (fg) and 9, 0.25 (bg)
        let reference = Tensor3::new(2, 2, 1, vec![2.0, 1.0, 3.0, 0.5]).unwrap();
        let mask = ObjectMask::new(2, 2, vec![1, 1, 0, 0]).unwrap();
        let cur = Tensor3::new(1, 1, 1, vec![0.0]).unwrap();
        let params = MatchParams::new(0.5, -0.25).unwrap();
        let g = global_match(&cur, &reference, &mask, 1, params, AtrousSpec::DENSE).unwrap();
        let eq1 = |d2: f64, b: f64| 1.0 - 2.0 / (1.0 + (d2 + b).exp());
        let fg = eq1(4.0, 0.5).min(eq1(1.0, 0.5));
        let bg = eq1(9.0, -0.25).min(eq1(0.25, -0.25));
        assert!((g.fg.data()[0] as f64 - fg).abs() < 1e-7);
        assert!((g.bg.data()[0] as f64 - bg).abs() < 1e-7);
        assert_eq!(g.referred, 4);
    }

    #[test]
    fn factor_one_equals_dense_bitwise() {
        let e = Tensor3::from_fn(6, 7, 3, |y, x, c| ((y * 31 + x * 17 + c * 7) % 11) as f32 * 0.3).unwrap();
        let r = Tensor3::from_fn(6, 7, 3, |y, x, c| ((y * 7 + x * 3 + c * 5) % 13) as f32 * 0.2).unwrap();
        let m = ObjectMask::from_fn(6, 7, |y, x| ((x + y) % 3) as u16);
        let p = MatchParams::new(-0.3, 0.7).unwrap();
        let a = global_match(&e, &r, &m, 2, p, AtrousSpec::DENSE).unwrap();
        let d = global_match_dense(&e, &r, &m, 2, p).unwrap();
        assert_eq!(a, d);
    }

    #[test]
    fn dimension_errors() {
        let e = Tensor3::zeros(2, 2, 3);
        let r = Tensor3::zeros(2, 2, 2);
        let m = ObjectMask::background(2, 2);
        assert!(matches!(
            global_match(&e, &r, &m, 1, MatchParams::default(), AtrousSpec::DENSE),
            Err(Error::DimensionMismatch(_))
        ));
        let m = ObjectMask::background(3, 2);
        assert!(global_match(&e, &e, &m, 1, MatchParams::default(), AtrousSpec::DENSE).is_err());
    }

    #[test]
    fn candidate_counts() {
        let m = all_fg(8);
        assert_eq!(count_atrous_candidates(&m, 1, AtrousSpec::with_factor(2).unwrap()), (16, 0));
        let m = all_fg(64);
        let (dense, _) = count_atrous_candidates(&m, 1, AtrousSpec::DENSE);
        let (thin, _) = count_atrous_candidates(&m, 1, AtrousSpec::with_factor(4).unwrap());
        assert_eq!((dense, thin), (4096, 256));
        let m = ObjectMask::from_fn(5, 5, |y, _| (y < 2) as u16);
        assert_eq!(count_atrous_candidates(&m, 1, AtrousSpec::DENSE), (10, 15));
        // origin l-1 keeps rows/cols 1, 3
        let a = AtrousSpec::new(2, 1).unwrap();
        assert_eq!(count_atrous_candidates(&m, 1, a), (2, 2));
    }
}
