//! Training-time samplers: balanced random crops and sequential clips.
//!
//! Randomness comes from [`SeededRng`], PCG32 (XSH-RR, 64-bit state, 32-bit
//! output) seeded the way the PCG reference `pcg32_srandom_r(seed, stream)`
//! does, on the fixed stream [`PCG_STREAM`]. Bounded integers use the
//! reference `pcg32_boundedrand_r` rejection rule and unit floats take 53
//! bits from two consecutive outputs (first output high), so every draw can
//! be reproduced outside Rust.

use rand_core::Rng;
use rand_pcg::Pcg32;

use crate::error::{Error, Result};
use crate::resample::{resize_embedding, resize_mask};
use crate::tensor::{FrameSequence, ObjectMask};

pub const PCG_STREAM: u64 = 0x0a02_bdbf_7bb3_c0a7;

/// Default number of frames predicted per clip after the reference frame.
pub const DEFAULT_CLIP_FRAMES: usize = 3;

pub struct SeededRng(Pcg32);

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self(Pcg32::new(seed, PCG_STREAM))
    }

    pub fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    /// Uniform integer in `0..bound`.
    pub fn below(&mut self, bound: u32) -> u32 {
        assert!(bound > 0, "empty range");
        let threshold = bound.wrapping_neg() % bound;
        loop {
            let r = self.next_u32();
            if r >= threshold {
                return r % bound;
            }
        }
    }

    /// Uniform float in `[0, 1)`.
    pub fn unit_f64(&mut self) -> f64 {
        let hi = self.next_u32() as u64;
        let lo = self.next_u32() as u64;
        ((hi << 32 | lo) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

fn below_usize(rng: &mut SeededRng, bound: usize) -> Result<usize> {
    let b =
        u32::try_from(bound).map_err(|_| Error::InvalidArgument(format!("range {bound} exceeds 32 bits")))?;
    Ok(rng.below(b) as usize)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CropConfig {
    /// `(height, width)` of the crop window.
    pub window: (usize, usize),
    pub min_fg_pixels: usize,
    pub max_retries: usize,
    pub scale_range: (f64, f64),
}

impl CropConfig {
    /// Window with the default threshold of 1% of its area (rounded up).
    pub fn with_window(height: usize, width: usize) -> Self {
        Self {
            window: (height, width),
            min_fg_pixels: (height * width).div_ceil(100),
            max_retries: 50,
            scale_range: (1.0, 1.3),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.scale_range;
        if self.window.0 == 0 || self.window.1 == 0 {
            return Err(Error::InvalidArgument("crop window must be positive".into()));
        }
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
            return Err(Error::InvalidArgument(format!("bad scale range ({lo}, {hi})")));
        }
        if self.max_retries == 0 {
            return Err(Error::InvalidArgument("max_retries must be at least 1".into()));
        }
        Ok(())
    }
}

impl Default for CropConfig {
    fn default() -> Self {
        Self::with_window(465, 465)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CropOutcome {
    pub frames: FrameSequence,
    /// Top-left `(y, x)` of the window in the scaled frames.
    pub offset: (usize, usize),
    pub scale: f64,
    /// `(height, width)` of the frames after scaling, before cropping.
    pub scaled_dims: (usize, usize),
    /// Rejected draws before the accepted one.
    pub retries: usize,
}

fn scaled_len(len: usize, scale: f64) -> usize {
    (len as f64 * scale).round() as usize
}

fn foreground_in_window(m: &ObjectMask, y0: usize, x0: usize, h: usize, w: usize) -> usize {
    (y0..y0 + h).map(|y| (x0..x0 + w).filter(|&x| m.get(x, y) != 0).count()).sum()
}

/// Draws a scale and a window position until the window holds at least
/// `min_fg_pixels` foreground pixels of the first frame, then scales and
/// crops every frame with that same window. Each retry redraws both scale
/// and position; later frames are not constrained.
pub fn balanced_random_crop(frames: &FrameSequence, cfg: &CropConfig, seed: u64) -> Result<CropOutcome> {
    cfg.validate()?;
    let (h, w) = frames.dims().ok_or(Error::EmptyInput)?;
    let (wh, ww) = cfg.window;
    let (lo, hi) = cfg.scale_range;
    if scaled_len(h, lo) < wh || scaled_len(w, lo) < ww {
        return Err(Error::WindowTooLarge {
            window_h: wh,
            window_w: ww,
            frame_h: scaled_len(h, lo),
            frame_w: scaled_len(w, lo),
        });
    }
    let first_mask = &frames.frames()[0].1;
    let mut rng = SeededRng::new(seed);
    for attempt in 0..cfg.max_retries {
        let scale = lo + (hi - lo) * rng.unit_f64();
        let (sh, sw) = (scaled_len(h, scale), scaled_len(w, scale));
        let y0 = below_usize(&mut rng, sh - wh + 1)?;
        let x0 = below_usize(&mut rng, sw - ww + 1)?;
        let scaled_first = resize_mask(first_mask, sh, sw);
        if foreground_in_window(&scaled_first, y0, x0, wh, ww) < cfg.min_fg_pixels {
            continue;
        }
        let cropped = frames
            .frames()
            .iter()
            .map(|(e, m)| {
                let e = resize_embedding(e, sh, sw).crop(y0, x0, wh, ww)?;
                let m = resize_mask(m, sh, sw).crop(y0, x0, wh, ww)?;
                Ok((e, m))
            })
            .collect::<Result<Vec<_>>>()?;
        return Ok(CropOutcome {
            frames: FrameSequence::new(cropped)?,
            offset: (y0, x0),
            scale,
            scaled_dims: (sh, sw),
            retries: attempt,
        });
    }
    Err(Error::MaxRetriesExceeded { min_fg: cfg.min_fg_pixels, attempts: cfg.max_retries })
}

/// A reference frame plus `N + 1` consecutive frames: the first of them
/// serves as the initial previous frame, the remaining `N` are predicted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClipSample {
    pub ref_index: usize,
    pub sequence: Vec<usize>,
}

pub fn sample_clip_with(rng: &mut SeededRng, video_len: usize, frames: usize) -> Result<ClipSample> {
    let needed = frames + 1;
    if video_len < needed {
        return Err(Error::VideoTooShort { len: video_len, needed });
    }
    let ref_index = below_usize(rng, video_len)?;
    let start = below_usize(rng, video_len - needed + 1)?;
    Ok(ClipSample { ref_index, sequence: (start..start + needed).collect() })
}

pub fn sample_clip(video_len: usize, frames: usize, seed: u64) -> Result<ClipSample> {
    sample_clip_with(&mut SeededRng::new(seed), video_len, frames)
}
