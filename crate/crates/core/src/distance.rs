//! Foreground/background-biased pixel distance.
//!
//! The distance between two embeddings is `1 - 2 / (1 + exp(d2 + bias))`
//! where `d2` is their squared Euclidean distance. That expression equals
//! `tanh((d2 + bias) / 2)`, which is what gets evaluated: the exp form
//! overflows f32 once `d2 + bias` passes ~88.

use crate::error::{Error, Result};

/// Biases for one matching scale. Foreground candidates use `bias_fg`,
/// background candidates `bias_bg`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MatchParams {
    pub bias_fg: f32,
    pub bias_bg: f32,
}

impl MatchParams {
    pub fn new(bias_fg: f32, bias_bg: f32) -> Result<Self> {
        if !bias_fg.is_finite() || !bias_bg.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "biases must be finite, got fg={bias_fg} bg={bias_bg}"
            )));
        }
        Ok(Self { bias_fg, bias_bg })
    }
}

const LANES: usize = 8;

/// Squared Euclidean distance with a fixed accumulation order, so the same
/// pair of vectors always yields the same bits regardless of call site.
#[inline]
pub fn squared_distance(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f32; LANES];
    let ca = a.chunks_exact(LANES);
    let cb = b.chunks_exact(LANES);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (xa, xb) in ca.zip(cb) {
        for i in 0..LANES {
            let d = xa[i] - xb[i];
            acc[i] += d * d;
        }
    }
    for (i, (x, y)) in ra.iter().zip(rb).enumerate() {
        let d = x - y;
        acc[i] += d * d;
    }
    let s0 = (acc[0] + acc[4]) + (acc[1] + acc[5]);
    let s1 = (acc[2] + acc[6]) + (acc[3] + acc[7]);
    s0 + s1
}

/// Distance from an already computed squared norm.
#[inline]
pub fn distance_from_squared(d2: f32, bias: f32) -> f32 {
    ((d2 as f64 + bias as f64) * 0.5).tanh() as f32
}

pub fn pixel_distance(e_p: &[f32], e_q: &[f32], bias: f32) -> Result<f32> {
    if e_p.len() != e_q.len() {
        return Err(Error::dims(format!("embedding lengths {} and {} differ", e_p.len(), e_q.len())));
    }
    Ok(distance_from_squared(squared_distance(e_p, e_q), bias))
}
