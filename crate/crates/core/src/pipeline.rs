//! Per-object feature assembly, multi-scale matching and a decoder-free
//! nearest-neighbor label propagation.

use rayon::prelude::*;

use crate::distance::MatchParams;
use crate::error::{Error, Result};
use crate::matching::{match_object, AtrousSpec, MatchInputs, MatchOutput, WindowSet};
use crate::resample::{downsample_embedding, downsample_mask, resize_embedding};
use crate::tensor::{ObjectMask, Tensor3};

/// Matching configuration of one feature scale.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaleSpec {
    pub stride: usize,
    pub channels: usize,
    pub windows: WindowSet,
    pub atrous: AtrousSpec,
}

impl ScaleSpec {
    /// The three-scale layout: strides 4/8/16 with 32/64/128 channels,
    /// 2-atrous matching on the finest scale.
    pub fn multiscale_defaults() -> [ScaleSpec; 3] {
        let ws = |v: &[usize]| WindowSet::new(v.to_vec()).expect("static window set");
        [
            ScaleSpec {
                stride: 4,
                channels: 32,
                windows: ws(&[4, 8, 12, 16, 20, 24]),
                atrous: AtrousSpec::with_factor(2).expect("static atrous"),
            },
            ScaleSpec {
                stride: 8,
                channels: 64,
                windows: ws(&[2, 4, 6, 8, 10, 12]),
                atrous: AtrousSpec::DENSE,
            },
            ScaleSpec { stride: 16, channels: 128, windows: ws(&[4, 6, 8, 10]), atrous: AtrousSpec::DENSE },
        ]
    }

    pub fn output_channels(&self) -> usize {
        assembled_channels(self.channels, self.windows.len())
    }
}

/// `2C + 1 + 2n + 2`: current and previous embeddings, previous mask, `n`
/// local maps per class, one global map per class.
pub fn assembled_channels(channels: usize, windows: usize) -> usize {
    2 * channels + 1 + 2 * windows + 2
}

/// Concatenated per-object features. Channel order:
///
/// ```text
/// [cur embed (C) | prev embed (C) | prev mask prob (1) |
///  local_fg k1..kn (n) | local_bg k1..kn (n) | global_fg (1) | global_bg (1)]
/// ```
#[derive(Clone, Debug, PartialEq)]
pub struct AssembledFeatures {
    pub features: Tensor3,
    pub embed_channels: usize,
    pub windows: Vec<usize>,
}

impl AssembledFeatures {
    pub fn channels(&self) -> usize {
        self.features.channels()
    }

    /// Channel index of the previous-mask probability.
    pub fn mask_channel(&self) -> usize {
        2 * self.embed_channels
    }

    pub fn local_fg_channel(&self, i: usize) -> usize {
        2 * self.embed_channels + 1 + i
    }

    pub fn local_bg_channel(&self, i: usize) -> usize {
        2 * self.embed_channels + 1 + self.windows.len() + i
    }

    pub fn global_fg_channel(&self) -> usize {
        2 * self.embed_channels + 1 + 2 * self.windows.len()
    }

    pub fn global_bg_channel(&self) -> usize {
        self.global_fg_channel() + 1
    }

    /// One channel as an `H x W x 1` map.
    pub fn channel(&self, c: usize) -> Tensor3 {
        let (h, w, n) = self.features.dims();
        let data = self.features.data().iter().skip(c).step_by(n.max(1)).copied().collect();
        Tensor3::from_raw(h, w, 1, data)
    }
}

pub fn assemble_features(
    cur: &Tensor3,
    prev: &Tensor3,
    prev_mask_prob: &Tensor3,
    m: &MatchOutput,
) -> Result<AssembledFeatures> {
    let (h, w, c) = cur.dims();
    let same = |t: &Tensor3| (t.height(), t.width()) == (h, w);
    let maps = [&m.global_fg, &m.global_bg].into_iter().chain(&m.local_fg).chain(&m.local_bg);
    if !same(prev) || !same(prev_mask_prob) || !maps.clone().all(|t| same(t) && t.channels() == 1) {
        return Err(Error::dims(format!("all inputs must be {h}x{w}")));
    }
    if prev.channels() != c || prev_mask_prob.channels() != 1 {
        return Err(Error::dims(format!(
            "previous embedding must have {c} channels and the mask probability 1, got {} and {}",
            prev.channels(),
            prev_mask_prob.channels()
        )));
    }
    if m.local_fg.len() != m.windows.len() || m.local_bg.len() != m.windows.len() {
        return Err(Error::dims("local map count differs from the window count"));
    }
    if let Some(v) = prev_mask_prob.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidArgument(format!("mask probability {v} is outside [0, 1]")));
    }
    let n = m.windows.len();
    let total = assembled_channels(c, n);
    let mut data = Vec::with_capacity(h * w * total);
    for i in 0..h * w {
        data.extend_from_slice(&cur.data()[i * c..(i + 1) * c]);
        data.extend_from_slice(&prev.data()[i * c..(i + 1) * c]);
        data.push(prev_mask_prob.data()[i]);
        data.extend(m.local_fg.iter().map(|t| t.data()[i]));
        data.extend(m.local_bg.iter().map(|t| t.data()[i]));
        data.push(m.global_fg.data()[i]);
        data.push(m.global_bg.data()[i]);
    }
    Ok(AssembledFeatures {
        features: Tensor3::from_raw(h, w, total, data),
        embed_channels: c,
        windows: m.windows.clone(),
    })
}

/// Reference, previous and current frames at one scale.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaleFrames {
    pub reference: Tensor3,
    pub reference_mask: ObjectMask,
    pub previous: Tensor3,
    pub previous_mask: ObjectMask,
    pub current: Tensor3,
}

impl ScaleFrames {
    pub fn dims(&self) -> (usize, usize) {
        (self.current.height(), self.current.width())
    }

    fn inputs(&self) -> MatchInputs<'_> {
        MatchInputs {
            current: &self.current,
            reference: &self.reference,
            reference_mask: &self.reference_mask,
            previous: &self.previous,
            previous_mask: &self.previous_mask,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Run local matching on half-size embeddings (bilinear) and masks
    /// (nearest), then resize the local maps back bilinearly.
    pub half_size_local: bool,
}

fn match_at_scale(
    spec: &ScaleSpec,
    frames: &ScaleFrames,
    object: u16,
    params: MatchParams,
    opts: RunOptions,
) -> Result<MatchOutput> {
    if !opts.half_size_local {
        return match_object(frames.inputs(), object, &spec.windows, params, spec.atrous);
    }
    let global = crate::matching::global_match(
        &frames.current,
        &frames.reference,
        &frames.reference_mask,
        object,
        params,
        spec.atrous,
    )?;
    let cur = downsample_embedding(&frames.current, 2)?;
    let prev = downsample_embedding(&frames.previous, 2)?;
    let prev_mask = downsample_mask(&frames.previous_mask, 2)?;
    let mut local = crate::matching::multi_local_match(
        &cur,
        &prev,
        &prev_mask,
        object,
        &spec.windows,
        params,
        spec.atrous,
    )?;
    let (h, w) = frames.dims();
    for map in local.fg.iter_mut().chain(local.bg.iter_mut()) {
        *map = resize_embedding(map, h, w);
    }
    Ok(MatchOutput::from_parts(global, local))
}

pub fn run_scale(
    spec: &ScaleSpec,
    frames: &ScaleFrames,
    object: u16,
    params: MatchParams,
    opts: RunOptions,
) -> Result<AssembledFeatures> {
    for (name, t) in
        [("reference", &frames.reference), ("previous", &frames.previous), ("current", &frames.current)]
    {
        if t.channels() != spec.channels {
            return Err(Error::dims(format!(
                "stride-{} scale expects {} channels, {name} embedding has {}",
                spec.stride,
                spec.channels,
                t.channels()
            )));
        }
    }
    let m = match_at_scale(spec, frames, object, params, opts)?;
    let prob = frames.previous_mask.probability_map(object);
    assemble_features(&frames.current, &frames.previous, &prob, &m)
}

/// Runs every scale for every object. The result is indexed
/// `[scale][object]` in the order of `specs` and `objects`.
pub fn run_multiscale(
    specs: &[ScaleSpec],
    pyramid: &[ScaleFrames],
    objects: &[u16],
    params: &[MatchParams],
    opts: RunOptions,
) -> Result<Vec<Vec<AssembledFeatures>>> {
    if pyramid.len() != specs.len() || params.len() != specs.len() {
        return Err(Error::dims(format!(
            "{} scale specs, {} pyramid levels, {} parameter sets",
            specs.len(),
            pyramid.len(),
            params.len()
        )));
    }
    let mut strides: Vec<usize> = specs.iter().map(|s| s.stride).collect();
    strides.sort_unstable();
    if strides.windows(2).any(|w| w[0] == w[1]) || strides.contains(&0) {
        return Err(Error::InvalidArgument("scale strides must be positive and distinct".into()));
    }
    if let (Some(s0), Some(f0)) = (specs.first(), pyramid.first()) {
        let (h0, w0) = f0.dims();
        for (spec, frames) in specs.iter().zip(pyramid) {
            // level dims follow the stride ratio to the first level, rounded up
            let expect = |d: usize| (d * s0.stride).div_ceil(spec.stride);
            if frames.dims() != (expect(h0), expect(w0)) {
                return Err(Error::dims(format!(
                    "stride-{} level is {:?}, expected {:?}",
                    spec.stride,
                    frames.dims(),
                    (expect(h0), expect(w0))
                )));
            }
        }
    }
    let jobs: Vec<(usize, usize)> =
        (0..specs.len()).flat_map(|s| (0..objects.len()).map(move |o| (s, o))).collect();
    let results: Vec<Result<AssembledFeatures>> = jobs
        .par_iter()
        .map(|&(s, o)| run_scale(&specs[s], &pyramid[s], objects[o], params[s], opts))
        .collect();
    let mut out: Vec<Vec<AssembledFeatures>> = (0..specs.len()).map(|_| Vec::new()).collect();
    for ((s, _), r) in jobs.into_iter().zip(results) {
        out[s].push(r?);
    }
    Ok(out)
}

/// Nearest-neighbor label propagation without a decoder.
///
/// For each object the foreground score is the smallest of its global and
/// local foreground maps, and its background score the smallest of its
/// global and local background maps. A pixel is labeled background when the
/// background evidence is at least as strong as every object's foreground
/// evidence, where background evidence is the largest per-object background
/// score: a pixel is only plain background if it resembles the relative
/// background of every object. Ties go to background, then to the smallest
/// object id.
pub fn nn_propagate(
    reference: (&Tensor3, &ObjectMask),
    previous: (&Tensor3, &ObjectMask),
    current: &Tensor3,
    objects: &[u16],
    params: MatchParams,
    windows: &WindowSet,
    atrous: AtrousSpec,
) -> Result<ObjectMask> {
    let (h, w) = (current.height(), current.width());
    let mut ids: Vec<u16> = objects.iter().copied().filter(|&o| o != 0).collect();
    ids.sort_unstable();
    ids.dedup();
    let inputs = MatchInputs {
        current,
        reference: reference.0,
        reference_mask: reference.1,
        previous: previous.0,
        previous_mask: previous.1,
    };
    let outputs: Vec<MatchOutput> =
        ids.par_iter().map(|&o| match_object(inputs, o, windows, params, atrous)).collect::<Result<_>>()?;

    let min_of = |global: &Tensor3, locals: &[Tensor3], i: usize| {
        locals.iter().fold(global.data()[i], |acc, t| acc.min(t.data()[i]))
    };
    let mut labels = vec![0u16; h * w];
    for (i, label) in labels.iter_mut().enumerate() {
        let mut bg_score = f32::NEG_INFINITY;
        for m in &outputs {
            bg_score = bg_score.max(min_of(&m.global_bg, &m.local_bg, i));
        }
        let mut best = bg_score;
        for (&o, m) in ids.iter().zip(&outputs) {
            let fg = min_of(&m.global_fg, &m.local_fg, i);
            if fg < best {
                best = fg;
                *label = o;
            }
        }
    }
    ObjectMask::new(h, w, labels)
}
