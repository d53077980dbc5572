//! Instance-level guidance: pooled foreground/background embeddings of the
//! first and previous frames, and the channel gate they drive.

use std::path::Path;

use crate::error::{Error, Result};
use crate::io::load_tensor;
use crate::tensor::{ObjectMask, Tensor3};

/// `4 * C` values laid out as `[first-FG, first-BG, prev-FG, prev-BG]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GuidanceVector(Vec<f32>);

impl GuidanceVector {
    pub fn new(values: Vec<f32>) -> Result<Self> {
        if !values.len().is_multiple_of(4) || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("guidance vector needs 4*C finite values".into()));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Embedding width `C`.
    pub fn channels(&self) -> usize {
        self.0.len() / 4
    }

    /// Segment `i` in `[first-FG, first-BG, prev-FG, prev-BG]` order.
    pub fn segment(&self, i: usize) -> &[f32] {
        let c = self.channels();
        &self.0[i * c..(i + 1) * c]
    }
}

/// Channel-wise means of the object's pixels and of the remaining pixels.
/// An empty group pools to zeros.
fn pool_groups(e: &Tensor3, m: &ObjectMask, object: u16) -> (Vec<f32>, Vec<f32>) {
    let c = e.channels();
    let mut fg = vec![0.0f64; c];
    let mut bg = vec![0.0f64; c];
    let (mut nf, mut nb) = (0usize, 0usize);
    for y in 0..e.height() {
        for x in 0..e.width() {
            let (acc, n) = if m.get(x, y) == object { (&mut fg, &mut nf) } else { (&mut bg, &mut nb) };
            for (a, v) in acc.iter_mut().zip(e.pixel(x, y)) {
                *a += *v as f64;
            }
            *n += 1;
        }
    }
    let finish = |acc: Vec<f64>, n: usize| -> Vec<f32> {
        if n == 0 {
            vec![0.0; acc.len()]
        } else {
            acc.into_iter().map(|s| (s / n as f64) as f32).collect()
        }
    };
    (finish(fg, nf), finish(bg, nb))
}

pub fn instance_pool(
    first: (&Tensor3, &ObjectMask),
    prev: (&Tensor3, &ObjectMask),
    object: u16,
) -> Result<GuidanceVector> {
    for (name, (e, m)) in [("first", first), ("previous", prev)] {
        if (e.height(), e.width()) != m.dims() {
            return Err(Error::dims(format!("{name} frame embedding and mask differ in size")));
        }
    }
    if first.0.channels() != prev.0.channels() {
        return Err(Error::dims(format!(
            "first frame has {} channels, previous frame has {}",
            first.0.channels(),
            prev.0.channels()
        )));
    }
    let (ff, fb) = pool_groups(first.0, first.1, object);
    let (pf, pb) = pool_groups(prev.0, prev.1, object);
    Ok(GuidanceVector([ff, fb, pf, pb].concat()))
}

/// Single fully connected layer from the guidance vector to `M` gate logits.
#[derive(Clone, Debug, PartialEq)]
pub struct GateParams {
    rows: usize,
    cols: usize,
    weight: Vec<f32>,
    bias: Vec<f32>,
}

impl GateParams {
    /// `weight` is row-major `rows x cols`; `bias` has `rows` entries.
    pub fn new(rows: usize, cols: usize, weight: Vec<f32>, bias: Vec<f32>) -> Result<Self> {
        if weight.len() != rows * cols || bias.len() != rows {
            return Err(Error::dims(format!(
                "gate {rows}x{cols} needs {} weights and {rows} biases, got {} and {}",
                rows * cols,
                weight.len(),
                bias.len()
            )));
        }
        if weight.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("gate parameters must be finite".into()));
        }
        Ok(Self { rows, cols, weight, bias })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, weight: vec![0.0; rows * cols], bias: vec![0.0; rows] }
    }

    /// Weight from an `M x 4C x 1` tensor, bias from an `M x 1 x 1` tensor.
    pub fn from_tensors(weight: &Tensor3, bias: &Tensor3) -> Result<Self> {
        if weight.channels() != 1 || bias.dims() != (weight.height(), 1, 1) {
            return Err(Error::dims(format!(
                "gate weight must be Mx(4C)x1 and bias Mx1x1, got {:?} and {:?}",
                weight.dims(),
                bias.dims()
            )));
        }
        Self::new(weight.height(), weight.width(), weight.data().to_vec(), bias.data().to_vec())
    }

    pub fn load(weight: impl AsRef<Path>, bias: impl AsRef<Path>) -> Result<Self> {
        Self::from_tensors(&load_tensor(weight)?, &load_tensor(bias)?)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Per-channel scales `sigmoid(W g + b)`.
    pub fn scales(&self, g: &GuidanceVector) -> Result<Vec<f32>> {
        if g.len() != self.cols {
            return Err(Error::dims(format!(
                "gate expects a guidance vector of {} values, got {}",
                self.cols,
                g.len()
            )));
        }
        Ok(self
            .weight
            .chunks_exact(self.cols.max(1))
            .take(self.rows)
            .zip(&self.bias)
            .map(|(row, b)| {
                let z: f64 =
                    row.iter().zip(g.values()).map(|(w, v)| *w as f64 * *v as f64).sum::<f64>() + *b as f64;
                sigmoid(z) as f32
            })
            .collect())
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Scales each channel of `feature` by its gate value.
pub fn gate_forward(g: &GuidanceVector, params: &GateParams, feature: &Tensor3) -> Result<Tensor3> {
    if feature.channels() != params.rows {
        return Err(Error::dims(format!(
            "feature has {} channels, gate produces {}",
            feature.channels(),
            params.rows
        )));
    }
    let scales = params.scales(g)?;
    let (h, w, c) = feature.dims();
    let mut data = feature.data().to_vec();
    if c > 0 {
        for px in data.chunks_exact_mut(c) {
            for (v, s) in px.iter_mut().zip(&scales) {
                *v *= s;
            }
        }
    }
    Ok(Tensor3::from_raw(h, w, c, data))
}
