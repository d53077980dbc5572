//! Dense feature maps, object masks and pixel partitions.

use crate::error::{Error, Result};

/// Dense `height x width x channels` map of 32-bit floats, stored row-major
/// with channels fastest: `index = (y * width + x) * channels + c`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3 {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Tensor3 {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        let expected = height
            .checked_mul(width)
            .and_then(|n| n.checked_mul(channels))
            .ok_or_else(|| Error::dims(format!("{height}x{width}x{channels} overflows")))?;
        if data.len() != expected {
            return Err(Error::dims(format!(
                "{height}x{width}x{channels} tensor needs {expected} values, got {}",
                data.len()
            )));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { height, width, channels, data })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self::filled(height, width, channels, 0.0)
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f32) -> Self {
        assert!(value.is_finite());
        Self { height, width, channels, data: vec![value; height * width * channels] }
    }

    /// Builds a tensor from a per-pixel closure returning one value per channel.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(y, x, c));
                }
            }
        }
        Self::new(height, width, channels, data)
    }

    /// Trusted constructor for kernels whose output is finite by construction.
    pub(crate) fn from_raw(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Self {
        debug_assert_eq!(data.len(), height * width * channels);
        Self { height, width, channels, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    /// Embedding vector of the pixel at `(x, y)`.
    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f32] {
        let start = (y * self.width + x) * self.channels;
        &self.data[start..start + self.channels]
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Multiplies every value by `alpha`.
    pub fn scaled(&self, alpha: f32) -> Result<Self> {
        Self::new(self.height, self.width, self.channels, self.data.iter().map(|v| v * alpha).collect())
    }

    /// Copies the `h x w` window whose top-left corner is `(x0, y0)`.
    pub fn crop(&self, y0: usize, x0: usize, h: usize, w: usize) -> Result<Self> {
        if y0 + h > self.height || x0 + w > self.width {
            return Err(Error::dims(format!(
                "crop {h}x{w} at ({x0},{y0}) exceeds {}x{}",
                self.height, self.width
            )));
        }
        let mut data = Vec::with_capacity(h * w * self.channels);
        for y in y0..y0 + h {
            let start = (y * self.width + x0) * self.channels;
            data.extend_from_slice(&self.data[start..start + w * self.channels]);
        }
        Ok(Self::from_raw(h, w, self.channels, data))
    }

    /// Mirrors the tensor left to right.
    pub fn hflip(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for y in 0..self.height {
            for x in (0..self.width).rev() {
                data.extend_from_slice(self.pixel(x, y));
            }
        }
        Self::from_raw(self.height, self.width, self.channels, data)
    }
}

/// Per-pixel object ids: 0 is background, any other value is an object.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObjectMask {
    height: usize,
    width: usize,
    labels: Vec<u16>,
}

impl ObjectMask {
    pub fn new(height: usize, width: usize, labels: Vec<u16>) -> Result<Self> {
        if labels.len() != height * width {
            return Err(Error::dims(format!(
                "{height}x{width} mask needs {} labels, got {}",
                height * width,
                labels.len()
            )));
        }
        Ok(Self { height, width, labels })
    }

    pub fn background(height: usize, width: usize) -> Self {
        Self { height, width, labels: vec![0; height * width] }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> u16) -> Self {
        let mut labels = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                labels.push(f(y, x));
            }
        }
        Self { height, width, labels }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u16 {
        self.labels[y * self.width + x]
    }

    /// Sorted distinct non-zero ids present in the mask.
    pub fn object_ids(&self) -> Vec<u16> {
        let mut seen = vec![false; u16::MAX as usize + 1];
        for &l in &self.labels {
            seen[l as usize] = true;
        }
        (1..=u16::MAX).filter(|&id| seen[id as usize]).collect()
    }

    pub fn count(&self, object: u16) -> usize {
        self.labels.iter().filter(|&&l| l == object).count()
    }

    /// `{0, 1}` probability map of `object`, as a one-channel tensor.
    pub fn probability_map(&self, object: u16) -> Tensor3 {
        let data = self.labels.iter().map(|&l| if l == object { 1.0 } else { 0.0 }).collect();
        Tensor3::from_raw(self.height, self.width, 1, data)
    }

    pub fn crop(&self, y0: usize, x0: usize, h: usize, w: usize) -> Result<Self> {
        if y0 + h > self.height || x0 + w > self.width {
            return Err(Error::dims(format!(
                "crop {h}x{w} at ({x0},{y0}) exceeds {}x{}",
                self.height, self.width
            )));
        }
        let mut labels = Vec::with_capacity(h * w);
        for y in y0..y0 + h {
            let start = y * self.width + x0;
            labels.extend_from_slice(&self.labels[start..start + w]);
        }
        Ok(Self { height: h, width: w, labels })
    }

    pub fn hflip(&self) -> Self {
        Self::from_fn(self.height, self.width, |y, x| self.get(self.width - 1 - x, y))
    }
}

/// Pixel coordinate `(x, y)`.
pub type Pixel = (usize, usize);

/// Foreground pixels of one object and its relative background (every other
/// pixel, other objects included), both in row-major order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PixelPartition {
    pub object_id: u16,
    pub fg_indices: Vec<Pixel>,
    pub bg_indices: Vec<Pixel>,
}

pub fn partition_pixels(mask: &ObjectMask, object_id: u16) -> PixelPartition {
    let mut fg_indices = Vec::new();
    let mut bg_indices = Vec::new();
    for y in 0..mask.height {
        for x in 0..mask.width {
            if mask.get(x, y) == object_id {
                fg_indices.push((x, y));
            } else {
                bg_indices.push((x, y));
            }
        }
    }
    PixelPartition { object_id, fg_indices, bg_indices }
}

/// Ordered `(embedding, mask)` frames sharing one size; index 0 is the
/// reference frame.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSequence {
    frames: Vec<(Tensor3, ObjectMask)>,
}

impl FrameSequence {
    pub fn new(frames: Vec<(Tensor3, ObjectMask)>) -> Result<Self> {
        if let Some((first, _)) = frames.first() {
            let (h, w) = (first.height(), first.width());
            for (i, (e, m)) in frames.iter().enumerate() {
                if (e.height(), e.width()) != (h, w) || m.dims() != (h, w) {
                    return Err(Error::dims(format!(
                        "frame {i}: embedding {}x{} / mask {}x{} differ from {h}x{w}",
                        e.height(),
                        e.width(),
                        m.height(),
                        m.width()
                    )));
                }
                if e.channels() != first.channels() {
                    return Err(Error::dims(format!(
                        "frame {i} has {} channels, frame 0 has {}",
                        e.channels(),
                        first.channels()
                    )));
                }
            }
        }
        Ok(Self { frames })
    }

    pub fn frames(&self) -> &[(Tensor3, ObjectMask)] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// `(height, width)` shared by every frame.
    pub fn dims(&self) -> Option<(usize, usize)> {
        self.frames.first().map(|(_, m)| m.dims())
    }

    pub fn into_frames(self) -> Vec<(Tensor3, ObjectMask)> {
        self.frames
    }
}
