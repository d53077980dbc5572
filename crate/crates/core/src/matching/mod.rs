//! Global and multi-local foreground/background matching.
//!
//! For one object `o`, every pixel `p` of the current frame gets:
//!
//! * a global foreground map: the minimum distance from `p` to the pixels of
//!   `o` in the reference frame, and a global background map against the
//!   rest of the reference frame;
//! * for every window size `k`, a local foreground / background map: the
//!   same minima restricted to previous-frame pixels at most `k` away from
//!   `p` along both axes.
//!
//! Atrous matching thins the candidates to a stride-`l` grid. Global
//! candidates sit on `x, y ≡ origin (mod l)`; local candidates sit at offsets
//! from `p` that are multiples of `l`. Whenever a candidate set is empty the
//! map holds exactly `1.0`.

mod global;
mod local;
pub mod oracle;

pub use global::{count_atrous_candidates, global_match, global_match_dense, GlobalMaps};
pub use local::{multi_local_match, LocalMaps};
pub use oracle::{oracle_match, ORACLE_MAX_PIXELS};

use crate::distance::MatchParams;
use crate::error::{Error, Result};
use crate::tensor::{ObjectMask, Tensor3};

/// Value of a matching map where no candidate pixel exists.
pub const EMPTY_MATCH: f32 = 1.0;

/// Local window radii, strictly increasing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WindowSet(Vec<usize>);

impl WindowSet {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::EmptyWindowSet);
        }
        if sizes[0] == 0 || sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidWindowSet(sizes));
        }
        Ok(Self(sizes))
    }

    pub fn sizes(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn largest(&self) -> usize {
        *self.0.last().expect("window set is never empty")
    }
}

/// Stride-`factor` candidate thinning. `factor == 1` is dense matching.
///
/// `origin` selects which residue class of the global grid is kept; the
/// 1-indexed `{l, 2l, ...}` convention corresponds to `origin = l - 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AtrousSpec {
    factor: usize,
    origin: usize,
}

impl AtrousSpec {
    pub const DENSE: AtrousSpec = AtrousSpec { factor: 1, origin: 0 };

    pub fn new(factor: usize, origin: usize) -> Result<Self> {
        if factor == 0 || origin >= factor {
            return Err(Error::InvalidAtrous { factor, origin });
        }
        Ok(Self { factor, origin })
    }

    pub fn with_factor(factor: usize) -> Result<Self> {
        Self::new(factor, 0)
    }

    pub fn factor(&self) -> usize {
        self.factor
    }

    pub fn origin(&self) -> usize {
        self.origin
    }

    /// Whether global candidate coordinate `v` lies on the atrous grid.
    #[inline]
    pub(crate) fn on_grid(&self, v: usize) -> bool {
        v >= self.origin && (v - self.origin).is_multiple_of(self.factor)
    }
}

impl Default for AtrousSpec {
    fn default() -> Self {
        Self::DENSE
    }
}

/// All matching maps of one object plus the number of distance evaluations
/// spent on them. Every map is a one-channel tensor the size of the current
/// frame.
#[derive(Clone, Debug, PartialEq)]
pub struct MatchOutput {
    pub global_fg: Tensor3,
    pub global_bg: Tensor3,
    pub windows: Vec<usize>,
    pub local_fg: Vec<Tensor3>,
    pub local_bg: Vec<Tensor3>,
    pub referred_pixels: u64,
}

impl MatchOutput {
    pub fn from_parts(global: GlobalMaps, local: LocalMaps) -> Self {
        Self {
            global_fg: global.fg,
            global_bg: global.bg,
            windows: local.windows,
            local_fg: local.fg,
            local_bg: local.bg,
            referred_pixels: global.referred + local.referred,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.global_fg.height(), self.global_fg.width())
    }
}

/// Reference frame with its mask (global matching), previous frame with its
/// mask (local matching) and the current frame's embedding.
#[derive(Clone, Copy, Debug)]
pub struct MatchInputs<'a> {
    pub current: &'a Tensor3,
    pub reference: &'a Tensor3,
    pub reference_mask: &'a ObjectMask,
    pub previous: &'a Tensor3,
    pub previous_mask: &'a ObjectMask,
}

/// Global matching against the reference frame and multi-local matching
/// against the previous frame, with one atrous spec for both.
pub fn match_object(
    inputs: MatchInputs<'_>,
    object: u16,
    windows: &WindowSet,
    params: MatchParams,
    atrous: AtrousSpec,
) -> Result<MatchOutput> {
    let global =
        global_match(inputs.current, inputs.reference, inputs.reference_mask, object, params, atrous)?;
    let local = multi_local_match(
        inputs.current,
        inputs.previous,
        inputs.previous_mask,
        object,
        windows,
        params,
        atrous,
    )?;
    Ok(MatchOutput::from_parts(global, local))
}

pub(crate) fn check_mask(e: &Tensor3, m: &ObjectMask, what: &str) -> Result<()> {
    if (e.height(), e.width()) != m.dims() {
        return Err(Error::dims(format!(
            "{what} embedding is {}x{} but its mask is {}x{}",
            e.height(),
            e.width(),
            m.height(),
            m.width()
        )));
    }
    Ok(())
}

pub(crate) fn check_channels(a: &Tensor3, b: &Tensor3, what: &str) -> Result<()> {
    if a.channels() != b.channels() {
        return Err(Error::dims(format!(
            "current embedding has {} channels, {what} has {}",
            a.channels(),
            b.channels()
        )));
    }
    Ok(())
}
