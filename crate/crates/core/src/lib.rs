//! Foreground-background embedding matching for video object segmentation.
//!
//! The crate provides the pixel-level matching kernels (global, multi-local
//! and their atrous variants) together with a brute-force oracle, the
//! instance-level pooling and gate, multi-scale feature assembly, training
//! samplers, segmentation metrics and the file formats used by the
//! `fbmatch` command-line tool.

pub mod cli;
pub mod distance;
pub mod error;
pub mod instance;
pub mod io;
pub mod matching;
pub mod metrics;
pub mod pipeline;
pub mod resample;
pub mod sampling;
pub mod tensor;

pub use distance::{pixel_distance, MatchParams};
pub use error::{Error, Result};
pub use matching::{AtrousSpec, MatchInputs, MatchOutput, WindowSet};
pub use tensor::{partition_pixels, FrameSequence, ObjectMask, PixelPartition, Tensor3};
