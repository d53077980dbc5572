use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("bad magic in {field}: expected {expected:?}, found {found:?}")]
    BadMagic { field: &'static str, expected: String, found: String },
    #[error("truncated file while reading {field}: needed {needed} bytes, {available} available")]
    TruncatedFile { field: &'static str, needed: usize, available: usize },
    #[error("unsupported dtype code {code} in header field `dtype` (only 1 = f32 is supported)")]
    UnsupportedDtype { code: u8 },
    #[error("unsupported rank {rank} in header field `rank` (only rank 3 is supported)")]
    UnsupportedRank { rank: u32 },
    #[error("malformed {field}: {reason}")]
    Malformed { field: &'static str, reason: String },
    #[error("I/O failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite value at flat index {index}")]
    NonFinite { index: usize },
    #[error("resampling factor must be at least 1")]
    ZeroFactor,
    #[error("window set is empty")]
    EmptyWindowSet,
    #[error("invalid window set {0:?}: sizes must be positive and strictly increasing")]
    InvalidWindowSet(Vec<usize>),
    #[error("invalid atrous spec: factor {factor}, origin {origin}")]
    InvalidAtrous { factor: usize, origin: usize },
    #[error("oracle input too large: {pixels} pixels exceeds the limit of {limit}")]
    InputTooLarge { pixels: usize, limit: usize },
    #[error("no crop with at least {min_fg} foreground pixels after {attempts} attempts")]
    MaxRetriesExceeded { min_fg: usize, attempts: usize },
    #[error("crop window {window_h}x{window_w} does not fit a {frame_h}x{frame_w} frame")]
    WindowTooLarge { window_h: usize, window_w: usize, frame_h: usize, frame_w: usize },
    #[error("video of {len} frames is too short for a clip of {needed} frames")]
    VideoTooShort { len: usize, needed: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("ratio {0} is outside (0, 1]")]
    BadRatio(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }

    /// Whether the error comes from reading or writing files (as opposed to
    /// validating shapes and parameters).
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            Error::BadMagic { .. }
                | Error::TruncatedFile { .. }
                | Error::UnsupportedDtype { .. }
                | Error::UnsupportedRank { .. }
                | Error::Malformed { .. }
                | Error::Io { .. }
        )
    }
}
