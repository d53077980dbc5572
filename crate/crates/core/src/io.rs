//! File formats: the FBT tensor container and binary PGM masks.
//!
//! FBT layout (little-endian):
//!
//! ```text
//! offset  size  field
//! 0       4     magic "FBT1"
//! 4       1     dtype code (1 = f32)
//! 5       4     rank (u32, always 3)
//! 9       12    dims H, W, C (u32 each)
//! 21      4*N   payload, N = H*W*C, row-major, channel fastest
//! ```
//!
//! Masks are binary PGM (`P5`). Samples are one byte when `maxval < 256`
//! and two big-endian bytes otherwise; gray values are object ids verbatim.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{ObjectMask, Tensor3};

pub const FBT_MAGIC: &[u8; 4] = b"FBT1";
pub const FBT_DTYPE_F32: u8 = 1;
pub const FBT_HEADER_LEN: usize = 21;

/// Header fields of an FBT file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FbtHeader {
    pub dtype: u8,
    pub rank: u32,
    pub height: u32,
    pub width: u32,
    pub channels: u32,
}

impl FbtHeader {
    pub fn payload_len(&self) -> usize {
        self.height as usize * self.width as usize * self.channels as usize
    }
}

fn take<'a>(bytes: &'a [u8], at: usize, n: usize, field: &'static str) -> Result<&'a [u8]> {
    bytes.get(at..at + n).ok_or(Error::TruncatedFile { field, needed: at + n, available: bytes.len() })
}

fn read_u32(bytes: &[u8], at: usize, field: &'static str) -> Result<u32> {
    let b = take(bytes, at, 4, field)?;
    Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
}

pub fn parse_fbt_header(bytes: &[u8]) -> Result<FbtHeader> {
    let magic = take(bytes, 0, 4, "magic")?;
    if magic != FBT_MAGIC {
        return Err(Error::BadMagic {
            field: "magic",
            expected: "FBT1".into(),
            found: String::from_utf8_lossy(magic).into_owned(),
        });
    }
    let dtype = take(bytes, 4, 1, "dtype")?[0];
    if dtype != FBT_DTYPE_F32 {
        return Err(Error::UnsupportedDtype { code: dtype });
    }
    let rank = read_u32(bytes, 5, "rank")?;
    if rank != 3 {
        return Err(Error::UnsupportedRank { rank });
    }
    Ok(FbtHeader {
        dtype,
        rank,
        height: read_u32(bytes, 9, "dims.height")?,
        width: read_u32(bytes, 13, "dims.width")?,
        channels: read_u32(bytes, 17, "dims.channels")?,
    })
}

pub fn decode_tensor(bytes: &[u8]) -> Result<Tensor3> {
    let header = parse_fbt_header(bytes)?;
    let n = header.payload_len();
    let payload = take(bytes, FBT_HEADER_LEN, n * 4, "payload")?;
    let data = payload.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect();
    Tensor3::new(header.height as usize, header.width as usize, header.channels as usize, data)
}

pub fn encode_tensor(t: &Tensor3) -> Vec<u8> {
    let (h, w, c) = t.dims();
    let mut out = Vec::with_capacity(FBT_HEADER_LEN + 4 * t.data().len());
    out.extend_from_slice(FBT_MAGIC);
    out.push(FBT_DTYPE_F32);
    for v in [3u32, h as u32, w as u32, c as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn load_tensor(path: impl AsRef<Path>) -> Result<Tensor3> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_tensor(&bytes)
}

pub fn read_tensor_header(path: impl AsRef<Path>) -> Result<FbtHeader> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_fbt_header(&bytes)
}

pub fn save_tensor(t: &Tensor3, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_tensor(t)).map_err(|e| Error::io(path, e))
}

struct PgmCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl PgmCursor<'_> {
    fn skip_whitespace_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, field: &'static str) -> Result<usize> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            if self.pos >= self.bytes.len() {
                return Err(Error::TruncatedFile {
                    field,
                    needed: self.pos + 1,
                    available: self.bytes.len(),
                });
            }
            return Err(Error::Malformed {
                field,
                reason: format!("expected a decimal number at byte {start}"),
            });
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or(Error::Malformed { field, reason: "number out of range".into() })
    }
}

pub fn decode_mask(bytes: &[u8]) -> Result<ObjectMask> {
    let magic = take(bytes, 0, 2, "magic")?;
    if magic != b"P5" {
        return Err(Error::BadMagic {
            field: "magic",
            expected: "P5".into(),
            found: String::from_utf8_lossy(magic).into_owned(),
        });
    }
    let mut cur = PgmCursor { bytes, pos: 2 };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Malformed { field: "maxval", reason: format!("{maxval} is outside 1..=65535") });
    }
    // exactly one whitespace byte separates the header from the raster
    take(bytes, cur.pos, 1, "header terminator")?;
    let start = cur.pos + 1;
    let n = width * height;
    let labels = if maxval < 256 {
        take(bytes, start, n, "raster")?.iter().map(|&b| b as u16).collect()
    } else {
        take(bytes, start, 2 * n, "raster")?
            .chunks_exact(2)
            .map(|b| u16::from_be_bytes([b[0], b[1]]))
            .collect()
    };
    ObjectMask::new(height, width, labels)
}

/// Encodes with maxval 255 when every id fits a byte, 65535 otherwise.
pub fn encode_mask(m: &ObjectMask) -> Vec<u8> {
    let wide = m.labels().iter().any(|&l| l > 255);
    let maxval = if wide { 65535 } else { 255 };
    let mut out = format!("P5\n{} {}\n{}\n", m.width(), m.height(), maxval).into_bytes();
    if wide {
        for l in m.labels() {
            out.extend_from_slice(&l.to_be_bytes());
        }
    } else {
        out.extend(m.labels().iter().map(|&l| l as u8));
    }
    out
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<ObjectMask> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_mask(&bytes)
}

pub fn save_mask(m: &ObjectMask, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_mask(m)).map_err(|e| Error::io(path, e))
}
