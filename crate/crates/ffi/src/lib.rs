//! C ABI over `fbmatch`.
//!
//! Tensors, masks and match results are opaque heap handles released with
//! their `*_free` function. Every fallible call returns an [`FbStatus`];
//! on failure the message is kept per thread and can be read with
//! [`fb_last_error_message`]. Results are written through out-pointers
//! only on success.
//!
//! Pointers returned by accessors (`fb_tensor_data`, `fb_match_output_*`)
//! borrow from their handle and are invalid once it is freed.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fbmatch::io::{load_mask, load_tensor, save_mask, save_tensor};
use fbmatch::matching::{match_object, oracle_match};
use fbmatch::metrics::{bootstrapped_ce, boundary_f, default_tolerance, jaccard};
use fbmatch::pipeline::nn_propagate;
use fbmatch::{AtrousSpec, Error, MatchInputs, MatchOutput, MatchParams, ObjectMask, Tensor3, WindowSet};

/// Status code returned by every fallible function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Dimension = 5,
    Validation = 6,
    Panic = 7,
}

/// `H x W x C` float32 tensor.
pub struct FbTensor(Tensor3);

/// `H x W` object-id mask.
pub struct FbMask(ObjectMask);

/// Global and multi-local matching maps of one object.
pub struct FbMatchOutput {
    global_fg: FbTensor,
    global_bg: FbTensor,
    windows: Vec<usize>,
    local_fg: Vec<FbTensor>,
    local_bg: Vec<FbTensor>,
    referred: u64,
}

impl From<MatchOutput> for FbMatchOutput {
    fn from(m: MatchOutput) -> Self {
        let wrap = |v: Vec<Tensor3>| v.into_iter().map(FbTensor).collect();
        Self {
            global_fg: FbTensor(m.global_fg),
            global_bg: FbTensor(m.global_bg),
            windows: m.windows,
            local_fg: wrap(m.local_fg),
            local_bg: wrap(m.local_bg),
            referred: m.referred_pixels,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

struct Failure(FbStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } => FbStatus::Io,
            Error::BadMagic { .. }
            | Error::TruncatedFile { .. }
            | Error::UnsupportedDtype { .. }
            | Error::UnsupportedRank { .. }
            | Error::Malformed { .. } => FbStatus::Format,
            Error::DimensionMismatch(_) | Error::InputTooLarge { .. } | Error::WindowTooLarge { .. } => {
                FbStatus::Dimension
            }
            Error::MaxRetriesExceeded { .. } | Error::NonFinite { .. } | Error::VideoTooShort { .. } => {
                FbStatus::Validation
            }
            _ => FbStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(FbStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> FbStatus {
    let (status, msg) = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => (FbStatus::Ok, String::new()),
        Ok(Err(Failure(s, m))) => (s, m),
        Err(_) => (FbStatus::Panic, "internal panic".to_string()),
    };
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
    status
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn c_path<'a>(p: *const c_char) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure(FbStatus::InvalidArgument, "path is not UTF-8".into()))
}

unsafe fn put<T>(out: *mut T, v: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(v);
    Ok(())
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

unsafe fn windows(p: *const usize, n: usize) -> Result<WindowSet, Failure> {
    Ok(WindowSet::new(slice(p, n, "windows")?.to_vec())?)
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len - 1` bytes) and returns the full message
/// length excluding the terminator. Pass `len = 0` to query the length.
///
/// # Safety
/// `buf` must be valid for `len` bytes or null when `len` is 0.
#[no_mangle]
pub unsafe extern "C" fn fb_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a tensor from `h * w * c` row-major, channel-last floats.
///
/// # Safety
/// `data` must point to `h * w * c` floats; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fb_tensor_new(
    height: usize,
    width: usize,
    channels: usize,
    data: *const f32,
    out: *mut *mut FbTensor,
) -> FbStatus {
    guard(|| {
        let n = height
            .checked_mul(width)
            .and_then(|v| v.checked_mul(channels))
            .ok_or_else(|| Failure(FbStatus::InvalidArgument, "tensor size overflows".into()))?;
        let t = Tensor3::new(height, width, channels, slice(data, n, "data")?.to_vec())?;
        put(out, boxed(FbTensor(t)))
    })
}

/// Reads an FBT file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fb_tensor_load(path: *const c_char, out: *mut *mut FbTensor) -> FbStatus {
    guard(|| {
        let t = load_tensor(c_path(path)?)?;
        put(out, boxed(FbTensor(t)))
    })
}

/// Writes an FBT file.
///
/// # Safety
/// `t` must be a live tensor handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn fb_tensor_save(t: *const FbTensor, path: *const c_char) -> FbStatus {
    guard(|| Ok(save_tensor(&deref(t, "tensor")?.0, c_path(path)?)?))
}

/// # Safety
/// `t` must be a live tensor handle; the out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn fb_tensor_dims(
    t: *const FbTensor,
    height: *mut usize,
    width: *mut usize,
    channels: *mut usize,
) -> FbStatus {
    guard(|| {
        let (h, w, c) = deref(t, "tensor")?.0.dims();
        put(height, h)?;
        put(width, w)?;
        put(channels, c)
    })
}

/// Borrowed pointer to the tensor's `h * w * c` floats; null for a null handle.
///
/// # Safety
/// `t` must be a live tensor handle or null.
#[no_mangle]
pub unsafe extern "C" fn fb_tensor_data(t: *const FbTensor) -> *const f32 {
    t.as_ref().map_or(ptr::null(), |t| t.0.data().as_ptr())
}

/// # Safety
/// `t` must come from this library and not be freed twice; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn fb_tensor_free(t: *mut FbTensor) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Creates a mask from `h * w` row-major labels (0 = background).
///
/// # Safety
/// `labels` must point to `h * w` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fb_mask_new(
    height: usize,
    width: usize,
    labels: *const u16,
    out: *mut *mut FbMask,
) -> FbStatus {
    guard(|| {
        let n = height
            .checked_mul(width)
            .ok_or_else(|| Failure(FbStatus::InvalidArgument, "mask size overflows".into()))?;
        let m = ObjectMask::new(height, width, slice(labels, n, "labels")?.to_vec())?;
        put(out, boxed(FbMask(m)))
    })
}

/// Reads a binary PGM mask.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fb_mask_load(path: *const c_char, out: *mut *mut FbMask) -> FbStatus {
    guard(|| {
        let m = load_mask(c_path(path)?)?;
        put(out, boxed(FbMask(m)))
    })
}

/// # Safety
/// `m` must be a live mask handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn fb_mask_save(m: *const FbMask, path: *const c_char) -> FbStatus {
    guard(|| Ok(save_mask(&deref(m, "mask")?.0, c_path(path)?)?))
}

/// # Safety
/// `m` must be a live mask handle; the out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn fb_mask_dims(m: *const FbMask, height: *mut usize, width: *mut usize) -> FbStatus {
    guard(|| {
        let (h, w) = deref(m, "mask")?.0.dims();
        put(height, h)?;
        put(width, w)
    })
}

/// Borrowed pointer to the mask's `h * w` labels; null for a null handle.
///
/// # Safety
/// `m` must be a live mask handle or null.
#[no_mangle]
pub unsafe extern "C" fn fb_mask_labels(m: *const FbMask) -> *const u16 {
    m.as_ref().map_or(ptr::null(), |m| m.0.labels().as_ptr())
}

/// # Safety
/// `m` must come from this library and not be freed twice; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn fb_mask_free(m: *mut FbMask) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Distance between two embeddings of `len` floats, in `[0, 1)`.
///
/// # Safety
/// `a` and `b` must point to `len` floats; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fb_pixel_distance(
    a: *const f32,
    b: *const f32,
    len: usize,
    bias: f32,
    out: *mut f32,
) -> FbStatus {
    guard(|| {
        let d = fbmatch::pixel_distance(slice(a, len, "a")?, slice(b, len, "b")?, bias)?;
        put(out, d)
    })
}

/// Global matching against the reference frame and multi-local matching
/// against the previous frame for one object. `windows` lists the local
/// window radii in increasing order. With `use_oracle` non-zero the
/// brute-force reference implementation is used (small frames only).
///
/// # Safety
/// All handles must be live; `windows` must point to `n_windows` values;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fb_match(
    current: *const FbTensor,
    reference: *const FbTensor,
    reference_mask: *const FbMask,
    previous: *const FbTensor,
    previous_mask: *const FbMask,
    object: u16,
    windows_: *const usize,
    n_windows: usize,
    bias_fg: f32,
    bias_bg: f32,
    atrous: usize,
    atrous_origin: usize,
    use_oracle: i32,
    out: *mut *mut FbMatchOutput,
) -> FbStatus {
    guard(|| {
        let inputs = MatchInputs {
            current: &deref(current, "current")?.0,
            reference: &deref(reference, "reference")?.0,
            reference_mask: &deref(reference_mask, "reference_mask")?.0,
            previous: &deref(previous, "previous")?.0,
            previous_mask: &deref(previous_mask, "previous_mask")?.0,
        };
        let ws = windows(windows_, n_windows)?;
        let params = MatchParams::new(bias_fg, bias_bg)?;
        let a = AtrousSpec::new(atrous, atrous_origin)?;
        let m = if use_oracle != 0 {
            oracle_match(inputs, object, &ws, params, a)?
        } else {
            match_object(inputs, object, &ws, params, a)?
        };
        put(out, boxed(FbMatchOutput::from(m)))
    })
}

/// Borrowed global foreground map (`H x W x 1`); null for a null handle.
///
/// # Safety
/// `m` must be a live match-output handle or null.
#[no_mangle]
pub unsafe extern "C" fn fb_match_output_global_fg(m: *const FbMatchOutput) -> *const FbTensor {
    m.as_ref().map_or(ptr::null(), |m| &m.global_fg)
}

/// Borrowed global background map; null for a null handle.
///
/// # Safety
/// `m` must be a live match-output handle or null.
#[no_mangle]
pub unsafe extern "C" fn fb_match_output_global_bg(m: *const FbMatchOutput) -> *const FbTensor {
    m.as_ref().map_or(ptr::null(), |m| &m.global_bg)
}

/// Number of local windows; 0 for a null handle.
///
/// # Safety
/// `m` must be a live match-output handle or null.
#[no_mangle]
pub unsafe extern "C" fn fb_match_output_window_count(m: *const FbMatchOutput) -> usize {
    m.as_ref().map_or(0, |m| m.windows.len())
}

/// Radius of window `i`, or 0 when out of range.
///
/// # Safety
/// `m` must be a live match-output handle or null.
#[no_mangle]
pub unsafe extern "C" fn fb_match_output_window(m: *const FbMatchOutput, i: usize) -> usize {
    m.as_ref().and_then(|m| m.windows.get(i).copied()).unwrap_or(0)
}

/// Borrowed local foreground map of window `i`; null when out of range.
///
/// # Safety
/// `m` must be a live match-output handle or null.
#[no_mangle]
pub unsafe extern "C" fn fb_match_output_local_fg(m: *const FbMatchOutput, i: usize) -> *const FbTensor {
    m.as_ref().and_then(|m| m.local_fg.get(i)).map_or(ptr::null(), ptr::from_ref)
}

/// Borrowed local background map of window `i`; null when out of range.
///
/// # Safety
/// `m` must be a live match-output handle or null.
#[no_mangle]
pub unsafe extern "C" fn fb_match_output_local_bg(m: *const FbMatchOutput, i: usize) -> *const FbTensor {
    m.as_ref().and_then(|m| m.local_bg.get(i)).map_or(ptr::null(), ptr::from_ref)
}

/// Number of embedding distances evaluated.
///
/// # Safety
/// `m` must be a live match-output handle or null.
#[no_mangle]
pub unsafe extern "C" fn fb_match_output_referred(m: *const FbMatchOutput) -> u64 {
    m.as_ref().map_or(0, |m| m.referred)
}

/// # Safety
/// `m` must come from this library and not be freed twice; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn fb_match_output_free(m: *mut FbMatchOutput) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Region similarity (IoU) of `object`.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fb_jaccard(
    pred: *const FbMask,
    gt: *const FbMask,
    object: u16,
    out: *mut f64,
) -> FbStatus {
    guard(|| put(out, jaccard(&deref(pred, "pred")?.0, &deref(gt, "gt")?.0, object)?))
}

/// Boundary F-measure of `object`; a negative `tol` selects the default
/// tolerance for the frame size.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fb_boundary_f(
    pred: *const FbMask,
    gt: *const FbMask,
    object: u16,
    tol: f64,
    out: *mut f64,
) -> FbStatus {
    guard(|| {
        let (p, g) = (&deref(pred, "pred")?.0, &deref(gt, "gt")?.0);
        let tol = if tol < 0.0 { default_tolerance(g.height(), g.width()) } else { tol };
        put(out, boundary_f(p, g, object, tol)?)
    })
}

/// Mean of the hardest `ratio` fraction of `n` per-pixel losses.
///
/// # Safety
/// `losses` must point to `n` floats; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fb_bootstrapped_ce(
    losses: *const f32,
    n: usize,
    ratio: f64,
    out: *mut f64,
) -> FbStatus {
    guard(|| put(out, bootstrapped_ce(slice(losses, n, "losses")?, ratio)?))
}

/// Labels `current` by nearest-neighbor matching against the reference and
/// previous frames. `objects` lists the ids to track.
///
/// # Safety
/// Handles must be live; `objects` must point to `n_objects` values and
/// `windows` to `n_windows`; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fb_nn_propagate(
    reference: *const FbTensor,
    reference_mask: *const FbMask,
    previous: *const FbTensor,
    previous_mask: *const FbMask,
    current: *const FbTensor,
    objects: *const u16,
    n_objects: usize,
    bias_fg: f32,
    bias_bg: f32,
    windows_: *const usize,
    n_windows: usize,
    atrous: usize,
    out: *mut *mut FbMask,
) -> FbStatus {
    guard(|| {
        let m = nn_propagate(
            (&deref(reference, "reference")?.0, &deref(reference_mask, "reference_mask")?.0),
            (&deref(previous, "previous")?.0, &deref(previous_mask, "previous_mask")?.0),
            &deref(current, "current")?.0,
            slice(objects, n_objects, "objects")?,
            MatchParams::new(bias_fg, bias_bg)?,
            &windows(windows_, n_windows)?,
            AtrousSpec::with_factor(atrous)?,
        )?;
        put(out, boxed(FbMask(m)))
    })
}
