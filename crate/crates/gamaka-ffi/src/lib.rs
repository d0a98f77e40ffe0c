//! C ABI over the core library: opaque handles, status codes, and a thin
//! function surface covering WAV I/O, fixture synthesis, segmentation,
//! non-uniform slow-down, the uniform baseline and the window-feasibility
//! calculator. The header is generated into `include/gamaka.h` by cbindgen.

use std::ffi::{c_char, CStr, CString};
use std::path::Path;

use gamaka_core::analysis::{rho_lower_bound, synth_gamaka, GamakaParams};
use gamaka_core::audio::{read_wav, write_wav, AudioBuffer};
use gamaka_core::segment::{segment, write_segmentation_json, PipelineConfig, Segmentation};
use gamaka_core::timescale::{
    build_plan_with_audio, effective_factor, render, uniform_scale,
};
use gamaka_core::GamakaError;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GamakaStatus {
    Ok = 0,
    /// A pointer argument was null.
    NullPointer = 1,
    /// A parameter violated its preconditions.
    InvalidArgument = 2,
    /// File could not be read or written.
    IoError = 3,
    /// WAV encoding outside the supported set, or a damaged file.
    UnsupportedFormat = 4,
    /// Analysis or rendering failed.
    AnalysisError = 5,
}

fn status_of(e: &GamakaError) -> GamakaStatus {
    match e {
        GamakaError::Io { .. } => GamakaStatus::IoError,
        GamakaError::UnsupportedWav(_, _)
        | GamakaError::TruncatedWav(_, _)
        | GamakaError::MalformedWav(_, _) => GamakaStatus::UnsupportedFormat,
        GamakaError::InvalidInput(_)
        | GamakaError::BufferTooShort { .. }
        | GamakaError::FrameOutOfRange { .. } => GamakaStatus::InvalidArgument,
        GamakaError::MismatchedPlan(_) => GamakaStatus::AnalysisError,
    }
}

/// Opaque mono audio buffer.
pub struct GamakaBuffer {
    inner: AudioBuffer,
}

/// Opaque segmentation result.
pub struct GamakaSegmentation {
    inner: Segmentation,
}

/// Segment class of one entry in a segmentation.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GamakaSegmentKind {
    CpNote = 0,
    Transient = 1,
    Silence = 2,
}

/// One segment, frame indices inclusive. `mean_semitone` is NaN for
/// transients and silences.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GamakaSegmentInfo {
    pub kind: GamakaSegmentKind,
    pub start_frame: usize,
    pub end_frame: usize,
    pub start_s: f64,
    pub end_s: f64,
    pub mean_semitone: f64,
}

unsafe fn path_from(ptr: *const c_char) -> Result<&'static Path, GamakaStatus> {
    if ptr.is_null() {
        return Err(GamakaStatus::NullPointer);
    }
    let s = unsafe { CStr::from_ptr(ptr) }
        .to_str()
        .map_err(|_| GamakaStatus::InvalidArgument)?;
    Ok(Path::new(s))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> GamakaStatus {
    if out.is_null() {
        return GamakaStatus::NullPointer;
    }
    unsafe { *out = Box::into_raw(Box::new(value)) };
    GamakaStatus::Ok
}

/// Wraps a sample array into a buffer handle. Samples must be finite and
/// within [-1, 1].
///
/// # Safety
/// `samples` must point to `len` readable f32 values; `out` must be a valid
/// destination for one pointer.
#[no_mangle]
pub unsafe extern "C" fn gamaka_buffer_from_samples(
    samples: *const f32,
    len: usize,
    sample_rate: u32,
    out: *mut *mut GamakaBuffer,
) -> GamakaStatus {
    if samples.is_null() || out.is_null() {
        return GamakaStatus::NullPointer;
    }
    let slice = unsafe { std::slice::from_raw_parts(samples, len) };
    match AudioBuffer::new(slice.to_vec(), sample_rate) {
        Ok(inner) => unsafe { put(out, GamakaBuffer { inner }) },
        Err(e) => status_of(&e),
    }
}

/// Reads a WAV file (PCM 16-bit or float 32-bit, mono or stereo).
///
/// # Safety
/// `path` must be a valid NUL-terminated string; `out` a valid destination.
#[no_mangle]
pub unsafe extern "C" fn gamaka_buffer_read_wav(
    path: *const c_char,
    out: *mut *mut GamakaBuffer,
) -> GamakaStatus {
    let path = match unsafe { path_from(path) } {
        Ok(p) => p,
        Err(s) => return s,
    };
    match read_wav(path) {
        Ok(inner) => unsafe { put(out, GamakaBuffer { inner }) },
        Err(e) => status_of(&e),
    }
}

/// Writes a buffer as 16-bit PCM mono.
///
/// # Safety
/// `buf` must be a live handle from this library; `path` a valid string.
#[no_mangle]
pub unsafe extern "C" fn gamaka_buffer_write_wav(
    buf: *const GamakaBuffer,
    path: *const c_char,
) -> GamakaStatus {
    if buf.is_null() {
        return GamakaStatus::NullPointer;
    }
    let path = match unsafe { path_from(path) } {
        Ok(p) => p,
        Err(s) => return s,
    };
    match write_wav(path, unsafe { &(*buf).inner }) {
        Ok(()) => GamakaStatus::Ok,
        Err(e) => status_of(&e),
    }
}

/// Number of samples in a buffer (0 for null).
///
/// # Safety
/// `buf` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gamaka_buffer_len(buf: *const GamakaBuffer) -> usize {
    if buf.is_null() {
        0
    } else {
        unsafe { (*buf).inner.len() }
    }
}

/// Sample rate in Hz (0 for null).
///
/// # Safety
/// `buf` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gamaka_buffer_sample_rate(buf: *const GamakaBuffer) -> u32 {
    if buf.is_null() {
        0
    } else {
        unsafe { (*buf).inner.sample_rate() }
    }
}

/// Copies up to `capacity` samples into `dst`; returns the count copied.
///
/// # Safety
/// `dst` must point to `capacity` writable f32 slots.
#[no_mangle]
pub unsafe extern "C" fn gamaka_buffer_copy_samples(
    buf: *const GamakaBuffer,
    dst: *mut f32,
    capacity: usize,
) -> usize {
    if buf.is_null() || dst.is_null() {
        return 0;
    }
    let samples = unsafe { (*buf).inner.samples() };
    let n = samples.len().min(capacity);
    unsafe { std::ptr::copy_nonoverlapping(samples.as_ptr(), dst, n) };
    n
}

/// Releases a buffer handle. Null is ignored.
///
/// # Safety
/// `buf` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gamaka_buffer_free(buf: *mut GamakaBuffer) {
    if !buf.is_null() {
        drop(unsafe { Box::from_raw(buf) });
    }
}

/// Synthesizes the built-in kampita fixture (steady 125 Hz, excursion to
/// 150 Hz and back over 200 ms).
///
/// # Safety
/// `out` must be a valid destination for one pointer.
#[no_mangle]
pub unsafe extern "C" fn gamaka_synth_kampita(
    sample_rate: u32,
    out: *mut *mut GamakaBuffer,
) -> GamakaStatus {
    match synth_gamaka(&GamakaParams::default(), sample_rate) {
        Ok(inner) => unsafe { put(out, GamakaBuffer { inner }) },
        Err(e) => status_of(&e),
    }
}

/// Segments a buffer into CP-notes, transients and silence.
/// `frame_ms <= 0` selects the default 32 ms frames.
///
/// # Safety
/// `buf` must be a live handle; `out` a valid destination.
#[no_mangle]
pub unsafe extern "C" fn gamaka_segment(
    buf: *const GamakaBuffer,
    tonic_hz: f64,
    frame_ms: f64,
    out: *mut *mut GamakaSegmentation,
) -> GamakaStatus {
    if buf.is_null() {
        return GamakaStatus::NullPointer;
    }
    let mut cfg = PipelineConfig::default();
    if frame_ms > 0.0 {
        cfg.frame_ms = frame_ms;
    }
    match segment(unsafe { &(*buf).inner }, tonic_hz, &cfg) {
        Ok(inner) => unsafe { put(out, GamakaSegmentation { inner }) },
        Err(e) => status_of(&e),
    }
}

/// Number of segments (0 for null).
///
/// # Safety
/// `seg` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gamaka_segmentation_len(seg: *const GamakaSegmentation) -> usize {
    if seg.is_null() {
        0
    } else {
        unsafe { (*seg).inner.segments.len() }
    }
}

/// Fetches one segment by index.
///
/// # Safety
/// `seg` must be a live handle; `info` a valid destination.
#[no_mangle]
pub unsafe extern "C" fn gamaka_segmentation_at(
    seg: *const GamakaSegmentation,
    index: usize,
    info: *mut GamakaSegmentInfo,
) -> GamakaStatus {
    if seg.is_null() || info.is_null() {
        return GamakaStatus::NullPointer;
    }
    let inner = unsafe { &(*seg).inner };
    let Some(s) = inner.segments.get(index) else {
        return GamakaStatus::InvalidArgument;
    };
    let frame_s = inner.frame_ms / 1000.0;
    let kind = match s.kind {
        gamaka_core::segment::SegmentKind::CpNote => GamakaSegmentKind::CpNote,
        gamaka_core::segment::SegmentKind::Transient => GamakaSegmentKind::Transient,
        gamaka_core::segment::SegmentKind::Silence => GamakaSegmentKind::Silence,
    };
    unsafe {
        *info = GamakaSegmentInfo {
            kind,
            start_frame: s.start,
            end_frame: s.end,
            start_s: s.start as f64 * frame_s,
            end_s: (s.end + 1) as f64 * frame_s,
            mean_semitone: s.mean_semitone.unwrap_or(f64::NAN),
        };
    }
    GamakaStatus::Ok
}

/// Serializes a segmentation as JSON. Free the string with
/// `gamaka_string_free`.
///
/// # Safety
/// `seg` must be a live handle; `out` a valid destination.
#[no_mangle]
pub unsafe extern "C" fn gamaka_segmentation_to_json(
    seg: *const GamakaSegmentation,
    out: *mut *mut c_char,
) -> GamakaStatus {
    if seg.is_null() || out.is_null() {
        return GamakaStatus::NullPointer;
    }
    let mut bytes = Vec::new();
    if write_segmentation_json(&mut bytes, unsafe { &(*seg).inner }).is_err() {
        return GamakaStatus::AnalysisError;
    }
    match CString::new(bytes) {
        Ok(s) => {
            unsafe { *out = s.into_raw() };
            GamakaStatus::Ok
        }
        Err(_) => GamakaStatus::AnalysisError,
    }
}

/// Releases a segmentation handle. Null is ignored.
///
/// # Safety
/// `seg` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gamaka_segmentation_free(seg: *mut GamakaSegmentation) {
    if !seg.is_null() {
        drop(unsafe { Box::from_raw(seg) });
    }
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gamaka_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Slows a buffer down by integer `factor`, leaving transients unscaled and
/// capping short CP-notes at `cp_cap_ms` (values <= 0 select 250 ms). Writes
/// the achieved factor R' to `r_effective` when non-null.
///
/// # Safety
/// `buf` must be a live handle; `out` a valid destination; `r_effective`
/// null or a valid f64 slot.
#[no_mangle]
pub unsafe extern "C" fn gamaka_slowdown(
    buf: *const GamakaBuffer,
    tonic_hz: f64,
    factor: u32,
    cp_cap_ms: f64,
    out: *mut *mut GamakaBuffer,
    r_effective: *mut f64,
) -> GamakaStatus {
    if buf.is_null() {
        return GamakaStatus::NullPointer;
    }
    let audio = unsafe { &(*buf).inner };
    let cap = if cp_cap_ms > 0.0 { cp_cap_ms } else { 250.0 };
    let cfg = PipelineConfig::default();
    let result = segment(audio, tonic_hz, &cfg)
        .and_then(|seg| {
            build_plan_with_audio(audio, &seg, factor, cap).map(|plan| (seg, plan))
        })
        .and_then(|(seg, plan)| render(audio, &seg, &plan).map(|out| (plan, out)));
    match result {
        Ok((plan, rendered)) => {
            if !r_effective.is_null() {
                unsafe { *r_effective = effective_factor(&plan) };
            }
            unsafe { put(out, GamakaBuffer { inner: rendered }) }
        }
        Err(e) => status_of(&e),
    }
}

/// Uniform pitch-preserving stretch (the comparison baseline), factor >= 1.
///
/// # Safety
/// `buf` must be a live handle; `out` a valid destination.
#[no_mangle]
pub unsafe extern "C" fn gamaka_uniform_scale(
    buf: *const GamakaBuffer,
    factor: f64,
    out: *mut *mut GamakaBuffer,
) -> GamakaStatus {
    if buf.is_null() {
        return GamakaStatus::NullPointer;
    }
    match uniform_scale(unsafe { &(*buf).inner }, factor) {
        Ok(inner) => unsafe { put(out, GamakaBuffer { inner }) },
        Err(e) => status_of(&e),
    }
}

/// Lower bound on the in-window frequency spread ratio of a linear glide
/// from `f0` to `f1` over `tt_ms / 2`, analyzed with a `w_ms` window.
///
/// # Safety
/// `rho_out` must be null or a valid f64 slot.
#[no_mangle]
pub unsafe extern "C" fn gamaka_rho_lower_bound(
    f0: f64,
    f1: f64,
    w_ms: f64,
    tt_ms: f64,
    rho_out: *mut f64,
) -> GamakaStatus {
    match rho_lower_bound(f0, f1, w_ms, tt_ms) {
        Ok(w) => {
            if !rho_out.is_null() {
                unsafe { *rho_out = w.rho_lower };
            }
            GamakaStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Static name of a status code.
#[no_mangle]
pub extern "C" fn gamaka_status_name(status: GamakaStatus) -> *const c_char {
    let name: &'static [u8] = match status {
        GamakaStatus::Ok => b"ok\0",
        GamakaStatus::NullPointer => b"null pointer\0",
        GamakaStatus::InvalidArgument => b"invalid argument\0",
        GamakaStatus::IoError => b"i/o error\0",
        GamakaStatus::UnsupportedFormat => b"unsupported format\0",
        GamakaStatus::AnalysisError => b"analysis error\0",
    };
    name.as_ptr() as *const c_char
}
