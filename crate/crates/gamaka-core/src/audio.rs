//! WAV I/O, frame decomposition and per-frame energy.
//!
//! Everything downstream works on a mono [`AudioBuffer`] cut into the
//! non-overlapping frames of a [`FrameGrid`]. Reading accepts PCM 16-bit and
//! IEEE float 32-bit, mono or stereo; writing always produces PCM 16-bit mono.

use std::path::Path;

use crate::{GamakaError, Result};

/// Default analysis frame length in milliseconds.
pub const DEFAULT_FRAME_MS: f64 = 32.0;

/// Mono audio: normalized samples plus the sample rate.
///
/// Samples are finite and within `[-1.0, 1.0]`; quantization happens only at
/// file boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f32>,
    sample_rate: u32,
}

impl AudioBuffer {
    /// Builds a buffer, rejecting non-finite samples, out-of-range samples
    /// and a zero sample rate.
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(GamakaError::InvalidInput("sample rate must be > 0".into()));
        }
        for (i, &s) in samples.iter().enumerate() {
            if !s.is_finite() {
                return Err(GamakaError::InvalidInput(format!(
                    "non-finite sample at index {i}"
                )));
            }
            if s.abs() > 1.0 {
                return Err(GamakaError::InvalidInput(format!(
                    "sample {s} at index {i} outside [-1, 1]; use AudioBuffer::normalized"
                )));
            }
        }
        Ok(AudioBuffer {
            samples,
            sample_rate,
        })
    }

    /// Like [`AudioBuffer::new`] but rescales by the peak when it exceeds 1.0.
    pub fn normalized(mut samples: Vec<f32>, sample_rate: u32) -> Result<Self> {
        let peak = samples.iter().fold(0.0f32, |m, s| m.max(s.abs()));
        if !peak.is_finite() {
            return Err(GamakaError::InvalidInput("non-finite sample".into()));
        }
        if peak > 1.0 {
            let inv = 1.0 / peak;
            for s in &mut samples {
                *s *= inv;
            }
        }
        AudioBuffer::new(samples, sample_rate)
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Duration in seconds.
    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Decomposition of a buffer into non-overlapping, contiguous frames.
/// The last partial frame is dropped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameGrid {
    /// Samples per frame: `round(frame_ms / 1000 * sample_rate)`.
    pub frame_len_samples: usize,
    /// Number of whole frames that fit in the buffer.
    pub n_frames: usize,
    /// Frame duration in milliseconds.
    pub frame_ms: f64,
}

impl FrameGrid {
    /// Sample range `[start, end)` of frame `l`.
    pub fn frame_range(&self, l: usize) -> std::ops::Range<usize> {
        let start = l * self.frame_len_samples;
        start..start + self.frame_len_samples
    }
}

/// Reads a WAV file into a mono buffer.
///
/// Stereo is downmixed by channel mean; 16-bit samples are divided by 32768;
/// float files with a peak above 1.0 are rescaled by the peak.
pub fn read_wav(path: &Path) -> Result<AudioBuffer> {
    let reader = hound::WavReader::open(path).map_err(|e| map_hound_err(path, e))?;
    let spec = reader.spec();
    if spec.channels == 0 || spec.channels > 2 {
        return Err(GamakaError::UnsupportedWav(
            path.display().to_string(),
            format!("{} channels (only mono/stereo supported)", spec.channels),
        ));
    }
    let channels = spec.channels as usize;
    let interleaved: Vec<f32> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => {
            let mut out = Vec::with_capacity(reader.len() as usize);
            for s in reader.into_samples::<i16>() {
                let v = s.map_err(|e| map_hound_err(path, e))?;
                out.push(v as f32 / 32768.0);
            }
            out
        }
        (hound::SampleFormat::Float, 32) => {
            let mut out = Vec::with_capacity(reader.len() as usize);
            for s in reader.into_samples::<f32>() {
                let v = s.map_err(|e| map_hound_err(path, e))?;
                if !v.is_finite() {
                    return Err(GamakaError::MalformedWav(
                        path.display().to_string(),
                        "non-finite float sample".into(),
                    ));
                }
                out.push(v);
            }
            out
        }
        (fmt, bits) => {
            return Err(GamakaError::UnsupportedWav(
                path.display().to_string(),
                format!("{bits}-bit {fmt:?} (only 16-bit PCM and 32-bit float supported)"),
            ));
        }
    };

    let mono = if channels == 2 {
        interleaved
            .chunks_exact(2)
            .map(|p| 0.5 * (p[0] + p[1]))
            .collect()
    } else {
        interleaved
    };
    AudioBuffer::normalized(mono, spec.sample_rate)
}

fn map_hound_err(path: &Path, e: hound::Error) -> GamakaError {
    let p = path.display().to_string();
    match e {
        hound::Error::IoError(io) => {
            // hound reports mid-chunk EOF as a custom "Failed to read enough
            // bytes." error rather than UnexpectedEof.
            if io.kind() == std::io::ErrorKind::UnexpectedEof
                || io.to_string().contains("enough bytes")
            {
                GamakaError::TruncatedWav(p, io.to_string())
            } else {
                GamakaError::io(path, io)
            }
        }
        hound::Error::FormatError(msg) => GamakaError::MalformedWav(p, msg.to_string()),
        hound::Error::Unsupported => {
            GamakaError::UnsupportedWav(p, "unsupported encoding".into())
        }
        other => GamakaError::MalformedWav(p, other.to_string()),
    }
}

/// Writes a buffer as PCM 16-bit mono. Values are clipped to `[-1, 1]`
/// before quantization.
pub fn write_wav(path: &Path, buf: &AudioBuffer) -> Result<()> {
    if buf.is_empty() {
        return Err(GamakaError::InvalidInput(
            "refusing to write an empty buffer".into(),
        ));
    }
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: buf.sample_rate(),
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| map_hound_err(path, e))?;
    for &s in buf.samples() {
        writer
            .write_sample(quantize16(s))
            .map_err(|e| map_hound_err(path, e))?;
    }
    writer.finalize().map_err(|e| map_hound_err(path, e))
}

/// Quantizes one normalized sample to 16-bit PCM with clipping.
pub fn quantize16(s: f32) -> i16 {
    let clipped = s.clamp(-1.0, 1.0);
    let scaled = (clipped as f64 * 32768.0).round();
    scaled.clamp(-32768.0, 32767.0) as i16
}

/// Builds the frame grid for a buffer. Frames are non-overlapping and
/// contiguous; the last partial frame is dropped.
pub fn frame_grid(buf: &AudioBuffer, frame_ms: f64) -> Result<FrameGrid> {
    if !frame_ms.is_finite() || frame_ms <= 0.0 {
        return Err(GamakaError::InvalidInput(format!(
            "frame_ms must be positive, got {frame_ms}"
        )));
    }
    let frame_len = (frame_ms / 1000.0 * buf.sample_rate() as f64).round() as usize;
    if frame_len == 0 {
        return Err(GamakaError::InvalidInput(format!(
            "frame of {frame_ms} ms is shorter than one sample at {} Hz",
            buf.sample_rate()
        )));
    }
    if buf.len() < frame_len {
        return Err(GamakaError::BufferTooShort {
            len: buf.len(),
            needed: frame_len,
        });
    }
    Ok(FrameGrid {
        frame_len_samples: frame_len,
        n_frames: buf.len() / frame_len,
        frame_ms,
    })
}

/// Root-mean-square of frame `l`.
pub fn frame_rms(buf: &AudioBuffer, grid: &FrameGrid, l: usize) -> Result<f64> {
    if l >= grid.n_frames {
        return Err(GamakaError::FrameOutOfRange {
            index: l,
            n_frames: grid.n_frames,
        });
    }
    Ok(rms(&buf.samples()[grid.frame_range(l)]))
}

/// RMS of a raw sample slice (0.0 for an empty slice).
pub(crate) fn rms(samples: &[f32]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let sum: f64 = samples.iter().map(|&s| (s as f64) * (s as f64)).sum();
    (sum / samples.len() as f64).sqrt()
}
