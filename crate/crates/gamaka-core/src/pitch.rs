//! Per-frame fundamental-frequency estimation, semitone conversion and the
//! short-time spectral machinery used by the window-feasibility analysis.
//!
//! The tracker is a time-domain normalized autocorrelation with parabolic
//! peak interpolation and a lowest-lag sub-harmonic guard. Frames below the
//! silence floor or without a periodicity peak above the voicing threshold
//! are reported as unvoiced (0.0 in the contour).

use std::io::Write;

use rustfft::{num_complex::Complex, FftPlanner};

use crate::audio::{frame_rms, AudioBuffer, FrameGrid};
use crate::{GamakaError, Result};

/// Per-frame fundamental frequency estimates in Hz; 0.0 marks unvoiced frames.
#[derive(Debug, Clone, PartialEq)]
pub struct PitchContour {
    /// One value per frame, `f[l]` for `0 <= l < L`.
    pub f: Vec<f64>,
    /// Frame duration in milliseconds.
    pub frame_ms: f64,
}

impl PitchContour {
    pub fn len(&self) -> usize {
        self.f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f.is_empty()
    }

    pub fn is_voiced(&self, l: usize) -> bool {
        self.f[l] > 0.0
    }
}

/// Pitch relative to the tonic, `n[l] = 12 log2(f[l] / tonic)`.
/// Unvoiced frames carry `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct SemitoneContour {
    pub n: Vec<Option<f64>>,
    pub tonic_hz: f64,
    pub frame_ms: f64,
}

impl SemitoneContour {
    pub fn len(&self) -> usize {
        self.n.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n.is_empty()
    }
}

/// Analysis window shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowShape {
    Rectangular,
    Hann,
}

/// Short-time analysis window: shape, size `W` and shift `w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowConfig {
    pub shape: WindowShape,
    /// Window size W in milliseconds.
    pub size_ms: f64,
    /// Window shift w in milliseconds.
    pub shift_ms: f64,
}

impl WindowConfig {
    /// Full main-lobe width of the window's transform in Hz
    /// (2/W for rectangular, 4/W for Hann).
    pub fn main_lobe_width_hz(&self) -> f64 {
        let w_s = self.size_ms / 1000.0;
        match self.shape {
            WindowShape::Rectangular => 2.0 / w_s,
            WindowShape::Hann => 4.0 / w_s,
        }
    }
}

/// Tracker thresholds. Defaults are deliberately conservative for clean
/// monophonic material.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerConfig {
    /// Lowest admissible fundamental in Hz.
    pub fmin: f64,
    /// Highest admissible fundamental in Hz.
    pub fmax: f64,
    /// Minimum normalized autocorrelation peak for a frame to count as voiced.
    pub voicing_threshold: f64,
    /// Silence floor in dB relative to the recording's peak frame RMS.
    pub silence_floor_db: f64,
    /// A peak within this fraction of the global maximum competes for the
    /// lowest-lag (sub-harmonic guard) selection.
    pub octave_peak_ratio: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            fmin: 60.0,
            fmax: 1000.0,
            voicing_threshold: 0.5,
            silence_floor_db: -45.0,
            octave_peak_ratio: 0.9,
        }
    }
}

/// Tracks the pitch of every frame of a buffer.
///
/// Frames whose RMS falls below the silence floor (relative to the loudest
/// frame) yield 0.0, as do frames without a sufficiently strong periodicity
/// peak. Degenerate input never fails.
pub fn track_pitch(buf: &AudioBuffer, grid: &FrameGrid, cfg: &TrackerConfig) -> PitchContour {
    let mut rms_per_frame = Vec::with_capacity(grid.n_frames);
    let mut peak_rms = 0.0f64;
    for l in 0..grid.n_frames {
        let r = frame_rms(buf, grid, l).expect("l < n_frames");
        peak_rms = peak_rms.max(r);
        rms_per_frame.push(r);
    }
    let floor = (peak_rms * 10f64.powf(cfg.silence_floor_db / 20.0)).max(1e-7);

    let f = (0..grid.n_frames)
        .map(|l| {
            if rms_per_frame[l] < floor {
                0.0
            } else {
                let frame = &buf.samples()[grid.frame_range(l)];
                estimate_frame_pitch(frame, buf.sample_rate(), cfg).unwrap_or(0.0)
            }
        })
        .collect();
    PitchContour {
        f,
        frame_ms: grid.frame_ms,
    }
}

/// Estimates the fundamental of a single frame, or `None` when unvoiced.
///
/// Normalized autocorrelation over lags `[sr/fmax, sr/fmin]` (clamped to half
/// the frame so the correlation keeps enough overlap), lowest-lag selection
/// among peaks within `octave_peak_ratio` of the maximum, then parabolic
/// interpolation around the winning lag. The frame mean is removed first so a
/// DC offset never reads as periodicity.
pub fn estimate_frame_pitch(frame: &[f32], sample_rate: u32, cfg: &TrackerConfig) -> Option<f64> {
    let n = frame.len();
    if n < 8 {
        return None;
    }
    let sr = sample_rate as f64;

    let mean = frame.iter().map(|&s| s as f64).sum::<f64>() / n as f64;
    let x: Vec<f64> = frame.iter().map(|&s| s as f64 - mean).collect();

    let energy: f64 = x.iter().map(|v| v * v).sum();
    if energy < 1e-12 {
        return None;
    }

    let min_lag = ((sr / cfg.fmax).floor() as usize).max(2);
    let max_lag = ((sr / cfg.fmin).ceil() as usize).min(n / 2);
    if min_lag + 1 >= max_lag {
        return None;
    }

    // Prefix sums of x^2 give O(1) normalization denominators per lag.
    let mut cum = vec![0.0f64; n + 1];
    for i in 0..n {
        cum[i + 1] = cum[i] + x[i] * x[i];
    }
    let upper = (max_lag + 1).min(n - 1);
    let mut r = vec![0.0f64; upper + 1];
    for (lag, r_lag) in r.iter_mut().enumerate().take(upper + 1).skip(min_lag - 1) {
        let m = n - lag;
        let mut acc = 0.0f64;
        for i in 0..m {
            acc += x[i] * x[i + lag];
        }
        let e1 = cum[m];
        let e2 = cum[n] - cum[lag];
        let denom = (e1 * e2).sqrt();
        *r_lag = if denom > 0.0 { acc / denom } else { 0.0 };
    }

    // Local maxima in the admissible lag range.
    let mut peaks: Vec<(usize, f64)> = Vec::new();
    for lag in min_lag..=max_lag.min(upper - 1) {
        if r[lag] >= r[lag - 1] && r[lag] > r[lag + 1] {
            peaks.push((lag, r[lag]));
        }
    }
    let (_, r_max) = *peaks
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))?;
    if r_max < cfg.voicing_threshold {
        return None;
    }
    // Sub-harmonic guard: lowest lag whose peak is close to the maximum.
    let (best_lag, _) = *peaks
        .iter()
        .find(|(_, v)| *v >= cfg.octave_peak_ratio * r_max)?;

    // Parabolic refinement around the integer lag.
    let mut lag = best_lag as f64;
    if best_lag > 0 && best_lag < upper {
        let a = r[best_lag - 1];
        let b = r[best_lag];
        let c = r[best_lag + 1];
        let denom = a - 2.0 * b + c;
        if denom < 0.0 {
            let delta = 0.5 * (a - c) / denom;
            if delta.abs() <= 1.0 {
                lag += delta;
            }
        }
    }

    let f = sr / lag;
    if f < cfg.fmin || f > cfg.fmax {
        return None;
    }
    Some(f)
}

/// Converts a pitch contour to semitones relative to the tonic.
pub fn to_semitones(pc: &PitchContour, tonic_hz: f64) -> Result<SemitoneContour> {
    if !tonic_hz.is_finite() || tonic_hz <= 0.0 {
        return Err(GamakaError::InvalidInput(format!(
            "tonic must be a positive frequency, got {tonic_hz}"
        )));
    }
    let n = pc
        .f
        .iter()
        .map(|&f| {
            if f > 0.0 {
                Some(12.0 * (f / tonic_hz).log2())
            } else {
                None
            }
        })
        .collect();
    Ok(SemitoneContour {
        n,
        tonic_hz,
        frame_ms: pc.frame_ms,
    })
}

/// Magnitude spectrum of one windowed frame (bins `0..=n/2`).
pub fn stft_frame(frame: &[f32], shape: WindowShape) -> Vec<f64> {
    if frame.is_empty() {
        return Vec::new();
    }
    magnitude_spectrum(frame, shape, frame.len())
}

/// Magnitude spectrum with optional zero-padding to `nfft` points.
/// Returns bins `0..=nfft/2`.
pub(crate) fn magnitude_spectrum(frame: &[f32], shape: WindowShape, nfft: usize) -> Vec<f64> {
    let n = frame.len();
    let nfft = nfft.max(n);
    let mut buf: Vec<Complex<f64>> = Vec::with_capacity(nfft);
    for (i, &s) in frame.iter().enumerate() {
        let w = match shape {
            WindowShape::Rectangular => 1.0,
            WindowShape::Hann => {
                if n > 1 {
                    let t = i as f64 / (n - 1) as f64;
                    0.5 - 0.5 * (2.0 * std::f64::consts::PI * t).cos()
                } else {
                    1.0
                }
            }
        };
        buf.push(Complex::new(s as f64 * w, 0.0));
    }
    buf.resize(nfft, Complex::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(nfft).process(&mut buf);
    buf.iter().take(nfft / 2 + 1).map(|c| c.norm()).collect()
}

/// Writes a pitch contour as CSV: `frame_index,time_s,f_hz,semitones`.
/// Unvoiced frames leave the frequency and semitone cells empty.
pub fn write_contour_csv<W: Write>(out: W, pc: &PitchContour, tonic_hz: f64) -> Result<()> {
    let sc = to_semitones(pc, tonic_hz)?;
    let mut w = csv::Writer::from_writer(out);
    let io_err = |e: csv::Error| GamakaError::InvalidInput(format!("csv write failed: {e}"));
    w.write_record(["frame_index", "time_s", "f_hz", "semitones"])
        .map_err(io_err)?;
    for (l, &f) in pc.f.iter().enumerate() {
        let t = l as f64 * pc.frame_ms / 1000.0;
        if f > 0.0 {
            let st = sc.n[l].expect("voiced frame has semitone value");
            w.write_record([
                l.to_string(),
                format!("{t:.6}"),
                format!("{f:.4}"),
                format!("{st:.4}"),
            ])
            .map_err(io_err)?;
        } else {
            w.write_record([l.to_string(), format!("{t:.6}"), String::new(), String::new()])
                .map_err(io_err)?;
        }
    }
    w.flush()
        .map_err(|e| GamakaError::InvalidInput(format!("csv flush failed: {e}")))?;
    Ok(())
}
