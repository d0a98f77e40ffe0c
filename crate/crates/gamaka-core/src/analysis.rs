//! Quantitative instruments: synthetic gamaka generation, the window
//! feasibility bound for transient analysis, the two-speed duration-ratio
//! methodology, and a spectral-spread measurement that demonstrates why
//! pitch cannot be meaningfully defined inside a transient window.

use std::io::Write;

use serde::Serialize;

use crate::audio::AudioBuffer;
use crate::pitch::{magnitude_spectrum, WindowShape};
use crate::segment::{SegmentKind, Segmentation};
use crate::{GamakaError, Result};

/// Shape of the pitch transition between the two steady frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransitionShape {
    /// Linear glide in frequency (the default; the feasibility bound assumes it).
    Linear,
    /// Raised-cosine glide with zero slope at its endpoints.
    RaisedCosine,
}

/// Parameters of a synthetic single-excursion gamaka: steady at `f0` for
/// `t_c1` seconds, excursion to `f1` and back over `t_t` seconds, steady at
/// `f0` again for `t_c2` seconds. Harmonics follow the fundamental.
#[derive(Debug, Clone, PartialEq)]
pub struct GamakaParams {
    pub f0: f64,
    pub f1: f64,
    pub t_c1: f64,
    pub t_c2: f64,
    pub t_t: f64,
    /// Fundamental amplitude `a1`.
    pub amplitude: f64,
    /// Starting phase in radians.
    pub phase: f64,
    /// `(multiple, amplitude relative to a1)` per overtone.
    pub harmonics: Vec<(f64, f64)>,
    pub transition: TransitionShape,
}

impl Default for GamakaParams {
    /// The lower-Ni kampita of a male voice: 125 Hz to 150 Hz and back over
    /// 200 ms, flanked by 70 ms steady stretches.
    fn default() -> Self {
        GamakaParams {
            f0: 125.0,
            f1: 150.0,
            t_c1: 0.07,
            t_c2: 0.07,
            t_t: 0.2,
            amplitude: 0.4,
            phase: 0.0,
            harmonics: vec![(2.0, 0.5), (3.0, 0.5)],
            transition: TransitionShape::Linear,
        }
    }
}

impl GamakaParams {
    /// Total duration in seconds.
    pub fn duration_s(&self) -> f64 {
        self.t_c1 + self.t_t + self.t_c2
    }

    /// Instantaneous frequency of the fundamental at time `t`.
    pub fn freq_at(&self, t: f64) -> f64 {
        if self.t_t <= 0.0 || self.f1 == self.f0 {
            return self.f0;
        }
        let half = self.t_t / 2.0;
        let up_end = self.t_c1 + half;
        let down_end = self.t_c1 + self.t_t;
        let shape = |x: f64| match self.transition {
            TransitionShape::Linear => x,
            TransitionShape::RaisedCosine => 0.5 - 0.5 * (std::f64::consts::PI * x).cos(),
        };
        if t < self.t_c1 {
            self.f0
        } else if t < up_end {
            self.f0 + (self.f1 - self.f0) * shape((t - self.t_c1) / half)
        } else if t < down_end {
            self.f1 - (self.f1 - self.f0) * shape((t - up_end) / half)
        } else {
            self.f0
        }
    }

    fn max_multiple(&self) -> f64 {
        self.harmonics
            .iter()
            .map(|&(m, _)| m)
            .fold(1.0, f64::max)
    }
}

/// Synthesizes a phase-continuous gamaka tone whose instantaneous frequency
/// follows the piecewise contour; harmonics track the fundamental.
pub fn synth_gamaka(p: &GamakaParams, sample_rate: u32) -> Result<AudioBuffer> {
    if p.f0.is_nan() || p.f1.is_nan() || p.f0 <= 0.0 || p.f1 <= 0.0 {
        return Err(GamakaError::InvalidInput(
            "gamaka frequencies must be positive".into(),
        ));
    }
    if p.t_c1 < 0.0 || p.t_c2 < 0.0 || p.t_t < 0.0 {
        return Err(GamakaError::InvalidInput(
            "gamaka durations must be non-negative".into(),
        ));
    }
    let f_top = p.f0.max(p.f1) * p.max_multiple();
    if (sample_rate as f64) < 4.0 * f_top {
        return Err(GamakaError::InvalidInput(format!(
            "sample rate {sample_rate} below 4x the highest partial ({f_top} Hz)"
        )));
    }
    let sr = sample_rate as f64;
    let n = (p.duration_s() * sr).round() as usize;
    let mut phi = 0.0f64;
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let mut s = p.amplitude * (phi + p.phase).cos();
        for &(m, a) in &p.harmonics {
            s += p.amplitude * a * (m * phi + p.phase).cos();
        }
        samples.push(s as f32);
        let f = p.freq_at(i as f64 / sr);
        phi += 2.0 * std::f64::consts::PI * f / sr;
    }
    AudioBuffer::normalized(samples, sample_rate)
}

/// Lower bound on the in-window frequency ratio of a transient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowFeasibility {
    /// `rho_L = 1 + (f1 - f0)/f0 * W / (t_T / 2)`.
    pub rho_lower: f64,
    pub window_ms: f64,
    /// The bound expressed in semitones, `12 log2(rho_L)`.
    pub semitone_spread: f64,
}

/// Evaluates the window-feasibility bound for a linear glide from `f0` to
/// `f1` of duration `tt_ms / 2`, analyzed with a window of `w_ms`.
pub fn rho_lower_bound(f0: f64, f1: f64, w_ms: f64, tt_ms: f64) -> Result<WindowFeasibility> {
    if f0.is_nan() || w_ms.is_nan() || tt_ms.is_nan() || f0 <= 0.0 || w_ms <= 0.0 || tt_ms <= 0.0 {
        return Err(GamakaError::InvalidInput(
            "rho_lower_bound needs positive f0, window and transition durations".into(),
        ));
    }
    if f1 < f0 {
        return Err(GamakaError::InvalidInput(
            "rho_lower_bound expects an upward glide (f1 >= f0)".into(),
        ));
    }
    let rho = 1.0 + (f1 - f0) / f0 * (w_ms / (tt_ms / 2.0));
    Ok(WindowFeasibility {
        rho_lower: rho,
        window_ms: w_ms,
        semitone_spread: 12.0 * rho.log2(),
    })
}

/// Per-class durations of two renditions and their ratios.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioRow {
    pub class: String,
    pub speed1_s: f64,
    pub speed2_s: f64,
    /// speed1 / speed2; infinite when only speed 2 is empty, 1 when both are.
    pub ratio: f64,
}

/// Duration ratios between a first (slow) and second (fast) rendition,
/// per class and overall.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioReport {
    pub rows: Vec<RatioRow>,
}

impl RatioReport {
    pub fn row(&self, class: &str) -> Option<&RatioRow> {
        self.rows.iter().find(|r| r.class == class)
    }
}

fn ratio_of(d1: f64, d2: f64) -> f64 {
    if d2 == 0.0 {
        if d1 == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        d1 / d2
    }
}

/// Compares segment-class durations between two segmentations.
pub fn ratio_report(seg1: &Segmentation, seg2: &Segmentation) -> RatioReport {
    let classes = [
        ("cp_notes", SegmentKind::CpNote),
        ("transients", SegmentKind::Transient),
        ("silence", SegmentKind::Silence),
    ];
    let mut rows: Vec<RatioRow> = classes
        .iter()
        .map(|&(name, kind)| {
            let d1 = seg1.class_duration_s(kind);
            let d2 = seg2.class_duration_s(kind);
            RatioRow {
                class: name.to_string(),
                speed1_s: d1,
                speed2_s: d2,
                ratio: ratio_of(d1, d2),
            }
        })
        .collect();
    let t1 = seg1.total_duration_s();
    let t2 = seg2.total_duration_s();
    rows.push(RatioRow {
        class: "overall".to_string(),
        speed1_s: t1,
        speed2_s: t2,
        ratio: ratio_of(t1, t2),
    });
    RatioReport { rows }
}

/// Writes a ratio report as CSV: `class,speed1_s,speed2_s,ratio`.
pub fn write_ratio_csv<W: Write>(out: W, report: &RatioReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io_err = |e: csv::Error| GamakaError::InvalidInput(format!("csv write failed: {e}"));
    w.write_record(["class", "speed1_s", "speed2_s", "ratio"])
        .map_err(io_err)?;
    for r in &report.rows {
        let ratio = if r.ratio.is_infinite() {
            "inf".to_string()
        } else {
            format!("{:.6}", r.ratio)
        };
        w.write_record([
            r.class.clone(),
            format!("{:.6}", r.speed1_s),
            format!("{:.6}", r.speed2_s),
            ratio,
        ])
        .map_err(io_err)?;
    }
    w.flush()
        .map_err(|e| GamakaError::InvalidInput(format!("csv flush failed: {e}")))?;
    Ok(())
}

/// Measured relative spectral spread of one mid-transient analysis window.
///
/// Synthesizes the gamaka, takes a Hann-windowed frame of `w_ms` centered in
/// the middle of the rising glide (mid-buffer when there is no transition),
/// and walks outward from the spectral peak to the band edges at -20 dB of
/// the peak. Returns the upper band edge relative to `f0` — the measured
/// counterpart of the feasibility bound's ratio.
pub fn spectral_spread_demo(p: &GamakaParams, w_ms: f64, sample_rate: u32) -> Result<f64> {
    if w_ms.is_nan() || w_ms <= 0.0 {
        return Err(GamakaError::InvalidInput("window must be positive".into()));
    }
    let has_transition = p.t_t > 0.0 && p.f1 != p.f0;
    let w_s = w_ms / 1000.0;
    if has_transition && w_s > p.t_t / 2.0 {
        return Err(GamakaError::InvalidInput(format!(
            "window of {w_ms} ms does not fit inside the {} ms glide",
            p.t_t * 500.0
        )));
    }
    let buf = synth_gamaka(p, sample_rate)?;
    let sr = sample_rate as f64;
    let center_s = if has_transition {
        p.t_c1 + p.t_t / 4.0
    } else {
        p.duration_s() / 2.0
    };
    let n = (w_s * sr).round() as usize;
    let start = ((center_s - w_s / 2.0) * sr).round().max(0.0) as usize;
    let end = (start + n).min(buf.len());
    if end <= start + 8 {
        return Err(GamakaError::InvalidInput(
            "window extends past the synthesized signal".into(),
        ));
    }
    let frame = &buf.samples()[start..end];

    let nfft = (1usize << 18).max(frame.len().next_power_of_two());
    let spec = magnitude_spectrum(frame, WindowShape::Hann, nfft);
    let bin_hz = sr / nfft as f64;
    let (peak_bin, peak) = spec
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty spectrum");
    let threshold = peak * 10f64.powf(-20.0 / 20.0);
    let mut hi = peak_bin;
    while hi + 1 < spec.len() && spec[hi + 1] >= threshold {
        hi += 1;
    }
    Ok(hi as f64 * bin_hz / p.f0)
}

/// One window-size sample of the bound-vs-measurement sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub w_ms: f64,
    pub rho_lower: f64,
    pub measured_spread: f64,
}

/// Evaluates the bound and the measured spread over several window sizes.
pub fn sweep_window_feasibility(
    p: &GamakaParams,
    windows_ms: &[f64],
    sample_rate: u32,
) -> Result<Vec<SweepRow>> {
    windows_ms
        .iter()
        .map(|&w| {
            let bound = rho_lower_bound(p.f0, p.f1, w, p.t_t * 1000.0)?;
            let measured = spectral_spread_demo(p, w, sample_rate)?;
            Ok(SweepRow {
                w_ms: w,
                rho_lower: bound.rho_lower,
                measured_spread: measured,
            })
        })
        .collect()
}

/// Writes sweep rows as CSV: `w_ms,rho_lower,measured_spread`.
pub fn write_sweep_csv<W: Write>(out: W, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io_err = |e: csv::Error| GamakaError::InvalidInput(format!("csv write failed: {e}"));
    w.write_record(["w_ms", "rho_lower", "measured_spread"])
        .map_err(io_err)?;
    for r in rows {
        w.write_record([
            format!("{:.4}", r.w_ms),
            format!("{:.6}", r.rho_lower),
            format!("{:.6}", r.measured_spread),
        ])
        .map_err(io_err)?;
    }
    w.flush()
        .map_err(|e| GamakaError::InvalidInput(format!("csv flush failed: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::frame_grid;
    use crate::pitch::{track_pitch, TrackerConfig};
    use crate::segment::Segment;

    #[test]
    fn synth_default_duration_and_flats() {
        let p = GamakaParams::default();
        let buf = synth_gamaka(&p, 44100).unwrap();
        assert_eq!(buf.len(), (0.34f64 * 44100.0).round() as usize);

        let grid = frame_grid(&buf, 32.0).unwrap();
        let pc = track_pitch(&buf, &grid, &TrackerConfig::default());
        // Flat stretches: the first and the last full frame.
        for l in [0, grid.n_frames - 1] {
            let f = pc.f[l];
            assert!(f > 0.0);
            let st = 12.0 * (f / 125.0).log2();
            assert!(st.abs() <= 0.1, "frame {l}: {f} Hz");
        }
        // The apex frame reaches the excursion target.
        let apex = ((p.t_c1 + p.t_t / 2.0) * 1000.0 / 32.0) as usize;
        let f_apex = pc.f[apex];
        assert!(f_apex > 135.0, "apex frame tracked at {f_apex} Hz");
    }

    #[test]
    fn synth_degenerate_cases_are_pure_tones() {
        let sr = 44100;
        for p in [
            GamakaParams {
                t_t: 0.0,
                t_c1: 0.25,
                t_c2: 0.25,
                ..GamakaParams::default()
            },
            GamakaParams {
                f1: 125.0,
                ..GamakaParams::default()
            },
        ] {
            let buf = synth_gamaka(&p, sr).unwrap();
            let grid = frame_grid(&buf, 32.0).unwrap();
            let pc = track_pitch(&buf, &grid, &TrackerConfig::default());
            for (l, &f) in pc.f.iter().enumerate() {
                assert!(f > 0.0, "frame {l}");
                let st = 12.0 * (f / 125.0).log2();
                assert!(st.abs() <= 0.1, "frame {l}: {f} Hz");
            }
        }
    }

    #[test]
    fn synth_rejects_aliasing() {
        let p = GamakaParams::default(); // top partial 450 Hz
        assert!(synth_gamaka(&p, 1000).is_err());
        assert!(synth_gamaka(&p, 8000).is_ok());
    }

    #[test]
    fn synth_phase_continuity() {
        let p = GamakaParams::default();
        let sr = 44100u32;
        let buf = synth_gamaka(&p, sr).unwrap();
        let a_total: f64 = p.amplitude * (1.0 + p.harmonics.iter().map(|h| h.1).sum::<f64>());
        let f_top = 150.0 * 3.0;
        let bound = 2.0 * std::f64::consts::PI * f_top / sr as f64 * a_total * 1.1;
        let max_jump = buf
            .samples()
            .windows(2)
            .map(|w| (w[1] - w[0]).abs() as f64)
            .fold(0.0, f64::max);
        assert!(max_jump <= bound, "jump {max_jump} exceeds {bound}");
    }

    #[test]
    fn rho_bound_values() {
        let w = rho_lower_bound(125.0, 150.0, 40.0, 200.0).unwrap();
        assert!((w.rho_lower - 1.08).abs() < 1e-12);
        assert!((w.semitone_spread - 12.0 * 1.08f64.log2()).abs() < 1e-12);

        let tiny = rho_lower_bound(125.0, 150.0, 1e-9, 200.0).unwrap();
        assert!((tiny.rho_lower - 1.0).abs() < 1e-9);

        let two = rho_lower_bound(100.0, 200.0, 100.0, 200.0).unwrap();
        assert!((two.rho_lower - 2.0).abs() < 1e-12);

        let flat = rho_lower_bound(100.0, 100.0, 40.0, 200.0).unwrap();
        assert_eq!(flat.rho_lower, 1.0);

        assert!(rho_lower_bound(100.0, 90.0, 40.0, 200.0).is_err());
        assert!(rho_lower_bound(0.0, 90.0, 40.0, 200.0).is_err());
    }

    #[test]
    fn rho_bound_monotonicity() {
        let mut prev = 0.0;
        for w in [10.0, 20.0, 40.0, 80.0] {
            let rho = rho_lower_bound(125.0, 150.0, w, 200.0).unwrap().rho_lower;
            assert!(rho > prev);
            prev = rho;
        }
        let narrow = rho_lower_bound(125.0, 130.0, 40.0, 200.0).unwrap();
        let wide = rho_lower_bound(125.0, 180.0, 40.0, 200.0).unwrap();
        assert!(wide.rho_lower > narrow.rho_lower);
    }

    fn seg_with(cp: usize, tr: usize, sil: usize, frame_ms: f64) -> Segmentation {
        let mut segments = Vec::new();
        let mut start = 0;
        for (kind, dur) in [
            (SegmentKind::CpNote, cp),
            (SegmentKind::Transient, tr),
            (SegmentKind::Silence, sil),
        ] {
            if dur > 0 {
                segments.push(Segment::new(kind, start, start + dur - 1));
                start += dur;
            }
        }
        Segmentation {
            segments,
            n_frames: start,
            frame_ms,
        }
    }

    #[test]
    fn ratio_identity_and_inversion() {
        let a = seg_with(10, 20, 5, 32.0);
        let same = ratio_report(&a, &a);
        for r in &same.rows {
            assert_eq!(r.ratio, 1.0, "{}", r.class);
        }
        let b = seg_with(5, 10, 1, 32.0);
        let fwd = ratio_report(&a, &b);
        let rev = ratio_report(&b, &a);
        for (f, r) in fwd.rows.iter().zip(&rev.rows) {
            assert!((f.ratio * r.ratio - 1.0).abs() < 1e-12, "{}", f.class);
        }
    }

    #[test]
    fn ratio_infinite_marker() {
        let a = seg_with(10, 10, 5, 32.0);
        let b = seg_with(10, 15, 0, 32.0);
        let rep = ratio_report(&a, &b);
        assert!(rep.row("silence").unwrap().ratio.is_infinite());
        let mut out = Vec::new();
        write_ratio_csv(&mut out, &rep).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.contains(",inf"));
        assert!(text.starts_with("class,speed1_s,speed2_s,ratio"));
    }

    #[test]
    fn spread_exceeds_bound_on_default_params() {
        let p = GamakaParams {
            harmonics: vec![],
            ..GamakaParams::default()
        };
        let measured = spectral_spread_demo(&p, 40.0, 44100).unwrap();
        let bound = rho_lower_bound(p.f0, p.f1, 40.0, 200.0).unwrap().rho_lower;
        assert!(
            measured >= bound,
            "measured {measured} below bound {bound}"
        );
    }

    #[test]
    fn spread_of_tone_is_near_one() {
        // High f0 so the window's own main lobe is negligible relative to f0.
        let p = GamakaParams {
            f0: 1000.0,
            f1: 1000.0,
            t_c1: 0.25,
            t_c2: 0.25,
            t_t: 0.0,
            harmonics: vec![],
            ..GamakaParams::default()
        };
        let spread = spectral_spread_demo(&p, 64.0, 44100).unwrap();
        assert!((spread - 1.0).abs() <= 0.05, "tone spread {spread}");
    }

    #[test]
    fn spread_monotone_in_window_for_steep_glide() {
        // Sweep-dominated regime: 125 -> 1000 Hz over 50 ms each way.
        let p = GamakaParams {
            f0: 125.0,
            f1: 1000.0,
            t_c1: 0.07,
            t_c2: 0.07,
            t_t: 0.1,
            harmonics: vec![],
            ..GamakaParams::default()
        };
        let narrow = spectral_spread_demo(&p, 16.0, 44100).unwrap();
        let wide = spectral_spread_demo(&p, 32.0, 44100).unwrap();
        assert!(
            wide >= narrow,
            "doubling W decreased spread: {narrow} -> {wide}"
        );
    }

    #[test]
    fn spread_window_must_fit() {
        let p = GamakaParams {
            harmonics: vec![],
            ..GamakaParams::default()
        };
        // t_T/2 = 100 ms; a 150 ms window cannot sit inside the glide.
        assert!(spectral_spread_demo(&p, 150.0, 44100).is_err());
    }

    #[test]
    fn sweep_rows_and_csv() {
        let p = GamakaParams {
            harmonics: vec![],
            ..GamakaParams::default()
        };
        let rows = sweep_window_feasibility(&p, &[32.0, 40.0], 44100).unwrap();
        assert_eq!(rows.len(), 2);
        for r in &rows {
            assert!(r.measured_spread >= r.rho_lower);
        }
        let mut out = Vec::new();
        write_sweep_csv(&mut out, &rows).unwrap();
        assert!(String::from_utf8(out)
            .unwrap()
            .starts_with("w_ms,rho_lower,measured_spread"));
    }
}
