//! Non-uniform slow-down planning and rendering.
//!
//! A [`ScalePlan`] maps every segment of a [`Segmentation`] to an output frame
//! range: CP-notes and silences are stretched by the integer factor `R`
//! (short CP-notes are capped), transients keep their input duration exactly.
//! The plan is compacted so output ranges are contiguous from frame 0, which
//! makes the achieved factor `R' = out_frames / in_frames` smaller than `R`
//! whenever transients are present.
//!
//! Rendering copies transients and CP attack/decay spans verbatim, extends CP
//! steady parts pitch-synchronously with the amplitude envelope divided out
//! and re-imposed, and extends silences by tiling their interior. A uniform
//! overlap-add stretcher is included as the comparison baseline.

use std::io::Write;

use serde::Serialize;

use crate::audio::{frame_grid, rms, AudioBuffer};
use crate::pitch::{estimate_frame_pitch, TrackerConfig};
use crate::segment::{SegmentKind, Segmentation};
use crate::{GamakaError, Result};

/// Default cap (ms) on the output duration of short CP-notes.
pub const DEFAULT_CP_CAP_MS: f64 = 250.0;

/// One segment's input and output frame ranges (inclusive).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanEntry {
    #[serde(serialize_with = "serialize_kind")]
    pub kind: SegmentKind,
    pub in_start: usize,
    pub in_end: usize,
    pub out_start: usize,
    pub out_end: usize,
    /// Attack frames copied verbatim (CP-notes only), >= 1.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attack_frames: Option<usize>,
    /// Decay frames copied verbatim (CP-notes only), >= 1.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay_frames: Option<usize>,
}

fn serialize_kind<S: serde::Serializer>(k: &SegmentKind, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(k.as_str())
}

impl PlanEntry {
    pub fn in_frames(&self) -> usize {
        self.in_end - self.in_start + 1
    }

    pub fn out_frames(&self) -> usize {
        self.out_end - self.out_start + 1
    }
}

/// Per-segment output timeline for one slow-down run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalePlan {
    /// Integer planning factor.
    pub r: u32,
    /// Requested factor; differs from `r` only on the rational-factor path.
    pub requested_r: f64,
    pub cp_cap_ms: f64,
    pub frame_ms: f64,
    pub in_n_frames: usize,
    pub out_n_frames: usize,
    pub entries: Vec<PlanEntry>,
}

/// Requested vs. achieved factor plus per-class durations in seconds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleReport {
    pub r: f64,
    pub r_effective: f64,
    pub cp_in_s: f64,
    pub cp_out_s: f64,
    pub transient_in_s: f64,
    pub transient_out_s: f64,
    pub silence_in_s: f64,
    pub silence_out_s: f64,
}

/// Builds the output timeline for slow-down factor `r >= 1`.
///
/// Per-class output durations: CP-notes get `r` times their input, except
/// that a CP-note shorter than `cp_cap_ms` is not extended beyond the cap;
/// transients keep their input duration; silences get `r` times theirs.
/// Entries are laid out contiguously from output frame 0, so each transient
/// begins immediately after the preceding material. Attack/decay markers
/// default to one frame each; [`build_plan_with_audio`] derives them from
/// the signal instead.
pub fn build_plan(seg: &Segmentation, r: u32, cp_cap_ms: f64) -> Result<ScalePlan> {
    build_plan_inner(seg, r, cp_cap_ms, None)
}

/// [`build_plan`] with attack/decay spans estimated from frame energies:
/// the attack runs until frame RMS first reaches 90% of the CP-note's median
/// frame RMS, the decay symmetrically from the end.
pub fn build_plan_with_audio(
    buf: &AudioBuffer,
    seg: &Segmentation,
    r: u32,
    cp_cap_ms: f64,
) -> Result<ScalePlan> {
    build_plan_inner(seg, r, cp_cap_ms, Some(buf))
}

fn build_plan_inner(
    seg: &Segmentation,
    r: u32,
    cp_cap_ms: f64,
    buf: Option<&AudioBuffer>,
) -> Result<ScalePlan> {
    if r < 1 {
        return Err(GamakaError::InvalidInput(
            "slow-down factor must be >= 1".into(),
        ));
    }
    if cp_cap_ms.is_nan() || cp_cap_ms <= 0.0 {
        return Err(GamakaError::InvalidInput(
            "cp_cap_ms must be positive".into(),
        ));
    }
    seg.validate()?;
    let grid = match buf {
        Some(b) => Some(frame_grid(b, seg.frame_ms)?),
        None => None,
    };
    if let Some(g) = &grid {
        if g.n_frames != seg.n_frames {
            return Err(GamakaError::MismatchedPlan(format!(
                "segmentation has {} frames but the audio grid has {}",
                seg.n_frames, g.n_frames
            )));
        }
    }

    let r_us = r as usize;
    let cap_frames = (cp_cap_ms / seg.frame_ms).ceil().max(1.0) as usize;
    let mut entries = Vec::with_capacity(seg.segments.len());
    let mut cursor = 0usize;
    for s in &seg.segments {
        let dur = s.n_frames();
        let out_dur = match s.kind {
            SegmentKind::Transient => dur,
            SegmentKind::Silence => dur * r_us,
            SegmentKind::CpNote => {
                if dur < cap_frames {
                    (dur * r_us).min(cap_frames)
                } else {
                    dur * r_us
                }
            }
        };
        let (attack, decay) = if s.kind == SegmentKind::CpNote {
            match (buf, &grid) {
                (Some(b), Some(g)) => {
                    let (a, d) = attack_decay_from_rms(b, g, s.start, s.end);
                    (Some(a), Some(d))
                }
                _ => {
                    let a = 1usize.min(dur);
                    let d = (dur - a).min(1);
                    (Some(a), Some(d.max(usize::from(dur >= 2))))
                }
            }
        } else {
            (None, None)
        };
        entries.push(PlanEntry {
            kind: s.kind,
            in_start: s.start,
            in_end: s.end,
            out_start: cursor,
            out_end: cursor + out_dur - 1,
            attack_frames: attack,
            decay_frames: decay,
        });
        cursor += out_dur;
    }
    Ok(ScalePlan {
        r,
        requested_r: r as f64,
        cp_cap_ms,
        frame_ms: seg.frame_ms,
        in_n_frames: seg.n_frames,
        out_n_frames: cursor,
        entries,
    })
}

/// Rational-factor extension: plans at `ceil(r)` and trims the CP-note and
/// silence extensions proportionally so the overall stretch approximates `r`.
/// Off the core path; the CLI enables it behind a flag.
pub fn build_plan_rational(seg: &Segmentation, r: f64, cp_cap_ms: f64) -> Result<ScalePlan> {
    if !r.is_finite() || r < 1.0 {
        return Err(GamakaError::InvalidInput(
            "slow-down factor must be >= 1".into(),
        ));
    }
    if (r - r.round()).abs() < 1e-9 {
        return build_plan(seg, r.round() as u32, cp_cap_ms);
    }
    let rc = r.ceil() as u32;
    let mut plan = build_plan(seg, rc, cp_cap_ms)?;
    let trim = (r - 1.0) / (rc as f64 - 1.0);
    let mut cursor = 0usize;
    for e in &mut plan.entries {
        let in_dur = e.in_frames();
        let ext = e.out_frames() - in_dur;
        let out_dur = match e.kind {
            SegmentKind::Transient => in_dur,
            _ => in_dur + (ext as f64 * trim).round() as usize,
        };
        e.out_start = cursor;
        e.out_end = cursor + out_dur - 1;
        cursor += out_dur;
    }
    plan.out_n_frames = cursor;
    plan.requested_r = r;
    Ok(plan)
}

fn attack_decay_from_rms(
    buf: &AudioBuffer,
    grid: &crate::audio::FrameGrid,
    start: usize,
    end: usize,
) -> (usize, usize) {
    let dur = end - start + 1;
    if dur < 2 {
        return (1, 0);
    }
    let mut frame_rms: Vec<f64> = (start..=end)
        .map(|l| rms(&buf.samples()[grid.frame_range(l)]))
        .collect();
    let mut sorted = frame_rms.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let threshold = 0.9 * median;

    let first = frame_rms
        .iter()
        .position(|&v| v >= threshold)
        .unwrap_or(0);
    frame_rms.reverse();
    let last = frame_rms
        .iter()
        .position(|&v| v >= threshold)
        .unwrap_or(0);

    let mut a = (first + 1).max(1);
    let mut b = (last + 1).max(1);
    if a + b > dur {
        a = a.min((dur / 2).max(1));
        b = b.min((dur - a).max(1));
        if a + b > dur {
            b = dur - a;
        }
    }
    (a, b)
}

/// Achieved slow-down factor of a plan: output frames over input frames.
pub fn effective_factor(plan: &ScalePlan) -> f64 {
    plan.out_n_frames as f64 / plan.in_n_frames as f64
}

/// Requested/achieved factors and per-class durations for a plan.
pub fn scale_report(plan: &ScalePlan) -> ScaleReport {
    let fs = plan.frame_ms / 1000.0;
    let class = |kind: SegmentKind| {
        let (i, o) = plan
            .entries
            .iter()
            .filter(|e| e.kind == kind)
            .fold((0usize, 0usize), |(i, o), e| {
                (i + e.in_frames(), o + e.out_frames())
            });
        (i as f64 * fs, o as f64 * fs)
    };
    let (cp_in_s, cp_out_s) = class(SegmentKind::CpNote);
    let (transient_in_s, transient_out_s) = class(SegmentKind::Transient);
    let (silence_in_s, silence_out_s) = class(SegmentKind::Silence);
    ScaleReport {
        r: plan.requested_r,
        r_effective: effective_factor(plan),
        cp_in_s,
        cp_out_s,
        transient_in_s,
        transient_out_s,
        silence_in_s,
        silence_out_s,
    }
}

/// Renders the slowed-down audio for a plan.
///
/// Segments whose output duration equals their input duration (always true
/// for transients, and for everything at `R = 1`) are copied verbatim, which
/// keeps the identity case bit-exact. Extended CP-notes keep their attack and
/// decay spans verbatim, the steady part is extended pitch-synchronously on
/// the envelope-flattened signal and the input envelope is re-imposed over
/// the output span. Extended silences tile their interior with the boundary
/// frames copied.
pub fn render(buf: &AudioBuffer, seg: &Segmentation, plan: &ScalePlan) -> Result<AudioBuffer> {
    let grid = frame_grid(buf, seg.frame_ms)?;
    if grid.n_frames != seg.n_frames || plan.in_n_frames != seg.n_frames {
        return Err(GamakaError::MismatchedPlan(format!(
            "audio grid has {} frames, segmentation {}, plan {}",
            grid.n_frames, seg.n_frames, plan.in_n_frames
        )));
    }
    if plan.entries.len() != seg.segments.len()
        || plan
            .entries
            .iter()
            .zip(&seg.segments)
            .any(|(e, s)| e.in_start != s.start || e.in_end != s.end || e.kind != s.kind)
    {
        return Err(GamakaError::MismatchedPlan(
            "plan entries do not match the segmentation".into(),
        ));
    }

    let flen = grid.frame_len_samples;
    let mut out = vec![0.0f32; plan.out_n_frames * flen];
    for e in &plan.entries {
        let in_span = &buf.samples()[e.in_start * flen..(e.in_end + 1) * flen];
        let out_range = e.out_start * flen..(e.out_end + 1) * flen;
        if e.out_frames() == e.in_frames() {
            out[out_range].copy_from_slice(in_span);
            continue;
        }
        match e.kind {
            SegmentKind::Transient => unreachable!("transients keep their duration"),
            SegmentKind::Silence => {
                render_silence(in_span, flen, &mut out[out_range]);
            }
            SegmentKind::CpNote => {
                let rendered = render_cp(
                    in_span,
                    flen,
                    e.out_frames(),
                    e.attack_frames.unwrap_or(1),
                    e.decay_frames.unwrap_or(1),
                    buf.sample_rate(),
                );
                out[out_range].copy_from_slice(&rendered);
            }
        }
    }
    for s in &mut out {
        *s = s.clamp(-1.0, 1.0);
    }
    AudioBuffer::new(out, buf.sample_rate())
}

/// Silence extension: boundary frames verbatim, interior tiled.
fn render_silence(in_span: &[f32], flen: usize, out: &mut [f32]) {
    let in_frames = in_span.len() / flen;
    let out_len = out.len();
    out[..flen].copy_from_slice(&in_span[..flen]);
    out[out_len - flen..].copy_from_slice(&in_span[in_span.len() - flen..]);
    let interior_len = out_len - 2 * flen;
    if interior_len == 0 {
        return;
    }
    let src = if in_frames >= 3 {
        &in_span[flen..in_span.len() - flen]
    } else {
        in_span
    };
    let tiled = extend_silence(src, interior_len);
    out[flen..flen + interior_len].copy_from_slice(&tiled);
}

/// CP-note extension with envelope preservation.
fn render_cp(
    in_span: &[f32],
    flen: usize,
    out_frames: usize,
    attack: usize,
    decay: usize,
    sample_rate: u32,
) -> Vec<f32> {
    let in_frames = in_span.len() / flen;
    let out_len = out_frames * flen;
    let mut out = vec![0.0f32; out_len];

    // Clamp attack/decay so both fit and at least one steady input frame
    // remains whenever possible.
    let mut a = attack.clamp(1, in_frames);
    let mut b = decay.min(in_frames.saturating_sub(a));
    if a + b >= in_frames && in_frames >= 3 {
        a = a.min(in_frames - 2);
        b = b.min(in_frames - 1 - a);
    }

    // Per-frame RMS envelope, floored to avoid blow-up on near-silent frames.
    let env: Vec<f64> = (0..in_frames)
        .map(|k| rms(&in_span[k * flen..(k + 1) * flen]).max(1e-4))
        .collect();
    let env_at = |frame_pos: f64| -> f64 {
        let x = frame_pos - 0.5;
        if x <= 0.0 {
            return env[0];
        }
        let k = x.floor() as usize;
        if k + 1 >= env.len() {
            return env[env.len() - 1];
        }
        let t = x - k as f64;
        env[k] * (1.0 - t) + env[k + 1] * t
    };

    // Attack and decay copied verbatim.
    out[..a * flen].copy_from_slice(&in_span[..a * flen]);
    if b > 0 {
        out[out_len - b * flen..].copy_from_slice(&in_span[in_span.len() - b * flen..]);
    }

    let steady_in_range = a * flen..(in_frames - b) * flen;
    let steady_out_len = (out_frames - a - b) * flen;
    if steady_out_len == 0 {
        return out;
    }
    let steady_in = &in_span[steady_in_range.clone()];
    // A degenerate note (attack and decay meet) falls back to looping the
    // whole span.
    let (src_for_period, src_offset): (&[f32], usize) = if steady_in.is_empty() {
        (in_span, 0)
    } else {
        (steady_in, steady_in_range.start)
    };

    // Envelope-flattened steady part.
    let flat: Vec<f32> = src_for_period
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let pos = (src_offset + i) as f64 / flen as f64;
            (s as f64 / env_at(pos)) as f32
        })
        .collect();

    let period = estimate_period(src_for_period, sample_rate);
    let extended = extend_pitch_synchronous(&flat, period, steady_out_len);

    // Re-impose the input envelope, mapping the steady output span linearly
    // onto the steady input span.
    let steady_in_len = steady_in_range.len().max(1);
    for (q, &v) in extended.iter().enumerate() {
        let u = q as f64 * steady_in_len as f64 / steady_out_len as f64;
        let frame_pos = (steady_in_range.start as f64 + u) / flen as f64;
        out[a * flen + q] = (v as f64 * env_at(frame_pos)) as f32;
    }
    out
}

/// Median per-frame pitch of a span, as a period in samples (0 if unvoiced).
fn estimate_period(span: &[f32], sample_rate: u32) -> usize {
    let cfg = TrackerConfig::default();
    let frame = ((0.032 * sample_rate as f64) as usize).max(64);
    let mut freqs: Vec<f64> = span
        .chunks(frame)
        .filter(|c| c.len() >= frame / 2)
        .filter_map(|c| estimate_frame_pitch(c, sample_rate, &cfg))
        .collect();
    if freqs.is_empty() {
        // Whole span as a single window.
        if let Some(f) = estimate_frame_pitch(span, sample_rate, &cfg) {
            freqs.push(f);
        }
    }
    if freqs.is_empty() {
        return 0;
    }
    freqs.sort_by(f64::total_cmp);
    let f = freqs[freqs.len() / 2];
    (sample_rate as f64 / f).round() as usize
}

/// Extends a steady span to exactly `target_len` samples by overlap-adding
/// two-period grains on a regular period grid.
///
/// Grains are sourced phase-coherently (source positions differ from output
/// positions by whole periods), with a gradual sub-period slide distributed
/// over the whole extension so the output ends at the input's final phase;
/// splice errors never exceed a couple of samples of phase. Falls back to
/// whole-span looping with a crossfade when the span is shorter than two
/// periods.
pub fn extend_pitch_synchronous(steady: &[f32], period_samples: usize, target_len: usize) -> Vec<f32> {
    let n = steady.len();
    if target_len == n {
        return steady.to_vec();
    }
    if n == 0 {
        return vec![0.0; target_len];
    }
    if target_len < n {
        return shrink_span(steady, period_samples, target_len);
    }
    let p = period_samples;
    if p < 2 || n < 2 * p {
        return loop_whole_span(steady, target_len);
    }

    // Total sub-period phase slide needed so that the end of the output
    // matches the end-of-input phase.
    let mut sigma = (n as i64 - target_len as i64).rem_euclid(p as i64);
    if sigma > p as i64 / 2 {
        sigma -= p as i64;
    }

    let window: Vec<f64> = (0..2 * p)
        .map(|i| 0.5 - 0.5 * (std::f64::consts::PI * i as f64 / p as f64).cos())
        .collect();
    let mut acc = vec![0.0f64; target_len];
    let mut wsum = vec![0.0f64; target_len];

    let n_marks = target_len / p + 2;
    for k in 0..n_marks {
        let m = (k * p) as i64;
        let slide = ((sigma as f64) * m as f64 / target_len as f64).round() as i64;
        let ideal = m as f64 * n as f64 / target_len as f64;
        let base = m + slide;
        let j = ((base as f64 - ideal) / p as f64).round() as i64;
        let src = base - j * (p as i64);
        for (d, w) in window.iter().enumerate() {
            let t = m + d as i64 - p as i64;
            if t < 0 || t >= target_len as i64 {
                continue;
            }
            let si = src + d as i64 - p as i64;
            if si < 0 || si >= n as i64 {
                continue;
            }
            acc[t as usize] += w * steady[si as usize] as f64;
            wsum[t as usize] += w;
        }
    }
    acc.iter()
        .zip(&wsum)
        .map(|(&a, &w)| if w > 1e-9 { (a / w) as f32 } else { 0.0 })
        .collect()
}

/// Shrink path: keep the head and tail, crossfade at the junction.
fn shrink_span(steady: &[f32], period_samples: usize, target_len: usize) -> Vec<f32> {
    if target_len == 0 {
        return Vec::new();
    }
    let head = target_len / 2;
    let tail = target_len - head;
    let mut out = Vec::with_capacity(target_len);
    out.extend_from_slice(&steady[..head]);
    out.extend_from_slice(&steady[steady.len() - tail..]);
    let fade = (period_samples / 4).max(1).min(head).min(tail);
    for i in 0..fade {
        let t = (i + 1) as f32 / (fade + 1) as f32;
        let w = 0.5 - 0.5 * (std::f32::consts::PI * t).cos();
        let a_idx = head - fade + i;
        let b_idx = steady.len() - tail + i;
        if b_idx < steady.len() {
            out[a_idx] = steady[a_idx] * (1.0 - w) + steady[b_idx.min(steady.len() - 1)] * w;
        }
    }
    out
}

/// Fallback for spans shorter than two periods: loop the whole span with a
/// short raised-cosine crossfade at each wrap.
fn loop_whole_span(steady: &[f32], target_len: usize) -> Vec<f32> {
    let n = steady.len();
    let fade = (n / 4).min(64);
    let mut out: Vec<f32> = Vec::with_capacity(target_len + n);
    out.extend_from_slice(steady);
    while out.len() < target_len {
        let start = out.len() - fade;
        for i in 0..fade {
            let t = (i + 1) as f32 / (fade + 1) as f32;
            let w = 0.5 - 0.5 * (std::f32::consts::PI * t).cos();
            out[start + i] = out[start + i] * (1.0 - w) + steady[i] * w;
        }
        out.extend_from_slice(&steady[fade..]);
    }
    out.truncate(target_len);
    out
}

/// Repeats a span to `target_len` samples, deleting any excess repetition.
pub fn extend_silence(span: &[f32], target_len: usize) -> Vec<f32> {
    if span.is_empty() {
        return vec![0.0; target_len];
    }
    if target_len <= span.len() {
        return span[..target_len].to_vec();
    }
    let mut out = Vec::with_capacity(target_len);
    while out.len() < target_len {
        let take = (target_len - out.len()).min(span.len());
        out.extend_from_slice(&span[..take]);
    }
    out
}

/// Uniform pitch-preserving time stretch (waveform-similarity overlap-add),
/// the baseline the non-uniform algorithm is compared against.
///
/// Output length is exactly `round(len * factor)` samples.
pub fn uniform_scale(buf: &AudioBuffer, factor: f64) -> Result<AudioBuffer> {
    if !factor.is_finite() || factor < 1.0 {
        return Err(GamakaError::InvalidInput(format!(
            "uniform scale factor must be >= 1, got {factor}"
        )));
    }
    let x = buf.samples();
    let n = x.len();
    let target = (n as f64 * factor).round() as usize;
    if n == 0 || target == 0 {
        return AudioBuffer::new(Vec::new(), buf.sample_rate());
    }

    let mut win = ((0.05 * buf.sample_rate() as f64) as usize).max(64);
    if win % 2 == 1 {
        win += 1;
    }
    if n < 2 * win {
        // Too short for overlap-add; nearest-sample repetition.
        let out: Vec<f32> = (0..target)
            .map(|i| x[((i as f64 / factor) as usize).min(n - 1)])
            .collect();
        return AudioBuffer::new(out, buf.sample_rate());
    }

    let hop = win / 2;
    let search = (win / 8).max(16);
    // Half-sample-offset periodic Hann: w[i] + w[i + win/2] = 1 still holds
    // exactly, and no weight is zero, so edge samples keep full amplitude
    // after window-sum normalization.
    let window: Vec<f64> = (0..win)
        .map(|i| {
            0.5 - 0.5 * (2.0 * std::f64::consts::PI * (i as f64 + 0.5) / win as f64).cos()
        })
        .collect();

    let mut acc = vec![0.0f64; target + win];
    let mut wsum = vec![0.0f64; target + win];
    let mut prev_src = 0usize;
    let mut k = 0usize;
    while k * hop < target {
        let ideal = (((k * hop) as f64 / factor).round() as usize).min(n - 1);
        let natural = prev_src + hop;
        let src = if k == 0 {
            0
        } else if natural + win > n || ideal + hop > n {
            // Tail: no room to search; continue naturally, clipped below.
            natural.min(n - 1)
        } else {
            best_overlap_source(x, natural, ideal, search, hop, win, n)
        };
        let pos = k * hop;
        let avail = win.min(n - src);
        for i in 0..avail {
            acc[pos + i] += window[i] * x[src + i] as f64;
            wsum[pos + i] += window[i];
        }
        prev_src = src;
        k += 1;
    }
    let out: Vec<f32> = (0..target)
        .map(|t| {
            if wsum[t] > 1e-9 {
                (acc[t] / wsum[t]) as f32
            } else {
                0.0
            }
        })
        .collect();
    AudioBuffer::new(out, buf.sample_rate())
}

/// Picks the analysis position near `ideal` whose start best continues the
/// previous grain (maximum normalized cross-correlation with the natural
/// continuation over the overlap region). Ties prefer the natural position.
fn best_overlap_source(
    x: &[f32],
    natural: usize,
    ideal: usize,
    search: usize,
    overlap: usize,
    win: usize,
    n: usize,
) -> usize {
    let template = &x[natural..natural + overlap];
    let t_energy: f64 = template.iter().map(|&v| (v as f64) * (v as f64)).sum();
    let lo = ideal.saturating_sub(search);
    let hi = (ideal + search).min(n - win);
    if lo >= hi || t_energy < 1e-12 {
        return ideal.min(n - win);
    }
    let mut best = natural.clamp(lo, hi);
    let mut best_score = f64::NEG_INFINITY;
    // Visit candidates nearest the natural continuation first so exact ties
    // resolve to perfect reconstruction at factor 1.
    let center = natural.clamp(lo, hi);
    let mut order: Vec<usize> = (lo..=hi).collect();
    order.sort_by_key(|&c| c.abs_diff(center));
    for c in order {
        let cand = &x[c..c + overlap];
        let mut dot = 0.0f64;
        let mut energy = 0.0f64;
        for i in 0..overlap {
            let a = template[i] as f64;
            let b = cand[i] as f64;
            dot += a * b;
            energy += b * b;
        }
        let denom = (t_energy * energy).sqrt();
        let score = if denom > 0.0 { dot / denom } else { 0.0 };
        if score > best_score {
            best_score = score;
            best = c;
        }
    }
    best
}

#[derive(Serialize)]
struct PlanDoc<'a> {
    schema_version: u32,
    r: u32,
    requested_r: f64,
    r_effective: f64,
    cp_cap_ms: f64,
    frame_ms: f64,
    in_n_frames: usize,
    out_n_frames: usize,
    entries: &'a [PlanEntry],
}

/// Writes a plan as JSON, mirroring the entries plus R and R_effective.
pub fn write_plan_json<W: Write>(out: W, plan: &ScalePlan) -> Result<()> {
    let doc = PlanDoc {
        schema_version: 1,
        r: plan.r,
        requested_r: plan.requested_r,
        r_effective: effective_factor(plan),
        cp_cap_ms: plan.cp_cap_ms,
        frame_ms: plan.frame_ms,
        in_n_frames: plan.in_n_frames,
        out_n_frames: plan.out_n_frames,
        entries: &plan.entries,
    };
    serde_json::to_writer_pretty(out, &doc)
        .map_err(|e| GamakaError::InvalidInput(format!("json write failed: {e}")))
}
