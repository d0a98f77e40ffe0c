//! Partition of a semitone contour into silence, constant-pitch notes and
//! transients, including the stationary-point snapping refinement.
//!
//! A CP-note is a maximal run of voiced pitch values whose minimum and
//! maximum stay within `cp_tolerance` of the run mean while the best-fit
//! slope magnitude stays within `cp_max_slope`. Everything voiced that is not
//! a CP-note is a transient.

use std::io::Write;

use serde::Serialize;

use crate::audio::AudioBuffer;
use crate::pitch::{to_semitones, track_pitch, PitchContour, SemitoneContour, TrackerConfig};
use crate::{GamakaError, Result};

/// Segment class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SegmentKind {
    CpNote,
    Transient,
    Silence,
}

impl SegmentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SegmentKind::CpNote => "cp_note",
            SegmentKind::Transient => "transient",
            SegmentKind::Silence => "silence",
        }
    }
}

/// One labeled run of frames, `start..=end` inclusive.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub kind: SegmentKind,
    pub start: usize,
    pub end: usize,
    /// Mean semitone of the run (CP-notes only).
    pub mean_semitone: Option<f64>,
}

impl Segment {
    pub fn new(kind: SegmentKind, start: usize, end: usize) -> Self {
        Segment {
            kind,
            start,
            end,
            mean_semitone: None,
        }
    }

    /// Number of frames covered.
    pub fn n_frames(&self) -> usize {
        self.end - self.start + 1
    }
}

/// Ordered, disjoint, exhaustive cover of `[0, n_frames)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub segments: Vec<Segment>,
    pub n_frames: usize,
    pub frame_ms: f64,
}

impl Segmentation {
    /// Count of segments of one class.
    pub fn count(&self, kind: SegmentKind) -> usize {
        self.segments.iter().filter(|s| s.kind == kind).count()
    }

    /// Total frames of one class.
    pub fn class_frames(&self, kind: SegmentKind) -> usize {
        self.segments
            .iter()
            .filter(|s| s.kind == kind)
            .map(Segment::n_frames)
            .sum()
    }

    /// Total duration of one class in seconds.
    pub fn class_duration_s(&self, kind: SegmentKind) -> f64 {
        self.class_frames(kind) as f64 * self.frame_ms / 1000.0
    }

    /// Total duration in seconds.
    pub fn total_duration_s(&self) -> f64 {
        self.n_frames as f64 * self.frame_ms / 1000.0
    }

    /// Checks the structural invariants: segments ordered, disjoint,
    /// contiguous, covering `[0, n_frames)`, with no adjacent silences.
    pub fn validate(&self) -> Result<()> {
        let mut next = 0usize;
        let mut prev_kind: Option<SegmentKind> = None;
        for s in &self.segments {
            if s.start != next {
                return Err(GamakaError::InvalidInput(format!(
                    "segment at frame {} leaves a gap or overlap (expected start {})",
                    s.start, next
                )));
            }
            if s.end < s.start {
                return Err(GamakaError::InvalidInput(format!(
                    "segment [{}, {}] is empty",
                    s.start, s.end
                )));
            }
            if prev_kind == Some(SegmentKind::Silence) && s.kind == SegmentKind::Silence {
                return Err(GamakaError::InvalidInput(
                    "adjacent silence segments must merge".into(),
                ));
            }
            prev_kind = Some(s.kind);
            next = s.end + 1;
        }
        if next != self.n_frames {
            return Err(GamakaError::InvalidInput(format!(
                "segments cover [0, {next}) but the contour has {} frames",
                self.n_frames
            )));
        }
        Ok(())
    }
}

/// Reference pitches that stationary points may snap to.
#[derive(Debug, Clone, PartialEq)]
pub enum CpPeaks {
    /// Integer semitone positions relative to the tonic, any octave.
    IntegerSemitones,
    /// Explicit semitone values.
    Custom(Vec<f64>),
}

impl CpPeaks {
    /// Nearest peak to a semitone value.
    pub fn nearest(&self, st: f64) -> Option<f64> {
        match self {
            CpPeaks::IntegerSemitones => Some(st.round()),
            CpPeaks::Custom(peaks) => peaks
                .iter()
                .copied()
                .min_by(|a, b| (a - st).abs().total_cmp(&(b - st).abs())),
        }
    }
}

/// Thresholds for CP-note detection and snapping.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationConfig {
    /// Tolerated distance of min/max from the run mean, semitones.
    pub cp_tolerance: f64,
    /// Maximum |best-fit slope| of a CP-note, semitones per second.
    pub cp_max_slope: f64,
    /// Runs shorter than this are not emitted as CP-notes.
    pub cp_min_frames: usize,
    /// Total width of the snapping window around a stationary point, ms.
    pub snap_window_ms: f64,
    /// Tolerated distance from a peak for snapping, semitones.
    pub snap_tolerance: f64,
    pub cp_peaks: CpPeaks,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        SegmentationConfig {
            cp_tolerance: 0.3,
            cp_max_slope: 1.0,
            cp_min_frames: 2,
            snap_window_ms: 80.0,
            snap_tolerance: 0.3,
            cp_peaks: CpPeaks::IntegerSemitones,
        }
    }
}

/// Configuration of the full audio-to-segmentation pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Analysis frame length in milliseconds.
    pub frame_ms: f64,
    pub tracker: TrackerConfig,
    pub segmentation: SegmentationConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            frame_ms: crate::audio::DEFAULT_FRAME_MS,
            tracker: TrackerConfig::default(),
            segmentation: SegmentationConfig::default(),
        }
    }
}

/// Maximal runs of unvoiced frames, in order.
pub fn detect_silence(pc: &PitchContour) -> Result<Vec<Segment>> {
    if pc.is_empty() {
        return Err(GamakaError::InvalidInput("empty pitch contour".into()));
    }
    let mut out = Vec::new();
    let mut run_start: Option<usize> = None;
    for (l, &f) in pc.f.iter().enumerate() {
        if f <= 0.0 {
            run_start.get_or_insert(l);
        } else if let Some(s) = run_start.take() {
            out.push(Segment::new(SegmentKind::Silence, s, l - 1));
        }
    }
    if let Some(s) = run_start {
        out.push(Segment::new(SegmentKind::Silence, s, pc.len() - 1));
    }
    Ok(out)
}

/// Ordinary least-squares slope of semitone values against time at frame
/// centers, in semitones per second.
pub fn best_fit_slope(values: &[f64], frame_ms: f64) -> Result<f64> {
    if values.len() < 2 {
        return Err(GamakaError::InvalidInput(
            "slope needs at least 2 values".into(),
        ));
    }
    let dt = frame_ms / 1000.0;
    let n = values.len() as f64;
    let t_mean = dt * (values.len() - 1) as f64 / 2.0;
    let x_mean = values.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (k, &x) in values.iter().enumerate() {
        let td = k as f64 * dt - t_mean;
        num += td * (x - x_mean);
        den += td * td;
    }
    Ok(num / den)
}

/// Slack applied to threshold comparisons so exact boundary cases
/// (slope exactly 1 st/s, jitter exactly at the tolerance) stay inside.
const THRESH_EPS: f64 = 1e-9;

/// Full validity of a candidate run `[i, j]` of a semitone contour:
/// every frame voiced, min/max within tolerance of the mean, |OLS slope|
/// within the limit. This is the CP-note definition; the brute-force test
/// oracle recomputes it independently.
fn run_is_valid(sc: &SemitoneContour, i: usize, j: usize, cfg: &SegmentationConfig) -> bool {
    let mut values = Vec::with_capacity(j - i + 1);
    for l in i..=j {
        match sc.n[l] {
            Some(v) => values.push(v),
            None => return false,
        }
    }
    if !tolerance_ok(&values, cfg.cp_tolerance) {
        return false;
    }
    if values.len() >= 2 {
        let slope = best_fit_slope(&values, sc.frame_ms).expect(">= 2 values");
        if slope.abs() > cfg.cp_max_slope + THRESH_EPS {
            return false;
        }
    }
    true
}

fn tolerance_ok(values: &[f64], tol: f64) -> bool {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max - mean <= tol + THRESH_EPS && mean - min <= tol + THRESH_EPS
}

/// Greedy left-to-right CP-note detection.
///
/// A candidate run grows to the right while the run's range stays within
/// the tolerance band, then is finalized: a run failing the exact check
/// (min/max against the final mean, best-fit slope) is shortened from the
/// right until it passes. A polish pass then re-extends in either direction
/// wherever the full definition keeps holding, so emitted runs are
/// one-frame maximal among frames not claimed by an earlier note. Runs
/// shorter than `cp_min_frames` are not emitted.
pub fn detect_cp_notes(sc: &SemitoneContour, cfg: &SegmentationConfig) -> Result<Vec<Segment>> {
    if sc.is_empty() {
        return Err(GamakaError::InvalidInput("empty semitone contour".into()));
    }
    let n = sc.len();
    let tol = cfg.cp_tolerance;
    let mut out: Vec<Segment> = Vec::new();
    // First frame not claimed by an already-emitted run.
    let mut free_from = 0usize;
    let mut l = 0usize;

    while l < n {
        if sc.n[l].is_none() {
            l += 1;
            continue;
        }
        let scan_start = l;
        let mut lo = l;
        let mut hi = l;
        let mut values: Vec<f64> = vec![sc.n[l].unwrap()];

        // Range-driven growth to the right. The range bound
        // max - min <= 2 * tol is what the tolerance condition implies for
        // the whole run; the exact check against the final mean happens in
        // the finalization below. Growing on the run's own mean instead
        // would stall on alternating jitter whose prefixes are lopsided.
        let mut min_v = values[0];
        let mut max_v = values[0];
        while hi + 1 < n {
            let Some(v) = sc.n[hi + 1] else { break };
            if v.max(max_v) - v.min(min_v) <= 2.0 * tol + THRESH_EPS {
                min_v = v.min(min_v);
                max_v = v.max(max_v);
                values.push(v);
                hi += 1;
            } else {
                break;
            }
        }

        // Slope finalization: shorten from the right until the full
        // definition holds.
        while hi > lo && !run_is_valid(sc, lo, hi, cfg) {
            hi -= 1;
            values.pop();
        }

        // Maximality polish under the full check: re-extend right past the
        // range bound where the definition still holds, and absorb free
        // frames on the left the same way.
        loop {
            if hi + 1 < n && run_is_valid(sc, lo, hi + 1, cfg) {
                hi += 1;
                values.push(sc.n[hi].unwrap());
                continue;
            }
            if lo > free_from && run_is_valid(sc, lo - 1, hi, cfg) {
                lo -= 1;
                values.insert(0, sc.n[lo].unwrap());
                continue;
            }
            break;
        }

        if hi - lo + 1 >= cfg.cp_min_frames && run_is_valid(sc, lo, hi, cfg) {
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            out.push(Segment {
                kind: SegmentKind::CpNote,
                start: lo,
                end: hi,
                mean_semitone: Some(mean),
            });
            free_from = hi + 1;
            l = (hi + 1).max(scan_start + 1);
        } else {
            // Not a note; frames absorbed from the left go back to the pool.
            // The cursor must move past this scan's starting frame.
            l = scan_start + 1;
        }
    }
    Ok(out)
}

/// Complement of silences and CP-notes, as maximal runs.
pub fn derive_transients(
    n_frames: usize,
    silences: &[Segment],
    cp_notes: &[Segment],
) -> Result<Vec<Segment>> {
    let mut claimed: Vec<&Segment> = silences.iter().chain(cp_notes.iter()).collect();
    claimed.sort_by_key(|s| s.start);
    let mut next = 0usize;
    let mut out = Vec::new();
    for s in claimed {
        if s.end >= n_frames {
            return Err(GamakaError::InvalidInput(format!(
                "segment [{}, {}] exceeds contour length {n_frames}",
                s.start, s.end
            )));
        }
        if s.start < next && next > 0 {
            return Err(GamakaError::InvalidInput(format!(
                "overlapping input segments near frame {}",
                s.start
            )));
        }
        if s.start > next {
            out.push(Segment::new(SegmentKind::Transient, next, s.start - 1));
        }
        next = s.end + 1;
    }
    if next < n_frames {
        out.push(Segment::new(SegmentKind::Transient, next, n_frames - 1));
    }
    Ok(out)
}

/// Orders silences, CP-notes and transients into a full cover.
fn assemble(
    n_frames: usize,
    frame_ms: f64,
    silences: Vec<Segment>,
    cp_notes: Vec<Segment>,
    transients: Vec<Segment>,
) -> Segmentation {
    let mut segments: Vec<Segment> = silences
        .into_iter()
        .chain(cp_notes)
        .chain(transients)
        .collect();
    segments.sort_by_key(|s| s.start);
    Segmentation {
        segments,
        n_frames,
        frame_ms,
    }
}

/// Snaps stationary points inside transients to nearby CP-note peaks.
///
/// Stationary points are local extrema of the 3-frame median-smoothed
/// contour. If every (original) pitch value in the snap window around such a
/// point lies within `snap_tolerance` of one common peak, the window's frames
/// are relabeled as a CP-note whose mean is the peak value; the slope
/// condition is not enforced here. Overlapping snapped windows at the same
/// peak merge. Silences are never touched.
pub fn snap_stationary_points(
    sc: &SemitoneContour,
    seg: &Segmentation,
    cfg: &SegmentationConfig,
) -> Segmentation {
    let n = sc.len();
    let half = ((cfg.snap_window_ms / 2.0) / sc.frame_ms).floor() as usize;

    // 3-frame median smoothing over voiced triples.
    let smoothed: Vec<Option<f64>> = (0..n)
        .map(|l| {
            if l == 0 || l + 1 >= n {
                return sc.n[l];
            }
            match (sc.n[l - 1], sc.n[l], sc.n[l + 1]) {
                (Some(a), Some(b), Some(c)) => Some(median3(a, b, c)),
                (_, v, _) => v,
            }
        })
        .collect();

    // Snapped spans per transient: (start, end, peak).
    let mut snapped: Vec<(usize, usize, f64)> = Vec::new();
    for t in seg.segments.iter().filter(|s| s.kind == SegmentKind::Transient) {
        for l in t.start.max(1)..=t.end.min(n.saturating_sub(2)) {
            let (Some(prev), Some(cur), Some(next)) =
                (smoothed[l - 1], smoothed[l], smoothed[l + 1])
            else {
                continue;
            };
            let is_peak = cur >= prev && cur >= next;
            let is_valley = cur <= prev && cur <= next;
            if !is_peak && !is_valley {
                continue;
            }
            let Some(orig) = sc.n[l] else { continue };
            let Some(peak) = cfg.cp_peaks.nearest(orig) else { continue };
            let w_start = l.saturating_sub(half);
            let w_end = (l + half).min(n - 1);
            let all_near = (w_start..=w_end).all(|k| {
                sc.n[k].is_some_and(|v| (v - peak).abs() <= cfg.snap_tolerance + THRESH_EPS)
            });
            if !all_near {
                continue;
            }
            // Relabel only the transient's own frames.
            let s = w_start.max(t.start);
            let e = w_end.min(t.end);
            snapped.push((s, e, peak));
        }
    }
    if snapped.is_empty() {
        return seg.clone();
    }

    // Merge overlapping or adjacent snapped spans at the same peak.
    snapped.sort_by_key(|&(s, _, _)| s);
    let mut merged: Vec<(usize, usize, f64)> = Vec::new();
    for (s, e, p) in snapped {
        match merged.last_mut() {
            Some((_, le, lp)) if s <= *le + 1 && (*lp - p).abs() < 1e-12 => {
                *le = (*le).max(e);
            }
            Some((_, le, _)) if s <= *le => {
                // Different peaks cannot overlap (peaks are farther apart
                // than twice the tolerance); clip defensively.
                *le = (*le).max(e);
            }
            _ => merged.push((s, e, p)),
        }
    }

    let silences: Vec<Segment> = seg
        .segments
        .iter()
        .filter(|s| s.kind == SegmentKind::Silence)
        .cloned()
        .collect();
    let mut cp_notes: Vec<Segment> = seg
        .segments
        .iter()
        .filter(|s| s.kind == SegmentKind::CpNote)
        .cloned()
        .collect();
    for (s, e, p) in merged {
        cp_notes.push(Segment {
            kind: SegmentKind::CpNote,
            start: s,
            end: e,
            mean_semitone: Some(p),
        });
    }
    cp_notes.sort_by_key(|s| s.start);
    let transients = derive_transients(seg.n_frames, &silences, &cp_notes)
        .expect("snapped spans stay inside their transient");
    assemble(seg.n_frames, seg.frame_ms, silences, cp_notes, transients)
}

fn median3(a: f64, b: f64, c: f64) -> f64 {
    a.max(b.min(c)).min(b.max(c))
}

/// Full pipeline: frame grid, pitch tracking, semitone conversion, silence
/// and CP-note detection, snapping, transient derivation.
pub fn segment(buf: &AudioBuffer, tonic_hz: f64, cfg: &PipelineConfig) -> Result<Segmentation> {
    let grid = crate::audio::frame_grid(buf, cfg.frame_ms)?;
    let pc = track_pitch(buf, &grid, &cfg.tracker);
    let sc = to_semitones(&pc, tonic_hz)?;
    let silences = detect_silence(&pc)?;
    let cp_notes = detect_cp_notes(&sc, &cfg.segmentation)?;
    let transients = derive_transients(grid.n_frames, &silences, &cp_notes)?;
    let prelim = assemble(
        grid.n_frames,
        cfg.frame_ms,
        silences,
        cp_notes,
        transients,
    );
    let snapped = snap_stationary_points(&sc, &prelim, &cfg.segmentation);
    debug_assert!(snapped.validate().is_ok());
    Ok(snapped)
}

#[derive(Serialize)]
struct SegmentRecord {
    kind: &'static str,
    start_frame: usize,
    end_frame: usize,
    start_s: f64,
    end_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    mean_semitone: Option<f64>,
}

#[derive(Serialize)]
struct SegmentationDoc {
    schema_version: u32,
    frame_ms: f64,
    n_frames: usize,
    segments: Vec<SegmentRecord>,
}

/// Writes the segmentation as JSON. `end_s` is the exclusive end time of the
/// segment's final frame.
pub fn write_segmentation_json<W: Write>(out: W, seg: &Segmentation) -> Result<()> {
    let frame_s = seg.frame_ms / 1000.0;
    let doc = SegmentationDoc {
        schema_version: 1,
        frame_ms: seg.frame_ms,
        n_frames: seg.n_frames,
        segments: seg
            .segments
            .iter()
            .map(|s| SegmentRecord {
                kind: s.kind.as_str(),
                start_frame: s.start,
                end_frame: s.end,
                start_s: s.start as f64 * frame_s,
                end_s: (s.end + 1) as f64 * frame_s,
                mean_semitone: s.mean_semitone,
            })
            .collect(),
    };
    serde_json::to_writer_pretty(out, &doc)
        .map_err(|e| GamakaError::InvalidInput(format!("json write failed: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn contour(values: &[Option<f64>], frame_ms: f64) -> SemitoneContour {
        SemitoneContour {
            n: values.to_vec(),
            tonic_hz: 125.0,
            frame_ms,
        }
    }

    fn voiced(values: &[f64], frame_ms: f64) -> SemitoneContour {
        contour(
            &values.iter().map(|&v| Some(v)).collect::<Vec<_>>(),
            frame_ms,
        )
    }

    fn pitch(values: &[f64]) -> PitchContour {
        PitchContour {
            f: values.to_vec(),
            frame_ms: 32.0,
        }
    }

    #[test]
    fn silence_all_voiced() {
        let pc = pitch(&[100.0; 8]);
        assert!(detect_silence(&pc).unwrap().is_empty());
    }

    #[test]
    fn silence_all_unvoiced() {
        let pc = pitch(&[0.0; 8]);
        let sil = detect_silence(&pc).unwrap();
        assert_eq!(sil.len(), 1);
        assert_eq!((sil[0].start, sil[0].end), (0, 7));
    }

    #[test]
    fn silence_interior_run() {
        let mut f = vec![100.0; 10];
        f.extend(vec![0.0; 5]);
        f.extend(vec![100.0; 10]);
        let sil = detect_silence(&pitch(&f)).unwrap();
        assert_eq!(sil.len(), 1);
        assert_eq!((sil[0].start, sil[0].end), (10, 14));
    }

    #[test]
    fn slope_constant_ramp_reversed() {
        assert_eq!(best_fit_slope(&[1.5; 10], 32.0).unwrap(), 0.0);
        let ramp: Vec<f64> = (0..10).map(|k| k as f64 * 0.032).collect();
        let s = best_fit_slope(&ramp, 32.0).unwrap();
        assert!((s - 1.0).abs() < 1e-9, "ramp slope {s}");
        let rev: Vec<f64> = ramp.iter().rev().copied().collect();
        let sr = best_fit_slope(&rev, 32.0).unwrap();
        assert!((sr + s).abs() < 1e-12, "reversed slope {sr}");
        assert!(best_fit_slope(&[1.0], 32.0).is_err());
    }

    #[test]
    fn cp_constant_contour() {
        let sc = voiced(&[0.0; 30], 32.0);
        let cps = detect_cp_notes(&sc, &SegmentationConfig::default()).unwrap();
        assert_eq!(cps.len(), 1);
        assert_eq!((cps[0].start, cps[0].end), (0, 29));
        assert_eq!(cps[0].mean_semitone, Some(0.0));
    }

    #[test]
    fn cp_steep_ramp_yields_none() {
        // 0 -> 3.156 st over ~100 ms: slope far above 1 st/s.
        let ramp: Vec<f64> = (0..4).map(|k| k as f64 * 3.156 / 3.0).collect();
        let sc = voiced(&ramp, 32.0);
        let cps = detect_cp_notes(&sc, &SegmentationConfig::default()).unwrap();
        assert!(cps.is_empty(), "got {cps:?}");
    }

    #[test]
    fn cp_jittered_constant_is_single_run() {
        // +-0.29 st jitter about a constant; whole-run slope ~ 0.
        let vals: Vec<f64> = (0..24)
            .map(|k| 2.0 + if k % 2 == 0 { 0.29 } else { -0.29 })
            .collect();
        let sc = voiced(&vals, 32.0);
        let cps = detect_cp_notes(&sc, &SegmentationConfig::default()).unwrap();
        assert_eq!(cps.len(), 1, "{cps:?}");
        assert_eq!((cps[0].start, cps[0].end), (0, 23));
        assert!((cps[0].mean_semitone.unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn cp_run_shorter_than_min_not_emitted() {
        let sc = contour(&[None, Some(1.0), None, Some(2.0), Some(2.0), None], 32.0);
        let cps = detect_cp_notes(&sc, &SegmentationConfig::default()).unwrap();
        assert_eq!(cps.len(), 1);
        assert_eq!((cps[0].start, cps[0].end), (3, 4));
    }

    #[test]
    fn transients_complement() {
        let cps = vec![Segment::new(SegmentKind::CpNote, 0, 9)];
        let sils = vec![Segment::new(SegmentKind::Silence, 20, 29)];
        let tr = derive_transients(40, &sils, &cps).unwrap();
        assert_eq!(tr.len(), 2);
        assert_eq!((tr[0].start, tr[0].end), (10, 19));
        assert_eq!((tr[1].start, tr[1].end), (30, 39));

        assert!(derive_transients(10, &[], &[Segment::new(SegmentKind::CpNote, 0, 9)])
            .unwrap()
            .is_empty());
        let all = derive_transients(10, &[], &[]).unwrap();
        assert_eq!(all.len(), 1);
        assert_eq!((all[0].start, all[0].end), (0, 9));
    }

    #[test]
    fn transients_reject_overlap() {
        let cps = vec![Segment::new(SegmentKind::CpNote, 0, 9)];
        let sils = vec![Segment::new(SegmentKind::Silence, 5, 12)];
        assert!(derive_transients(20, &sils, &cps).is_err());
    }

    fn seg_of(sc: &SemitoneContour, cfg: &SegmentationConfig) -> Segmentation {
        let silences: Vec<Segment> = {
            // silence = unvoiced runs
            let f: Vec<f64> = sc
                .n
                .iter()
                .map(|v| v.map_or(0.0, |st| 125.0 * (st / 12.0).exp2()))
                .collect();
            detect_silence(&PitchContour {
                f,
                frame_ms: sc.frame_ms,
            })
            .unwrap()
        };
        let cps = detect_cp_notes(sc, cfg).unwrap();
        let tr = derive_transients(sc.len(), &silences, &cps).unwrap();
        assemble(sc.len(), sc.frame_ms, silences, cps, tr)
    }

    #[test]
    fn snap_flat_crest_at_peak() {
        // Steep rise, ~3-frame crest drifting through 2.0 st, steep fall:
        // slope disqualifies the crest as a CP-note, snapping reclaims it.
        let vals = [0.0, 0.0, 0.0, 1.0, 1.8, 2.25, 1.9, 0.9, 0.0, 0.0, 0.0];
        let sc = voiced(&vals, 32.0);
        let cfg = SegmentationConfig::default();
        let before = seg_of(&sc, &cfg);
        assert_eq!(before.count(SegmentKind::CpNote), 2, "{before:?}");
        let after = snap_stationary_points(&sc, &before, &cfg);
        after.validate().unwrap();
        assert_eq!(after.count(SegmentKind::CpNote), 3, "{after:?}");
        let crest = after
            .segments
            .iter()
            .find(|s| s.kind == SegmentKind::CpNote && s.start >= 4)
            .unwrap();
        assert_eq!(crest.mean_semitone, Some(2.0));
        assert!(crest.start >= 4 && crest.end <= 6, "{crest:?}");
    }

    #[test]
    fn snap_crest_between_peaks_unchanged() {
        let vals = [0.0, 0.0, 0.0, 1.2, 2.3, 2.5, 2.4, 1.1, 0.0, 0.0, 0.0];
        let sc = voiced(&vals, 32.0);
        let cfg = SegmentationConfig::default();
        let before = seg_of(&sc, &cfg);
        let after = snap_stationary_points(&sc, &before, &cfg);
        assert_eq!(after, before);
    }

    #[test]
    fn snap_no_stationary_points_is_identity() {
        // Monotone glide between two notes: no extremum inside the transient.
        let vals = [0.0, 0.0, 0.0, 0.9, 1.9, 2.9, 4.0, 4.0, 4.0];
        let sc = voiced(&vals, 32.0);
        let cfg = SegmentationConfig::default();
        let before = seg_of(&sc, &cfg);
        let after = snap_stationary_points(&sc, &before, &cfg);
        assert_eq!(after, before);
    }

    #[test]
    fn snapping_never_shrinks_cp_nor_touches_silence() {
        let vals = [
            None,
            None,
            Some(0.0),
            Some(0.0),
            Some(0.0),
            Some(1.0),
            Some(1.95),
            Some(2.2),
            Some(1.9),
            Some(1.0),
            Some(0.05),
            Some(0.0),
            None,
            None,
        ];
        let sc = contour(&vals, 32.0);
        let cfg = SegmentationConfig::default();
        let before = seg_of(&sc, &cfg);
        let after = snap_stationary_points(&sc, &before, &cfg);
        after.validate().unwrap();
        assert!(
            after.class_frames(SegmentKind::CpNote) >= before.class_frames(SegmentKind::CpNote)
        );
        let silences = |s: &Segmentation| {
            s.segments
                .iter()
                .filter(|x| x.kind == SegmentKind::Silence)
                .cloned()
                .collect::<Vec<_>>()
        };
        assert_eq!(silences(&before), silences(&after));
    }

    #[test]
    fn segmentation_validate_catches_errors() {
        let bad = Segmentation {
            segments: vec![
                Segment::new(SegmentKind::CpNote, 0, 4),
                Segment::new(SegmentKind::Transient, 6, 9),
            ],
            n_frames: 10,
            frame_ms: 32.0,
        };
        assert!(bad.validate().is_err());

        let adjacent_silence = Segmentation {
            segments: vec![
                Segment::new(SegmentKind::Silence, 0, 4),
                Segment::new(SegmentKind::Silence, 5, 9),
            ],
            n_frames: 10,
            frame_ms: 32.0,
        };
        assert!(adjacent_silence.validate().is_err());
    }

    #[test]
    fn json_export_schema() {
        let seg = Segmentation {
            segments: vec![
                Segment {
                    kind: SegmentKind::CpNote,
                    start: 0,
                    end: 1,
                    mean_semitone: Some(0.5),
                },
                Segment::new(SegmentKind::Transient, 2, 3),
            ],
            n_frames: 4,
            frame_ms: 32.0,
        };
        let mut out = Vec::new();
        write_segmentation_json(&mut out, &seg).unwrap();
        let doc: serde_json::Value = serde_json::from_slice(&out).unwrap();
        assert_eq!(doc["schema_version"], 1);
        assert_eq!(doc["segments"][0]["kind"], "cp_note");
        assert_eq!(doc["segments"][0]["mean_semitone"], 0.5);
        assert_eq!(doc["segments"][1]["kind"], "transient");
        assert!(doc["segments"][1].get("mean_semitone").is_none());
        assert_eq!(doc["segments"][1]["start_s"], 0.064);
    }
}
