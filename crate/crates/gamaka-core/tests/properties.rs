//! Property tests for the structural invariants: frame decomposition,
//! quantization round-trips, segmentation coverage, snapping monotonicity,
//! plan arithmetic and the extension primitives.

use proptest::prelude::*;

use gamaka_core::analysis::ratio_report;
use gamaka_core::audio::{frame_grid, quantize16, AudioBuffer};
use gamaka_core::pitch::{to_semitones, PitchContour, SemitoneContour};
use gamaka_core::segment::{
    derive_transients, detect_cp_notes, detect_silence, snap_stationary_points, Segment,
    SegmentKind, Segmentation, SegmentationConfig,
};
use gamaka_core::timescale::{
    build_plan, effective_factor, extend_pitch_synchronous, extend_silence,
};

fn contour_strategy() -> impl Strategy<Value = Vec<Option<f64>>> {
    prop::collection::vec(
        prop::option::weighted(0.8, -5.0..10.0f64),
        1..80,
    )
}

/// Builds the full segmentation from a raw contour the way the pipeline does
/// (without audio): silences from unvoiced frames, CP-notes, complement.
fn segment_contour(values: &[Option<f64>]) -> Segmentation {
    let f: Vec<f64> = values
        .iter()
        .map(|v| v.map_or(0.0, |st| 125.0 * (st / 12.0).exp2()))
        .collect();
    let pc = PitchContour { f, frame_ms: 32.0 };
    let sc = SemitoneContour {
        n: values.to_vec(),
        tonic_hz: 125.0,
        frame_ms: 32.0,
    };
    let cfg = SegmentationConfig::default();
    let silences = detect_silence(&pc).unwrap();
    let cps = detect_cp_notes(&sc, &cfg).unwrap();
    let transients = derive_transients(values.len(), &silences, &cps).unwrap();
    let mut segments: Vec<Segment> = silences.into_iter().chain(cps).chain(transients).collect();
    segments.sort_by_key(|s| s.start);
    let seg = Segmentation {
        segments,
        n_frames: values.len(),
        frame_ms: 32.0,
    };
    snap_stationary_points(&sc, &seg, &cfg)
}

fn segmentation_strategy() -> impl Strategy<Value = Segmentation> {
    prop::collection::vec((0..3usize, 1..20usize), 1..12).prop_map(|parts| {
        let mut segments: Vec<Segment> = Vec::new();
        let mut start = 0usize;
        for (kind_idx, dur) in parts {
            let kind = match kind_idx {
                0 => SegmentKind::CpNote,
                1 => SegmentKind::Transient,
                _ => SegmentKind::Silence,
            };
            // Merge adjacent silences to honor the structural invariant.
            if kind == SegmentKind::Silence
                && segments.last().is_some_and(|s| s.kind == SegmentKind::Silence)
            {
                let last = segments.last_mut().unwrap();
                last.end += dur;
                start += dur;
                continue;
            }
            segments.push(Segment::new(kind, start, start + dur - 1));
            start += dur;
        }
        Segmentation {
            segments,
            n_frames: start,
            frame_ms: 32.0,
        }
    })
}

proptest! {
    #[test]
    fn frames_concatenate_to_prefix(
        len in 10usize..4000,
        frame_ms in 1.0f64..80.0,
    ) {
        let samples: Vec<f32> = (0..len).map(|i| ((i * 31 % 200) as f32 - 100.0) / 128.0).collect();
        let buf = AudioBuffer::new(samples, 8000).unwrap();
        if let Ok(grid) = frame_grid(&buf, frame_ms) {
            let mut concat = Vec::new();
            for l in 0..grid.n_frames {
                concat.extend_from_slice(&buf.samples()[grid.frame_range(l)]);
            }
            prop_assert_eq!(
                concat.as_slice(),
                &buf.samples()[..grid.n_frames * grid.frame_len_samples]
            );
        }
    }

    #[test]
    fn quantization_is_idempotent(samples in prop::collection::vec(-1.0f32..1.0, 1..200)) {
        for &s in &samples {
            let q = quantize16(s);
            let back = q as f32 / 32768.0;
            prop_assert_eq!(quantize16(back), q);
        }
    }

    #[test]
    fn semitone_conversion_is_monotone(
        mut freqs in prop::collection::vec(30.0f64..2000.0, 2..40),
        tonic in 50.0f64..500.0,
    ) {
        freqs.sort_by(f64::total_cmp);
        freqs.dedup_by(|a, b| *a == *b);
        let pc = PitchContour { f: freqs, frame_ms: 32.0 };
        let sc = to_semitones(&pc, tonic).unwrap();
        for w in sc.n.windows(2) {
            prop_assert!(w[1].unwrap() > w[0].unwrap());
        }
    }

    #[test]
    fn segmentation_covers_every_frame_once(values in contour_strategy()) {
        let seg = segment_contour(&values);
        seg.validate().unwrap();
        prop_assert_eq!(seg.n_frames, values.len());
        // Silence segments exactly cover the unvoiced frames.
        let mut silent = vec![false; values.len()];
        for s in seg.segments.iter().filter(|s| s.kind == SegmentKind::Silence) {
            silent[s.start..=s.end].fill(true);
        }
        for (l, v) in values.iter().enumerate() {
            prop_assert_eq!(silent[l], v.is_none(), "frame {}", l);
        }
    }

    #[test]
    fn segmentation_is_deterministic(values in contour_strategy()) {
        let a = segment_contour(&values);
        let b = segment_contour(&values);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn snapping_grows_cp_and_preserves_silence(values in contour_strategy()) {
        let f: Vec<f64> = values
            .iter()
            .map(|v| v.map_or(0.0, |st| 125.0 * (st / 12.0).exp2()))
            .collect();
        let pc = PitchContour { f, frame_ms: 32.0 };
        let sc = SemitoneContour {
            n: values.clone(),
            tonic_hz: 125.0,
            frame_ms: 32.0,
        };
        let cfg = SegmentationConfig::default();
        let silences = detect_silence(&pc).unwrap();
        let cps = detect_cp_notes(&sc, &cfg).unwrap();
        let transients = derive_transients(values.len(), &silences, &cps).unwrap();
        let mut segments: Vec<Segment> =
            silences.into_iter().chain(cps).chain(transients).collect();
        segments.sort_by_key(|s| s.start);
        let before = Segmentation {
            segments,
            n_frames: values.len(),
            frame_ms: 32.0,
        };
        let after = snap_stationary_points(&sc, &before, &cfg);
        after.validate().unwrap();
        prop_assert!(
            after.class_frames(SegmentKind::CpNote) >= before.class_frames(SegmentKind::CpNote)
        );
        let silences_of = |s: &Segmentation| -> Vec<(usize, usize)> {
            s.segments
                .iter()
                .filter(|x| x.kind == SegmentKind::Silence)
                .map(|x| (x.start, x.end))
                .collect()
        };
        prop_assert_eq!(silences_of(&before), silences_of(&after));
    }

    #[test]
    fn plans_preserve_transients_and_order(seg in segmentation_strategy(), r in 1u32..5) {
        let plan = build_plan(&seg, r, 250.0).unwrap();
        // Contiguous output from zero, input order preserved.
        let mut next = 0usize;
        for (e, s) in plan.entries.iter().zip(&seg.segments) {
            prop_assert_eq!(e.in_start, s.start);
            prop_assert_eq!(e.out_start, next);
            prop_assert!(e.out_end >= e.out_start);
            next = e.out_end + 1;
        }
        prop_assert_eq!(next, plan.out_n_frames);
        // Transient frames exactly preserved in total.
        let t_in: usize = plan
            .entries
            .iter()
            .filter(|e| e.kind == SegmentKind::Transient)
            .map(|e| e.in_frames())
            .sum();
        let t_out: usize = plan
            .entries
            .iter()
            .filter(|e| e.kind == SegmentKind::Transient)
            .map(|e| e.out_frames())
            .sum();
        prop_assert_eq!(t_in, t_out);
        // CP caps respected, nothing ever shrinks.
        let cap_frames = (250.0f64 / 32.0).ceil() as usize;
        for e in plan.entries.iter().filter(|e| e.kind == SegmentKind::CpNote) {
            prop_assert!(e.out_frames() >= e.in_frames());
            prop_assert!(e.out_frames() <= (e.in_frames() * r as usize).max(cap_frames));
        }
        // Effective factor bounds and monotonicity in R.
        let r_eff = effective_factor(&plan);
        prop_assert!(r_eff >= 1.0 - 1e-12);
        prop_assert!(r_eff <= r as f64 + 1e-12);
        if r > 1 {
            let prev = effective_factor(&build_plan(&seg, r - 1, 250.0).unwrap());
            prop_assert!(r_eff >= prev - 1e-12);
            if plan
                .entries
                .iter()
                .any(|e| e.kind == SegmentKind::Transient)
                && plan.entries.iter().any(|e| e.kind != SegmentKind::Transient)
            {
                prop_assert!(r_eff < r as f64);
            }
        }
    }

    #[test]
    fn extension_primitives_hit_exact_lengths(
        len in 8usize..2000,
        period in 2usize..400,
        factor in 1.0f64..4.0,
    ) {
        let span: Vec<f32> = (0..len)
            .map(|i| (i as f32 * 0.37).sin() * 0.5)
            .collect();
        let target = (len as f64 * factor).round() as usize;
        prop_assert_eq!(extend_pitch_synchronous(&span, period, target).len(), target);
        prop_assert_eq!(extend_silence(&span, target).len(), target);
        prop_assert_eq!(extend_silence(&span, len / 2).len(), len / 2);
    }

    #[test]
    fn ratio_report_inverts_under_swap(
        a in segmentation_strategy(),
        b in segmentation_strategy(),
    ) {
        let fwd = ratio_report(&a, &b);
        let rev = ratio_report(&b, &a);
        for (f, r) in fwd.rows.iter().zip(&rev.rows) {
            prop_assert_eq!(&f.class, &r.class);
            if f.ratio.is_finite() && f.ratio > 0.0 && r.ratio.is_finite() {
                prop_assert!((f.ratio * r.ratio - 1.0).abs() < 1e-9, "{}", f.class);
            }
        }
    }
}
