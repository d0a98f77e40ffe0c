//! Analysis and non-uniform time-scale modification of monophonic melodic
//! audio, aimed at material (such as Carnatic music) where continuous pitch
//! movement carries musical meaning.
//!
//! The signal is segmented into constant-pitch notes (CP-notes), pitch
//! transients and silence. Slowing down then treats the classes differently:
//! CP-notes and silence are stretched by the requested factor while transients
//! keep their original duration, so the pitch movement itself is never
//! deformed. The achieved (effective) factor is therefore smaller than the
//! requested one whenever transients are present.
//!
//! # Pipeline
//!
//! ```text
//! WAV -> AudioBuffer -> FrameGrid -> PitchContour -> SemitoneContour
//!     -> Segmentation -> ScalePlan -> rendered AudioBuffer -> WAV
//! ```
//!
//! # Quick start
//!
//! ```
//! use gamaka_core::analysis::{synth_gamaka, GamakaParams};
//! use gamaka_core::segment::{segment, PipelineConfig};
//! use gamaka_core::timescale::{build_plan, effective_factor, render};
//!
//! // A synthetic "shake": steady 125 Hz, excursion to 150 Hz and back, steady.
//! let buf = synth_gamaka(&GamakaParams::default(), 44100).unwrap();
//! let seg = segment(&buf, 125.0, &PipelineConfig::default()).unwrap();
//! let plan = build_plan(&seg, 2, 250.0).unwrap();
//! let slowed = render(&buf, &seg, &plan).unwrap();
//! assert!(slowed.len() > buf.len());
//! assert!(effective_factor(&plan) < 2.0);
//! ```

pub mod analysis;
pub mod audio;
pub mod pitch;
pub mod segment;
pub mod timescale;

pub use audio::{frame_grid, frame_rms, read_wav, write_wav, AudioBuffer, FrameGrid};
pub use pitch::{
    estimate_frame_pitch, stft_frame, to_semitones, track_pitch, PitchContour, SemitoneContour,
    TrackerConfig, WindowShape,
};
pub use segment::{
    segment, PipelineConfig, Segment, SegmentKind, Segmentation, SegmentationConfig,
};
pub use timescale::{
    build_plan, effective_factor, render, uniform_scale, PlanEntry, ScalePlan, ScaleReport,
};

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum GamakaError {
    /// Underlying I/O failure, annotated with the path involved.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// The WAV file uses an encoding outside the supported set
    /// (PCM 16-bit or IEEE float 32-bit, 1 or 2 channels).
    #[error("unsupported WAV encoding in {0}: {1}")]
    UnsupportedWav(String, String),

    /// The WAV file ended before its declared data length.
    #[error("truncated WAV file {0}: {1}")]
    TruncatedWav(String, String),

    /// A malformed WAV container (bad RIFF header, bad chunk sizes, ...).
    #[error("malformed WAV file {0}: {1}")]
    MalformedWav(String, String),

    /// A parameter or input violated an operation's preconditions.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The buffer is shorter than one analysis frame.
    #[error("buffer too short: {len} samples, need at least {needed}")]
    BufferTooShort { len: usize, needed: usize },

    /// Frame index outside the grid.
    #[error("frame index {index} out of range (grid has {n_frames} frames)")]
    FrameOutOfRange { index: usize, n_frames: usize },

    /// A plan was applied to audio or a segmentation it was not built from.
    #[error("plan/segmentation mismatch: {0}")]
    MismatchedPlan(String),
}

impl GamakaError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        GamakaError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Library-wide result alias.
pub type Result<T> = std::result::Result<T, GamakaError>;
