//! Command-line front end: segmentation inspection, non-uniform slow-down,
//! uniform-baseline comparison, two-speed ratio analysis and fixture
//! synthesis.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use gamaka_core::analysis::{
    ratio_report, synth_gamaka, write_ratio_csv, GamakaParams, TransitionShape,
};
use gamaka_core::audio::{frame_grid, read_wav, write_wav, AudioBuffer};
use gamaka_core::pitch::{track_pitch, write_contour_csv, TrackerConfig};
use gamaka_core::segment::{
    segment, write_segmentation_json, PipelineConfig, SegmentKind, Segmentation,
    SegmentationConfig,
};
use gamaka_core::timescale::{
    build_plan_rational, build_plan_with_audio, effective_factor, render, scale_report,
    uniform_scale, write_plan_json, ScalePlan,
};
use gamaka_core::{GamakaError, Result};

#[derive(Parser)]
#[command(
    name = "gamaka",
    version,
    about = "Segments melodic audio into constant-pitch notes, transients and silence, \
             and slows it down without stretching the transients."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment a recording; write segmentation JSON and a duration summary.
    Segment(SegmentArgs),
    /// Slow a recording down; CP-notes and silences stretch, transients do not.
    Slowdown(SlowdownArgs),
    /// Render non-uniform and uniform stretches of matched duration for A/B listening.
    Compare(CompareArgs),
    /// Per-class duration ratios between two renditions of the same material.
    Ratios(RatiosArgs),
    /// Synthesize a test fixture (steady tone with one pitch excursion).
    Synth(SynthArgs),
}

/// Analysis options shared by the pitch-relative commands. Defaults:
/// 32 ms frames, 0.3 st tolerance, 1 st/s slope limit, 80 ms snap window.
#[derive(Args, Clone)]
struct AnalysisOpts {
    /// Tonic frequency in Hz (all semitone values are relative to it).
    #[arg(long)]
    tonic: f64,
    /// Analysis frame length, milliseconds.
    #[arg(long, default_value_t = 32.0)]
    frame_ms: f64,
    /// CP-note tolerance around the run mean, semitones.
    #[arg(long, default_value_t = 0.3)]
    cp_tolerance: f64,
    /// Maximum |best-fit slope| of a CP-note, semitones per second.
    #[arg(long, default_value_t = 1.0)]
    cp_max_slope: f64,
    /// Minimum CP-note length, frames.
    #[arg(long, default_value_t = 2)]
    cp_min_frames: usize,
    /// Total window around a stationary point for snapping, milliseconds.
    #[arg(long, default_value_t = 80.0)]
    snap_window_ms: f64,
    /// Snapping tolerance around integer-semitone peaks, semitones.
    #[arg(long, default_value_t = 0.3)]
    snap_tolerance: f64,
    /// Lowest tracked fundamental, Hz.
    #[arg(long, default_value_t = 60.0)]
    fmin: f64,
    /// Highest tracked fundamental, Hz.
    #[arg(long, default_value_t = 1000.0)]
    fmax: f64,
}

impl AnalysisOpts {
    fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            frame_ms: self.frame_ms,
            tracker: TrackerConfig {
                fmin: self.fmin,
                fmax: self.fmax,
                ..TrackerConfig::default()
            },
            segmentation: SegmentationConfig {
                cp_tolerance: self.cp_tolerance,
                cp_max_slope: self.cp_max_slope,
                cp_min_frames: self.cp_min_frames,
                snap_window_ms: self.snap_window_ms,
                snap_tolerance: self.snap_tolerance,
                ..SegmentationConfig::default()
            },
        }
    }
}

#[derive(Args)]
struct SegmentArgs {
    /// Input WAV file (PCM 16-bit or float 32-bit, mono or stereo).
    input: PathBuf,
    #[command(flatten)]
    opts: AnalysisOpts,
    /// Segmentation JSON output path.
    #[arg(long)]
    out: PathBuf,
    /// Optional pitch-contour CSV output path.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct SlowdownArgs {
    input: PathBuf,
    #[command(flatten)]
    opts: AnalysisOpts,
    /// Slow-down factor R (integer unless --rational is given).
    #[arg(long)]
    factor: f64,
    /// Cap on the output duration of short CP-notes, milliseconds.
    #[arg(long, default_value_t = 250.0)]
    cp_cap_ms: f64,
    /// Accept non-integer factors (plans at ceil(R), trims extensions).
    #[arg(long, default_value_t = false)]
    rational: bool,
    /// Slowed WAV output path.
    #[arg(long)]
    out: PathBuf,
    /// Optional plan JSON output path.
    #[arg(long)]
    plan: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    input: PathBuf,
    #[command(flatten)]
    opts: AnalysisOpts,
    /// Slow-down factor R given to the non-uniform algorithm; the uniform
    /// baseline runs at the achieved factor R'.
    #[arg(long)]
    factor: f64,
    #[arg(long, default_value_t = 250.0)]
    cp_cap_ms: f64,
    /// Output directory for nonuniform.wav, uniform.wav and manifest.json.
    #[arg(long)]
    outdir: PathBuf,
    /// Also split both outputs at these times (seconds, repeatable).
    #[arg(long = "split-at")]
    split_at: Vec<f64>,
}

#[derive(Args)]
struct RatiosArgs {
    /// First-speed (slower) rendition.
    speed1: PathBuf,
    /// Second-speed (faster) rendition.
    speed2: PathBuf,
    #[command(flatten)]
    opts: AnalysisOpts,
    /// Ratio report CSV output path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// Fixture preset; `kampita` is the built-in oscillating-shake example.
    #[arg(long)]
    preset: Option<String>,
    /// Steady frequency, Hz.
    #[arg(long, default_value_t = 125.0)]
    f0: f64,
    /// Excursion target frequency, Hz.
    #[arg(long, default_value_t = 150.0)]
    f1: f64,
    /// Steady duration before the excursion, seconds.
    #[arg(long, default_value_t = 0.07)]
    tc1: f64,
    /// Steady duration after the excursion, seconds.
    #[arg(long, default_value_t = 0.07)]
    tc2: f64,
    /// Excursion duration (up and back), seconds.
    #[arg(long, default_value_t = 0.2)]
    tt: f64,
    /// Fundamental amplitude.
    #[arg(long, default_value_t = 0.4)]
    amplitude: f64,
    /// Harmonics as `multiple:amplitude` pairs, e.g. `2:0.5,3:0.5`; `none` for a pure tone.
    #[arg(long, default_value = "2:0.5,3:0.5")]
    harmonics: String,
    /// Use a raised-cosine transition instead of a linear glide.
    #[arg(long, default_value_t = false)]
    raised_cosine: bool,
    /// Sample rate, Hz.
    #[arg(long, default_value_t = 44100)]
    sr: u32,
    /// Fixture WAV output path.
    #[arg(long)]
    out: PathBuf,
}

/// Paths written so far; removed again if the command fails.
#[derive(Default)]
struct Outputs {
    written: Vec<PathBuf>,
}

impl Outputs {
    fn add(&mut self, p: &Path) {
        self.written.push(p.to_path_buf());
    }

    fn remove_all(&self) {
        for p in &self.written {
            let _ = std::fs::remove_file(p);
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("GAMAKA_LOG")).init();
    let cli = Cli::parse();
    let mut outputs = Outputs::default();
    let result = match cli.command {
        Command::Segment(args) => cmd_segment(args, &mut outputs),
        Command::Slowdown(args) => cmd_slowdown(args, &mut outputs),
        Command::Compare(args) => cmd_compare(args, &mut outputs),
        Command::Ratios(args) => cmd_ratios(args, &mut outputs),
        Command::Synth(args) => cmd_synth(args, &mut outputs),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            outputs.remove_all();
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn check_tonic(opts: &AnalysisOpts) -> Result<()> {
    if !opts.tonic.is_finite() || opts.tonic <= 0.0 {
        return Err(GamakaError::InvalidInput(format!(
            "tonic must be a positive frequency, got {}",
            opts.tonic
        )));
    }
    Ok(())
}

fn create(path: &Path, outputs: &mut Outputs) -> Result<BufWriter<File>> {
    let f = File::create(path).map_err(|e| GamakaError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    outputs.add(path);
    Ok(BufWriter::new(f))
}

fn print_summary(seg: &Segmentation) {
    println!("class       segments  duration_s");
    for (name, kind) in [
        ("cp_notes", SegmentKind::CpNote),
        ("transients", SegmentKind::Transient),
        ("silence", SegmentKind::Silence),
    ] {
        println!(
            "{name:<11} {:>8}  {:>10.3}",
            seg.count(kind),
            seg.class_duration_s(kind)
        );
    }
    println!(
        "total       {:>8}  {:>10.3}",
        seg.segments.len(),
        seg.total_duration_s()
    );
}

fn cmd_segment(args: SegmentArgs, outputs: &mut Outputs) -> Result<()> {
    check_tonic(&args.opts)?;
    let buf = read_wav(&args.input)?;
    log::info!("read {} samples at {} Hz", buf.len(), buf.sample_rate());
    let cfg = args.opts.pipeline();
    let seg = segment(&buf, args.opts.tonic, &cfg)?;
    write_segmentation_json(create(&args.out, outputs)?, &seg)?;
    if let Some(csv_path) = &args.csv {
        let grid = frame_grid(&buf, cfg.frame_ms)?;
        let pc = track_pitch(&buf, &grid, &cfg.tracker);
        write_contour_csv(create(csv_path, outputs)?, &pc, args.opts.tonic)?;
    }
    print_summary(&seg);
    Ok(())
}

fn plan_for(
    buf: &AudioBuffer,
    seg: &Segmentation,
    factor: f64,
    cp_cap_ms: f64,
    rational: bool,
) -> Result<ScalePlan> {
    let is_integer = (factor - factor.round()).abs() < 1e-9;
    if is_integer {
        if factor < 1.0 {
            return Err(GamakaError::InvalidInput(
                "slow-down factor must be >= 1".into(),
            ));
        }
        build_plan_with_audio(buf, seg, factor.round() as u32, cp_cap_ms)
    } else if rational {
        build_plan_rational(seg, factor, cp_cap_ms)
    } else {
        Err(GamakaError::InvalidInput(format!(
            "factor {factor} is not an integer; pass --rational to enable the \
             rational-factor extension"
        )))
    }
}

fn cmd_slowdown(args: SlowdownArgs, outputs: &mut Outputs) -> Result<()> {
    check_tonic(&args.opts)?;
    let buf = read_wav(&args.input)?;
    let cfg = args.opts.pipeline();
    let seg = segment(&buf, args.opts.tonic, &cfg)?;
    let plan = plan_for(&buf, &seg, args.factor, args.cp_cap_ms, args.rational)?;
    let out = render(&buf, &seg, &plan)?;
    write_wav(&args.out, &out)?;
    outputs.add(&args.out);
    if let Some(plan_path) = &args.plan {
        write_plan_json(create(plan_path, outputs)?, &plan)?;
    }
    let rep = scale_report(&plan);
    println!("R {:.3}", rep.r);
    println!("R_effective {:.3}", rep.r_effective);
    Ok(())
}

#[derive(Serialize)]
struct SplitClip {
    index: usize,
    start_s: f64,
    end_s: f64,
    nonuniform_path: String,
    uniform_path: String,
}

#[derive(Serialize)]
struct CompareManifest {
    schema_version: u32,
    input: String,
    tonic_hz: f64,
    r: f64,
    r_effective: f64,
    input_duration_s: f64,
    nonuniform_path: String,
    nonuniform_duration_s: f64,
    uniform_path: String,
    uniform_duration_s: f64,
    splits: Vec<SplitClip>,
}

fn split_buffer(buf: &AudioBuffer, at_s: &[f64]) -> Vec<AudioBuffer> {
    let mut cuts: Vec<usize> = at_s
        .iter()
        .map(|&s| ((s * buf.sample_rate() as f64) as usize).min(buf.len()))
        .collect();
    cuts.sort_unstable();
    cuts.dedup();
    let mut parts = Vec::new();
    let mut prev = 0usize;
    for c in cuts.into_iter().chain([buf.len()]) {
        if c > prev {
            parts.push(
                AudioBuffer::new(buf.samples()[prev..c].to_vec(), buf.sample_rate())
                    .expect("slice of a valid buffer"),
            );
            prev = c;
        }
    }
    parts
}

fn cmd_compare(args: CompareArgs, outputs: &mut Outputs) -> Result<()> {
    check_tonic(&args.opts)?;
    let buf = read_wav(&args.input)?;
    let cfg = args.opts.pipeline();
    let seg = segment(&buf, args.opts.tonic, &cfg)?;
    let plan = plan_for(&buf, &seg, args.factor, args.cp_cap_ms, false)?;
    let nonuniform = render(&buf, &seg, &plan)?;
    let r_eff = effective_factor(&plan);

    // The uniform baseline runs at the achieved factor R' on the
    // frame-aligned input prefix, so both outputs match in duration.
    let grid = frame_grid(&buf, cfg.frame_ms)?;
    let aligned = AudioBuffer::new(
        buf.samples()[..grid.n_frames * grid.frame_len_samples].to_vec(),
        buf.sample_rate(),
    )?;
    let uniform = uniform_scale(&aligned, r_eff)?;

    std::fs::create_dir_all(&args.outdir).map_err(|e| GamakaError::Io {
        path: args.outdir.display().to_string(),
        source: e,
    })?;
    let nu_path = args.outdir.join("nonuniform.wav");
    let un_path = args.outdir.join("uniform.wav");
    write_wav(&nu_path, &nonuniform)?;
    outputs.add(&nu_path);
    write_wav(&un_path, &uniform)?;
    outputs.add(&un_path);

    let mut splits = Vec::new();
    if !args.split_at.is_empty() {
        let nu_parts = split_buffer(&nonuniform, &args.split_at);
        let un_parts = split_buffer(&uniform, &args.split_at);
        let mut start_s = 0.0;
        for (i, (nu, un)) in nu_parts.iter().zip(&un_parts).enumerate() {
            let nu_p = args.outdir.join(format!("nonuniform_part{}.wav", i + 1));
            let un_p = args.outdir.join(format!("uniform_part{}.wav", i + 1));
            write_wav(&nu_p, nu)?;
            outputs.add(&nu_p);
            write_wav(&un_p, un)?;
            outputs.add(&un_p);
            splits.push(SplitClip {
                index: i + 1,
                start_s,
                end_s: start_s + nu.duration_s(),
                nonuniform_path: nu_p.display().to_string(),
                uniform_path: un_p.display().to_string(),
            });
            start_s += nu.duration_s();
        }
    }

    let manifest = CompareManifest {
        schema_version: 1,
        input: args.input.display().to_string(),
        tonic_hz: args.opts.tonic,
        r: args.factor,
        r_effective: r_eff,
        input_duration_s: buf.duration_s(),
        nonuniform_path: nu_path.display().to_string(),
        nonuniform_duration_s: nonuniform.duration_s(),
        uniform_path: un_path.display().to_string(),
        uniform_duration_s: uniform.duration_s(),
        splits,
    };
    let manifest_path = args.outdir.join("manifest.json");
    serde_json::to_writer_pretty(create(&manifest_path, outputs)?, &manifest)
        .map_err(|e| GamakaError::InvalidInput(format!("manifest write failed: {e}")))?;
    println!("R {:.3}", args.factor);
    println!("R_effective {r_eff:.3}");
    println!("wrote {}", manifest_path.display());
    Ok(())
}

fn cmd_ratios(args: RatiosArgs, outputs: &mut Outputs) -> Result<()> {
    check_tonic(&args.opts)?;
    let cfg = args.opts.pipeline();
    let seg1 = segment(&read_wav(&args.speed1)?, args.opts.tonic, &cfg)?;
    let seg2 = segment(&read_wav(&args.speed2)?, args.opts.tonic, &cfg)?;
    let report = ratio_report(&seg1, &seg2);
    write_ratio_csv(create(&args.out, outputs)?, &report)?;
    for row in &report.rows {
        println!(
            "{:<11} {:>10.3} {:>10.3} {:>8.3}",
            row.class, row.speed1_s, row.speed2_s, row.ratio
        );
    }
    Ok(())
}

fn parse_harmonics(spec: &str) -> Result<Vec<(f64, f64)>> {
    let spec = spec.trim();
    if spec.is_empty() || spec == "none" {
        return Ok(Vec::new());
    }
    spec.split(',')
        .map(|pair| {
            let (m, a) = pair.split_once(':').ok_or_else(|| {
                GamakaError::InvalidInput(format!(
                    "harmonic '{pair}' is not of the form multiple:amplitude"
                ))
            })?;
            let m: f64 = m
                .trim()
                .parse()
                .map_err(|_| GamakaError::InvalidInput(format!("bad harmonic multiple '{m}'")))?;
            let a: f64 = a
                .trim()
                .parse()
                .map_err(|_| GamakaError::InvalidInput(format!("bad harmonic amplitude '{a}'")))?;
            Ok((m, a))
        })
        .collect()
}

fn cmd_synth(args: SynthArgs, outputs: &mut Outputs) -> Result<()> {
    let params = match args.preset.as_deref() {
        Some("kampita") => GamakaParams::default(),
        Some(other) => {
            return Err(GamakaError::InvalidInput(format!(
                "unknown preset '{other}' (available: kampita)"
            )));
        }
        None => GamakaParams {
            f0: args.f0,
            f1: args.f1,
            t_c1: args.tc1,
            t_c2: args.tc2,
            t_t: args.tt,
            amplitude: args.amplitude,
            phase: 0.0,
            harmonics: parse_harmonics(&args.harmonics)?,
            transition: if args.raised_cosine {
                TransitionShape::RaisedCosine
            } else {
                TransitionShape::Linear
            },
        },
    };
    let buf = synth_gamaka(&params, args.sr)?;
    write_wav(&args.out, &buf)?;
    outputs.add(&args.out);
    println!(
        "wrote {} ({:.3} s at {} Hz)",
        args.out.display(),
        buf.duration_s(),
        args.sr
    );
    Ok(())
}
