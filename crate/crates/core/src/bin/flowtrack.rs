//! Command-line front end: generate synthetic sequences, track, evaluate and
//! run the ablation matrix.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::warn;

use flowtrack::config::{Ablation, RunConfig};
use flowtrack::depth_render::TriangleMesh;
use flowtrack::io::{read_trace, write_estimates, write_overlays, write_sequence, DiskSequence};
use flowtrack::metrics::{evaluate, zero_order_hold, EvalReport, TraceSample, ADD_THRESHOLD};
use flowtrack::pipeline::{run_tracker, FrameSource};
use flowtrack::scene_sim::{generate, presets, CorruptionSpec, SceneSpec};
use flowtrack::{Error, Result};

/// Model points sampled on the mesh surface for ADD.
const MODEL_POINTS: usize = 1000;

#[derive(Parser)]
#[command(name = "flowtrack", version, about = "Object pose and velocity tracking with delayed detections")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic sequence directory.
    Generate(GenerateArgs),
    /// Track a sequence and write the estimate CSV.
    Track(TrackArgs),
    /// Compare an estimate (or the held detections) with ground truth.
    Evaluate(EvaluateArgs),
    /// Run every ablation variant on a sequence.
    Ablate(AblateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// Spin in place at 90 deg/s with 0.3 m/s.
    Constant,
    /// Piecewise fast translations and rotations.
    Fast,
    /// Smooth oscillation around a point 1 m ahead.
    Oscillating,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 150)]
    frames: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Preset::Constant)]
    preset: Preset,
    /// Speed factor of the oscillating preset.
    #[arg(long, default_value_t = 1.0)]
    tempo: f64,
    #[arg(long, default_value_t = 30.0)]
    fps: f64,
    #[arg(long, default_value_t = 6)]
    mask_delay: usize,
    #[arg(long, default_value_t = 6)]
    pose_delay: usize,
    /// Per-axis pose detection noise (m).
    #[arg(long, default_value_t = 0.0)]
    pose_noise: f64,
    /// Per-axis rotation noise of pose detections (deg).
    #[arg(long, default_value_t = 0.0)]
    rotation_noise: f64,
    #[arg(long, default_value_t = 0.0)]
    outlier_rate: f64,
    /// Flow noise (pixels).
    #[arg(long, default_value_t = 0.0)]
    flow_noise: f64,
    /// Add a background wall at this distance (m).
    #[arg(long)]
    wall: Option<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Component {
    Velocity,
    Pose,
    MaskSync,
    PoseSync,
    OutlierRejection,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML configuration; defaults to the shipped one.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Disable a component (repeatable).
    #[arg(long = "without", value_enum)]
    without: Vec<Component>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        for c in &self.without {
            let a = &mut cfg.ablation;
            match c {
                Component::Velocity => a.use_velocity = false,
                Component::Pose => a.use_pose = false,
                Component::MaskSync => a.use_mask_sync = false,
                Component::PoseSync => a.use_pose_sync = false,
                Component::OutlierRejection => a.use_outlier_rejection = false,
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct TrackArgs {
    /// Sequence directory.
    #[arg(long)]
    seq: PathBuf,
    #[arg(long, default_value = "estimates.csv")]
    out: PathBuf,
    /// Write the evaluation report as CSV when ground truth is present.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Directory for silhouette overlay images.
    #[arg(long)]
    overlays: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Estimate CSV.
    #[arg(long, required_unless_present = "baseline", conflicts_with = "baseline")]
    est: Option<PathBuf>,
    /// Evaluate the delayed detections in this poses.csv, each held from
    /// its availability frame on.
    #[arg(long)]
    baseline: Option<PathBuf>,
    #[arg(long)]
    gt: PathBuf,
    /// Object mesh for ADD.
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct AblateArgs {
    #[arg(long)]
    seq: PathBuf,
    /// Write one CSV row per variant.
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(&a),
        Command::Track(a) => cmd_track(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Ablate(a) => cmd_ablate(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) => 2,
                Error::Numerical(_) => 4,
                _ => 3,
            })
        }
    }
}

fn cmd_generate(a: &GenerateArgs) -> Result<()> {
    if a.frames == 0 {
        return Err(Error::Config("--frames must be at least 1".into()));
    }
    let scene = SceneSpec {
        fps: a.fps,
        wall_depth: a.wall,
        ..Default::default()
    };
    let corruption = CorruptionSpec {
        mask_delay: a.mask_delay,
        pose_delay: a.pose_delay,
        pose_std_translation: a.pose_noise,
        pose_std_rotation: a.rotation_noise.to_radians(),
        outlier_rate: a.outlier_rate,
        flow_std: a.flow_noise,
        ..Default::default()
    };
    let duration = a.frames as f64 / a.fps;
    let trajectory = match a.preset {
        Preset::Constant => presets::constant_twist(a.frames, a.fps),
        Preset::Fast => presets::fast_motion(),
        Preset::Oscillating => presets::oscillating(duration, a.fps, a.tempo),
    };
    let bundle = generate(&trajectory, &corruption, &scene, a.frames, a.seed)?;
    write_sequence(&bundle, &a.out)?;
    eprintln!("wrote {} frames to {}", bundle.len(), a.out.display());
    Ok(())
}

fn model_points(mesh: &TriangleMesh) -> Vec<nalgebra::Vector3<f64>> {
    mesh.sample_surface(MODEL_POINTS, 0)
}

fn write_report(path: &Path, rows: &[(&str, &EvalReport)]) -> Result<()> {
    let mut text = format!("variant,{}\n", EvalReport::CSV_HEADER);
    for (name, r) in rows {
        text.push_str(&format!("{name},{}\n", r.csv_row()));
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn sequence_report(seq: &DiskSequence, trace: &[TraceSample]) -> Result<Option<EvalReport>> {
    let (Some(gt), Some(mesh)) = (seq.ground_truth(), seq.mesh()) else {
        return Ok(None);
    };
    evaluate(trace, gt, &model_points(mesh), ADD_THRESHOLD).map(Some)
}

fn cmd_track(a: &TrackArgs) -> Result<()> {
    let cfg = a.config.load()?;
    let seq = DiskSequence::open(&a.seq)?;
    let result = run_tracker(&seq, &cfg)?;
    write_estimates(&a.out, &result.rows)?;
    eprintln!("{}", result.timing.summary());
    if let Some(dir) = &a.overlays {
        let mesh = seq
            .mesh()
            .ok_or_else(|| Error::data(seq.dir().display().to_string(), "overlays need mesh.txt"))?;
        write_overlays(dir, &seq, mesh, &result.rows)?;
    }
    match sequence_report(&seq, &result.trace())? {
        Some(report) => {
            println!("{report}");
            if let Some(path) = &a.report {
                write_report(path, &[("full", &report)])?;
            }
        }
        None => warn!("no ground truth in {}; evaluation skipped", a.seq.display()),
    }
    Ok(())
}

fn cmd_evaluate(a: &EvaluateArgs) -> Result<()> {
    let gt = read_trace(&a.gt)?;
    let mesh = TriangleMesh::load(&a.mesh)?;
    let (est, gt) = match (&a.est, &a.baseline) {
        (Some(path), _) => (read_trace(path)?, gt),
        (None, Some(path)) => held_baseline(path, gt)?,
        (None, None) => unreachable!("clap requires one of --est and --baseline"),
    };
    let report = evaluate(&est, &gt, &model_points(&mesh), ADD_THRESHOLD)?;
    println!("{report}");
    if let Some(path) = &a.report {
        write_report(path, &[(if a.baseline.is_some() { "baseline" } else { "estimate" }, &report)])?;
    }
    Ok(())
}

/// Detections resampled at every ground-truth frame by zero-order hold.
/// Frames before the first delivery are left out.
fn held_baseline(poses_csv: &Path, gt: Vec<TraceSample>) -> Result<(Vec<TraceSample>, Vec<TraceSample>)> {
    let dir = poses_csv.parent().unwrap_or(Path::new("."));
    let seq = DiskSequence::open(dir)?;
    let deliveries: Vec<_> = seq.pose_detections().into_iter().map(|d| (d.available, d.value)).collect();
    let held = zero_order_hold(&deliveries, gt.len());
    let skipped = held.iter().take_while(|h| h.is_none()).count();
    if skipped > 0 {
        warn!("no detection available before frame {skipped}; those frames are not evaluated");
    }
    let (est, gt) = held
        .into_iter()
        .zip(gt)
        .filter_map(|(h, g)| {
            h.map(|pose| {
                (
                    TraceSample {
                        frame: g.frame,
                        pose,
                        twist: None,
                    },
                    TraceSample { twist: None, ..g },
                )
            })
        })
        .unzip();
    Ok((est, gt))
}

fn cmd_ablate(a: &AblateArgs) -> Result<()> {
    let base = a.config.load()?;
    let seq = DiskSequence::open(&a.seq)?;
    let mut reports = Vec::new();
    println!("{:<18} {}", "variant", EvalReport::CSV_HEADER);
    for (name, ablation) in Ablation::matrix() {
        let cfg = RunConfig { ablation, ..base.clone() };
        let result = run_tracker(&seq, &cfg)?;
        let report = sequence_report(&seq, &result.trace())?
            .ok_or_else(|| Error::data(a.seq.display().to_string(), "ablation needs ground_truth.csv and mesh.txt"))?;
        println!("{name:<18} {}", report.csv_row());
        eprintln!("{name}: {}", result.timing.summary());
        reports.push((name, report));
    }
    if let Some(path) = &a.report {
        let rows: Vec<_> = reports.iter().map(|(n, r)| (*n, r)).collect();
        write_report(path, &rows)?;
    }
    Ok(())
}

