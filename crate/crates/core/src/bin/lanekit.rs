//! Command-line front end: scene synthesis, view warping, anchor dumps,
//! evaluation and intrinsics fitting.
//!
//! Exit codes: 0 success, 2 unreadable or unparseable input, 3 empty
//! intersection of frame ids, 4 uninformative segment(s).

use clap::{Parser, Subcommand};
use lanekit::anchor::generate_anchors;
use lanekit::image::{read_depth_raster, read_ppm, write_depth_raster, write_ppm};
use lanekit::intrinsics::{
    default_search_interval, fit_focal, FitError, FrameObservation, SegmentObservations,
};
use lanekit::io;
use lanekit::synth::{make_feature_fields, render_scene, simulate_learned_intrinsics};
use lanekit::view_synthesis::synthesize_view;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "lanekit",
    version,
    about = "Geometry, evaluation and self-calibration tools for monocular 3D lane detection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate predictions against a directory of ground-truth annotations.
    ///
    /// Protocol defaults: 1.5 m distance threshold, 75% match ratio, 1.5 m
    /// visibility penalty, 40 m near/far boundary, 0.5 probability
    /// threshold, 20 y-steps over [0.1, 80] m.
    Evaluate {
        /// Directory of per-frame annotation JSON files.
        #[arg(long)]
        gt: PathBuf,
        /// Predictions file, one JSON frame per line.
        #[arg(long)]
        pred: PathBuf,
        /// Optional JSON config overriding the protocol defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Report JSON output path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit per-segment focal lengths from learned-intrinsics observations.
    FitIntrinsics {
        /// Observations file, one JSON record per line
        /// ({"segment_id", "r_z", "f_x", "r_x"?, "f_y"?}).
        #[arg(long)]
        obs: PathBuf,
        /// Minimum rotation magnitude (radians) for a frame to be used
        /// [default: 0 = keep every frame].
        #[arg(long, default_value_t = 0.0)]
        rz_min: f64,
        /// Image width in pixels.
        #[arg(long)]
        width: usize,
        /// Lower edge of the focal search interval
        /// [default: 0.5 x median observed focal].
        #[arg(long)]
        search_lo: Option<f64>,
        /// Upper edge of the focal search interval
        /// [default: 2 x median observed focal].
        #[arg(long)]
        search_hi: Option<f64>,
        /// Output JSON path (map from segment id to fit result).
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a synthetic road scene: images, exact depth, annotations,
    /// relative poses and intrinsics observations.
    Synth {
        /// Scene spec JSON.
        #[arg(long)]
        spec: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed in the spec file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Reconstruct a target view from a source image through depth and pose.
    Warp {
        /// Source image (binary PPM).
        #[arg(long)]
        src: PathBuf,
        /// Target depth raster (DPTH format).
        #[arg(long)]
        depth: PathBuf,
        /// Rigid pose JSON mapping target to source camera coordinates.
        #[arg(long)]
        pose: PathBuf,
        /// Camera intrinsics JSON.
        #[arg(long)]
        intrinsics: PathBuf,
        /// Output image (binary PPM).
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate 3D lane anchors and dump them as JSON.
    ///
    /// Defaults: 45 lateral starts over the ROI, pitch {0, ±1, ±2} deg,
    /// yaw {0, ±1, ±3, ±5, ±7, ±10, ±15, ±20} deg, ROI x in [-20, 20] m
    /// and y in [0.1, 80] m, 20 y-steps.
    Anchors {
        /// Optional JSON config; defaults are used when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Anchor dump JSON output path.
        #[arg(long)]
        out: PathBuf,
    },
}

enum CliError {
    /// Unreadable or unparseable input (exit 2).
    Input(String),
    /// No prediction frame id matches any ground-truth frame id (exit 3).
    EmptyOverlap,
    /// At least one segment had no usable observation (exit 4).
    Uninformative(Vec<String>),
    /// Everything else (exit 1).
    Other(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Other(_) => 1,
            CliError::Input(_) => 2,
            CliError::EmptyOverlap => 3,
            CliError::Uninformative(_) => 4,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Input(m) | CliError::Other(m) => m.clone(),
            CliError::EmptyOverlap => {
                "no prediction frame id matches any ground-truth frame id".into()
            }
            CliError::Uninformative(ids) => format!(
                "uninformative segment(s): {} (lower --rz-min or extend the segments)",
                ids.join(", ")
            ),
        }
    }
}

fn read_input(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn write_output(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| CliError::Other(format!("{}: {e}", parent.display())))?;
        }
    }
    std::fs::write(path, bytes).map_err(|e| CliError::Other(format!("{}: {e}", path.display())))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("LANEKIT_LOG"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Evaluate { gt, pred, config, out } => {
            cmd_evaluate(&gt, &pred, config.as_deref(), &out)
        }
        Command::FitIntrinsics { obs, rz_min, width, search_lo, search_hi, out } => {
            cmd_fit_intrinsics(&obs, rz_min, width, search_lo, search_hi, &out)
        }
        Command::Synth { spec, out, seed } => cmd_synth(&spec, &out, seed),
        Command::Warp { src, depth, pose, intrinsics, out } => {
            cmd_warp(&src, &depth, &pose, &intrinsics, &out)
        }
        Command::Anchors { config, out } => cmd_anchors(config.as_deref(), &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn cmd_evaluate(
    gt_dir: &Path,
    pred_path: &Path,
    config: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    let cfg_file = match config {
        Some(path) => io::parse_eval_config(&read_input(path)?)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?,
        None => io::EvalConfigFile::default(),
    };
    let report = io::evaluate_files(gt_dir, pred_path, &cfg_file).map_err(|e| match e {
        io::EvalFilesError::EmptyOverlap => CliError::EmptyOverlap,
        other => CliError::Input(other.to_string()),
    })?;

    let mut bytes = serde_json::to_vec_pretty(&report).expect("report serializes");
    bytes.push(b'\n');
    write_output(out, &bytes)?;
    println!(
        "f1 {:.4} precision {:.4} recall {:.4} tp {} fp {} fn {} frames {}",
        report.f1, report.precision, report.recall, report.tp, report.fp, report.fn_, report.frames
    );
    Ok(())
}

fn cmd_fit_intrinsics(
    obs_path: &Path,
    rz_min: f64,
    width: usize,
    search_lo: Option<f64>,
    search_hi: Option<f64>,
    out: &Path,
) -> Result<(), CliError> {
    if width == 0 {
        return Err(CliError::Input("--width must be positive".into()));
    }
    let records = io::parse_observations(&read_input(obs_path)?)
        .map_err(|e| CliError::Input(format!("{}: {e}", obs_path.display())))?;
    if records.is_empty() {
        return Err(CliError::Input(format!("{}: no observation records", obs_path.display())));
    }

    let mut segments: BTreeMap<String, SegmentObservations> = BTreeMap::new();
    for r in &records {
        let seg = segments
            .entry(r.segment_id.clone())
            .or_insert_with(|| SegmentObservations::new(width, Vec::new()).expect("width validated"));
        seg.frames.push(FrameObservation { r_z: r.r_z.abs(), f_hat: r.f_x });
        if let (Some(r_x), Some(f_y)) = (r.r_x, r.f_y) {
            seg.vertical.push(FrameObservation { r_z: r_x.abs(), f_hat: f_y });
        }
    }

    let mut results: BTreeMap<String, io::FitResultOut> = BTreeMap::new();
    let mut uninformative = Vec::new();
    for (id, seg) in &segments {
        let search = match (search_lo, search_hi) {
            (Some(lo), Some(hi)) => (lo, hi),
            _ => {
                let (dlo, dhi) =
                    default_search_interval(&seg.frames).expect("segment has records");
                (search_lo.unwrap_or(dlo), search_hi.unwrap_or(dhi))
            }
        };
        match fit_focal(&seg.frames, seg.width, rz_min, search) {
            Ok(fit) => {
                let mut out_fit = io::FitResultOut::from(&fit);
                if !seg.vertical.is_empty() {
                    if let Ok(vfit) = fit_focal(&seg.vertical, seg.width, rz_min, search) {
                        out_fit.f_fit_y = Some(vfit.f_fit);
                    }
                }
                results.insert(id.clone(), out_fit);
            }
            Err(FitError::Uninformative) => uninformative.push(id.clone()),
            Err(e) => return Err(CliError::Input(format!("segment {id}: {e}"))),
        }
    }

    write_output(out, &io::write_fit_results(&results))?;
    println!("fitted {} segment(s), {} uninformative", results.len(), uninformative.len());
    if !uninformative.is_empty() {
        return Err(CliError::Uninformative(uninformative));
    }
    Ok(())
}

fn cmd_synth(spec_path: &Path, out_dir: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let mut spec = io::parse_scene_spec(&read_input(spec_path)?)
        .map_err(|e| CliError::Input(format!("{}: {e}", spec_path.display())))?;
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    let frames = render_scene(&spec).map_err(|e| CliError::Input(e.to_string()))?;

    for sub in ["frames", "depth", "annotations", "poses"] {
        std::fs::create_dir_all(out_dir.join(sub))
            .map_err(|e| CliError::Other(format!("{}: {e}", out_dir.display())))?;
    }

    for (i, frame) in frames.iter().enumerate() {
        let stem = format!("frame_{i:06}");
        let mut ppm = Vec::new();
        write_ppm(&frame.image, &mut ppm).map_err(|e| CliError::Other(e.to_string()))?;
        write_output(&out_dir.join("frames").join(format!("{stem}.ppm")), &ppm)?;

        let mut dpth = Vec::new();
        write_depth_raster(&frame.depth, &mut dpth)
            .map_err(|e| CliError::Other(e.to_string()))?;
        write_output(&out_dir.join("depth").join(format!("{stem}.dpth")), &dpth)?;

        let ann =
            io::FrameAnnotation::from_lanes(&stem, &frame.cam, &frame.gt_lanes, &spec.ysteps);
        write_output(
            &out_dir.join("annotations").join(format!("{stem}.json")),
            &io::write_annotation(&ann),
        )?;

        let pose = io::PoseFile::from_transform(&frame.pose_to_previous);
        let mut pose_bytes = serde_json::to_vec_pretty(&pose).expect("pose serializes");
        pose_bytes.push(b'\n');
        write_output(&out_dir.join("poses").join(format!("{stem}.json")), &pose_bytes)?;
    }

    // learned-intrinsics observations simulated along the trajectory, with
    // the spec's fx as the true focal
    let obs = simulate_learned_intrinsics(&spec, spec.camera.fx, spec.seed);
    let records: Vec<io::ObservationRecord> = obs
        .frames
        .iter()
        .map(|o| io::ObservationRecord {
            segment_id: "segment_000000".to_string(),
            r_z: o.r_z,
            f_x: o.f_hat,
            r_x: None,
            f_y: None,
        })
        .collect();
    write_output(&out_dir.join("observations.jsonl"), &io::write_observations(&records))?;

    let intr = io::IntrinsicsFile {
        fx: spec.camera.fx,
        fy: spec.camera.fy,
        cx: spec.camera.cx,
        cy: spec.camera.cy,
        width: spec.camera.width,
        height: spec.camera.height,
        camera_height: spec.camera.camera_height,
        pitch: spec.camera.pitch,
        d_min: spec.d_min,
        d_max: spec.d_max,
    };
    let mut intr_bytes = serde_json::to_vec_pretty(&intr).expect("intrinsics serialize");
    intr_bytes.push(b'\n');
    write_output(&out_dir.join("intrinsics.json"), &intr_bytes)?;

    // the analytic feature-field coefficients derived from the seed
    let fields = make_feature_fields(&spec, 4, 4);
    let coeffs = serde_json::json!({ "fv": fields.fv_coeffs, "bev": fields.bev_coeffs });
    let mut coeff_bytes = serde_json::to_vec_pretty(&coeffs).expect("coeffs serialize");
    coeff_bytes.push(b'\n');
    write_output(&out_dir.join("feature_fields.json"), &coeff_bytes)?;

    println!("rendered {} frame(s) to {}", frames.len(), out_dir.display());
    Ok(())
}

fn cmd_warp(
    src: &Path,
    depth_path: &Path,
    pose_path: &Path,
    intrinsics_path: &Path,
    out: &Path,
) -> Result<(), CliError> {
    let intr = io::parse_intrinsics(&read_input(intrinsics_path)?)
        .map_err(|e| CliError::Input(format!("{}: {e}", intrinsics_path.display())))?;
    let cam = intr
        .to_camera()
        .map_err(|e| CliError::Input(format!("{}: {e}", intrinsics_path.display())))?;
    let source = read_ppm(read_input(src)?.as_slice())
        .map_err(|e| CliError::Input(format!("{}: {e}", src.display())))?;
    let depth = read_depth_raster(read_input(depth_path)?.as_slice(), intr.d_min, intr.d_max)
        .map_err(|e| CliError::Input(format!("{}: {e}", depth_path.display())))?;
    let pose = io::parse_pose(&read_input(pose_path)?)
        .map_err(|e| CliError::Input(format!("{}: {e}", pose_path.display())))?;

    let recon =
        synthesize_view(&source, &depth, &pose, &cam).map_err(|e| CliError::Input(e.to_string()))?;
    let mut ppm = Vec::new();
    write_ppm(&recon.image, &mut ppm).map_err(|e| CliError::Other(e.to_string()))?;
    write_output(out, &ppm)?;
    let valid = recon.valid_count() as f64 / (source.width() * source.height()) as f64;
    println!("wrote {} (valid fraction {:.4})", out.display(), valid);
    Ok(())
}

fn cmd_anchors(config: Option<&Path>, out: &Path) -> Result<(), CliError> {
    let cfg = match config {
        Some(path) => io::parse_anchor_config(&read_input(path)?)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?,
        None => io::AnchorConfigFile::default(),
    };
    let ysteps = cfg.ysteps.to_ysteps().map_err(|e| CliError::Input(e.to_string()))?;
    let pitches: Vec<f64> = cfg.pitches_deg.iter().map(|d| d.to_radians()).collect();
    let yaws: Vec<f64> = cfg.yaws_deg.iter().map(|d| d.to_radians()).collect();
    let anchors = generate_anchors(cfg.lateral_starts, &cfg.roi, &pitches, &yaws, &ysteps)
        .map_err(|e| CliError::Input(e.to_string()))?;
    write_output(out, &io::write_anchor_dump(&anchors))?;
    println!("wrote {} anchors to {}", anchors.len(), out.display());
    Ok(())
}
