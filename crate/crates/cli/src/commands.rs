use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use blurcam::geometry::CameraKind;
use blurcam::ingest::{
    self, build_scenarios, load_depth, load_gyro, load_pair, save_depth_bcdm, save_depth_png16,
    save_rgb_png, DatasetCamera, Scenario, ScenarioOptions,
};
use blurcam::recovery::WeightTaper;
use blurcam::synth::{
    handheld_gyro, textured_fixture, ShakeProfile, GYRO_DURATION_MS, GYRO_INTERVAL_MS,
};
use blurcam::tracker::{make_query_grid, oracle_deltas, track_frames, TrackParams};
use blurcam::trajectory::densify_linear;
use blurcam::{
    evaluate, recover_trajectory, render_video, CameraModel, DeltaField, DepthMap, Error,
    EvalConfig, EvalReport, QueryGrid, RecoveryConfig, Result, RgbImage, SimConfig, Trajectory,
    TrajectoryLabel,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::manifest::RunManifest;
use crate::plot::{render_svg, Series, SeriesStyle};

pub const SIM_MANIFEST: &str = "sim_manifest.json";
pub const SCENE_DEPTH: &str = "depth.bcdm";
pub const GT_DENSE: &str = "gt_dense.csv";
pub const DELTAS: &str = "deltas.csv";
pub const TRACK_META: &str = "track.json";
pub const SPARSE: &str = "trajectory.csv";

#[derive(Debug, Parser)]
#[command(
    name = "blurcam",
    version,
    about = "Simulate rolling-shutter blur from RGB-D and recover camera rotation"
)]
pub struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a blurred rolling-shutter video from one RGB-D pair.
    Simulate(SimulateArgs),
    /// Measure query-point displacements in a simulated run.
    Track(TrackArgs),
    /// Recover the per-frame rotation trajectory from tracked displacements.
    Recover(RecoverArgs),
    /// Linearly upsample a per-frame trajectory.
    Densify(DensifyArgs),
    /// Score a trajectory against ground truth.
    Eval(EvalArgs),
    /// Draw trajectories as an SVG chart.
    Plot(PlotArgs),
    /// Build scenarios from a dataset and run the whole chain on each.
    Batch(BatchArgs),
    /// Write a synthetic handheld gyro trace.
    GenGyro(GenGyroArgs),
    /// Write textured RGB-D fixtures in the dataset layout.
    MakeFixture(MakeFixtureArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Telephoto,
    ShortFocus,
}

impl KindArg {
    fn camera(self, width: usize, height: usize) -> Result<CameraModel> {
        match self {
            KindArg::Telephoto => CameraModel::telephoto_reference(width, height),
            KindArg::ShortFocus => CameraModel::short_focus_reference(width, height),
        }
    }

    fn kind(self) -> CameraKind {
        match self {
            KindArg::Telephoto => CameraKind::Telephoto,
            KindArg::ShortFocus => CameraKind::ShortFocus,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct TimingArgs {
    #[arg(long, default_value_t = 30)]
    pub frames: usize,
    #[arg(long, default_value_t = 60.0)]
    pub exposure_ms: f64,
    #[arg(long, default_value_t = 4.0)]
    pub row_transfer_us: f64,
    /// Quadrature step; defaults to the trajectory sampling interval.
    #[arg(long)]
    pub step_ms: Option<f64>,
}

impl TimingArgs {
    fn sim_config(&self, onset_ms: Option<f64>, seed: u64) -> SimConfig {
        SimConfig {
            exposure_ms: self.exposure_ms,
            row_transfer_us: self.row_transfer_us,
            frames: self.frames,
            onset_ms,
            integral_step_ms: self.step_ms,
            seed,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub rgb: PathBuf,
    #[arg(long)]
    pub depth: PathBuf,
    /// Dense gyro trajectory CSV.
    #[arg(long)]
    pub traj: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub timing: TimingArgs,
    /// Exposure onset on the trajectory clock; drawn from `--seed` when absent.
    #[arg(long)]
    pub onset_ms: Option<f64>,
    /// `camera.json` with focal_mm, pixel_pitch_um, kind and depth_scale.
    #[arg(long)]
    pub camera: Option<PathBuf>,
    /// Reference optics used when no camera file is given.
    #[arg(long, value_enum, default_value_t = KindArg::Telephoto)]
    pub kind: KindArg,
    /// Meters per unit of a 16-bit depth PNG; overrides the camera file.
    #[arg(long)]
    pub depth_scale: Option<f64>,
    /// Center crop and resize inputs to this square size.
    #[arg(long)]
    pub size: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct TrackArgs {
    #[arg(long)]
    pub run: PathBuf,
    /// Use exact model displacements instead of patch tracking.
    #[arg(long)]
    pub oracle: bool,
    #[arg(long, default_value_t = 12)]
    pub half_width: usize,
    /// Distance (px) kept between the outermost grid points and the border.
    #[arg(long, default_value_t = 16)]
    pub margin: usize,
    #[arg(long, default_value_t = 21)]
    pub patch: usize,
    #[arg(long, default_value_t = 24)]
    pub search: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaperArg {
    Linear,
    Uniform,
}

#[derive(Debug, Clone, Args)]
pub struct RecoverArgs {
    #[arg(long)]
    pub run: PathBuf,
    /// Expected grid half-width; must match the tracked grid.
    #[arg(long)]
    pub half_width: Option<usize>,
    #[arg(long, value_enum, default_value_t = TaperArg::Linear)]
    pub taper: TaperArg,
    #[arg(long, default_value_t = 0.3)]
    pub min_confidence: f64,
}

#[derive(Debug, Clone, Args)]
pub struct DensifyArgs {
    #[arg(long)]
    pub run: Option<PathBuf>,
    #[arg(long, default_value_t = 30)]
    pub samples_per_frame: usize,
    /// Per-frame trajectory; defaults to the run's recovered trajectory.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub run: Option<PathBuf>,
    #[arg(long)]
    pub pred: Option<PathBuf>,
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// Report path; defaults to `eval.json` (or `eval_<pred>.json`) in the run.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Accuracy thresholds.
    #[arg(long = "tau", default_values_t = [0.10, 0.25])]
    pub taus: Vec<f64>,
    #[arg(long, default_value_t = 1e-6)]
    pub epsilon: f64,
}

#[derive(Debug, Clone, Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub run: Option<PathBuf>,
    #[arg(long)]
    pub gt: Option<PathBuf>,
    #[arg(long)]
    pub sparse: Option<PathBuf>,
    #[arg(long)]
    pub dense: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "camera rotation")]
    pub title: String,
}

#[derive(Debug, Clone, Args)]
pub struct BatchArgs {
    #[arg(long, env = "BLURCAM_DATA_DIR")]
    pub dataset: PathBuf,
    #[arg(long)]
    pub traj: PathBuf,
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Scenarios processed concurrently.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[command(flatten)]
    pub timing: TimingArgs,
    #[arg(long, default_value_t = 518)]
    pub size: usize,
    #[arg(long)]
    pub oracle: bool,
    #[arg(long, default_value_t = 12)]
    pub half_width: usize,
    #[arg(long, default_value_t = 16)]
    pub margin: usize,
    #[arg(long = "samples-per-frame", default_values_t = [15, 30])]
    pub samples_per_frame: Vec<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct GenGyroArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = GYRO_DURATION_MS)]
    pub duration_ms: f64,
    #[arg(long, default_value_t = GYRO_INTERVAL_MS)]
    pub interval_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DepthFormat {
    Bcdm,
    Png,
}

#[derive(Debug, Clone, Args)]
pub struct MakeFixtureArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    #[arg(long, default_value_t = 518)]
    pub size: usize,
    #[arg(long, value_enum, default_value_t = KindArg::Telephoto)]
    pub kind: KindArg,
    #[arg(long, value_enum, default_value_t = DepthFormat::Bcdm)]
    pub depth_format: DepthFormat,
}

pub fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Simulate(a) => cmd_simulate(&a, seed).map(|_| ()),
        Command::Track(a) => cmd_track(&a, seed),
        Command::Recover(a) => cmd_recover(&a, seed),
        Command::Densify(a) => cmd_densify(&a, seed).map(|_| ()),
        Command::Eval(a) => {
            let report = cmd_eval(&a, seed)?;
            println!("{}", report.summary());
            Ok(())
        }
        Command::Plot(a) => cmd_plot(&a, seed),
        Command::Batch(a) => cmd_batch(&a, seed),
        Command::GenGyro(a) => cmd_gen_gyro(&a, seed),
        Command::MakeFixture(a) => cmd_make_fixture(&a, seed),
    }
}

/// What `simulate` records about the run; later stages read it back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRecord {
    pub sim: SimConfig,
    pub camera: CameraModel,
    pub depth_scale: f64,
    pub size: Option<usize>,
    /// Onset on the trajectory clock. All other times are on the run clock,
    /// which starts at the onset.
    pub onset_ms: f64,
    pub frame_period_ms: f64,
    pub capture_span_ms: f64,
    pub frame_start_times_ms: Vec<f64>,
    pub reference_times_ms: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackRecord {
    pub oracle: bool,
    pub params: TrackParams,
    pub margin: usize,
    pub grid: QueryGrid,
    pub frame_times_ms: Vec<f64>,
    pub flagged: Vec<bool>,
}

fn frame_name(k: usize) -> String {
    format!("frame_{k:04}.png")
}

/// Manifest path for a single-file output: `<stem>_manifest.json` beside it.
fn manifest_beside(output: &Path) -> PathBuf {
    let stem = output.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
    output.with_file_name(format!("{stem}_manifest.json"))
}

/// Path of an upstream artifact, or a stage-dependency error naming the
/// command that produces it.
fn upstream(dir: &Path, file: &str, stage: &str, producer: &str) -> Result<PathBuf> {
    let p = dir.join(file);
    if p.is_file() {
        Ok(p)
    } else {
        Err(Error::Data(format!(
            "{stage} needs {} produced by `blurcam {producer}`; run it first",
            p.display()
        )))
    }
}

fn read_sim_record(run: &Path, stage: &str) -> Result<SimRecord> {
    let path = upstream(run, SIM_MANIFEST, stage, "simulate")?;
    let m = RunManifest::read(&path)?;
    serde_json::from_value(m.config).map_err(|e| Error::format(&path, e.to_string()))
}

fn read_track_record(run: &Path, stage: &str) -> Result<TrackRecord> {
    let path = upstream(run, TRACK_META, stage, "track")?;
    let text = fs::read_to_string(&path)?;
    serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn config_json<T: Serialize>(value: &T) -> Result<serde_json::Value> {
    Ok(serde_json::to_value(value)?)
}

pub fn cmd_simulate(a: &SimulateArgs, seed: u64) -> Result<SimRecord> {
    let clock = Instant::now();
    let file = a.camera.as_deref().map(DatasetCamera::load).transpose()?;
    let depth_scale = a
        .depth_scale
        .or(file.as_ref().map(|f| f.depth_scale))
        .unwrap_or(0.001);
    let (rgb, depth) = load_pair(&a.rgb, &a.depth, depth_scale, a.size)?;
    let cam = match &file {
        Some(f) => f.camera(rgb.width(), rgb.height())?,
        None => a.kind.camera(rgb.width(), rgb.height())?,
    };
    let traj = load_gyro(&a.traj)?;
    let sim = a.timing.sim_config(a.onset_ms, seed);
    let mut manifest = RunManifest::new("simulate", serde_json::Value::Null);
    manifest.add_input("rgb", &a.rgb)?;
    manifest.add_input("depth", &a.depth)?;
    manifest.add_input("traj", &a.traj)?;
    if let Some(c) = &a.camera {
        manifest.add_input("camera", c)?;
    }
    simulate_into(
        &a.out,
        &rgb,
        &depth,
        &traj,
        &cam,
        &sim,
        depth_scale,
        a.size,
        manifest,
        clock,
    )
}

#[allow(clippy::too_many_arguments)]
fn simulate_into(
    out: &Path,
    rgb: &RgbImage,
    depth: &DepthMap,
    traj: &Trajectory,
    cam: &CameraModel,
    sim: &SimConfig,
    depth_scale: f64,
    size: Option<usize>,
    mut manifest: RunManifest,
    clock: Instant,
) -> Result<SimRecord> {
    let video = render_video(rgb, depth, traj, cam, sim)?;
    let onset = video.onset_ms();
    let span = video.config.capture_span_ms(cam.height);
    let gt = traj.segment(onset, onset + span)?;
    fs::create_dir_all(out)?;
    for (k, frame) in video.frames.iter().enumerate() {
        let name = frame_name(k);
        save_rgb_png(frame, &out.join(&name))?;
        manifest.add_output(Path::new(&name));
    }
    save_depth_bcdm(depth, &out.join(SCENE_DEPTH))?;
    gt.save(&out.join(GT_DENSE))?;
    manifest.add_output(Path::new(SCENE_DEPTH));
    manifest.add_output(Path::new(GT_DENSE));
    let record = SimRecord {
        sim: video.config.clone(),
        camera: cam.clone(),
        depth_scale,
        size,
        onset_ms: onset,
        frame_period_ms: video.config.frame_period_ms(cam.height),
        capture_span_ms: span,
        frame_start_times_ms: video.frame_start_times.iter().map(|t| t - onset).collect(),
        reference_times_ms: video.reference_times.iter().map(|t| t - onset).collect(),
    };
    manifest.config = config_json(&record)?;
    manifest.wall_time_s = clock.elapsed().as_secs_f64();
    manifest.write(&out.join(SIM_MANIFEST))?;
    Ok(record)
}

pub fn cmd_track(a: &TrackArgs, seed: u64) -> Result<()> {
    let clock = Instant::now();
    let rec = read_sim_record(&a.run, "track")?;
    let cam = &rec.camera;
    let grid = make_query_grid(cam, a.half_width, a.margin)?;
    let params = TrackParams {
        patch_px: a.patch,
        search_px: a.search,
    };
    let times = &rec.reference_times_ms;
    let mut manifest = RunManifest::new("track", serde_json::Value::Null);
    let field = if a.oracle {
        let gt_path = upstream(&a.run, GT_DENSE, "track --oracle", "simulate")?;
        let depth_path = upstream(&a.run, SCENE_DEPTH, "track --oracle", "simulate")?;
        manifest.add_input("gt", &gt_path)?;
        manifest.add_input("depth", &depth_path)?;
        let gt = load_gyro(&gt_path)?;
        let depth = load_depth(&depth_path, rec.depth_scale)?;
        oracle_deltas(&gt, &depth, cam, &grid, times)?
    } else {
        let mut frames = Vec::with_capacity(times.len());
        for k in 0..times.len() {
            let path = upstream(&a.run, &frame_name(k), "track", "simulate")?;
            manifest.add_input(&format!("frame_{k:04}"), &path)?;
            frames.push(ingest::load_rgb(&path)?);
        }
        track_frames(&frames, times, &grid, &params)?
    };
    let record = TrackRecord {
        oracle: a.oracle,
        params,
        margin: a.margin,
        grid,
        frame_times_ms: times.clone(),
        flagged: field.flagged.clone(),
    };
    field.write_csv(fs::File::create(a.run.join(DELTAS))?)?;
    write_json(&a.run.join(TRACK_META), &record)?;
    manifest.add_output(Path::new(DELTAS));
    manifest.add_output(Path::new(TRACK_META));
    manifest.config = serde_json::json!({
        "seed": seed,
        "oracle": a.oracle,
        "half_width": a.half_width,
        "margin": a.margin,
        "params": params,
        "points": record.grid.len(),
    });
    manifest.wall_time_s = clock.elapsed().as_secs_f64();
    manifest.write(&a.run.join("track_manifest.json"))
}

pub fn cmd_recover(a: &RecoverArgs, seed: u64) -> Result<()> {
    let clock = Instant::now();
    let rec = read_sim_record(&a.run, "recover")?;
    let track = read_track_record(&a.run, "recover")?;
    if let Some(i) = a.half_width {
        if i != track.grid.half_width {
            return Err(Error::Argument(format!(
                "--half-width {i} does not match the tracked grid (half-width {})",
                track.grid.half_width
            )));
        }
    }
    let deltas_path = upstream(&a.run, DELTAS, "recover", "track")?;
    let depth_path = upstream(&a.run, SCENE_DEPTH, "recover", "simulate")?;
    let field = DeltaField::read_csv(
        fs::File::open(&deltas_path)?,
        track.frame_times_ms.clone(),
        Some(track.flagged.clone()),
    )
    .map_err(|e| match e {
        Error::Data(m) => Error::format(&deltas_path, m),
        other => other,
    })?;
    let depth = load_depth(&depth_path, rec.depth_scale)?;
    let cfg = RecoveryConfig {
        weight_taper: match a.taper {
            TaperArg::Linear => WeightTaper::LinearWithFieldExtent,
            TaperArg::Uniform => WeightTaper::Uniform,
        },
        min_confidence: a.min_confidence,
        ..RecoveryConfig::default()
    };
    let traj = recover_trajectory(&field, &depth, &track.grid, &rec.camera, &cfg)?;
    traj.save(&a.run.join(SPARSE))?;
    let mut manifest = RunManifest::new(
        "recover",
        serde_json::json!({ "seed": seed, "recovery": cfg }),
    );
    manifest.add_input("deltas", &deltas_path)?;
    manifest.add_input("depth", &depth_path)?;
    manifest.add_output(Path::new(SPARSE));
    manifest.wall_time_s = clock.elapsed().as_secs_f64();
    manifest.write(&a.run.join("recover_manifest.json"))
}

pub fn cmd_densify(a: &DensifyArgs, seed: u64) -> Result<PathBuf> {
    let clock = Instant::now();
    let input = match (&a.input, &a.run) {
        (Some(p), _) => p.clone(),
        (None, Some(run)) => upstream(run, SPARSE, "densify", "recover")?,
        (None, None) => return Err(Error::Argument("densify needs --run or --input".into())),
    };
    let output = match (&a.output, &a.run) {
        (Some(p), _) => p.clone(),
        (None, Some(run)) => run.join(format!("dense_{}.csv", a.samples_per_frame)),
        (None, None) => return Err(Error::Argument("densify needs --run or --output".into())),
    };
    let sparse = Trajectory::load(&input, TrajectoryLabel::SparsePerFrame)?;
    let dense = densify_linear(&sparse, a.samples_per_frame)?;
    dense.save(&output)?;
    let mut manifest = RunManifest::new(
        "densify",
        serde_json::json!({ "seed": seed, "samples_per_frame": a.samples_per_frame }),
    );
    manifest.add_input("sparse", &input)?;
    manifest.add_output(&output);
    manifest.wall_time_s = clock.elapsed().as_secs_f64();
    manifest.write(&manifest_beside(&output))?;
    Ok(output)
}

pub fn cmd_eval(a: &EvalArgs, seed: u64) -> Result<EvalReport> {
    let clock = Instant::now();
    let pred = match (&a.pred, &a.run) {
        (Some(p), _) => p.clone(),
        (None, Some(run)) => upstream(run, SPARSE, "eval", "recover")?,
        (None, None) => return Err(Error::Argument("eval needs --run or --pred".into())),
    };
    let gt = match (&a.gt, &a.run) {
        (Some(p), _) => p.clone(),
        (None, Some(run)) => upstream(run, GT_DENSE, "eval", "simulate")?,
        (None, None) => return Err(Error::Argument("eval needs --run or --gt".into())),
    };
    let out = match (&a.out, &a.run) {
        (Some(p), _) => p.clone(),
        (None, Some(run)) => match &a.pred {
            Some(p) => run.join(format!(
                "eval_{}.json",
                p.file_stem().and_then(|s| s.to_str()).unwrap_or("pred")
            )),
            None => run.join("eval.json"),
        },
        (None, None) => return Err(Error::Argument("eval needs --run or --out".into())),
    };
    let cfg = EvalConfig {
        thresholds: a.taus.clone(),
        epsilon: a.epsilon,
        ..EvalConfig::default()
    };
    let p = Trajectory::load(&pred, TrajectoryLabel::SparsePerFrame)?;
    let g = Trajectory::load(&gt, TrajectoryLabel::DenseGroundTruth)?;
    let report = evaluate(&p, &g, &cfg)?;
    fs::write(&out, report.to_json()? + "\n")?;
    let mut manifest = RunManifest::new("eval", serde_json::json!({ "seed": seed, "eval": cfg }));
    manifest.add_input("pred", &pred)?;
    manifest.add_input("gt", &gt)?;
    manifest.add_output(&out);
    manifest.wall_time_s = clock.elapsed().as_secs_f64();
    manifest.write(&manifest_beside(&out))?;
    Ok(report)
}

pub fn cmd_plot(a: &PlotArgs, seed: u64) -> Result<()> {
    let clock = Instant::now();
    let pick = |explicit: &Option<PathBuf>, default: &str| -> Option<PathBuf> {
        explicit.clone().or_else(|| {
            a.run
                .as_ref()
                .map(|r| r.join(default))
                .filter(|p| p.is_file())
        })
    };
    let gt_path = pick(&a.gt, GT_DENSE);
    let sparse_path = pick(&a.sparse, SPARSE);
    let dense_path = pick(&a.dense, "dense_30.csv");
    let out = match (&a.out, &a.run) {
        (Some(p), _) => p.clone(),
        (None, Some(run)) => run.join("plot.svg"),
        (None, None) => return Err(Error::Argument("plot needs --run or --out".into())),
    };
    let load =
        |p: &Option<PathBuf>, label| p.as_ref().map(|p| Trajectory::load(p, label)).transpose();
    let gt = load(&gt_path, TrajectoryLabel::DenseGroundTruth)?;
    let sparse = load(&sparse_path, TrajectoryLabel::SparsePerFrame)?;
    let dense = load(&dense_path, TrajectoryLabel::Densified)?;
    // put predictions on the ground-truth clock and reference
    let (sparse, dense) = match (&gt, &sparse) {
        (Some(g), Some(s)) => {
            let offset = g.sample_at(s.start())?;
            let shift = |t: Trajectory| -> Result<Trajectory> {
                let samples = t
                    .samples()
                    .iter()
                    .map(|x| {
                        let mut y = *x;
                        y.alpha += offset.alpha;
                        y.beta += offset.beta;
                        y.gamma += offset.gamma;
                        y
                    })
                    .collect();
                Trajectory::new(samples, t.label())
            };
            (Some(shift(s.clone())?), dense.map(shift).transpose()?)
        }
        _ => (sparse, dense),
    };
    let mut series = Vec::new();
    if let Some(t) = &gt {
        series.push(Series {
            label: "ground truth",
            traj: t,
            style: SeriesStyle::Line,
            color: "#222222",
        });
    }
    if let Some(t) = &dense {
        series.push(Series {
            label: "densified",
            traj: t,
            style: SeriesStyle::Dashed,
            color: "#1f77b4",
        });
    }
    if let Some(t) = &sparse {
        series.push(Series {
            label: "per frame",
            traj: t,
            style: SeriesStyle::Markers,
            color: "#d62728",
        });
    }
    if series.is_empty() {
        return Err(Error::Data("plot was given no trajectories".into()));
    }
    let svg = render_svg(&a.title, &series)?;
    fs::write(&out, svg)?;
    let mut manifest = RunManifest::new(
        "plot",
        serde_json::json!({ "seed": seed, "title": a.title }),
    );
    for (role, p) in [
        ("gt", &gt_path),
        ("sparse", &sparse_path),
        ("dense", &dense_path),
    ] {
        if let Some(p) = p {
            manifest.add_input(role, p)?;
        }
    }
    manifest.add_output(&out);
    manifest.wall_time_s = clock.elapsed().as_secs_f64();
    manifest.write(&manifest_beside(&out))
}

pub fn cmd_gen_gyro(a: &GenGyroArgs, seed: u64) -> Result<()> {
    let clock = Instant::now();
    let g = handheld_gyro(seed, a.duration_ms, a.interval_ms, &ShakeProfile::default())?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    g.save(&a.out)?;
    let mut manifest = RunManifest::new(
        "gen-gyro",
        serde_json::json!({ "seed": seed, "duration_ms": a.duration_ms, "interval_ms": a.interval_ms }),
    );
    manifest.add_output(&a.out);
    manifest.wall_time_s = clock.elapsed().as_secs_f64();
    manifest.write(&manifest_beside(&a.out))
}

pub fn cmd_make_fixture(a: &MakeFixtureArgs, seed: u64) -> Result<()> {
    let clock = Instant::now();
    fs::create_dir_all(a.out.join("rgb"))?;
    fs::create_dir_all(a.out.join("depth"))?;
    let cam = a.kind.camera(a.size, a.size)?;
    let file = DatasetCamera {
        focal_mm: cam.focal_length_mm,
        pixel_pitch_um: cam.pixel_pitch_um,
        kind: a.kind.kind(),
        depth_scale: 0.001,
    };
    write_json(&a.out.join("camera.json"), &file)?;
    let mut manifest = RunManifest::new(
        "make-fixture",
        serde_json::json!({ "seed": seed, "count": a.count, "size": a.size, "camera": file }),
    );
    manifest.add_output(Path::new("camera.json"));
    for k in 0..a.count {
        let name = format!("fixture_{k:02}");
        let fx = textured_fixture(seed.wrapping_add(k as u64), a.size, a.size)?;
        let rgb = format!("rgb/{name}.png");
        save_rgb_png(&fx.rgb, &a.out.join(&rgb))?;
        let depth = match a.depth_format {
            DepthFormat::Bcdm => {
                let p = format!("depth/{name}.bcdm");
                save_depth_bcdm(&fx.depth, &a.out.join(&p))?;
                p
            }
            DepthFormat::Png => {
                let p = format!("depth/{name}.png");
                save_depth_png16(&fx.depth, &a.out.join(&p), file.depth_scale)?;
                p
            }
        };
        manifest.add_output(Path::new(&rgb));
        manifest.add_output(Path::new(&depth));
    }
    manifest.wall_time_s = clock.elapsed().as_secs_f64();
    manifest.write(&a.out.join("fixture_manifest.json"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub name: String,
    pub seed: u64,
    pub onset_ms: f64,
    pub sparse: EvalReport,
    /// `(samples_per_frame, report)` pairs.
    pub dense: Vec<(usize, EvalReport)>,
}

fn run_scenario(
    s: &Scenario,
    traj: &Trajectory,
    a: &BatchArgs,
    seed: u64,
) -> Result<ScenarioResult> {
    let clock = Instant::now();
    let dir = a.out.join(&s.name);
    fs::create_dir_all(&dir)?;
    write_json(&dir.join("scenario.json"), s)?;
    let (rgb, depth) = s.load_inputs()?;
    let mut manifest = RunManifest::new("simulate", serde_json::Value::Null);
    manifest.add_input("rgb", &s.rgb)?;
    manifest.add_input("depth", &s.depth)?;
    manifest.add_input("traj", &a.traj)?;
    simulate_into(
        &dir,
        &rgb,
        &depth,
        traj,
        &s.camera,
        &s.sim,
        s.depth_scale,
        Some(a.size),
        manifest,
        clock,
    )?;
    cmd_track(
        &TrackArgs {
            run: dir.clone(),
            oracle: a.oracle,
            half_width: a.half_width,
            margin: a.margin,
            patch: TrackParams::default().patch_px,
            search: TrackParams::default().search_px,
        },
        seed,
    )?;
    cmd_recover(
        &RecoverArgs {
            run: dir.clone(),
            half_width: None,
            taper: TaperArg::Linear,
            min_confidence: RecoveryConfig::default().min_confidence,
        },
        seed,
    )?;
    let eval = |pred: Option<PathBuf>| {
        cmd_eval(
            &EvalArgs {
                run: Some(dir.clone()),
                pred,
                gt: None,
                out: None,
                taus: EvalConfig::default().thresholds,
                epsilon: EvalConfig::default().epsilon,
            },
            seed,
        )
    };
    let sparse = eval(None)?;
    let mut dense = Vec::new();
    for &k in &a.samples_per_frame {
        let out = cmd_densify(
            &DensifyArgs {
                run: Some(dir.clone()),
                samples_per_frame: k,
                input: None,
                output: None,
            },
            seed,
        )?;
        dense.push((k, eval(Some(out))?));
    }
    Ok(ScenarioResult {
        name: s.name.clone(),
        seed: s.seed,
        onset_ms: s.onset_ms,
        sparse,
        dense,
    })
}

pub fn cmd_batch(a: &BatchArgs, seed: u64) -> Result<()> {
    let clock = Instant::now();
    if a.jobs == 0 {
        return Err(Error::Argument("--jobs must be at least 1".into()));
    }
    let opts = ScenarioOptions {
        sim: a.timing.sim_config(None, seed),
        size: Some(a.size),
    };
    let scenarios = build_scenarios(&a.dataset, &a.traj, a.n, seed, &opts)?;
    let traj = load_gyro(&a.traj)?;
    fs::create_dir_all(&a.out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs)
        .build()
        .map_err(|e| Error::Argument(format!("cannot start {} workers: {e}", a.jobs)))?;
    let results: Vec<Result<ScenarioResult>> = pool.install(|| {
        scenarios
            .par_iter()
            .map(|s| run_scenario(s, &traj, a, seed))
            .collect()
    });
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;
    let n = results.len().max(1) as f64;
    let summary = serde_json::json!({
        "scenarios": results.len(),
        "mean_abs_rel": results.iter().map(|r| r.sparse.abs_rel).sum::<f64>() / n,
        "mean_accuracy": EvalConfig::default().thresholds.iter().map(|&tau| {
            (tau, results.iter().filter_map(|r| r.sparse.accuracy_at(tau)).sum::<f64>() / n)
        }).collect::<Vec<_>>(),
        "mean_dense_abs_rel": a.samples_per_frame.iter().enumerate().map(|(i, &k)| {
            (k, results.iter().map(|r| r.dense[i].1.abs_rel).sum::<f64>() / n)
        }).collect::<Vec<_>>(),
        "results": results,
    });
    write_json(&a.out.join("batch_summary.json"), &summary)?;
    for r in &results {
        println!("{} {}", r.name, r.sparse.summary());
    }
    let mut manifest = RunManifest::new(
        "batch",
        serde_json::json!({
            "seed": seed,
            "n": a.n,
            "jobs": a.jobs,
            "oracle": a.oracle,
            "half_width": a.half_width,
            "size": a.size,
            "samples_per_frame": a.samples_per_frame,
            "sim": opts.sim,
            "layout": scenarios.iter().map(|s| &s.name).collect::<Vec<_>>(),
        }),
    );
    manifest.add_input("traj", &a.traj)?;
    manifest.add_input("camera", &a.dataset.join("camera.json"))?;
    manifest.add_output(Path::new("batch_summary.json"));
    for s in &scenarios {
        manifest.add_output(Path::new(&s.name));
    }
    manifest.wall_time_s = clock.elapsed().as_secs_f64();
    manifest.write(&a.out.join("batch_manifest.json"))
}
