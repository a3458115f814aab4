//! Command-line front end.
//!
//! Reports go to stdout as `key=value` lines; progress goes to stderr.
//! Exit status is 0 on success, 1 on runtime or data errors and 2 on usage or
//! configuration errors.

use std::ffi::OsString;
use std::fs;
use std::io::{Read, Write};
use std::ops::Range as Span;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::check::{run_trials, Regime, TrialConfig};
use crate::error::{Error, Result};
use crate::events::{
    discrete_voxel_from_events, interpolated_voxel_from_events, normalize_window, read_events,
    EventFormat, ReadOptions,
};
use crate::ingest::{
    crop_frame, list_frame_files, read_frame, read_frame_files, read_frames_raw, read_raw_window,
    CropRect, DegradeConfig,
};
use crate::pipeline::{
    build_sample, plan_slices, stats, write_interpolated_voxels, write_voxels, DatasetManifest,
    ParamPolicy, SampleConfig, SceneEntry, SceneSource, SlicePlan, SourceKind,
};
use crate::rng::{scene_id_from_name, SceneKey};
use crate::sensor::{ParamRanges, Range, SimConfig, DEFAULT_GAMMA, DEFAULT_LOG_EPS};
use crate::types::{Dims, Frame};

pub const EXIT_OK: u8 = 0;
pub const EXIT_RUNTIME: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "v2v",
    version,
    about = "Simulate event voxels from video frames"
)]
pub struct Cli {
    /// Suppress progress messages on stderr.
    #[arg(short, long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert frames into voxel files plus a manifest.
    Simulate(SimulateArgs),
    /// Bin an event file into voxel files.
    ConvertEvents(ConvertArgs),
    /// Compare the frame-stepped simulation against the event-level reference.
    OracleCheck(OracleArgs),
    /// Summarize a manifest.
    Stats(StatsArgs),
    /// Time the simulation and report storage sizes.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Random,
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Repr {
    Discrete,
    Interpolated,
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Image directory, directory of scenes, raw frame file, or `-` for raw stdin.
    #[arg(long)]
    pub input: String,
    /// Frame width of raw input.
    #[arg(long)]
    pub raw_width: Option<usize>,
    /// Frame height of raw input.
    #[arg(long)]
    pub raw_height: Option<usize>,
    /// Glob selecting image files inside a scene directory.
    #[arg(long)]
    pub pattern: Option<String>,
    #[arg(long, default_value_t = 30.0)]
    pub frame_rate: f64,
    /// Source crop `top:left:height:width` applied before simulation.
    #[arg(long, value_parser = parse_crop)]
    pub crop: Option<CropRect>,
}

#[derive(Debug, Clone, Args)]
pub struct SimArgs {
    /// Bins per voxel.
    #[arg(long, default_value_t = 5)]
    pub bins: usize,
    /// Voxels per sequence.
    #[arg(long, default_value_t = 40)]
    pub voxels: usize,
    /// Frames between window starts; defaults to the window length.
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long, env = "V2V_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = PolicyArg::Random)]
    pub policy: PolicyArg,
    #[arg(long, value_parser = parse_range, default_value = "0.1:1.0")]
    pub c_pos: Range,
    #[arg(long, value_parser = parse_range, default_value = "0.1:1.0")]
    pub c_neg: Range,
    #[arg(long, value_parser = parse_range, default_value = "0:0.05")]
    pub sigma_bg: Range,
    #[arg(long, value_parser = parse_range, default_value = "0:0.0005")]
    pub hot_frac: Range,
    #[arg(long, value_parser = parse_range, default_value = "0.1:1.0")]
    pub hot_mag: Range,
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    pub gamma: f64,
    #[arg(long, default_value_t = DEFAULT_LOG_EPS)]
    pub log_eps: f64,
    /// Probability that a sequence gets its dynamic range degraded.
    #[arg(long, default_value_t = 0.0)]
    pub degrade_prob: f64,
    #[arg(long, value_parser = parse_range, default_value = "1:3")]
    pub degrade_scale: Range,
    /// Worker threads; defaults to the available CPUs.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub epochs: u64,
    #[command(flatten)]
    pub sim: SimArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub sim: SimArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ConvertArgs {
    #[arg(long)]
    pub events: PathBuf,
    #[arg(long, value_parser = parse_format, default_value = "text")]
    pub format: EventFormat,
    #[arg(long, default_value_t = 5)]
    pub bins: usize,
    #[arg(long, value_enum, default_value_t = Repr::Discrete)]
    pub repr: Repr,
    /// Window start in input time units.
    #[arg(long, default_value_t = 0.0)]
    pub t0: f64,
    /// Window end in input time units.
    #[arg(long, default_value_t = 1.0)]
    pub t1: f64,
    /// Split `[t0, t1]` into consecutive windows of this length.
    #[arg(long)]
    pub window: Option<f64>,
    /// Sensor width for text input; inferred from the events if absent.
    #[arg(long, requires = "height")]
    pub width: Option<usize>,
    #[arg(long, requires = "width")]
    pub height: Option<usize>,
    /// Sort out-of-order input instead of rejecting it.
    #[arg(long)]
    pub sort: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, env = "V2V_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Grid size `HxW`.
    #[arg(long, value_parser = parse_size, default_value = "8x8")]
    pub size: Dims,
    /// Frames per trial.
    #[arg(long, default_value_t = 6)]
    pub frames: usize,
    #[arg(long, value_parser = parse_regime, default_value = "equal-thresholds")]
    pub regime: Regime,
}

#[derive(Debug, Clone, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub bins: usize,
    #[arg(long, default_value_t = 40)]
    pub voxels: usize,
}

/// `lo:hi`, or `v` for the degenerate range `v:v`.
pub fn parse_range(s: &str) -> std::result::Result<Range, String> {
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| format!("{t:?} is not a number"))
    };
    match s.split_once(':') {
        Some((lo, hi)) => Ok(Range::new(num(lo)?, num(hi)?)),
        None => num(s).map(Range::point),
    }
}

/// `top:left:height:width`.
pub fn parse_crop(s: &str) -> std::result::Result<CropRect, String> {
    let parts = s
        .split(':')
        .map(|t| t.trim().parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| format!("{s:?} is not top:left:height:width"))?;
    match parts[..] {
        [top, left, height, width] if height > 0 && width > 0 => Ok(CropRect {
            top,
            left,
            height,
            width,
        }),
        _ => Err(format!(
            "{s:?} is not top:left:height:width with positive size"
        )),
    }
}

/// `HxW`.
pub fn parse_size(s: &str) -> std::result::Result<Dims, String> {
    let (h, w) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("{s:?} is not HxW"))?;
    let h = h
        .trim()
        .parse::<usize>()
        .map_err(|_| format!("{s:?} is not HxW"))?;
    let w = w
        .trim()
        .parse::<usize>()
        .map_err(|_| format!("{s:?} is not HxW"))?;
    Dims::new(w, h).map_err(|e| e.to_string())
}

fn parse_regime(s: &str) -> std::result::Result<Regime, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_format(s: &str) -> std::result::Result<EventFormat, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Prefix configuration errors with the flag that caused them.
fn for_flag(flag: &str, e: Error) -> Error {
    if e.is_config() {
        Error::config(format!("{flag}: {e}"))
    } else {
        e
    }
}

fn range_flag(field: &str) -> &'static str {
    match field {
        "c_plus" => "--c-pos",
        "c_minus" => "--c-neg",
        "sigma_bg" => "--sigma-bg",
        "hot_pixel_fraction" => "--hot-frac",
        "hot_pixel_magnitude" => "--hot-mag",
        _ => "--range",
    }
}

struct Log {
    quiet: bool,
}

impl Log {
    fn info(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("v2v: {}", msg.as_ref());
        }
    }
}

fn emit(pairs: &[(String, String)]) -> Result<()> {
    let mut out = std::io::stdout().lock();
    for (k, v) in pairs {
        writeln!(out, "{k}={v}")?;
    }
    out.flush()?;
    Ok(())
}

fn kv(k: &str, v: impl ToString) -> (String, String) {
    (k.to_string(), v.to_string())
}

impl SimArgs {
    fn sample_config(&self) -> Result<SampleConfig> {
        let ranges = ParamRanges {
            c_plus: self.c_pos,
            c_minus: self.c_neg,
            sigma_bg: self.sigma_bg,
            hot_pixel_fraction: self.hot_frac,
            hot_pixel_magnitude: self.hot_mag,
        };
        ranges.validate().map_err(|e| match &e {
            Error::InvalidRange { field, .. } => for_flag(range_flag(field), e),
            _ => e,
        })?;
        let sim = SimConfig {
            gamma: self.gamma,
            log_eps: self.log_eps,
        };
        sim.validate()
            .map_err(|e| for_flag("--gamma/--log-eps", e))?;
        let plan = SlicePlan {
            stride: self.stride,
            ..SlicePlan::new(self.bins, self.voxels)
        };
        plan.validate()
            .map_err(|e| for_flag("--bins/--voxels/--stride", e))?;
        let degrade = DegradeConfig {
            probability: self.degrade_prob,
            scale: self.degrade_scale,
        };
        degrade
            .validate()
            .map_err(|e| for_flag("--degrade-prob/--degrade-scale", e))?;
        let policy = match self.policy {
            PolicyArg::Random => ParamPolicy::randomized(ranges),
            PolicyArg::Fixed => ParamPolicy::fixed(ranges),
        };
        Ok(SampleConfig {
            sim,
            policy,
            plan,
            degrade,
        })
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        let workers = match self.workers {
            Some(0) => return Err(Error::config("--workers must be >= 1")),
            Some(n) => n,
            None => std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1),
        };
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Data(format!("cannot start worker pool: {e}")))
    }
}

enum Frames {
    Images(Vec<PathBuf>),
    RawFile(PathBuf),
    Memory(Vec<Frame>),
}

/// One input scene, read lazily window by window.
struct Scene {
    name: String,
    frames: Frames,
    frame_count: usize,
    frame_rate: f64,
    source_dims: Dims,
    crop: Option<CropRect>,
    pattern: Option<String>,
    source_bytes: u64,
}

impl Scene {
    fn dims(&self) -> Result<Dims> {
        match self.crop {
            Some(rect) => rect
                .check(self.source_dims)
                .map_err(|e| for_flag("--crop", e)),
            None => Ok(self.source_dims),
        }
    }

    fn window(&self, range: Span<usize>) -> Result<Vec<Frame>> {
        let frames = match &self.frames {
            Frames::Images(files) => {
                read_frame_files(&files[range], self.frame_rate, &self.name)?.into_frames()
            }
            Frames::RawFile(path) => read_raw_window(path, self.source_dims, range)?,
            Frames::Memory(all) => all[range].to_vec(),
        };
        match self.crop {
            Some(rect) => frames.iter().map(|f| crop_frame(f, rect)).collect(),
            None => Ok(frames),
        }
    }

    fn manifest_entry(&self) -> Result<SceneEntry> {
        let dims = self.dims()?;
        let mut entry = SceneEntry::new(
            self.name.clone(),
            self.frame_count,
            dims.width,
            dims.height,
            self.frame_rate,
            self.source_bytes,
        );
        let located = match &self.frames {
            Frames::Images(files) => files[0]
                .parent()
                .map(|p| (SourceKind::Images, p.to_path_buf())),
            Frames::RawFile(path) => Some((SourceKind::Raw, path.clone())),
            Frames::Memory(_) => None,
        };
        entry.source = located.map(|(kind, path)| SceneSource {
            kind,
            path,
            pattern: self.pattern.clone(),
            source_dims: Some(self.source_dims),
            crop: self.crop,
        });
        Ok(entry)
    }
}

fn file_len(path: &Path) -> Result<u64> {
    Ok(fs::metadata(path)
        .map_err(|e| Error::from(e).in_file(path))?
        .len())
}

fn raw_dims(input: &InputArgs) -> Result<Dims> {
    match (input.raw_width, input.raw_height) {
        (Some(w), Some(h)) => Dims::new(w, h).map_err(|e| for_flag("--raw-width/--raw-height", e)),
        _ => Err(Error::config(
            "--raw-width and --raw-height are required for raw input",
        )),
    }
}

fn image_scene(name: String, files: Vec<PathBuf>, input: &InputArgs) -> Result<Scene> {
    let source_dims = read_frame(&files[0])?.dims();
    let mut source_bytes = 0;
    for f in &files {
        source_bytes += file_len(f)?;
    }
    Ok(Scene {
        name,
        frame_count: files.len(),
        frames: Frames::Images(files),
        frame_rate: input.frame_rate,
        source_dims,
        crop: input.crop,
        pattern: input.pattern.clone(),
        source_bytes,
    })
}

fn raw_scene(path: PathBuf, dims: Dims, input: &InputArgs) -> Result<Scene> {
    let len = file_len(&path)?;
    let frame_bytes = dims.len() as u64;
    if len % frame_bytes != 0 {
        return Err(Error::data(format!(
            "{len} bytes is not a whole number of {dims} frames (partial frame at byte offset {})",
            len - len % frame_bytes
        ))
        .in_file(&path));
    }
    Ok(Scene {
        name: stem(&path),
        frame_count: (len / frame_bytes) as usize,
        frames: Frames::RawFile(path),
        frame_rate: input.frame_rate,
        source_dims: dims,
        crop: input.crop,
        pattern: None,
        source_bytes: len,
    })
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .or_else(|| path.file_name())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scene".into())
}

/// Resolve `--input` into scenes, sorted by name.
fn discover(input: &InputArgs) -> Result<Vec<Scene>> {
    if !(input.frame_rate > 0.0 && input.frame_rate.is_finite()) {
        return Err(Error::config(format!(
            "--frame-rate must be > 0, got {}",
            input.frame_rate
        )));
    }
    if input.input == "-" {
        let dims = raw_dims(input)?;
        let mut bytes = Vec::new();
        std::io::stdin().lock().read_to_end(&mut bytes)?;
        let frames = read_frames_raw(bytes.as_slice(), dims.width, dims.height, "stdin")
            .map_err(|e| e.in_file("<stdin>"))?
            .into_frames();
        return Ok(vec![Scene {
            name: "stdin".into(),
            frame_count: frames.len(),
            frames: Frames::Memory(frames),
            frame_rate: input.frame_rate,
            source_dims: dims,
            crop: input.crop,
            pattern: None,
            source_bytes: bytes.len() as u64,
        }]);
    }
    let path = PathBuf::from(&input.input);
    if !path.exists() {
        return Err(Error::config(format!(
            "--input: {} does not exist",
            path.display()
        )));
    }
    let path = fs::canonicalize(&path).map_err(|e| Error::from(e).in_file(&path))?;
    if path.is_file() {
        return Ok(vec![raw_scene(path, raw_dims(input)?, input)?]);
    }
    let pattern = input.pattern.as_deref();
    let files = list_frame_files(&path, pattern)?;
    if !files.is_empty() {
        return Ok(vec![image_scene(stem(&path), files, input)?]);
    }
    let mut entries = fs::read_dir(&path)
        .map_err(|e| Error::from(e).in_file(&path))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()?;
    entries.sort();
    let mut scenes = Vec::new();
    for entry in entries {
        if entry.is_dir() {
            let files = list_frame_files(&entry, pattern)?;
            if !files.is_empty() {
                scenes.push(image_scene(stem(&entry), files, input)?);
            }
        } else if entry
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("raw"))
        {
            scenes.push(raw_scene(entry, raw_dims(input)?, input)?);
        }
    }
    if scenes.is_empty() {
        return Err(
            Error::data("no scenes found (image directories or .raw files)").in_file(&path),
        );
    }
    Ok(scenes)
}

struct Job {
    epoch: u64,
    scene: usize,
    window: usize,
    range: Span<usize>,
}

fn plan_jobs(scenes: &[Scene], plan: &SlicePlan, epochs: u64, log: &Log) -> Result<Vec<Job>> {
    let mut jobs = Vec::new();
    for (si, scene) in scenes.iter().enumerate() {
        scene.dims()?;
        let windows = plan_slices(scene.frame_count, plan)?;
        if windows.is_empty() {
            log.info(format!(
                "{}: {} frames is shorter than one {}-frame window, skipped",
                scene.name,
                scene.frame_count,
                plan.window_len()
            ));
        }
        for epoch in 0..epochs {
            for (wi, range) in windows.iter().enumerate() {
                jobs.push(Job {
                    epoch,
                    scene: si,
                    window: wi,
                    range: range.clone(),
                });
            }
        }
    }
    Ok(jobs)
}

fn simulate_job(
    scene: &Scene,
    job: &Job,
    config: &SampleConfig,
    seed: u64,
) -> Result<Vec<crate::types::DiscreteVoxel>> {
    let frames = scene.window(job.range.clone())?;
    let keys = SceneKey::new(seed, scene_id_from_name(&scene.name), job.epoch);
    Ok(build_sample(&frames, config, keys, job.range.start)
        .map_err(|e| e.in_file(format!("{}[{}]", scene.name, job.window)))?
        .voxels)
}

/// First error in job order, so failures are reported deterministically.
fn first_error<T>(results: Vec<Result<T>>) -> Result<Vec<T>> {
    results.into_iter().collect()
}

fn cmd_simulate(args: &SimulateArgs, log: &Log) -> Result<()> {
    let config = args.sim.sample_config()?;
    if args.epochs == 0 {
        return Err(Error::config("--epochs must be >= 1"));
    }
    let pool = args.sim.pool()?;
    let scenes = discover(&args.input)?;
    let jobs = plan_jobs(&scenes, &config.plan, args.epochs, log)?;

    let scene_dir = |epoch: u64, name: &str| {
        if args.epochs > 1 {
            args.output.join(format!("epoch-{epoch}")).join(name)
        } else {
            args.output.join(name)
        }
    };
    for epoch in 0..args.epochs {
        for scene in &scenes {
            let dir = scene_dir(epoch, &scene.name);
            fs::create_dir_all(&dir).map_err(|e| Error::from(e).in_file(&dir))?;
        }
    }
    log.info(format!(
        "{} scenes, {} sequences to simulate",
        scenes.len(),
        jobs.len()
    ));

    let results = pool.install(|| {
        jobs.par_iter()
            .map(|job| {
                let scene = &scenes[job.scene];
                let voxels = simulate_job(scene, job, &config, args.sim.seed)?;
                let path = scene_dir(job.epoch, &scene.name).join(format!("{}.v2vx", job.window));
                write_voxels(&voxels, &path)?;
                Ok(voxels.len())
            })
            .collect::<Vec<_>>()
    });
    let voxels: usize = first_error(results)?.iter().sum();

    let entries = scenes
        .iter()
        .map(Scene::manifest_entry)
        .collect::<Result<Vec<_>>>()?;
    let manifest = DatasetManifest::new(entries).with_summary(&config.plan)?;
    manifest.validate()?;
    let manifest_path = args.output.join("manifest.json");
    manifest.save(&manifest_path)?;

    emit(&[
        kv("scenes", scenes.len()),
        kv("epochs", args.epochs),
        kv("files", jobs.len()),
        kv("voxels", voxels),
        kv("manifest", manifest_path.display()),
    ])
}

fn cmd_bench(args: &BenchArgs, log: &Log) -> Result<()> {
    let config = args.sim.sample_config()?;
    let pool = args.sim.pool()?;
    let scenes = discover(&args.input)?;
    let jobs = plan_jobs(&scenes, &config.plan, 1, log)?;
    let source_bytes: u64 = scenes.iter().map(|s| s.source_bytes).sum();

    let start = Instant::now();
    let results = pool.install(|| {
        jobs.par_iter()
            .map(|job| {
                let voxels = simulate_job(&scenes[job.scene], job, &config, args.sim.seed)?;
                Ok(voxels
                    .iter()
                    .map(|v| (v.data().len() * 4) as u64)
                    .sum::<u64>())
                .map(|bytes| (voxels.len(), bytes))
            })
            .collect::<Vec<_>>()
    });
    let elapsed = start.elapsed().as_secs_f64();
    let done = first_error(results)?;
    let voxels: usize = done.iter().map(|(n, _)| n).sum();
    let prestacked: u64 = done.iter().map(|(_, b)| b).sum();

    let mut pairs = vec![
        kv("scenes", scenes.len()),
        kv("sequences", jobs.len()),
        kv("voxels", voxels),
        kv("elapsed_s", format!("{elapsed:.3}")),
        kv(
            "voxels_per_s",
            format!("{:.1}", voxels as f64 / elapsed.max(1e-9)),
        ),
        kv("source_bytes", source_bytes),
        kv("prestacked_bytes", prestacked),
    ];
    if prestacked > 0 {
        let r = source_bytes as f64 / prestacked as f64;
        pairs.push(kv("ratio", crate::pipeline::format_sig3(r)));
        pairs.push(kv(
            "prestacked_per_source",
            crate::pipeline::format_sig3(1.0 / r),
        ));
    } else {
        pairs.push(kv("ratio", "n/a"));
        pairs.push(kv("prestacked_per_source", "n/a"));
    }
    emit(&pairs)
}

fn cmd_convert(args: &ConvertArgs, log: &Log) -> Result<()> {
    if args.bins == 0 {
        return Err(Error::config("--bins must be >= 1"));
    }
    if args.repr == Repr::Interpolated && args.bins < 2 {
        return Err(Error::config("--bins must be >= 2 for --repr interpolated"));
    }
    if !(args.t0 < args.t1 && args.t0.is_finite() && args.t1.is_finite()) {
        return Err(Error::config(format!(
            "--t0/--t1: need t0 < t1, got {} and {}",
            args.t0, args.t1
        )));
    }
    let span = args.t1 - args.t0;
    let windows = match args.window {
        Some(w) if w > 0.0 && w.is_finite() => (span / w).ceil().max(1.0) as usize,
        Some(w) => return Err(Error::config(format!("--window must be > 0, got {w}"))),
        None => 1,
    };
    let width = args.window.unwrap_or(span);
    let dims = match (args.width, args.height) {
        (Some(w), Some(h)) => Some(Dims::new(w, h).map_err(|e| for_flag("--width/--height", e))?),
        _ => None,
    };
    if !args.events.exists() {
        return Err(Error::config(format!(
            "--events: {} does not exist",
            args.events.display()
        )));
    }
    let stream = read_events(
        &args.events,
        args.format,
        ReadOptions {
            dims,
            sort: args.sort,
        },
    )?;
    fs::create_dir_all(&args.out).map_err(|e| Error::from(e).in_file(&args.out))?;

    let mut kept = 0;
    for k in 0..windows {
        let lo = args.t0 + k as f64 * width;
        let last = k + 1 == windows;
        let hi = if last {
            args.t1
        } else {
            args.t0 + (k + 1) as f64 * width
        };
        let window = normalize_window(&stream, lo, hi, last)?;
        kept += window.len();
        let path = args.out.join(format!("{k}.v2vx"));
        match args.repr {
            Repr::Discrete => {
                write_voxels(&[discrete_voxel_from_events(&window, args.bins)?], &path)?
            }
            Repr::Interpolated => write_interpolated_voxels(
                &[interpolated_voxel_from_events(&window, args.bins)?],
                &path,
            )?,
        }
    }
    if kept < stream.len() {
        log.info(format!(
            "{} events outside [{}, {}] dropped",
            stream.len() - kept,
            args.t0,
            args.t1
        ));
    }
    emit(&[
        kv("events", stream.len()),
        kv("binned", kept),
        kv("windows", windows),
        kv("bins", args.bins),
        kv("width", stream.dims().width),
        kv("height", stream.dims().height),
        kv("output", args.out.display()),
    ])
}

/// Returns whether the check passed.
fn cmd_oracle(args: &OracleArgs) -> Result<bool> {
    let cfg = TrialConfig::new(args.size, args.frames, args.regime);
    if args.frames < 2 {
        return Err(Error::config(format!(
            "--frames must be >= 2, got {}",
            args.frames
        )));
    }
    let start = Instant::now();
    let report = run_trials(&cfg, args.trials, args.seed)?;
    let elapsed = start.elapsed().as_secs_f64();
    let passed = report.passed(args.regime);
    let status = match (args.regime.is_exact(), passed) {
        (false, _) => "informational",
        (true, true) => "pass",
        (true, false) => "fail",
    };
    emit(&[
        kv("regime", args.regime.name()),
        kv("trials", report.trials),
        kv("size", format!("{}x{}", args.size.height, args.size.width)),
        kv("frames", args.frames),
        kv("events", report.events),
        kv("total_bins", report.total_bins),
        kv("mismatched_bins", report.mismatched_bins),
        kv("max_abs_deviation", report.max_abs_deviation),
        kv("elapsed_s", format!("{elapsed:.3}")),
        kv("status", status),
    ])?;
    Ok(passed)
}

fn cmd_stats(args: &StatsArgs) -> Result<()> {
    if !args.manifest.is_file() {
        return Err(Error::config(format!(
            "--manifest: {} not found",
            args.manifest.display()
        )));
    }
    let plan = SlicePlan::new(args.bins, args.voxels);
    plan.validate()
        .map_err(|e| for_flag("--bins/--voxels", e))?;
    let manifest = DatasetManifest::load(&args.manifest)?;
    let report = stats(&manifest, &plan)?;
    let mut pairs = vec![kv("bins", args.bins), kv("voxels", args.voxels)];
    pairs.extend(report.key_values());
    emit(&pairs)
}

fn exit_code(e: &Error) -> u8 {
    if e.is_config() {
        EXIT_CONFIG
    } else {
        EXIT_RUNTIME
    }
}

/// Parse `args` (including the program name) and run; returns the exit status.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let log = Log { quiet: cli.quiet };
    let outcome = match &cli.command {
        Command::Simulate(a) => cmd_simulate(a, &log).map(|_| true),
        Command::Bench(a) => cmd_bench(a, &log).map(|_| true),
        Command::ConvertEvents(a) => cmd_convert(a, &log).map(|_| true),
        Command::OracleCheck(a) => cmd_oracle(a),
        Command::Stats(a) => cmd_stats(a).map(|_| true),
    };
    match outcome {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_RUNTIME,
        Err(e) => {
            eprintln!("v2v: error: {e}");
            exit_code(&e)
        }
    }
}

pub fn main() -> std::process::ExitCode {
    std::process::ExitCode::from(run(std::env::args_os()))
}
