//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
//!
//! Runs without the libtest harness so the report lines always reach stdout.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use v2v_core::check::{run_trials, Regime, TrialConfig};
use v2v_core::events::{discrete_voxel_from_events, interpolated_voxel_from_events};
use v2v_core::ingest::degrade_dynamic_range;
use v2v_core::pipeline::{build_sample, ParamPolicy, SampleConfig, SlicePlan};
use v2v_core::sensor::{init_residual, step, ParamRanges, SimConfig};
use v2v_core::{
    Dims, EventRecord, EventStream, Frame, LogLuminance, SceneKey, SensorParams, StreamTag,
};

const ORACLE_TRIALS: usize = 1000;
const ORACLE_TIME_LIMIT: Duration = Duration::from_secs(10);
const CONSERVATION_EVENTS: usize = 100_000;
/// Interpolated bin sums may differ from net polarity by this much per event.
const INTERPOLATED_TOL_PER_EVENT: f64 = 1e-9;
/// Telescoped log change may differ from the endpoint difference by this much per step.
const TELESCOPE_TOL_PER_STEP: f64 = 1e-9;
const TELESCOPE_SEQUENCES: usize = 100;
const PRESTACKED_BYTES: u64 = 85_824_000;
/// Average source size of one web video in the reference corpus: 19.14e9 B over 10000 videos.
const REFERENCE_SOURCE_BYTES: u64 = 1_914_000;
const TARGET_STORAGE_FACTOR: f64 = 45.0;
const STORAGE_FACTOR_TOL: f64 = 0.5;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn oracle(regime: Regime, require_exact: bool) -> Outcome {
    let cfg = TrialConfig::new(Dims::new(8, 8).unwrap(), 6, regime);
    let start = Instant::now();
    let report = match run_trials(&cfg, ORACLE_TRIALS, 20_240_601) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("harness error: {e}")),
    };
    let elapsed = start.elapsed();
    let detail = format!(
        "trials={} events={} max_abs_deviation={} mismatched_bins={}/{} elapsed={:.2}s",
        report.trials,
        report.events,
        report.max_abs_deviation,
        report.mismatched_bins,
        report.total_bins,
        elapsed.as_secs_f64()
    );
    let ok = report.trials == ORACLE_TRIALS
        && report.events > 0
        && elapsed < ORACLE_TIME_LIMIT
        && (!require_exact || report.max_abs_deviation == 0);
    outcome(ok, detail)
}

fn conservation() -> Outcome {
    let dims = Dims::new(32, 24).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut records: Vec<EventRecord> = (0..CONSERVATION_EVENTS)
        .map(|_| {
            EventRecord::new(
                rng.random::<f64>(),
                rng.random_range(0..32),
                rng.random_range(0..24),
                if rng.random::<bool>() { 1 } else { -1 },
            )
        })
        .collect();
    // exercise both closed ends of the window
    records[0].t = 0.0;
    records[1].t = 1.0;
    let stream = EventStream::from_unsorted(dims, records).unwrap();
    let net = stream.net_polarity();
    let mut per_pixel = vec![0usize; dims.len()];
    for r in stream.records() {
        per_pixel[dims.index(r.x as usize, r.y as usize)] += 1;
    }
    let discrete = discrete_voxel_from_events(&stream, 5).unwrap();
    let discrete_ok = discrete.bin_sum() == net;
    let interp = interpolated_voxel_from_events(&stream, 5).unwrap();
    let mut worst = 0.0f64;
    let mut interp_ok = true;
    for ((s, n), c) in interp.bin_sum().iter().zip(&net).zip(&per_pixel) {
        let err = (s - *n as f64).abs();
        worst = worst.max(err);
        interp_ok &= err <= INTERPOLATED_TOL_PER_EVENT * *c as f64;
    }
    outcome(
        discrete_ok && interp_ok,
        format!(
            "events={} discrete_exact={} interpolated_max_err={worst:.3e}",
            stream.len(),
            discrete_ok
        ),
    )
}

fn telescoping() -> Outcome {
    let dims = Dims::new(8, 8).unwrap();
    let steps = 10;
    let sim = SimConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst_ratio = 0.0f64;
    for seq in 0..TELESCOPE_SEQUENCES {
        let c_plus = rng.random_range(0.1..1.0);
        let c_minus = rng.random_range(0.1..1.0);
        let params = SensorParams::ideal(c_plus, c_minus, dims).unwrap();
        let frames: Vec<Frame> = (0..=steps)
            .map(|_| Frame::new(8, 8, (0..64).map(|_| rng.random::<u8>()).collect()).unwrap())
            .collect();
        let logs: Vec<LogLuminance> = sim.frames_log(&frames);
        let keys = SceneKey::new(3, seq as u64, 0);
        let initial = init_residual(&params, dims, &keys.key(StreamTag::Init, 0));
        let mut residual = initial.clone();
        let mut fired = vec![0.0f64; dims.len()];
        for i in 1..=steps {
            let dlog = logs[i].difference(&logs[i - 1]).unwrap();
            let out = step(
                &residual,
                &dlog,
                &params,
                &keys.key(StreamTag::Noise, i as u64),
            )
            .unwrap();
            for (k, f) in fired.iter_mut().enumerate() {
                *f += c_plus * f64::from(out.n_plus.as_slice()[k])
                    - c_minus * f64::from(out.n_minus.as_slice()[k]);
            }
            residual = out.residual;
        }
        for k in 0..dims.len() {
            let lhs = fired[k] + residual.values()[k] - initial.values()[k];
            let rhs = logs[steps].values()[k] - logs[0].values()[k];
            worst_ratio = worst_ratio.max((lhs - rhs).abs() / steps as f64);
        }
    }
    outcome(
        worst_ratio <= TELESCOPE_TOL_PER_STEP,
        format!("sequences={TELESCOPE_SEQUENCES} steps={steps} max_err_per_step={worst_ratio:.3e}"),
    )
}

fn v2v() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_v2v"));
    cmd.env_remove("V2V_SEED");
    cmd
}

/// Relative path to file contents for every file under `root`.
fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.insert(
                    path.strip_prefix(root).unwrap().to_path_buf(),
                    std::fs::read(&path).unwrap(),
                );
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

/// Three PNG scenes of different sizes and lengths.
fn write_corpus(dir: &Path) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (name, w, h, n) in [
        ("alley", 20u32, 14u32, 15usize),
        ("beach", 16, 16, 8),
        ("crowd", 24, 10, 22),
    ] {
        let scene = dir.join(name);
        std::fs::create_dir_all(&scene).unwrap();
        let base: Vec<u8> = (0..w * h).map(|_| rng.random()).collect();
        for i in 0..n {
            let data = base
                .iter()
                .map(|&b| b.wrapping_add((i * 9) as u8))
                .collect();
            image::GrayImage::from_raw(w, h, data)
                .unwrap()
                .save(scene.join(format!("frame_{i:04}.png")))
                .unwrap();
        }
    }
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    write_corpus(&corpus);
    let mut trees = Vec::new();
    for workers in [1, 4, 8] {
        let out = dir.path().join(format!("out-{workers}"));
        let status = v2v()
            .args(["-q", "simulate", "--input"])
            .arg(&corpus)
            .arg("--output")
            .arg(&out)
            .args([
                "--bins",
                "2",
                "--voxels",
                "3",
                "--epochs",
                "2",
                "--seed",
                "17",
                "--degrade-prob",
                "0.8",
            ])
            .args(["--hot-frac", "0.05:0.1", "--workers", &workers.to_string()])
            .stdout(std::process::Stdio::null())
            .status()
            .unwrap();
        if !status.success() {
            return outcome(
                false,
                format!("simulate with {workers} workers exited with {status}"),
            );
        }
        trees.push(tree(&out));
    }
    let files = trees[0].len();
    let voxel_files = trees[0]
        .keys()
        .filter(|p| p.extension().is_some_and(|e| e == "v2vx"))
        .count();
    let identical = trees.windows(2).all(|w| w[0] == w[1]);
    outcome(
        identical && voxel_files == 2 * (2 + 1 + 3),
        format!("workers=1,4,8 files={files} voxel_files={voxel_files} identical={identical}"),
    )
}

fn policy() -> Outcome {
    let dims = Dims::new(16, 12).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let window: Vec<Frame> = (0..11)
        .map(|_| Frame::new(16, 12, (0..dims.len()).map(|_| rng.random()).collect()).unwrap())
        .collect();
    let make = |policy: ParamPolicy| SampleConfig {
        policy,
        plan: SlicePlan::new(2, 5),
        degrade: Default::default(),
        ..Default::default()
    };
    let ranges = ParamRanges {
        hot_pixel_fraction: v2v_core::sensor::Range::new(0.01, 0.05),
        ..ParamRanges::default()
    };
    let fixed = make(ParamPolicy::fixed(ranges));
    let random = make(ParamPolicy::randomized(ranges));
    let epochs = 0..4u64;
    let fixed_samples: Vec<_> = epochs
        .clone()
        .map(|e| build_sample(&window, &fixed, SceneKey::new(1, 2, e), 0).unwrap())
        .collect();
    let fixed_equal = fixed_samples
        .windows(2)
        .all(|w| w[0].voxels == w[1].voxels && w[0].params == w[1].params);
    let random_params: Vec<_> = epochs
        .map(|e| {
            build_sample(&window, &random, SceneKey::new(1, 2, e), 0)
                .unwrap()
                .params
        })
        .collect();
    let mut distinct = true;
    for i in 0..random_params.len() {
        for j in i + 1..random_params.len() {
            distinct &= random_params[i] != random_params[j];
        }
    }
    outcome(
        fixed_equal && distinct,
        format!("epochs=4 fixed_voxels_equal={fixed_equal} randomized_params_distinct={distinct}"),
    )
}

fn key_values(stdout: &[u8]) -> BTreeMap<String, String> {
    String::from_utf8_lossy(stdout)
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn storage() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let (w, h, n) = (596usize, 180usize, 201usize);
    let raw = dir.path().join("clip.raw");
    let data: Vec<u8> = (0..n * w * h)
        .map(|i| ((i % w) * 255 / w) as u8 ^ ((i / (w * h)) as u8))
        .collect();
    std::fs::write(&raw, data).unwrap();
    let out = v2v()
        .args(["-q", "bench", "--input"])
        .arg(&raw)
        .args([
            "--raw-width",
            "596",
            "--raw-height",
            "180",
            "--bins",
            "5",
            "--voxels",
            "40",
        ])
        .output()
        .unwrap();
    if !out.status.success() {
        return outcome(
            false,
            format!("bench failed: {}", String::from_utf8_lossy(&out.stderr)),
        );
    }
    let kv = key_values(&out.stdout);
    let prestacked: u64 = kv
        .get("prestacked_bytes")
        .and_then(|v| v.parse().ok())
        .unwrap_or(0);
    let factor = prestacked as f64 / REFERENCE_SOURCE_BYTES as f64;
    let ok = prestacked == PRESTACKED_BYTES
        && kv.get("sequences").map(String::as_str) == Some("1")
        && (factor - TARGET_STORAGE_FACTOR).abs() < STORAGE_FACTOR_TOL;
    outcome(
        ok,
        format!(
            "prestacked_bytes={prestacked} voxels_per_s={} reference_source_bytes={REFERENCE_SOURCE_BYTES} prestacked/source={factor:.2}",
            kv.get("voxels_per_s").map(String::as_str).unwrap_or("?")
        ),
    )
}

fn degradation() -> Outcome {
    let all: Vec<u8> = (0..=255).collect();
    let frame = Frame::new(256, 1, all.clone()).unwrap();
    let identity = degrade_dynamic_range(&frame, 1.0).unwrap().data() == all.as_slice();
    let one = Frame::new(1, 1, vec![200]).unwrap();
    let clipped = degrade_dynamic_range(&one, 2.0).unwrap().data()[0];
    outcome(
        identity && clipped == 255,
        format!("s=1 identity over 256 values={identity} F=200,s=2 -> {clipped}"),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("oracle exactness, equal thresholds", || {
            oracle(Regime::EqualThresholds, true)
        }),
        ("oracle exactness, monotonic", || {
            oracle(Regime::Monotonic, true)
        }),
        ("free regime report", || oracle(Regime::Free, false)),
        ("conservation", conservation),
        ("telescoping", telescoping),
        ("cli determinism across workers", determinism),
        ("fixed vs randomized policy", policy),
        ("storage arithmetic", storage),
        ("degradation identity and clipping", degradation),
    ];
    let mut failed = 0;
    for (name, run) in &criteria {
        let result = std::panic::catch_unwind(run).unwrap_or_else(|_| outcome(false, "panicked"));
        if !result.passed {
            failed += 1;
        }
        println!(
            "{} {name}: {}",
            if result.passed { "PASS" } else { "FAIL" },
            result.detail
        );
    }
    println!(
        "{}/{} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
