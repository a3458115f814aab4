//! Randomized agreement trials between the frame-stepped voxel simulation and
//! the binned reference event stream.

use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::events::{discrete_voxel_from_events, oracle_simulate_log};
use crate::rng::{derive_rng, SceneKey, StreamTag};
use crate::sensor::{init_residual, v2v_voxel_log};
use crate::types::{Dims, LogLuminance, SensorParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `c_plus == c_minus`, arbitrary log-luminance walks.
    EqualThresholds,
    /// Independent thresholds, each pixel's log luminance monotonic.
    Monotonic,
    /// Independent thresholds, arbitrary walks. No exactness claim.
    Free,
}

impl Regime {
    /// Regimes in which both paths must agree exactly.
    pub fn is_exact(&self) -> bool {
        !matches!(self, Regime::Free)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Regime::EqualThresholds => "equal-thresholds",
            Regime::Monotonic => "monotonic",
            Regime::Free => "free",
        }
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equal-thresholds" => Ok(Regime::EqualThresholds),
            "monotonic" => Ok(Regime::Monotonic),
            "free" => Ok(Regime::Free),
            other => Err(Error::config(format!("unknown regime {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialConfig {
    pub dims: Dims,
    /// Frames per trial, i.e. `B + 1`.
    pub frames: usize,
    pub regime: Regime,
    /// Threshold range for `c_plus` and `c_minus`.
    pub threshold_lo: f64,
    pub threshold_hi: f64,
    /// Largest per-frame log-luminance step.
    pub max_step: f64,
}

impl TrialConfig {
    pub fn new(dims: Dims, frames: usize, regime: Regime) -> Self {
        TrialConfig {
            dims,
            frames,
            regime,
            threshold_lo: 0.1,
            threshold_hi: 1.0,
            max_step: 1.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CheckReport {
    pub trials: usize,
    pub total_bins: u64,
    pub mismatched_bins: u64,
    pub max_abs_deviation: u32,
    pub events: u64,
}

impl CheckReport {
    pub fn passed(&self, regime: Regime) -> bool {
        !regime.is_exact() || self.max_abs_deviation == 0
    }
}

/// Inputs of one randomized trial.
#[derive(Debug, Clone)]
pub struct Trial {
    pub logs: Vec<LogLuminance>,
    pub params: SensorParams,
    pub keys: SceneKey,
}

/// Draw trial `index` of a run seeded with `seed`: a per-pixel log-luminance
/// random walk, thresholds per regime, no noise and no hot pixels.
pub fn make_trial(cfg: &TrialConfig, seed: u64, index: u64) -> Result<Trial> {
    if cfg.frames < 2 {
        return Err(Error::config(format!(
            "trials need at least 2 frames, got {}",
            cfg.frames
        )));
    }
    let keys = SceneKey::new(seed, index, 0);
    let mut rng = derive_rng(&keys.key(StreamTag::Params, 0));
    let c_plus = rng.random_range(cfg.threshold_lo..=cfg.threshold_hi);
    let c_minus = match cfg.regime {
        Regime::EqualThresholds => c_plus,
        _ => rng.random_range(cfg.threshold_lo..=cfg.threshold_hi),
    };
    let params = SensorParams::ideal(c_plus, c_minus, cfg.dims)?;

    let n = cfg.dims.len();
    let mut current: Vec<f64> = (0..n).map(|_| rng.random_range(-4.6..0.0)).collect();
    let direction: Vec<f64> = (0..n)
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect();
    let mut logs = vec![LogLuminance::from_vec(cfg.dims, current.clone())?];
    for _ in 1..cfg.frames {
        for (v, dir) in current.iter_mut().zip(&direction) {
            let step = match cfg.regime {
                Regime::Monotonic => dir * rng.random_range(0.0..cfg.max_step),
                _ => rng.random_range(-cfg.max_step..cfg.max_step),
            };
            *v += step;
        }
        logs.push(LogLuminance::from_vec(cfg.dims, current.clone())?);
    }
    Ok(Trial { logs, params, keys })
}

/// Run `trials` trials and compare both paths bin by bin.
pub fn run_trials(cfg: &TrialConfig, trials: usize, seed: u64) -> Result<CheckReport> {
    let mut report = CheckReport {
        trials,
        ..Default::default()
    };
    let bins = cfg.frames - 1;
    for index in 0..trials as u64 {
        let trial = make_trial(cfg, seed, index)?;
        let initial = init_residual(&trial.params, cfg.dims, &trial.keys.key(StreamTag::Init, 0));
        let (fast, _) = v2v_voxel_log(&trial.logs, &trial.params, &initial, &trial.keys, 0)?;
        let stream = oracle_simulate_log(&trial.logs, &trial.params, &initial, &trial.keys, 0)?;
        let reference = discrete_voxel_from_events(&stream, bins)?;
        report.events += stream.len() as u64;
        report.total_bins += fast.data().len() as u64;
        for (a, b) in fast.data().iter().zip(reference.data()) {
            let dev = a.abs_diff(*b);
            if dev > 0 {
                report.mismatched_bins += 1;
                report.max_abs_deviation = report.max_abs_deviation.max(dev);
            }
        }
    }
    Ok(report)
}
