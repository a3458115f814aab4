//! Frame-stepped event-sensor simulation producing discrete voxels directly.
//!
//! Each frame step adds the log-luminance difference, background noise and
//! the hot-pixel map to the per-pixel residual, converts whole multiples of
//! the contrast thresholds into event counts, and keeps the remainder for the
//! next step. The counts of one step form one voxel bin, so `B + 1` frames
//! produce a `B`-bin voxel.

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_rng, RngKey, SceneKey, StreamTag};
use crate::types::{
    Dims, DiscreteVoxel, Frame, Grid, HotPixel, HotPixelMap, LinearLuminance, LogLuminance,
    ResidualState, SensorParams,
};

/// Quotients this close to an integer are snapped to it before flooring.
pub const SNAP_TOLERANCE: f64 = 1e-12;

pub const DEFAULT_GAMMA: f64 = 2.2;
pub const DEFAULT_LOG_EPS: f64 = 0.01;

/// Closed interval `[lo, hi]` for a uniformly sampled parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Range { lo, hi }
    }

    pub const fn point(v: f64) -> Self {
        Range { lo: v, hi: v }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.lo == self.hi {
            // still consume a draw so stream layout does not depend on the range
            let _: f64 = rng.random();
            return self.lo;
        }
        rng.random_range(self.lo..=self.hi)
    }

    fn is_ordered(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi
    }
}

/// Sampling ranges for [`SensorParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamRanges {
    pub c_plus: Range,
    pub c_minus: Range,
    pub sigma_bg: Range,
    pub hot_pixel_fraction: Range,
    pub hot_pixel_magnitude: Range,
}

impl Default for ParamRanges {
    fn default() -> Self {
        ParamRanges {
            c_plus: Range::new(0.1, 1.0),
            c_minus: Range::new(0.1, 1.0),
            sigma_bg: Range::new(0.0, 0.05),
            hot_pixel_fraction: Range::new(0.0, 0.0005),
            hot_pixel_magnitude: Range::new(0.1, 1.0),
        }
    }
}

impl ParamRanges {
    /// Noise-free ranges with the given thresholds (useful for fixed experiments).
    pub fn ideal(c_plus: Range, c_minus: Range) -> Self {
        ParamRanges {
            c_plus,
            c_minus,
            sigma_bg: Range::point(0.0),
            hot_pixel_fraction: Range::point(0.0),
            hot_pixel_magnitude: Range::new(0.1, 1.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |field, r: Range, ok: bool, reason| {
            if !r.is_ordered() {
                return Err(Error::InvalidRange {
                    field,
                    lo: r.lo,
                    hi: r.hi,
                    reason: "bounds must be finite with lo <= hi",
                });
            }
            if !ok {
                return Err(Error::InvalidRange {
                    field,
                    lo: r.lo,
                    hi: r.hi,
                    reason,
                });
            }
            Ok(())
        };
        check(
            "c_plus",
            self.c_plus,
            self.c_plus.lo > 0.0,
            "threshold must be > 0",
        )?;
        check(
            "c_minus",
            self.c_minus,
            self.c_minus.lo > 0.0,
            "threshold must be > 0",
        )?;
        check(
            "sigma_bg",
            self.sigma_bg,
            self.sigma_bg.lo >= 0.0,
            "noise must be >= 0",
        )?;
        check(
            "hot_pixel_fraction",
            self.hot_pixel_fraction,
            self.hot_pixel_fraction.lo >= 0.0 && self.hot_pixel_fraction.hi < 1.0,
            "fraction must lie in [0, 1)",
        )?;
        check(
            "hot_pixel_magnitude",
            self.hot_pixel_magnitude,
            self.hot_pixel_magnitude.lo > 0.0,
            "magnitude must be > 0",
        )?;
        Ok(())
    }
}

/// Draw one set of sensor parameters.
///
/// Draw order is fixed: `c_plus`, `c_minus`, `sigma_bg`, hot-pixel fraction,
/// the hot-pixel positions, then one magnitude and sign per hot pixel.
pub fn sample_params(ranges: &ParamRanges, dims: Dims, key: &RngKey) -> Result<SensorParams> {
    ranges.validate()?;
    let mut rng = derive_rng(key);
    let c_plus = ranges.c_plus.sample(&mut rng);
    let c_minus = ranges.c_minus.sample(&mut rng);
    let sigma_bg = ranges.sigma_bg.sample(&mut rng);
    let fraction = ranges.hot_pixel_fraction.sample(&mut rng);

    let count = ((fraction * dims.len() as f64).round() as usize).min(dims.len());
    let mut positions = index::sample(&mut rng, dims.len(), count).into_vec();
    positions.sort_unstable();
    let mut entries = Vec::with_capacity(count);
    for pos in positions {
        let magnitude = ranges.hot_pixel_magnitude.sample(&mut rng);
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        entries.push(HotPixel {
            x: pos % dims.width,
            y: pos / dims.width,
            magnitude: sign * magnitude,
        });
    }
    SensorParams::new(c_plus, c_minus, sigma_bg, HotPixelMap::new(dims, entries)?)
}

/// Pixel-value to luminance conversion settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub gamma: f64,
    pub log_eps: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            gamma: DEFAULT_GAMMA,
            log_eps: DEFAULT_LOG_EPS,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::config(format!(
                "gamma must be > 0, got {}",
                self.gamma
            )));
        }
        if !(self.log_eps > 0.0 && self.log_eps.is_finite()) {
            return Err(Error::config(format!(
                "log offset must be > 0, got {}",
                self.log_eps
            )));
        }
        Ok(())
    }

    /// Log luminance for each of the 256 pixel values.
    pub fn log_table(&self) -> [f64; 256] {
        let mut table = [0.0; 256];
        for (v, out) in table.iter_mut().enumerate() {
            *out = (linearize(v as u8, self.gamma) + self.log_eps).ln();
        }
        table
    }

    /// `ln(reverse_gamma(frame) + eps)` via a lookup table.
    pub fn frame_log(&self, frame: &Frame) -> LogLuminance {
        self.frames_log(std::slice::from_ref(frame)).pop().unwrap()
    }

    pub fn frames_log(&self, frames: &[Frame]) -> Vec<LogLuminance> {
        let table = self.log_table();
        frames
            .iter()
            .map(|f| {
                let values = f.data().iter().map(|&v| table[v as usize]).collect();
                LogLuminance::from_vec(f.dims(), values).expect("table values are finite")
            })
            .collect()
    }
}

fn linearize(v: u8, gamma: f64) -> f64 {
    (f64::from(v) / 255.0).powf(gamma)
}

/// Undo display gamma: `I = (F / 255)^gamma`.
pub fn reverse_gamma(frame: &Frame, gamma: f64) -> Result<LinearLuminance> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::config(format!("gamma must be > 0, got {gamma}")));
    }
    let mut table = [0.0; 256];
    for (v, out) in table.iter_mut().enumerate() {
        *out = linearize(v as u8, gamma);
    }
    let values = frame.data().iter().map(|&v| table[v as usize]).collect();
    LinearLuminance::new(Grid::from_vec(frame.dims(), values)?)
}

/// `L = ln(I + eps)`.
pub fn log_luminance(lum: &LinearLuminance, eps: f64) -> Result<LogLuminance> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::config(format!("log offset must be > 0, got {eps}")));
    }
    let values = lum.values().iter().map(|i| (i + eps).ln()).collect();
    LogLuminance::from_vec(lum.dims(), values)
}

/// Residual for a sensor that has been running for a while: i.i.d. uniform
/// on `[-c_minus, c_plus]`.
pub fn init_residual(params: &SensorParams, dims: Dims, key: &RngKey) -> ResidualState {
    let mut rng = derive_rng(key);
    let values = (0..dims.len())
        .map(|_| rng.random_range(-params.c_minus..=params.c_plus))
        .collect();
    ResidualState::from_vec(dims, values).expect("uniform draws are finite")
}

/// Additive per-step perturbation: Gaussian background noise drawn from `key`
/// plus the hot-pixel map. Returns `None` when both are absent.
///
/// Both simulation paths call this so they see identical step inputs.
pub fn step_perturbation(
    params: &SensorParams,
    dims: Dims,
    key: &RngKey,
) -> Result<Option<Vec<f64>>> {
    if params.hot_pixels.dims() != dims && !params.hot_pixels.is_empty() {
        return Err(Error::mismatch(dims, params.hot_pixels.dims()));
    }
    if params.sigma_bg == 0.0 && params.hot_pixels.is_empty() {
        return Ok(None);
    }
    let mut values = if params.sigma_bg > 0.0 {
        let normal = Normal::new(0.0, params.sigma_bg)
            .map_err(|e| Error::config(format!("background noise: {e}")))?;
        let mut rng = derive_rng(key);
        (0..dims.len()).map(|_| normal.sample(&mut rng)).collect()
    } else {
        vec![0.0; dims.len()]
    };
    params.hot_pixels.add_to(&mut values);
    Ok(Some(values))
}

/// `floor(q)`, except that quotients within [`SNAP_TOLERANCE`] of an integer
/// are taken to be that integer.
pub fn snapped_floor(q: f64) -> f64 {
    let nearest = q.round();
    if (q - nearest).abs() <= SNAP_TOLERANCE {
        nearest
    } else {
        q.floor()
    }
}

/// Outcome of one frame step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub n_plus: Grid<u32>,
    pub n_minus: Grid<u32>,
    pub residual: ResidualState,
}

/// Advance the sensor by one frame.
///
/// `dlog` is `log I(t_i) - log I(t_{i-1})`; `key` selects the step's noise draw.
pub fn step(
    residual: &ResidualState,
    dlog: &LogLuminance,
    params: &SensorParams,
    key: &RngKey,
) -> Result<StepOutput> {
    let dims = residual.dims();
    dims.ensure_same(dlog.dims())?;
    let perturbation = step_perturbation(params, dims, key)?;
    step_with(residual, dlog.values(), perturbation.as_deref(), params)
}

fn step_with(
    residual: &ResidualState,
    dlog: &[f64],
    perturbation: Option<&[f64]>,
    params: &SensorParams,
) -> Result<StepOutput> {
    let dims = residual.dims();
    let n = dims.len();
    let mut n_plus = vec![0u32; n];
    let mut n_minus = vec![0u32; n];
    let mut next = vec![0.0; n];
    for i in 0..n {
        let mut total = residual.values()[i] + dlog[i];
        if let Some(p) = perturbation {
            total += p[i];
        }
        let (plus, minus, rest) = trigger(total, params.c_plus, params.c_minus);
        n_plus[i] = plus;
        n_minus[i] = minus;
        next[i] = rest;
    }
    Ok(StepOutput {
        n_plus: Grid::from_vec(dims, n_plus)?,
        n_minus: Grid::from_vec(dims, n_minus)?,
        residual: ResidualState::from_vec(dims, next)?,
    })
}

/// Event counts and remainder for one pixel's accumulated change.
#[inline]
fn trigger(total: f64, c_plus: f64, c_minus: f64) -> (u32, u32, f64) {
    let plus = snapped_floor(total / c_plus).max(0.0);
    let minus = snapped_floor(-total / c_minus).max(0.0);
    let mut rest = total - c_plus * plus + c_minus * minus;
    // a snapped quotient can leave a remainder of the wrong sign by ~1 ulp
    if total >= 0.0 {
        rest = rest.max(0.0);
    } else {
        rest = rest.min(0.0);
    }
    (plus as u32, minus as u32, rest)
}

/// Simulate one `B`-bin discrete voxel from `B + 1` log-luminance frames.
///
/// `first_frame_index` is the absolute index of `logs[0]` in its scene; step
/// `i` draws its noise from `keys.key(Noise, first_frame_index + i)`.
pub fn v2v_voxel_log(
    logs: &[LogLuminance],
    params: &SensorParams,
    initial: &ResidualState,
    keys: &SceneKey,
    first_frame_index: u64,
) -> Result<(DiscreteVoxel, ResidualState)> {
    if logs.len() < 2 {
        return Err(Error::data(format!(
            "a voxel needs B + 1 >= 2 frames, got {}",
            logs.len()
        )));
    }
    let bins = logs.len() - 1;
    let dims = initial.dims();
    for l in logs {
        dims.ensure_same(l.dims())?;
    }
    let mut voxel = DiscreteVoxel::zeros(bins, dims)?;
    let mut residual = initial.clone();
    let mut dlog = vec![0.0; dims.len()];
    for i in 1..=bins {
        for ((d, cur), prev) in dlog
            .iter_mut()
            .zip(logs[i].values())
            .zip(logs[i - 1].values())
        {
            *d = cur - prev;
        }
        let key = keys.key(StreamTag::Noise, first_frame_index + i as u64);
        let perturbation = step_perturbation(params, dims, &key)?;
        let out = step_with(&residual, &dlog, perturbation.as_deref(), params)?;
        for ((v, p), m) in voxel
            .bin_mut(i - 1)
            .iter_mut()
            .zip(out.n_plus.as_slice())
            .zip(out.n_minus.as_slice())
        {
            *v = *p as i32 - *m as i32;
        }
        residual = out.residual;
    }
    Ok((voxel, residual))
}

/// [`v2v_voxel_log`] on 8-bit frames, with `expected_bins` checked against
/// the slice length.
pub fn v2v_voxel(
    frames: &[Frame],
    expected_bins: usize,
    config: &SimConfig,
    params: &SensorParams,
    initial: &ResidualState,
    keys: &SceneKey,
    first_frame_index: u64,
) -> Result<(DiscreteVoxel, ResidualState)> {
    if frames.len() != expected_bins + 1 {
        return Err(Error::data(format!(
            "a {expected_bins}-bin voxel needs {} frames, got {}",
            expected_bins + 1,
            frames.len()
        )));
    }
    config.validate()?;
    let logs = config.frames_log(frames);
    v2v_voxel_log(&logs, params, initial, keys, first_frame_index)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims(w: usize, h: usize) -> Dims {
        Dims::new(w, h).unwrap()
    }

    fn key(tag: StreamTag) -> RngKey {
        SceneKey::new(1, 2, 3).key(tag, 0)
    }

    fn one(v: f64) -> LogLuminance {
        LogLuminance::from_vec(dims(1, 1), vec![v]).unwrap()
    }

    #[test]
    fn degenerate_ranges_give_point_params() {
        let r = ParamRanges {
            c_plus: Range::point(0.2),
            c_minus: Range::point(0.2),
            sigma_bg: Range::point(0.03),
            hot_pixel_fraction: Range::point(0.0),
            hot_pixel_magnitude: Range::new(0.1, 1.0),
        };
        let p = sample_params(&r, dims(8, 8), &key(StreamTag::Params)).unwrap();
        assert_eq!((p.c_plus, p.c_minus, p.sigma_bg), (0.2, 0.2, 0.03));
        assert!(p.hot_pixels.is_empty());
    }

    #[test]
    fn hot_pixel_count_is_rounded_fraction() {
        let r = ParamRanges {
            hot_pixel_fraction: Range::point(0.001),
            ..ParamRanges::default()
        };
        let p = sample_params(&r, dims(100, 100), &key(StreamTag::Params)).unwrap();
        assert_eq!(p.hot_pixels.entries().len(), 10);
        let mut seen: Vec<_> = p.hot_pixels.entries().iter().map(|e| (e.x, e.y)).collect();
        seen.dedup();
        assert_eq!(seen.len(), 10);
        for e in p.hot_pixels.entries() {
            assert!((0.1..=1.0).contains(&e.magnitude.abs()));
        }
    }

    #[test]
    fn sample_params_is_deterministic() {
        let r = ParamRanges {
            hot_pixel_fraction: Range::point(0.01),
            ..ParamRanges::default()
        };
        let a = sample_params(&r, dims(32, 32), &key(StreamTag::Params)).unwrap();
        let b = sample_params(&r, dims(32, 32), &key(StreamTag::Params)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_ranges_are_config_errors() {
        let bad = [
            ParamRanges {
                c_plus: Range::new(0.0, 0.0),
                ..Default::default()
            },
            ParamRanges {
                c_minus: Range::new(0.5, 0.2),
                ..Default::default()
            },
            ParamRanges {
                sigma_bg: Range::new(-0.1, 0.1),
                ..Default::default()
            },
            ParamRanges {
                hot_pixel_fraction: Range::new(0.0, 1.0),
                ..Default::default()
            },
            ParamRanges {
                hot_pixel_magnitude: Range::new(0.0, 1.0),
                ..Default::default()
            },
        ];
        for r in bad {
            let err = sample_params(&r, dims(2, 2), &key(StreamTag::Params)).unwrap_err();
            assert!(err.is_config(), "{err}");
        }
    }

    #[test]
    fn reverse_gamma_endpoints_and_midpoint() {
        let f = Frame::new(3, 1, vec![0, 255, 128]).unwrap();
        let l = reverse_gamma(&f, 2.2).unwrap();
        assert_eq!(l.values()[0], 0.0);
        assert_eq!(l.values()[1], 1.0);
        // (128/255)^2.2 = 0.219519718074867918 (30-digit evaluation)
        assert!((l.values()[2] - 0.219_519_718_074_867_9).abs() < 1e-12);
        assert!(reverse_gamma(&f, 0.0).is_err());
    }

    #[test]
    fn log_luminance_values() {
        let l = LinearLuminance::new(Grid::from_vec(dims(2, 1), vec![0.0, 1.0]).unwrap()).unwrap();
        let g = log_luminance(&l, 0.01).unwrap();
        assert!((g.values()[0] - (-4.605_170_185_988_091)).abs() < 1e-12);
        assert!((g.values()[1] - 0.009_950_330_853_168_083).abs() < 1e-12);
        assert!(g.difference(&g).unwrap().values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn frame_log_table_matches_direct_route() {
        let cfg = SimConfig::default();
        let f = Frame::new(256, 1, (0..=255).collect()).unwrap();
        let direct = log_luminance(&reverse_gamma(&f, cfg.gamma).unwrap(), cfg.log_eps).unwrap();
        assert_eq!(cfg.frame_log(&f), direct);
    }

    #[test]
    fn init_residual_bounds_and_determinism() {
        let p = SensorParams::ideal(0.2, 0.3, dims(16, 16)).unwrap();
        let a = init_residual(&p, dims(16, 16), &key(StreamTag::Init));
        assert!(a.values().iter().all(|v| (-0.3..=0.2).contains(v)));
        assert_eq!(a, init_residual(&p, dims(16, 16), &key(StreamTag::Init)));
    }

    #[test]
    fn init_residual_mean_is_centered() {
        let d = dims(1000, 1000);
        let p = SensorParams::ideal(1.0, 1.0, d).unwrap();
        let r = init_residual(&p, d, &key(StreamTag::Init));
        let mean = r.values().iter().sum::<f64>() / d.len() as f64;
        // sd of U[-1,1] is 1/sqrt(3); 3 sigma / sqrt(n) ~ 0.0017
        assert!(mean.abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn step_positive_example() {
        let p = SensorParams::ideal(0.1, 0.1, dims(1, 1)).unwrap();
        let r = ResidualState::zeros(dims(1, 1));
        let out = step(&r, &one(0.25), &p, &key(StreamTag::Noise)).unwrap();
        assert_eq!(out.n_plus.as_slice(), &[2]);
        assert_eq!(out.n_minus.as_slice(), &[0]);
        assert!((out.residual.values()[0] - 0.05).abs() < 1e-12);
    }

    #[test]
    fn step_below_threshold_keeps_residual() {
        let p = SensorParams::ideal(1.0, 1.0, dims(1, 1)).unwrap();
        let r = ResidualState::from_vec(dims(1, 1), vec![0.9]).unwrap();
        let out = step(&r, &one(0.0), &p, &key(StreamTag::Noise)).unwrap();
        assert_eq!(
            (out.n_plus.as_slice()[0], out.n_minus.as_slice()[0]),
            (0, 0)
        );
        assert_eq!(out.residual.values()[0], 0.9);
    }

    #[test]
    fn step_negative_example() {
        let p = SensorParams::ideal(0.1, 0.1, dims(1, 1)).unwrap();
        let r = ResidualState::from_vec(dims(1, 1), vec![0.05]).unwrap();
        let out = step(&r, &one(-0.26), &p, &key(StreamTag::Noise)).unwrap();
        assert_eq!(out.n_plus.as_slice(), &[0]);
        assert_eq!(out.n_minus.as_slice(), &[2]);
        assert!((out.residual.values()[0] + 0.01).abs() < 1e-12);
    }

    #[test]
    fn step_rejects_dimension_mismatch() {
        let p = SensorParams::ideal(0.1, 0.1, dims(2, 2)).unwrap();
        let r = ResidualState::zeros(dims(2, 2));
        assert!(step(&r, &one(0.0), &p, &key(StreamTag::Noise)).is_err());
    }

    #[test]
    fn snapping_absorbs_rounding_noise() {
        // 0.3 / 0.1 = 2.9999999999999996 in binary floating point
        assert_eq!(snapped_floor(0.3 / 0.1), 3.0);
        assert_eq!(snapped_floor(2.5), 2.0);
        assert_eq!(snapped_floor(-0.5), -1.0);
        let (plus, minus, rest) = trigger(0.3, 0.1, 0.1);
        assert_eq!((plus, minus), (3, 0));
        assert!((0.0..1e-12).contains(&rest));
    }

    #[test]
    fn hot_pixels_fire_every_step() {
        let d = dims(2, 1);
        let hp = HotPixelMap::new(
            d,
            vec![HotPixel {
                x: 1,
                y: 0,
                magnitude: 0.25,
            }],
        )
        .unwrap();
        let p = SensorParams::new(0.1, 0.1, 0.0, hp).unwrap();
        let logs = vec![LogLuminance::from_vec(d, vec![0.0, 0.0]).unwrap(); 4];
        let keys = SceneKey::new(0, 0, 0);
        let (v, _) = v2v_voxel_log(&logs, &p, &ResidualState::zeros(d), &keys, 0).unwrap();
        assert_eq!(v.bin(0), &[0, 2]);
        // 0.05 carried + 0.25 reaches exactly three thresholds
        assert_eq!(v.bin(1), &[0, 3]);
        assert_eq!(v.bin(2), &[0, 2]);
    }

    #[test]
    fn single_pixel_hand_trace() {
        let logs: Vec<_> = [0.0, 0.25, 0.25, 0.05].into_iter().map(one).collect();
        let p = SensorParams::ideal(0.1, 0.1, dims(1, 1)).unwrap();
        let (v, r) = v2v_voxel_log(
            &logs,
            &p,
            &ResidualState::zeros(dims(1, 1)),
            &SceneKey::new(0, 0, 0),
            0,
        )
        .unwrap();
        assert_eq!(v.data(), &[2, 0, -1]);
        assert!((r.values()[0] + 0.05).abs() < 1e-12);
    }

    #[test]
    fn constant_frames_give_zero_voxel() {
        let d = dims(4, 3);
        let frames = vec![Frame::filled(d, 90); 6];
        let p = SensorParams::ideal(0.1, 0.1, d).unwrap();
        let (v, _) = v2v_voxel(
            &frames,
            5,
            &SimConfig::default(),
            &p,
            &ResidualState::zeros(d),
            &SceneKey::new(0, 0, 0),
            0,
        )
        .unwrap();
        assert!(v.data().iter().all(|c| *c == 0));
        assert!(v2v_voxel(
            &frames,
            4,
            &SimConfig::default(),
            &p,
            &ResidualState::zeros(d),
            &SceneKey::new(0, 0, 0),
            0
        )
        .is_err());
    }

    #[test]
    fn noise_depends_on_frame_index_only_through_key() {
        let d = dims(8, 8);
        let p = SensorParams::new(0.1, 0.1, 0.05, HotPixelMap::empty(d)).unwrap();
        let keys = SceneKey::new(5, 6, 7);
        let a = step_perturbation(&p, d, &keys.key(StreamTag::Noise, 3))
            .unwrap()
            .unwrap();
        let b = step_perturbation(&p, d, &keys.key(StreamTag::Noise, 3))
            .unwrap()
            .unwrap();
        let c = step_perturbation(&p, d, &keys.key(StreamTag::Noise, 4))
            .unwrap()
            .unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
