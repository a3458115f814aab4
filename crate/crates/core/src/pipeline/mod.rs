//! Dataset assembly: window slicing, per-epoch parameter policy, training
//! samples, voxel files, manifests and storage statistics.

mod dataset;
mod manifest;
mod voxel_file;

pub use dataset::{Dataset, DatasetConfig, ItemShape};
pub use manifest::{DatasetManifest, ManifestSummary, SceneEntry, SceneSource, SourceKind};
pub use voxel_file::{
    decode_voxel_file, encode_voxel_file, read_voxel_file, read_voxels, write_interpolated_voxels,
    write_voxel_file, write_voxels, VoxelTensor, DTYPE_F32, HEADER_LEN, MAGIC, MAX_EXACT_COUNT,
    VERSION,
};

use std::ops::Range as Span;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{degrade_frames, CropRect, DegradeConfig};
use crate::rng::{derive_rng, RngKey, SceneKey, StreamTag};
use crate::sensor::{init_residual, sample_params, v2v_voxel_log, ParamRanges, SimConfig};
use crate::types::{Dims, DiscreteVoxel, Frame, SensorParams};

/// How a scene is cut into training sequences.
///
/// One sequence holds `voxels_per_sequence` voxels of `bins_per_voxel` bins
/// and consumes `V * B + 1` frames, since adjacent bins share a boundary frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlicePlan {
    pub bins_per_voxel: usize,
    pub voxels_per_sequence: usize,
    /// Frames between consecutive sequence starts; defaults to the window length.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
}

impl Default for SlicePlan {
    fn default() -> Self {
        SlicePlan::new(5, 40)
    }
}

impl SlicePlan {
    pub fn new(bins_per_voxel: usize, voxels_per_sequence: usize) -> Self {
        SlicePlan {
            bins_per_voxel,
            voxels_per_sequence,
            stride: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bins_per_voxel == 0 || self.voxels_per_sequence == 0 {
            return Err(Error::config(format!(
                "bins ({}) and voxels ({}) must be >= 1",
                self.bins_per_voxel, self.voxels_per_sequence
            )));
        }
        if self.stride == Some(0) {
            return Err(Error::config("stride must be >= 1"));
        }
        Ok(())
    }

    pub fn window_len(&self) -> usize {
        self.voxels_per_sequence * self.bins_per_voxel + 1
    }

    pub fn stride(&self) -> usize {
        self.stride.unwrap_or_else(|| self.window_len())
    }

    /// Raw `f32` bytes of one pre-stacked sequence at the given resolution.
    pub fn prestacked_bytes(&self, dims: Dims) -> u64 {
        (self.voxels_per_sequence * self.bins_per_voxel) as u64 * dims.len() as u64 * 4
    }
}

/// Frame windows `[start, end)` for a scene of `frame_count` frames.
/// Trailing frames that do not fill a window are dropped.
pub fn plan_slices(frame_count: usize, plan: &SlicePlan) -> Result<Vec<Span<usize>>> {
    plan.validate()?;
    let len = plan.window_len();
    let mut out = Vec::new();
    let mut start = 0;
    while start + len <= frame_count {
        out.push(start..start + len);
        start += plan.stride();
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyMode {
    /// Fresh sensor parameters for every (scene, window, epoch).
    Randomized,
    /// One draw per scene, reused for every window and epoch.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamPolicy {
    pub mode: PolicyMode,
    pub ranges: ParamRanges,
}

/// Epoch value used for every key under [`PolicyMode::Fixed`].
pub const FIXED_EPOCH: u64 = u64::MAX;

impl ParamPolicy {
    pub fn randomized(ranges: ParamRanges) -> Self {
        ParamPolicy {
            mode: PolicyMode::Randomized,
            ranges,
        }
    }

    pub fn fixed(ranges: ParamRanges) -> Self {
        ParamPolicy {
            mode: PolicyMode::Fixed,
            ranges,
        }
    }

    /// Under the fixed policy a sample is frozen: every key ignores the epoch.
    pub fn effective_keys(&self, keys: SceneKey) -> SceneKey {
        match self.mode {
            PolicyMode::Randomized => keys,
            PolicyMode::Fixed => keys.with_epoch(FIXED_EPOCH),
        }
    }

    pub fn params_key(&self, keys: SceneKey, window_start: usize) -> RngKey {
        let keys = self.effective_keys(keys);
        match self.mode {
            PolicyMode::Randomized => keys.key(StreamTag::Params, window_start as u64),
            PolicyMode::Fixed => keys.key(StreamTag::Params, 0),
        }
    }
}

/// Everything needed to turn a frame window into a training sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleConfig {
    pub sim: SimConfig,
    pub policy: ParamPolicy,
    pub plan: SlicePlan,
    pub degrade: DegradeConfig,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            sim: SimConfig::default(),
            policy: ParamPolicy::randomized(ParamRanges::default()),
            plan: SlicePlan::default(),
            degrade: DegradeConfig::disabled(),
        }
    }
}

impl SampleConfig {
    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.policy.ranges.validate()?;
        self.plan.validate()?;
        self.degrade.validate()
    }
}

/// One training sequence: `V` voxels and the `V + 1` frames at voxel boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub voxels: Vec<DiscreteVoxel>,
    pub frames: Vec<Frame>,
    pub params: SensorParams,
    pub degrade_scale: Option<f64>,
}

impl Sample {
    pub fn dims(&self) -> Dims {
        self.frames[0].dims()
    }
}

/// Simulate one training sequence from a window of `V * B + 1` frames.
///
/// `window_start` is the index of `window[0]` within its scene; together with
/// `keys` it determines every random draw, so samples can be built in any
/// order or on any worker.
pub fn build_sample(
    window: &[Frame],
    config: &SampleConfig,
    keys: SceneKey,
    window_start: usize,
) -> Result<Sample> {
    config.validate()?;
    let plan = config.plan;
    if window.len() != plan.window_len() {
        return Err(Error::data(format!(
            "window of {} frames does not match V*B+1 = {}",
            window.len(),
            plan.window_len()
        )));
    }
    let dims = window[0].dims();
    let keys_eff = config.policy.effective_keys(keys);
    let start = window_start as u64;

    let degrade_scale = config
        .degrade
        .draw(&keys_eff.key(StreamTag::Degrade, start));
    let degraded;
    let frames: &[Frame] = match degrade_scale {
        Some(s) => {
            degraded = degrade_frames(window, s)?;
            &degraded
        }
        None => window,
    };

    let params = sample_params(
        &config.policy.ranges,
        dims,
        &config.policy.params_key(keys, window_start),
    )?;
    let logs = config.sim.frames_log(frames);
    let mut residual = init_residual(&params, dims, &keys_eff.key(StreamTag::Init, start));

    let b = plan.bins_per_voxel;
    let mut voxels = Vec::with_capacity(plan.voxels_per_sequence);
    for v in 0..plan.voxels_per_sequence {
        let (voxel, next) = v2v_voxel_log(
            &logs[v * b..=(v + 1) * b],
            &params,
            &residual,
            &keys_eff,
            start + (v * b) as u64,
        )?;
        voxels.push(voxel);
        residual = next;
    }
    let boundary = (0..=plan.voxels_per_sequence)
        .map(|v| frames[v * b].clone())
        .collect();
    Ok(Sample {
        voxels,
        frames: boundary,
        params,
        degrade_scale,
    })
}

/// Uniformly placed `height x width` crop, identical across voxels and frames.
pub fn sample_crop(sample: &Sample, height: usize, width: usize, key: &RngKey) -> Result<Sample> {
    let dims = sample.dims();
    if height == 0 || width == 0 || height > dims.height || width > dims.width {
        return Err(Error::config(format!(
            "crop {width}x{height} does not fit a {dims} sample"
        )));
    }
    let mut rng = derive_rng(key);
    let top = rng.random_range(0..=dims.height - height);
    let left = rng.random_range(0..=dims.width - width);
    let rect = CropRect {
        top,
        left,
        height,
        width,
    };
    let out = Dims::new(width, height)?;
    let frames = sample
        .frames
        .iter()
        .map(|f| crate::ingest::crop_frame(f, rect))
        .collect::<Result<Vec<_>>>()?;
    let voxels = sample
        .voxels
        .iter()
        .map(|v| v.cropped(left, top, out))
        .collect();
    let mut params = sample.params.clone();
    params.hot_pixels = params.hot_pixels.cropped(left, top, out);
    Ok(Sample {
        voxels,
        frames,
        params,
        degrade_scale: sample.degrade_scale,
    })
}

/// Dataset statistics in the spirit of a dataset comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsReport {
    pub scenes: usize,
    pub total_frames: u64,
    pub total_duration_s: f64,
    /// Distinct resolutions with their scene counts, in first-seen order.
    pub resolutions: Vec<(Dims, usize)>,
    /// Whole `V * B + 1` windows under the plan.
    pub sequences: u64,
    /// Total frames divided by `V`, the normalization used for event datasets.
    pub frames_div_voxels: f64,
    pub source_bytes: u64,
    pub prestacked_bytes: u64,
}

impl StatsReport {
    /// `source_bytes / prestacked_bytes`, if anything is pre-stacked.
    pub fn ratio(&self) -> Option<f64> {
        (self.prestacked_bytes > 0).then(|| self.source_bytes as f64 / self.prestacked_bytes as f64)
    }

    pub fn key_values(&self) -> Vec<(String, String)> {
        let resolutions = self
            .resolutions
            .iter()
            .map(|(d, n)| format!("{d}:{n}"))
            .collect::<Vec<_>>()
            .join(",");
        let mut kv = vec![
            ("scenes".into(), self.scenes.to_string()),
            ("total_frames".into(), self.total_frames.to_string()),
            ("duration_s".into(), format!("{:.3}", self.total_duration_s)),
            (
                "duration_h".into(),
                format!("{:.3}", self.total_duration_s / 3600.0),
            ),
            (
                "resolutions".into(),
                if resolutions.is_empty() {
                    "none".into()
                } else {
                    resolutions
                },
            ),
            ("sequences".into(), self.sequences.to_string()),
            (
                "seqs_frames_div_v".into(),
                format!("{:.1}", self.frames_div_voxels),
            ),
            ("source_bytes".into(), self.source_bytes.to_string()),
            ("prestacked_bytes".into(), self.prestacked_bytes.to_string()),
        ];
        match self.ratio() {
            Some(r) => {
                kv.push(("ratio".into(), format_sig3(r)));
                let inverse = if r > 0.0 {
                    format_sig3(1.0 / r)
                } else {
                    "inf".into()
                };
                kv.push(("prestacked_per_source".into(), inverse));
            }
            None => {
                kv.push(("ratio".into(), "n/a".into()));
                kv.push(("prestacked_per_source".into(), "n/a".into()));
            }
        }
        kv
    }
}

/// Table-style statistics for a manifest under `plan`.
pub fn stats(manifest: &DatasetManifest, plan: &SlicePlan) -> Result<StatsReport> {
    plan.validate()?;
    let mut report = StatsReport {
        scenes: manifest.scenes.len(),
        total_frames: 0,
        total_duration_s: 0.0,
        resolutions: Vec::new(),
        sequences: 0,
        frames_div_voxels: 0.0,
        source_bytes: 0,
        prestacked_bytes: 0,
    };
    for scene in &manifest.scenes {
        let dims = scene.dims()?;
        let seqs = plan_slices(scene.frame_count, plan)?.len() as u64;
        report.total_frames += scene.frame_count as u64;
        report.total_duration_s += scene.duration_s();
        report.sequences += seqs;
        report.source_bytes += scene.source_bytes;
        report.prestacked_bytes += seqs * plan.prestacked_bytes(dims);
        match report.resolutions.iter_mut().find(|(d, _)| *d == dims) {
            Some((_, n)) => *n += 1,
            None => report.resolutions.push((dims, 1)),
        }
    }
    report.frames_div_voxels = report.total_frames as f64 / plan.voxels_per_sequence as f64;
    Ok(report)
}

/// Format with three significant digits, e.g. `44.8`, `0.0223`, `85800000`.
pub fn format_sig3(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.2e}");
    let exp: i32 = sci
        .split('e')
        .nth(1)
        .and_then(|e| e.parse().ok())
        .unwrap_or(0);
    let rounded: f64 = sci.parse().unwrap_or(x);
    let decimals = (2 - exp).max(0) as usize;
    format!("{rounded:.decimals$}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensor::Range;

    fn keys(epoch: u64) -> SceneKey {
        SceneKey::new(9, 4, epoch)
    }

    fn ramp_window(plan: &SlicePlan, dims: Dims) -> Vec<Frame> {
        (0..plan.window_len())
            .map(|i| {
                let data = (0..dims.len())
                    .map(|p| ((i * 7 + p * 13) % 256) as u8)
                    .collect();
                Frame::new(dims.width, dims.height, data).unwrap()
            })
            .collect()
    }

    #[test]
    fn slice_counts() {
        let plan = SlicePlan::new(5, 40);
        assert_eq!(plan_slices(201, &plan).unwrap(), vec![0..201]);
        assert_eq!(plan_slices(402, &plan).unwrap().len(), 2);
        assert!(plan_slices(200, &plan).unwrap().is_empty());
        assert!(plan_slices(10, &SlicePlan::new(0, 1)).is_err());
        let strided = SlicePlan {
            stride: Some(100),
            ..plan
        };
        assert_eq!(
            plan_slices(402, &strided).unwrap(),
            vec![0..201, 100..301, 200..401]
        );
    }

    #[test]
    fn randomized_policy_varies_with_epoch() {
        let plan = SlicePlan::new(2, 3);
        let cfg = SampleConfig {
            plan,
            ..Default::default()
        };
        let w = ramp_window(&plan, Dims::new(6, 5).unwrap());
        let a = build_sample(&w, &cfg, keys(1), 0).unwrap();
        let b = build_sample(&w, &cfg, keys(2), 0).unwrap();
        assert_ne!(a.params, b.params);
        assert_ne!(a.voxels, b.voxels);
        assert_eq!(a.frames, b.frames);
        assert_eq!(a.voxels.len(), 3);
        assert_eq!(a.frames.len(), 4);
        assert_eq!(a.frames[1], w[2]);
    }

    #[test]
    fn fixed_policy_ignores_epoch() {
        let plan = SlicePlan::new(2, 3);
        let cfg = SampleConfig {
            plan,
            policy: ParamPolicy::fixed(ParamRanges::default()),
            degrade: DegradeConfig::default(),
            ..Default::default()
        };
        let w = ramp_window(&plan, Dims::new(6, 5).unwrap());
        let a = build_sample(&w, &cfg, keys(1), 7).unwrap();
        let b = build_sample(&w, &cfg, keys(2), 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn constant_window_gives_zero_voxels() {
        let plan = SlicePlan::new(3, 4);
        let d = Dims::new(5, 5).unwrap();
        let cfg = SampleConfig {
            plan,
            policy: ParamPolicy::randomized(ParamRanges::ideal(
                Range::new(0.1, 1.0),
                Range::new(0.1, 1.0),
            )),
            ..Default::default()
        };
        let w = vec![Frame::filled(d, 77); plan.window_len()];
        let s = build_sample(&w, &cfg, keys(0), 0).unwrap();
        assert!(s.voxels.iter().all(|v| v.data().iter().all(|c| *c == 0)));
        assert!(build_sample(&w[1..], &cfg, keys(0), 0).is_err());
    }

    #[test]
    fn residual_threads_across_voxels() {
        // a sequence split into one 6-bin voxel must agree with three chained 2-bin voxels
        let d = Dims::new(4, 3).unwrap();
        let w = ramp_window(&SlicePlan::new(6, 1), d);
        let ranges = ParamRanges::ideal(Range::point(0.15), Range::point(0.2));
        let one = SampleConfig {
            plan: SlicePlan::new(6, 1),
            policy: ParamPolicy::fixed(ranges),
            ..Default::default()
        };
        let three = SampleConfig {
            plan: SlicePlan::new(2, 3),
            ..one
        };
        let a = build_sample(&w, &one, keys(0), 0).unwrap();
        let b = build_sample(&w, &three, keys(0), 0).unwrap();
        let whole = &a.voxels[0];
        for (v, voxel) in b.voxels.iter().enumerate() {
            assert_eq!(voxel.bin(0), whole.bin(2 * v));
            assert_eq!(voxel.bin(1), whole.bin(2 * v + 1));
        }
    }

    #[test]
    fn crop_bounds_and_determinism() {
        // boundary frames encode x % 256, x / 256 and y so the corner can be read back
        let plan = SlicePlan::new(1, 2);
        let d = Dims::new(596, 180).unwrap();
        let encode = |f: &dyn Fn(usize, usize) -> u8| {
            let data = (0..d.len()).map(|p| f(p % d.width, p / d.width)).collect();
            Frame::new(d.width, d.height, data).unwrap()
        };
        let w = vec![
            encode(&|x, _| (x % 256) as u8),
            encode(&|x, _| (x / 256) as u8),
            encode(&|_, y| y as u8),
        ];
        let cfg = SampleConfig {
            plan,
            ..Default::default()
        };
        let s = build_sample(&w, &cfg, keys(0), 0).unwrap();
        let full = sample_crop(&s, 180, 596, &keys(0).key(StreamTag::Crop, 0)).unwrap();
        assert_eq!(full, s);
        let mut corners = std::collections::HashSet::new();
        for i in 0..200 {
            let k = keys(i).key(StreamTag::Crop, 0);
            let c = sample_crop(&s, 128, 128, &k).unwrap();
            assert_eq!(c.dims(), Dims::new(128, 128).unwrap());
            assert_eq!(c, sample_crop(&s, 128, 128, &k).unwrap());
            let left = c.frames[0].pixel(0, 0) as usize + 256 * c.frames[1].pixel(0, 0) as usize;
            let top = c.frames[2].pixel(0, 0) as usize;
            assert!(top <= 52 && left <= 468, "corner ({left}, {top})");
            assert_eq!(
                c.voxels[0].get(0, 3, 5),
                s.voxels[0].get(0, left + 3, top + 5)
            );
            corners.insert((left, top));
        }
        assert!(corners.len() > 150);
        assert!(sample_crop(&s, 181, 10, &keys(0).key(StreamTag::Crop, 0)).is_err());
    }

    #[test]
    fn three_significant_digits() {
        assert_eq!(format_sig3(44.84), "44.8");
        assert_eq!(format_sig3(0.022301), "0.0223");
        assert_eq!(format_sig3(85_824_000.0), "85800000");
        assert_eq!(format_sig3(99.96), "100");
        assert_eq!(format_sig3(1.0), "1.00");
    }

    #[test]
    fn stats_storage_arithmetic() {
        let m = DatasetManifest::new(vec![SceneEntry::new("a", 201, 596, 180, 30.0, 1_914_000)]);
        let r = stats(&m, &SlicePlan::new(5, 40)).unwrap();
        assert_eq!(r.sequences, 1);
        assert_eq!(r.prestacked_bytes, 85_824_000);
        assert_eq!(r.prestacked_bytes, 40 * 5 * 180 * 596 * 4);
        let kv: std::collections::HashMap<_, _> = r.key_values().into_iter().collect();
        assert_eq!(kv["ratio"], "0.0223");
        assert_eq!(kv["prestacked_per_source"], "44.8");
    }

    #[test]
    fn empty_manifest_reports_zero() {
        let r = stats(&DatasetManifest::new(vec![]), &SlicePlan::default()).unwrap();
        assert_eq!(
            (r.scenes, r.sequences, r.prestacked_bytes, r.source_bytes),
            (0, 0, 0, 0)
        );
        assert_eq!(r.ratio(), None);
    }
}
