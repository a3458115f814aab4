//! C ABI over `v2v-core`.
//!
//! Conventions:
//! - Every fallible function returns a [`V2vStatus`]; on failure a message is
//!   available from [`v2v_last_error`] on the same thread.
//! - Datasets are opaque handles created by [`v2v_dataset_open`] and released
//!   with [`v2v_dataset_free`]. A handle may be shared between threads; only
//!   [`v2v_dataset_set_epoch`] mutates it, atomically.
//! - Output tensors are written into caller-owned buffers whose lengths are
//!   passed in and checked.
//! - Panics never cross the boundary; they surface as `V2V_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicU64, Ordering};

use v2v_core::events::{discrete_voxel_from_events, interpolated_voxel_from_events};
use v2v_core::ingest::DegradeConfig;
use v2v_core::pipeline::{Dataset, DatasetConfig, ParamPolicy, SampleConfig, SlicePlan};
use v2v_core::sensor::{init_residual, v2v_voxel, ParamRanges, Range, SimConfig};
use v2v_core::{
    Dims, Error, EventRecord, EventStream, Frame, HotPixelMap, SceneKey, SensorParams, StreamTag,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum V2vStatus {
    Ok = 0,
    NullPointer = 1,
    /// Invalid configuration or argument value.
    InvalidArgument = 2,
    /// Malformed or inconsistent input data.
    DataError = 3,
    IoError = 4,
    IndexOutOfRange = 5,
    /// A caller buffer has the wrong length.
    BufferSize = 6,
    Panic = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(V2vStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        fn status(e: &Error) -> V2vStatus {
            match e {
                Error::File { source, .. } => status(source),
                Error::Io(_) => V2vStatus::IoError,
                e if e.is_config() => V2vStatus::InvalidArgument,
                _ => V2vStatus::DataError,
            }
        }
        Failure(status(&e), e.to_string())
    }
}

type FfiResult = Result<(), Failure>;

fn fail(status: V2vStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> FfiResult) -> V2vStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => V2vStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            V2vStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(fail(V2vStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

/// # Safety
/// `p` must be null or valid for `len` reads.
unsafe fn input<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    non_null(p, name)?;
    Ok(std::slice::from_raw_parts(p, len))
}

/// # Safety
/// `p` must be null or valid for `len` writes.
unsafe fn output<'a, T>(p: *mut T, len: usize, name: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    non_null(p, name)?;
    Ok(std::slice::from_raw_parts_mut(p, len))
}

fn check_len(name: &str, expected: usize, actual: usize) -> FfiResult {
    if expected != actual {
        return Err(fail(
            V2vStatus::BufferSize,
            format!("{name} holds {actual} values, expected {expected}"),
        ));
    }
    Ok(())
}

/// Message of the last failed call on this thread, or null if none.
/// Valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn v2v_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(std::ptr::null(), |c| c.as_ptr())
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn v2v_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Dataset configuration. Ranges are `[lo, hi]`; set `lo == hi` for a fixed value.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct V2vDatasetConfig {
    pub bins: usize,
    pub voxels: usize,
    /// Frames between window starts; 0 means the window length.
    pub stride: usize,
    pub seed: u64,
    /// True freezes sensor parameters and crops across epochs.
    pub fixed_policy: bool,
    pub c_pos_lo: f64,
    pub c_pos_hi: f64,
    pub c_neg_lo: f64,
    pub c_neg_hi: f64,
    pub sigma_bg_lo: f64,
    pub sigma_bg_hi: f64,
    pub hot_frac_lo: f64,
    pub hot_frac_hi: f64,
    pub hot_mag_lo: f64,
    pub hot_mag_hi: f64,
    pub gamma: f64,
    pub log_eps: f64,
    pub degrade_prob: f64,
    pub degrade_scale_lo: f64,
    pub degrade_scale_hi: f64,
    /// Random crop size; 0 for either disables cropping.
    pub crop_height: usize,
    pub crop_width: usize,
}

impl V2vDatasetConfig {
    fn to_core(self) -> Result<DatasetConfig, Failure> {
        let ranges = ParamRanges {
            c_plus: Range::new(self.c_pos_lo, self.c_pos_hi),
            c_minus: Range::new(self.c_neg_lo, self.c_neg_hi),
            sigma_bg: Range::new(self.sigma_bg_lo, self.sigma_bg_hi),
            hot_pixel_fraction: Range::new(self.hot_frac_lo, self.hot_frac_hi),
            hot_pixel_magnitude: Range::new(self.hot_mag_lo, self.hot_mag_hi),
        };
        let plan = SlicePlan {
            stride: (self.stride > 0).then_some(self.stride),
            ..SlicePlan::new(self.bins, self.voxels)
        };
        let sample = SampleConfig {
            sim: SimConfig {
                gamma: self.gamma,
                log_eps: self.log_eps,
            },
            policy: if self.fixed_policy {
                ParamPolicy::fixed(ranges)
            } else {
                ParamPolicy::randomized(ranges)
            },
            plan,
            degrade: DegradeConfig {
                probability: self.degrade_prob,
                scale: Range::new(self.degrade_scale_lo, self.degrade_scale_hi),
            },
        };
        sample.validate()?;
        let crop = (self.crop_height > 0 && self.crop_width > 0)
            .then_some((self.crop_height, self.crop_width));
        Ok(DatasetConfig {
            sample,
            global_seed: self.seed,
            crop,
        })
    }
}

/// Defaults matching the `v2v simulate` command.
#[no_mangle]
pub extern "C" fn v2v_dataset_config_default() -> V2vDatasetConfig {
    let d = SampleConfig::default();
    let r = d.policy.ranges;
    V2vDatasetConfig {
        bins: d.plan.bins_per_voxel,
        voxels: d.plan.voxels_per_sequence,
        stride: 0,
        seed: 0,
        fixed_policy: false,
        c_pos_lo: r.c_plus.lo,
        c_pos_hi: r.c_plus.hi,
        c_neg_lo: r.c_minus.lo,
        c_neg_hi: r.c_minus.hi,
        sigma_bg_lo: r.sigma_bg.lo,
        sigma_bg_hi: r.sigma_bg.hi,
        hot_frac_lo: r.hot_pixel_fraction.lo,
        hot_frac_hi: r.hot_pixel_fraction.hi,
        hot_mag_lo: r.hot_pixel_magnitude.lo,
        hot_mag_hi: r.hot_pixel_magnitude.hi,
        gamma: d.sim.gamma,
        log_eps: d.sim.log_eps,
        degrade_prob: d.degrade.probability,
        degrade_scale_lo: d.degrade.scale.lo,
        degrade_scale_hi: d.degrade.scale.hi,
        crop_height: 0,
        crop_width: 0,
    }
}

/// Opaque dataset handle.
pub struct V2vDataset {
    inner: Dataset,
    epoch: AtomicU64,
}

/// Item tensor shapes: voxels `voxels x bins x height x width`, frames
/// `(voxels + 1) x height x width`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct V2vItemShape {
    pub voxels: usize,
    pub bins: usize,
    pub height: usize,
    pub width: usize,
    pub voxel_len: usize,
    pub frame_len: usize,
}

/// Sensor parameters drawn for one item.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct V2vParams {
    pub c_plus: f64,
    pub c_minus: f64,
    pub sigma_bg: f64,
    pub hot_pixel_count: usize,
}

impl From<&SensorParams> for V2vParams {
    fn from(p: &SensorParams) -> Self {
        V2vParams {
            c_plus: p.c_plus,
            c_minus: p.c_minus,
            sigma_bg: p.sigma_bg,
            hot_pixel_count: p.hot_pixels.entries().len(),
        }
    }
}

/// Open the manifest at `manifest_path` (UTF-8). On success `*out` owns a new
/// handle.
///
/// # Safety
/// `manifest_path` must be a NUL-terminated string, `config` and `out` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn v2v_dataset_open(
    manifest_path: *const c_char,
    config: *const V2vDatasetConfig,
    out: *mut *mut V2vDataset,
) -> V2vStatus {
    guard(|| {
        non_null(manifest_path, "manifest_path")?;
        non_null(config, "config")?;
        non_null(out, "out")?;
        *out = std::ptr::null_mut();
        let path = CStr::from_ptr(manifest_path)
            .to_str()
            .map_err(|_| fail(V2vStatus::InvalidArgument, "manifest_path is not UTF-8"))?;
        let config = (*config).to_core()?;
        let inner = Dataset::open(path, config)?;
        *out = Box::into_raw(Box::new(V2vDataset {
            inner,
            epoch: AtomicU64::new(0),
        }));
        Ok(())
    })
}

/// Release a handle. Null is ignored.
///
/// # Safety
/// `dataset` must be null or a handle from [`v2v_dataset_open`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn v2v_dataset_free(dataset: *mut V2vDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// # Safety
/// `dataset` must be null or a live handle.
unsafe fn handle<'a>(dataset: *const V2vDataset) -> Result<&'a V2vDataset, Failure> {
    non_null(dataset, "dataset")?;
    Ok(&*dataset)
}

/// # Safety
/// `dataset` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn v2v_dataset_len(dataset: *const V2vDataset, out: *mut usize) -> V2vStatus {
    guard(|| {
        let ds = handle(dataset)?;
        non_null(out, "out")?;
        *out = ds.inner.len();
        Ok(())
    })
}

/// Epoch used by [`v2v_dataset_get_item`].
///
/// # Safety
/// `dataset` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn v2v_dataset_set_epoch(
    dataset: *const V2vDataset,
    epoch: u64,
) -> V2vStatus {
    guard(|| {
        handle(dataset)?.epoch.store(epoch, Ordering::SeqCst);
        Ok(())
    })
}

fn check_index(ds: &V2vDataset, index: usize) -> FfiResult {
    if index >= ds.inner.len() {
        return Err(fail(
            V2vStatus::IndexOutOfRange,
            format!("index {index} out of range for {} items", ds.inner.len()),
        ));
    }
    Ok(())
}

/// # Safety
/// `dataset` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn v2v_dataset_item_shape(
    dataset: *const V2vDataset,
    index: usize,
    out: *mut V2vItemShape,
) -> V2vStatus {
    guard(|| {
        let ds = handle(dataset)?;
        non_null(out, "out")?;
        check_index(ds, index)?;
        let s = ds.inner.shape(index)?;
        *out = V2vItemShape {
            voxels: s.voxels,
            bins: s.bins,
            height: s.height,
            width: s.width,
            voxel_len: s.voxel_len(),
            frame_len: s.frame_len(),
        };
        Ok(())
    })
}

/// Item `index` at an explicit epoch. Voxel counts are written as `f32`,
/// frames scaled to `[0, 1]`. `params` may be null.
///
/// # Safety
/// `dataset` must be a live handle; `voxels` and `frames` valid for the given
/// lengths; `params` null or writable.
#[no_mangle]
pub unsafe extern "C" fn v2v_dataset_get_item_at(
    dataset: *const V2vDataset,
    index: usize,
    epoch: u64,
    voxels: *mut f32,
    voxels_len: usize,
    frames: *mut f32,
    frames_len: usize,
    params: *mut V2vParams,
) -> V2vStatus {
    guard(|| {
        let ds = handle(dataset)?;
        check_index(ds, index)?;
        let shape = ds.inner.shape(index)?;
        check_len("voxels", shape.voxel_len(), voxels_len)?;
        check_len("frames", shape.frame_len(), frames_len)?;
        let vox = output(voxels, voxels_len, "voxels")?;
        let frm = output(frames, frames_len, "frames")?;
        let p = ds.inner.fill_item(index, epoch, vox, frm)?;
        if !params.is_null() {
            *params = V2vParams::from(&p);
        }
        Ok(())
    })
}

/// Item `index` at the handle's current epoch; see [`v2v_dataset_get_item_at`].
///
/// # Safety
/// Same as [`v2v_dataset_get_item_at`].
#[no_mangle]
pub unsafe extern "C" fn v2v_dataset_get_item(
    dataset: *const V2vDataset,
    index: usize,
    voxels: *mut f32,
    voxels_len: usize,
    frames: *mut f32,
    frames_len: usize,
    params: *mut V2vParams,
) -> V2vStatus {
    let epoch = match handle(dataset) {
        Ok(ds) => ds.epoch.load(Ordering::SeqCst),
        Err(Failure(status, msg)) => {
            set_last_error(msg);
            return status;
        }
    };
    v2v_dataset_get_item_at(
        dataset, index, epoch, voxels, voxels_len, frames, frames_len, params,
    )
}

/// Fixed sensor for single-voxel conversion.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct V2vSensorConfig {
    pub c_plus: f64,
    pub c_minus: f64,
    pub sigma_bg: f64,
    pub gamma: f64,
    pub log_eps: f64,
    /// Seeds the initial residual and the noise.
    pub seed: u64,
}

/// Noise-free defaults with `c_plus = c_minus = 0.2`.
#[no_mangle]
pub extern "C" fn v2v_sensor_config_default() -> V2vSensorConfig {
    let sim = SimConfig::default();
    V2vSensorConfig {
        c_plus: 0.2,
        c_minus: 0.2,
        sigma_bg: 0.0,
        gamma: sim.gamma,
        log_eps: sim.log_eps,
        seed: 0,
    }
}

/// Convert `frame_count` 8-bit frames (row-major, back to back) into one
/// discrete voxel of `frame_count - 1` bins, written to `out` as
/// `(frame_count - 1) x height x width` counts.
///
/// # Safety
/// `frames` must be valid for `frame_count * width * height` reads, `out` for
/// `out_len` writes, `config` readable.
#[no_mangle]
pub unsafe extern "C" fn v2v_frames_to_voxel(
    frames: *const u8,
    frame_count: usize,
    width: usize,
    height: usize,
    config: *const V2vSensorConfig,
    out: *mut i32,
    out_len: usize,
) -> V2vStatus {
    guard(|| {
        non_null(config, "config")?;
        let cfg = *config;
        if frame_count < 2 {
            return Err(fail(V2vStatus::InvalidArgument, "frame_count must be >= 2"));
        }
        let dims = Dims::new(width, height)?;
        let plane = dims.len();
        let total = frame_count
            .checked_mul(plane)
            .ok_or_else(|| fail(V2vStatus::InvalidArgument, "frame buffer size overflows"))?;
        let bins = frame_count - 1;
        check_len("out", bins * plane, out_len)?;
        let data = input(frames, total, "frames")?;
        let frames = data
            .chunks_exact(plane)
            .map(|c| Frame::new(width, height, c.to_vec()))
            .collect::<Result<Vec<_>, _>>()?;
        let params = SensorParams::new(
            cfg.c_plus,
            cfg.c_minus,
            cfg.sigma_bg,
            HotPixelMap::empty(dims),
        )?;
        let sim = SimConfig {
            gamma: cfg.gamma,
            log_eps: cfg.log_eps,
        };
        let keys = SceneKey::new(cfg.seed, 0, 0);
        let initial = init_residual(&params, dims, &keys.key(StreamTag::Init, 0));
        let (voxel, _) = v2v_voxel(&frames, bins, &sim, &params, &initial, &keys, 0)?;
        output(out, out_len, "out")?.copy_from_slice(voxel.data());
        Ok(())
    })
}

/// Bin `count` events with timestamps in `[0, 1]` into a voxel of `bins` bins
/// over a `width x height` sensor, written to `out` as `bins x height x width`.
/// `interpolated` selects linear weight splitting instead of signed counts.
/// Events need not be sorted.
///
/// # Safety
/// `t`, `x`, `y`, `p` must be valid for `count` reads and `out` for `out_len` writes.
#[no_mangle]
pub unsafe extern "C" fn v2v_events_to_voxel(
    t: *const f64,
    x: *const u16,
    y: *const u16,
    p: *const i8,
    count: usize,
    width: usize,
    height: usize,
    bins: usize,
    interpolated: bool,
    out: *mut f32,
    out_len: usize,
) -> V2vStatus {
    guard(|| {
        let dims = Dims::new(width, height)?;
        check_len("out", bins * dims.len(), out_len)?;
        let (t, x, y, p) = (
            input(t, count, "t")?,
            input(x, count, "x")?,
            input(y, count, "y")?,
            input(p, count, "p")?,
        );
        let records = (0..count)
            .map(|i| EventRecord::new(t[i], x[i], y[i], p[i]))
            .collect();
        let stream = EventStream::from_unsorted(dims, records)?;
        let dst = output(out, out_len, "out")?;
        if interpolated {
            let v = interpolated_voxel_from_events(&stream, bins)?;
            for (d, s) in dst.iter_mut().zip(v.data()) {
                *d = *s as f32;
            }
        } else {
            let v = discrete_voxel_from_events(&stream, bins)?;
            for (d, s) in dst.iter_mut().zip(v.data()) {
                *d = *s as f32;
            }
        }
        Ok(())
    })
}
