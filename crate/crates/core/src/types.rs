//! Value types shared by every stage of the toolkit.
//!
//! All grids are row-major with `index = y * width + x`; voxels are
//! bin-major on top of that (`index = b * width * height + y * width + x`).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub width: usize,
    pub height: usize,
}

impl Dims {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::config(format!(
                "grid dimensions must be positive, got {width}x{height}"
            )));
        }
        Ok(Dims { width, height })
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x < self.width && y < self.height
    }

    pub(crate) fn ensure_same(&self, other: Dims) -> Result<()> {
        if *self != other {
            return Err(Error::mismatch(self, other));
        }
        Ok(())
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

/// Dense row-major grid of per-pixel values.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    dims: Dims,
    data: Vec<T>,
}

impl<T: Clone> Grid<T> {
    pub fn filled(dims: Dims, value: T) -> Self {
        Grid {
            dims,
            data: vec![value; dims.len()],
        }
    }
}

impl<T> Grid<T> {
    pub fn from_vec(dims: Dims, data: Vec<T>) -> Result<Self> {
        if data.len() != dims.len() {
            return Err(Error::mismatch(
                format!("{} values for {dims}", dims.len()),
                format!("{} values", data.len()),
            ));
        }
        Ok(Grid { dims, data })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize) -> &T {
        &self.data[self.dims.index(x, y)]
    }
}

/// One 8-bit grayscale video frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    dims: Dims,
    data: Vec<u8>,
}

impl Frame {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        let dims = Dims::new(width, height)?;
        if data.len() != dims.len() {
            return Err(Error::mismatch(
                format!("{} bytes for a {dims} frame", dims.len()),
                format!("{} bytes", data.len()),
            ));
        }
        Ok(Frame { dims, data })
    }

    pub fn filled(dims: Dims, value: u8) -> Self {
        Frame {
            dims,
            data: vec![value; dims.len()],
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn width(&self) -> usize {
        self.dims.width
    }

    pub fn height(&self) -> usize {
        self.dims.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> u8 {
        self.data[self.dims.index(x, y)]
    }
}

/// Ordered frames of one scene, all with identical dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    frames: Vec<Frame>,
    frame_rate: f64,
    scene_id: String,
}

impl FrameSequence {
    pub fn new(frames: Vec<Frame>, frame_rate: f64, scene_id: impl Into<String>) -> Result<Self> {
        if frames.len() < 2 {
            return Err(Error::data(format!(
                "a frame sequence needs at least 2 frames, got {}",
                frames.len()
            )));
        }
        let dims = frames[0].dims();
        for (i, f) in frames.iter().enumerate() {
            if f.dims() != dims {
                return Err(Error::mismatch(format!("frame {i} to be {dims}"), f.dims()));
            }
        }
        Ok(FrameSequence {
            frames,
            frame_rate,
            scene_id: scene_id.into(),
        })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<Frame> {
        self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dims(&self) -> Dims {
        self.frames[0].dims()
    }

    pub fn frame_rate(&self) -> f64 {
        self.frame_rate
    }

    pub fn scene_id(&self) -> &str {
        &self.scene_id
    }
}

/// Linear irradiance estimate in `[0, 1]` per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearLuminance(Grid<f64>);

impl LinearLuminance {
    pub fn new(grid: Grid<f64>) -> Result<Self> {
        if let Some(v) = grid.as_slice().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::data(format!("linear luminance {v} outside [0, 1]")));
        }
        Ok(LinearLuminance(grid))
    }

    pub fn grid(&self) -> &Grid<f64> {
        &self.0
    }

    pub fn values(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn dims(&self) -> Dims {
        self.0.dims()
    }
}

/// Natural-log luminance per pixel. Also used for frame-to-frame log differences.
#[derive(Debug, Clone, PartialEq)]
pub struct LogLuminance(Grid<f64>);

impl LogLuminance {
    pub fn new(grid: Grid<f64>) -> Result<Self> {
        if grid.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::data("log luminance must be finite"));
        }
        Ok(LogLuminance(grid))
    }

    pub fn from_vec(dims: Dims, values: Vec<f64>) -> Result<Self> {
        Self::new(Grid::from_vec(dims, values)?)
    }

    pub fn grid(&self) -> &Grid<f64> {
        &self.0
    }

    pub fn values(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn dims(&self) -> Dims {
        self.0.dims()
    }

    /// `self - previous`, per pixel.
    pub fn difference(&self, previous: &LogLuminance) -> Result<LogLuminance> {
        self.dims().ensure_same(previous.dims())?;
        let values = self
            .values()
            .iter()
            .zip(previous.values())
            .map(|(a, b)| a - b)
            .collect();
        LogLuminance::from_vec(self.dims(), values)
    }
}

/// Per-pixel log-luminance change accumulated since the last emitted event.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualState(Grid<f64>);

impl ResidualState {
    pub fn new(grid: Grid<f64>) -> Result<Self> {
        if grid.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::data("residual state must be finite"));
        }
        Ok(ResidualState(grid))
    }

    pub fn from_vec(dims: Dims, values: Vec<f64>) -> Result<Self> {
        Self::new(Grid::from_vec(dims, values)?)
    }

    pub fn zeros(dims: Dims) -> Self {
        ResidualState(Grid::filled(dims, 0.0))
    }

    pub fn values(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn dims(&self) -> Dims {
        self.0.dims()
    }
}

/// A hot pixel adds a constant log-luminance offset at every frame step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HotPixel {
    pub x: usize,
    pub y: usize,
    pub magnitude: f64,
}

/// Sparse additive map of defective pixels; unlisted pixels are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HotPixelMap {
    dims: Dims,
    entries: Vec<HotPixel>,
}

impl HotPixelMap {
    pub fn empty(dims: Dims) -> Self {
        HotPixelMap {
            dims,
            entries: Vec::new(),
        }
    }

    pub fn new(dims: Dims, entries: Vec<HotPixel>) -> Result<Self> {
        for e in &entries {
            if !dims.contains(e.x, e.y) {
                return Err(Error::data(format!(
                    "hot pixel ({}, {}) outside {dims}",
                    e.x, e.y
                )));
            }
            if e.magnitude == 0.0 || !e.magnitude.is_finite() {
                return Err(Error::data(format!(
                    "hot pixel ({}, {}) has invalid magnitude {}",
                    e.x, e.y, e.magnitude
                )));
            }
        }
        Ok(HotPixelMap { dims, entries })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn entries(&self) -> &[HotPixel] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Add the map onto a row-major grid of matching dimensions.
    pub fn add_to(&self, values: &mut [f64]) {
        for e in &self.entries {
            values[self.dims.index(e.x, e.y)] += e.magnitude;
        }
    }

    pub fn cropped(&self, left: usize, top: usize, dims: Dims) -> HotPixelMap {
        let entries = self
            .entries
            .iter()
            .filter(|e| {
                e.x >= left && e.y >= top && e.x - left < dims.width && e.y - top < dims.height
            })
            .map(|e| HotPixel {
                x: e.x - left,
                y: e.y - top,
                magnitude: e.magnitude,
            })
            .collect();
        HotPixelMap { dims, entries }
    }
}

/// Event-sensor parameters for one simulated sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorParams {
    pub c_plus: f64,
    pub c_minus: f64,
    pub sigma_bg: f64,
    pub hot_pixels: HotPixelMap,
}

impl SensorParams {
    pub fn new(c_plus: f64, c_minus: f64, sigma_bg: f64, hot_pixels: HotPixelMap) -> Result<Self> {
        if !(c_plus > 0.0 && c_plus.is_finite()) {
            return Err(Error::config(format!("c_plus must be > 0, got {c_plus}")));
        }
        if !(c_minus > 0.0 && c_minus.is_finite()) {
            return Err(Error::config(format!("c_minus must be > 0, got {c_minus}")));
        }
        if !(sigma_bg >= 0.0 && sigma_bg.is_finite()) {
            return Err(Error::config(format!(
                "sigma_bg must be >= 0, got {sigma_bg}"
            )));
        }
        Ok(SensorParams {
            c_plus,
            c_minus,
            sigma_bg,
            hot_pixels,
        })
    }

    /// Noise-free, defect-free sensor.
    pub fn ideal(c_plus: f64, c_minus: f64, dims: Dims) -> Result<Self> {
        Self::new(c_plus, c_minus, 0.0, HotPixelMap::empty(dims))
    }
}

/// `bins x height x width` grid of net signed event counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscreteVoxel {
    bins: usize,
    dims: Dims,
    data: Vec<i32>,
}

impl DiscreteVoxel {
    pub fn zeros(bins: usize, dims: Dims) -> Result<Self> {
        if bins == 0 {
            return Err(Error::config("voxel needs at least one bin"));
        }
        Ok(DiscreteVoxel {
            bins,
            dims,
            data: vec![0; bins * dims.len()],
        })
    }

    pub fn from_vec(bins: usize, dims: Dims, data: Vec<i32>) -> Result<Self> {
        let mut v = Self::zeros(bins, dims)?;
        if data.len() != v.data.len() {
            return Err(Error::mismatch(
                format!("{} voxel values", v.data.len()),
                data.len(),
            ));
        }
        v.data = data;
        Ok(v)
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn data(&self) -> &[i32] {
        &self.data
    }

    pub fn get(&self, bin: usize, x: usize, y: usize) -> i32 {
        self.data[bin * self.dims.len() + self.dims.index(x, y)]
    }

    pub fn bin(&self, bin: usize) -> &[i32] {
        let n = self.dims.len();
        &self.data[bin * n..(bin + 1) * n]
    }

    pub fn bin_mut(&mut self, bin: usize) -> &mut [i32] {
        let n = self.dims.len();
        &mut self.data[bin * n..(bin + 1) * n]
    }

    /// Per-pixel sum over all bins.
    pub fn bin_sum(&self) -> Vec<i64> {
        let mut sum = vec![0i64; self.dims.len()];
        for b in 0..self.bins {
            for (s, v) in sum.iter_mut().zip(self.bin(b)) {
                *s += i64::from(*v);
            }
        }
        sum
    }

    pub fn cropped(&self, left: usize, top: usize, dims: Dims) -> DiscreteVoxel {
        let mut data = Vec::with_capacity(self.bins * dims.len());
        for b in 0..self.bins {
            let bin = self.bin(b);
            for y in top..top + dims.height {
                let row = y * self.dims.width;
                data.extend_from_slice(&bin[row + left..row + left + dims.width]);
            }
        }
        DiscreteVoxel {
            bins: self.bins,
            dims,
            data,
        }
    }
}

/// `bins x height x width` grid of linearly time-interpolated polarity mass.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolatedVoxel {
    bins: usize,
    dims: Dims,
    data: Vec<f64>,
}

impl InterpolatedVoxel {
    pub fn zeros(bins: usize, dims: Dims) -> Result<Self> {
        if bins == 0 {
            return Err(Error::config("voxel needs at least one bin"));
        }
        Ok(InterpolatedVoxel {
            bins,
            dims,
            data: vec![0.0; bins * dims.len()],
        })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, bin: usize, x: usize, y: usize) -> f64 {
        self.data[bin * self.dims.len() + self.dims.index(x, y)]
    }

    pub fn bin_sum(&self) -> Vec<f64> {
        let n = self.dims.len();
        let mut sum = vec![0.0; n];
        for b in 0..self.bins {
            for (s, v) in sum.iter_mut().zip(&self.data[b * n..(b + 1) * n]) {
                *s += v;
            }
        }
        sum
    }
}

/// A single event. `t` is normalized to `[0, 1]` when the record feeds a
/// voxel builder; recorded files may carry raw timestamps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRecord {
    pub t: f64,
    pub x: u16,
    pub y: u16,
    pub p: i8,
}

impl EventRecord {
    pub fn new(t: f64, x: u16, y: u16, p: i8) -> Self {
        EventRecord { t, x, y, p }
    }

    /// Ordering used for deterministic streams: time, then row, column, polarity.
    pub fn sort_key_cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.t
            .total_cmp(&other.t)
            .then(self.y.cmp(&other.y))
            .then(self.x.cmp(&other.x))
            .then(self.p.cmp(&other.p))
    }
}

/// Events sorted by nondecreasing timestamp, all inside the sensor grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EventStream {
    dims: Dims,
    records: Vec<EventRecord>,
}

impl EventStream {
    pub fn empty(dims: Dims) -> Self {
        EventStream {
            dims,
            records: Vec::new(),
        }
    }

    /// Validates bounds, polarity, finiteness and ordering.
    pub fn new(dims: Dims, records: Vec<EventRecord>) -> Result<Self> {
        for (i, r) in records.iter().enumerate() {
            validate_record(dims, r).map_err(|m| Error::parse(format!("record {i}"), m))?;
            if i > 0 && records[i - 1].t > r.t {
                return Err(Error::parse(
                    format!("record {i}"),
                    format!("timestamp {} precedes previous {}", r.t, records[i - 1].t),
                ));
            }
        }
        Ok(EventStream { dims, records })
    }

    /// Like [`EventStream::new`] but sorts the records first.
    pub fn from_unsorted(dims: Dims, mut records: Vec<EventRecord>) -> Result<Self> {
        records.sort_by(EventRecord::sort_key_cmp);
        Self::new(dims, records)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn records(&self) -> &[EventRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Per-pixel net polarity.
    pub fn net_polarity(&self) -> Vec<i64> {
        let mut sum = vec![0i64; self.dims.len()];
        for r in &self.records {
            sum[self.dims.index(r.x as usize, r.y as usize)] += i64::from(r.p);
        }
        sum
    }
}

pub(crate) fn validate_record(dims: Dims, r: &EventRecord) -> std::result::Result<(), String> {
    if !r.t.is_finite() {
        return Err(format!("non-finite timestamp {}", r.t));
    }
    if !dims.contains(r.x as usize, r.y as usize) {
        return Err(format!("coordinate ({}, {}) outside {dims}", r.x, r.y));
    }
    if r.p != 1 && r.p != -1 {
        return Err(format!("polarity must be -1 or 1, got {}", r.p));
    }
    Ok(())
}
