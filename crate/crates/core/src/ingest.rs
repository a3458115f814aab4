//! Frame acquisition and pixel-space augmentation.

use std::fs;
use std::io::{ErrorKind, Read};
use std::path::{Path, PathBuf};

use image::DynamicImage;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_rng, RngKey};
use crate::sensor::Range;
use crate::types::{Dims, Frame, FrameSequence};

pub const DEFAULT_FRAME_RATE: f64 = 30.0;

const IMAGE_EXTENSIONS: &[&str] = &["pgm", "pnm", "ppm", "pbm", "png", "bmp", "tif", "tiff"];

/// Image files in `dir`, sorted by file name. With no `pattern`, every file
/// with a known raster extension is taken; otherwise names must match the
/// glob `pattern` (e.g. `"frame_*.png"`).
pub fn list_frame_files(dir: &Path, pattern: Option<&str>) -> Result<Vec<PathBuf>> {
    let pattern = pattern
        .map(glob::Pattern::new)
        .transpose()
        .map_err(|e| Error::config(format!("bad file pattern: {e}")))?;
    let entries = fs::read_dir(dir).map_err(|e| Error::from(e).in_file(dir))?;
    let mut files = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::from(e).in_file(dir))?;
        let path = entry.path();
        if !path.is_file() {
            continue;
        }
        let name = entry.file_name().to_string_lossy().into_owned();
        let keep = match &pattern {
            Some(p) => p.matches(&name),
            None => path
                .extension()
                .map(|e| {
                    IMAGE_EXTENSIONS.contains(&e.to_string_lossy().to_ascii_lowercase().as_str())
                })
                .unwrap_or(false),
        };
        if keep {
            files.push(path);
        }
    }
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}

/// BT.601 luma, `0.299 R + 0.587 G + 0.114 B`, rounded half to even.
pub fn luma_bt601(r: u8, g: u8, b: u8) -> u8 {
    let y = 0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b);
    y.round_ties_even().clamp(0.0, 255.0) as u8
}

/// Decode one image file into an 8-bit grayscale frame.
pub fn read_frame(path: &Path) -> Result<Frame> {
    let img = image::open(path).map_err(|e| Error::from(e).in_file(path))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = match img {
        DynamicImage::ImageLuma8(g) => g.into_raw(),
        DynamicImage::ImageLumaA8(g) => g.pixels().map(|p| p.0[0]).collect(),
        DynamicImage::ImageLuma16(_) | DynamicImage::ImageLumaA16(_) => img.to_luma8().into_raw(),
        other => other
            .to_rgb8()
            .pixels()
            .map(|p| luma_bt601(p.0[0], p.0[1], p.0[2]))
            .collect(),
    };
    Frame::new(w, h, data).map_err(|e| e.in_file(path))
}

/// Read the given files as one sequence; all must share one resolution.
pub fn read_frame_files(
    files: &[PathBuf],
    frame_rate: f64,
    scene_id: &str,
) -> Result<FrameSequence> {
    let mut frames: Vec<Frame> = Vec::with_capacity(files.len());
    for path in files {
        let frame = read_frame(path)?;
        if let Some(first) = frames.first() {
            if first.dims() != frame.dims() {
                return Err(Error::mismatch(first.dims(), frame.dims()).in_file(path));
            }
        }
        frames.push(frame);
    }
    FrameSequence::new(frames, frame_rate, scene_id)
}

/// All frames of an image directory, ordered by file name.
pub fn read_frames_dir(dir: impl AsRef<Path>, pattern: Option<&str>) -> Result<FrameSequence> {
    let dir = dir.as_ref();
    let files = list_frame_files(dir, pattern)?;
    if files.is_empty() {
        return Err(Error::data("no image files found").in_file(dir));
    }
    read_frame_files(&files, DEFAULT_FRAME_RATE, &scene_name(dir)).map_err(|e| match e {
        Error::File { .. } => e,
        other => other.in_file(dir),
    })
}

pub(crate) fn scene_name(path: &Path) -> String {
    path.file_stem()
        .or_else(|| path.file_name())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scene".to_string())
}

/// Streaming reader of headerless 8-bit frames laid out back to back.
pub struct RawFrameReader<R> {
    source: R,
    dims: Dims,
    offset: u64,
    done: bool,
}

impl<R: Read> RawFrameReader<R> {
    pub fn new(source: R, width: usize, height: usize) -> Result<Self> {
        Ok(RawFrameReader {
            source,
            dims: Dims::new(width, height)?,
            offset: 0,
            done: false,
        })
    }

    /// Bytes consumed so far.
    pub fn offset(&self) -> u64 {
        self.offset
    }
}

impl<R: Read> Iterator for RawFrameReader<R> {
    type Item = Result<Frame>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let mut buf = vec![0u8; self.dims.len()];
        let mut filled = 0;
        while filled < buf.len() {
            match self.source.read(&mut buf[filled..]) {
                Ok(0) => break,
                Ok(n) => filled += n,
                Err(e) if e.kind() == ErrorKind::Interrupted => continue,
                Err(e) => {
                    self.done = true;
                    return Some(Err(e.into()));
                }
            }
        }
        if filled == 0 {
            self.done = true;
            return None;
        }
        if filled < buf.len() {
            self.done = true;
            return Some(Err(Error::data(format!(
                "trailing partial frame of {filled} bytes at byte offset {} (frame size {})",
                self.offset,
                buf.len()
            ))));
        }
        self.offset += filled as u64;
        Some(Frame::new(self.dims.width, self.dims.height, buf))
    }
}

/// Collect a raw frame stream into a sequence.
pub fn read_frames_raw<R: Read>(
    source: R,
    width: usize,
    height: usize,
    scene_id: &str,
) -> Result<FrameSequence> {
    let frames = RawFrameReader::new(source, width, height)?.collect::<Result<Vec<_>>>()?;
    FrameSequence::new(frames, DEFAULT_FRAME_RATE, scene_id)
}

/// Frames `range` of a raw file, reading only the bytes needed.
pub fn read_raw_window(
    path: &Path,
    dims: Dims,
    range: std::ops::Range<usize>,
) -> Result<Vec<Frame>> {
    use std::io::{Seek, SeekFrom};
    let mut file = fs::File::open(path).map_err(|e| Error::from(e).in_file(path))?;
    file.seek(SeekFrom::Start((range.start * dims.len()) as u64))?;
    let reader = RawFrameReader::new(
        file.take((range.len() * dims.len()) as u64),
        dims.width,
        dims.height,
    )?;
    let frames = reader
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_file(path))?;
    if frames.len() != range.len() {
        return Err(Error::data(format!(
            "expected {} frames, found {}",
            range.len(),
            frames.len()
        ))
        .in_file(path));
    }
    Ok(frames)
}

/// Rectangle in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropRect {
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

impl CropRect {
    pub fn full(dims: Dims) -> Self {
        CropRect {
            top: 0,
            left: 0,
            height: dims.height,
            width: dims.width,
        }
    }

    pub fn check(&self, dims: Dims) -> Result<Dims> {
        let out = Dims::new(self.width, self.height)?;
        if self.top + self.height > dims.height || self.left + self.width > dims.width {
            return Err(Error::config(format!(
                "crop {}x{} at ({}, {}) exceeds {dims}",
                self.width, self.height, self.left, self.top
            )));
        }
        Ok(out)
    }
}

pub fn crop_frame(frame: &Frame, rect: CropRect) -> Result<Frame> {
    let out = rect.check(frame.dims())?;
    let mut data = Vec::with_capacity(out.len());
    let w = frame.width();
    for y in rect.top..rect.top + rect.height {
        data.extend_from_slice(&frame.data()[y * w + rect.left..y * w + rect.left + rect.width]);
    }
    Frame::new(out.width, out.height, data)
}

pub fn crop(
    seq: &FrameSequence,
    top: usize,
    left: usize,
    height: usize,
    width: usize,
) -> Result<FrameSequence> {
    let rect = CropRect {
        top,
        left,
        height,
        width,
    };
    let frames = seq
        .frames()
        .iter()
        .map(|f| crop_frame(f, rect))
        .collect::<Result<Vec<_>>>()?;
    FrameSequence::new(frames, seq.frame_rate(), seq.scene_id())
}

/// Contrast stretch about mid-gray: `clip((F - 127.5) s + 127.5, 0, 255)`.
pub fn degrade_dynamic_range(frame: &Frame, scale: f64) -> Result<Frame> {
    if !(scale >= 1.0 && scale.is_finite()) {
        return Err(Error::config(format!(
            "degradation scale must be >= 1, got {scale}"
        )));
    }
    let mut table = [0u8; 256];
    for (v, out) in table.iter_mut().enumerate() {
        let y = ((v as f64 - 127.5) * scale + 127.5).clamp(0.0, 255.0);
        *out = y.round_ties_even() as u8;
    }
    let data = frame.data().iter().map(|&v| table[v as usize]).collect();
    Frame::new(frame.width(), frame.height(), data)
}

/// Random dynamic-range degradation applied per sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegradeConfig {
    pub probability: f64,
    pub scale: Range,
}

impl Default for DegradeConfig {
    fn default() -> Self {
        DegradeConfig {
            probability: 0.8,
            scale: Range::new(1.0, 3.0),
        }
    }
}

impl DegradeConfig {
    pub fn disabled() -> Self {
        DegradeConfig {
            probability: 0.0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.probability) {
            return Err(Error::config(format!(
                "degradation probability must be in [0, 1], got {}",
                self.probability
            )));
        }
        if !(self.scale.lo >= 1.0 && self.scale.lo <= self.scale.hi && self.scale.hi.is_finite()) {
            return Err(Error::config(format!(
                "degradation scale range must satisfy 1 <= lo <= hi, got {}:{}",
                self.scale.lo, self.scale.hi
            )));
        }
        Ok(())
    }

    /// Decide whether and how strongly to degrade one sequence.
    pub fn draw(&self, key: &RngKey) -> Option<f64> {
        if self.probability <= 0.0 {
            return None;
        }
        let mut rng = derive_rng(key);
        let apply = rng.random::<f64>() < self.probability;
        let scale = self.scale.sample(&mut rng);
        apply.then_some(scale)
    }
}

pub fn degrade_frames(frames: &[Frame], scale: f64) -> Result<Vec<Frame>> {
    frames
        .iter()
        .map(|f| degrade_dynamic_range(f, scale))
        .collect()
}
