//! Random-access, epoch-aware view over a manifest for training loops.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::ingest::{crop_frame, list_frame_files, read_frame_files, read_raw_window};
use crate::pipeline::{
    build_sample, plan_slices, sample_crop, DatasetManifest, Sample, SampleConfig, SourceKind,
};
use crate::rng::{scene_id_from_name, SceneKey, StreamTag};
use crate::types::{Frame, SensorParams};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DatasetConfig {
    pub sample: SampleConfig,
    pub global_seed: u64,
    /// Random crop `(height, width)` re-drawn per item and epoch.
    pub crop: Option<(usize, usize)>,
}

/// Tensor shapes of one item: voxels are `voxels x bins x height x width`,
/// frames are `(voxels + 1) x height x width`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ItemShape {
    pub voxels: usize,
    pub bins: usize,
    pub height: usize,
    pub width: usize,
}

impl ItemShape {
    pub fn voxel_len(&self) -> usize {
        self.voxels * self.bins * self.height * self.width
    }

    pub fn frame_len(&self) -> usize {
        (self.voxels + 1) * self.height * self.width
    }
}

pub struct Dataset {
    manifest: DatasetManifest,
    base_dir: PathBuf,
    config: DatasetConfig,
    /// `(scene index, window start)` per item.
    items: Vec<(usize, usize)>,
}

impl Dataset {
    pub fn open(manifest_path: impl AsRef<Path>, config: DatasetConfig) -> Result<Self> {
        let path = manifest_path.as_ref();
        let manifest = DatasetManifest::load(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_manifest(manifest, base, config).map_err(|e| e.in_file(path))
    }

    pub fn from_manifest(
        manifest: DatasetManifest,
        base_dir: impl Into<PathBuf>,
        config: DatasetConfig,
    ) -> Result<Self> {
        config.sample.validate()?;
        manifest.validate()?;
        let mut items = Vec::new();
        for (i, scene) in manifest.scenes.iter().enumerate() {
            if scene.source.is_none() {
                return Err(Error::data(format!(
                    "scene {} has no frame source",
                    scene.scene_id
                )));
            }
            let dims = scene.dims()?;
            if let Some((h, w)) = config.crop {
                if h == 0 || w == 0 || h > dims.height || w > dims.width {
                    return Err(Error::config(format!(
                        "crop {w}x{h} does not fit scene {} ({dims})",
                        scene.scene_id
                    )));
                }
            }
            for window in plan_slices(scene.frame_count, &config.sample.plan)? {
                items.push((i, window.start));
            }
        }
        Ok(Dataset {
            manifest,
            base_dir: base_dir.into(),
            config,
            items,
        })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn config(&self) -> &DatasetConfig {
        &self.config
    }

    pub fn manifest(&self) -> &DatasetManifest {
        &self.manifest
    }

    pub fn shape(&self, index: usize) -> Result<ItemShape> {
        let (scene, _) = self.item(index)?;
        let dims = self.manifest.scenes[scene].dims()?;
        let (height, width) = self.config.crop.unwrap_or((dims.height, dims.width));
        let plan = self.config.sample.plan;
        Ok(ItemShape {
            voxels: plan.voxels_per_sequence,
            bins: plan.bins_per_voxel,
            height,
            width,
        })
    }

    fn item(&self, index: usize) -> Result<(usize, usize)> {
        self.items.get(index).copied().ok_or_else(|| {
            Error::config(format!(
                "index {index} out of range for {} items",
                self.items.len()
            ))
        })
    }

    fn load_window(&self, scene: usize, start: usize) -> Result<Vec<Frame>> {
        let entry = &self.manifest.scenes[scene];
        let source = entry.source.as_ref().expect("checked in from_manifest");
        let path = if source.path.is_absolute() {
            source.path.clone()
        } else {
            self.base_dir.join(&source.path)
        };
        let range = start..start + self.config.sample.plan.window_len();
        let frames = match source.kind {
            SourceKind::Images => {
                let files = list_frame_files(&path, source.pattern.as_deref())?;
                if files.len() < range.end {
                    return Err(Error::data(format!(
                        "found {} frames, manifest needs {}",
                        files.len(),
                        range.end
                    ))
                    .in_file(&path));
                }
                read_frame_files(&files[range], entry.frame_rate, &entry.scene_id)?.into_frames()
            }
            SourceKind::Raw => {
                let dims = match source.source_dims {
                    Some(d) => d,
                    None => entry.dims()?,
                };
                read_raw_window(&path, dims, range)?
            }
        };
        match source.crop {
            Some(rect) => frames.iter().map(|f| crop_frame(f, rect)).collect(),
            None => Ok(frames),
        }
    }

    /// Build item `index` for `epoch`.
    pub fn sample(&self, index: usize, epoch: u64) -> Result<Sample> {
        let (scene, start) = self.item(index)?;
        let entry = &self.manifest.scenes[scene];
        let window = self.load_window(scene, start)?;
        let keys = SceneKey::new(
            self.config.global_seed,
            scene_id_from_name(&entry.scene_id),
            epoch,
        );
        let sample = build_sample(&window, &self.config.sample, keys, start)?;
        match self.config.crop {
            Some((h, w)) => {
                let key = self
                    .config
                    .sample
                    .policy
                    .effective_keys(keys)
                    .key(StreamTag::Crop, start as u64);
                sample_crop(&sample, h, w, &key)
            }
            None => Ok(sample),
        }
    }

    /// Build item `index` straight into caller-owned buffers: voxel counts as
    /// `f32`, frames scaled to `[0, 1]`. Buffer sizes must match [`Dataset::shape`].
    pub fn fill_item(
        &self,
        index: usize,
        epoch: u64,
        voxels: &mut [f32],
        frames: &mut [f32],
    ) -> Result<SensorParams> {
        let shape = self.shape(index)?;
        if voxels.len() != shape.voxel_len() || frames.len() != shape.frame_len() {
            return Err(Error::mismatch(
                format!(
                    "buffers of {} and {} values",
                    shape.voxel_len(),
                    shape.frame_len()
                ),
                format!("{} and {}", voxels.len(), frames.len()),
            ));
        }
        let sample = self.sample(index, epoch)?;
        for (dst, v) in voxels
            .chunks_mut(shape.bins * shape.height * shape.width)
            .zip(&sample.voxels)
        {
            for (d, c) in dst.iter_mut().zip(v.data()) {
                *d = *c as f32;
            }
        }
        for (dst, f) in frames
            .chunks_mut(shape.height * shape.width)
            .zip(&sample.frames)
        {
            for (d, p) in dst.iter_mut().zip(f.data()) {
                *d = f32::from(*p) / 255.0;
            }
        }
        Ok(sample.params)
    }
}
