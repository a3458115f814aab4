//! JSON dataset manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::CropRect;
use crate::pipeline::{plan_slices, SlicePlan};
use crate::types::Dims;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    /// Directory of image files, one frame each.
    Images,
    /// Headerless 8-bit frames back to back.
    Raw,
}

/// Where a scene's frames live, so samples can be rebuilt on the fly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneSource {
    pub kind: SourceKind,
    /// Relative paths resolve against the manifest's directory.
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<String>,
    /// Dimensions of the stored frames before `crop`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_dims: Option<Dims>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crop: Option<CropRect>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneEntry {
    pub scene_id: String,
    pub frame_count: usize,
    pub width: usize,
    pub height: usize,
    pub frame_rate: f64,
    pub source_bytes: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<SceneSource>,
}

impl SceneEntry {
    pub fn new(
        scene_id: impl Into<String>,
        frame_count: usize,
        width: usize,
        height: usize,
        frame_rate: f64,
        source_bytes: u64,
    ) -> Self {
        SceneEntry {
            scene_id: scene_id.into(),
            frame_count,
            width,
            height,
            frame_rate,
            source_bytes,
            source: None,
        }
    }

    pub fn dims(&self) -> Result<Dims> {
        Dims::new(self.width, self.height)
            .map_err(|_| Error::data(format!("scene {} has zero size", self.scene_id)))
    }

    pub fn duration_s(&self) -> f64 {
        self.frame_count as f64 / self.frame_rate
    }
}

/// Totals written alongside the scene list for human readers; recomputed on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestSummary {
    pub bins_per_voxel: usize,
    pub voxels_per_sequence: usize,
    pub total_frames: u64,
    pub total_duration_s: f64,
    pub sequence_count: u64,
    pub source_bytes: u64,
    pub prestacked_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub scenes: Vec<SceneEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derived: Option<ManifestSummary>,
}

impl DatasetManifest {
    pub fn new(scenes: Vec<SceneEntry>) -> Self {
        DatasetManifest {
            scenes,
            derived: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for s in &self.scenes {
            s.dims()?;
            if !(s.frame_rate > 0.0 && s.frame_rate.is_finite()) {
                return Err(Error::data(format!(
                    "scene {} has invalid frame rate {}",
                    s.scene_id, s.frame_rate
                )));
            }
            if !seen.insert(&s.scene_id) {
                return Err(Error::data(format!("duplicate scene id {}", s.scene_id)));
            }
        }
        Ok(())
    }

    pub fn summary(&self, plan: &SlicePlan) -> Result<ManifestSummary> {
        let mut out = ManifestSummary {
            bins_per_voxel: plan.bins_per_voxel,
            voxels_per_sequence: plan.voxels_per_sequence,
            total_frames: 0,
            total_duration_s: 0.0,
            sequence_count: 0,
            source_bytes: 0,
            prestacked_bytes: 0,
        };
        for s in &self.scenes {
            let seqs = plan_slices(s.frame_count, plan)?.len() as u64;
            out.total_frames += s.frame_count as u64;
            out.total_duration_s += s.duration_s();
            out.sequence_count += seqs;
            out.source_bytes += s.source_bytes;
            out.prestacked_bytes += seqs * plan.prestacked_bytes(s.dims()?);
        }
        Ok(out)
    }

    pub fn with_summary(mut self, plan: &SlicePlan) -> Result<Self> {
        self.derived = Some(self.summary(plan)?);
        Ok(self)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: DatasetManifest = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
        Self::from_json(&text).map_err(|e| e.in_file(path))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::from(e).in_file(path))
    }
}
