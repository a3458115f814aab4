//! `.v2vx` voxel files.
//!
//! Layout (little-endian): 24-byte header of magic `"V2VX"`, `u16` version,
//! `u16` dtype (1 = `f32`), `u32` bins, `u32` height, `u32` width and 4
//! reserved zero bytes, followed by one or more voxels stored bin-major then
//! row-major. The voxel count is the payload length divided by
//! `bins * height * width * 4`.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::{Dims, DiscreteVoxel, InterpolatedVoxel};

pub const MAGIC: &[u8; 4] = b"V2VX";
pub const VERSION: u16 = 1;
pub const DTYPE_F32: u16 = 1;
pub const HEADER_LEN: usize = 24;
/// Largest magnitude an event count may have and still be exact in `f32`.
pub const MAX_EXACT_COUNT: i32 = (1 << 24) - 1;

/// A stack of `count` voxels with real-valued cells.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelTensor {
    pub bins: usize,
    pub dims: Dims,
    pub count: usize,
    pub data: Vec<f32>,
}

impl VoxelTensor {
    pub fn voxel_len(&self) -> usize {
        self.bins * self.dims.len()
    }

    pub fn payload_bytes(&self) -> usize {
        self.data.len() * 4
    }

    pub fn from_discrete(voxels: &[DiscreteVoxel]) -> Result<Self> {
        let first = voxels
            .first()
            .ok_or_else(|| Error::data("cannot write an empty voxel stack"))?;
        let mut data = Vec::with_capacity(voxels.len() * first.data().len());
        for v in voxels {
            if v.bins() != first.bins() || v.dims() != first.dims() {
                return Err(Error::mismatch(
                    format!("{} bins of {}", first.bins(), first.dims()),
                    format!("{} bins of {}", v.bins(), v.dims()),
                ));
            }
            for &c in v.data() {
                if c.unsigned_abs() > MAX_EXACT_COUNT as u32 {
                    return Err(Error::data(format!(
                        "event count {c} is not exactly representable as f32"
                    )));
                }
                data.push(c as f32);
            }
        }
        Ok(VoxelTensor {
            bins: first.bins(),
            dims: first.dims(),
            count: voxels.len(),
            data,
        })
    }

    pub fn from_interpolated(voxels: &[InterpolatedVoxel]) -> Result<Self> {
        let first = voxels
            .first()
            .ok_or_else(|| Error::data("cannot write an empty voxel stack"))?;
        let mut data = Vec::with_capacity(voxels.len() * first.data().len());
        for v in voxels {
            if v.bins() != first.bins() || v.dims() != first.dims() {
                return Err(Error::mismatch(first.bins(), v.bins()));
            }
            data.extend(v.data().iter().map(|&x| x as f32));
        }
        Ok(VoxelTensor {
            bins: first.bins(),
            dims: first.dims(),
            count: voxels.len(),
            data,
        })
    }

    pub fn to_discrete(&self) -> Result<Vec<DiscreteVoxel>> {
        self.data
            .chunks(self.voxel_len())
            .map(|chunk| {
                let counts = chunk
                    .iter()
                    .map(|&x| {
                        if x.fract() != 0.0 || x.abs() > MAX_EXACT_COUNT as f32 {
                            Err(Error::data(format!("{x} is not an event count")))
                        } else {
                            Ok(x as i32)
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                DiscreteVoxel::from_vec(self.bins, self.dims, counts)
            })
            .collect()
    }
}

pub fn encode_voxel_file(t: &VoxelTensor) -> Result<Vec<u8>> {
    let dim = |v: usize| u32::try_from(v).map_err(|_| Error::data("voxel dimension exceeds u32"));
    let mut out = Vec::with_capacity(HEADER_LEN + t.payload_bytes());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&DTYPE_F32.to_le_bytes());
    out.extend_from_slice(&dim(t.bins)?.to_le_bytes());
    out.extend_from_slice(&dim(t.dims.height)?.to_le_bytes());
    out.extend_from_slice(&dim(t.dims.width)?.to_le_bytes());
    out.extend_from_slice(&[0u8; 4]);
    for v in &t.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_voxel_file(bytes: &[u8]) -> Result<VoxelTensor> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::data(format!(
            "truncated header: {} bytes",
            bytes.len()
        )));
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::data("magic mismatch: not a V2VX file"));
    }
    let u16_at = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]);
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    let version = u16_at(4);
    if version != VERSION {
        return Err(Error::data(format!("unsupported version {version}")));
    }
    let dtype = u16_at(6);
    if dtype != DTYPE_F32 {
        return Err(Error::data(format!("unsupported dtype code {dtype}")));
    }
    let bins = u32_at(8);
    let dims = Dims::new(u32_at(16), u32_at(12)).map_err(|e| Error::data(e.to_string()))?;
    if bins == 0 {
        return Err(Error::data("voxel file declares zero bins"));
    }
    let voxel_bytes = bins * dims.len() * 4;
    let payload = &bytes[HEADER_LEN..];
    if payload.is_empty() || !payload.len().is_multiple_of(voxel_bytes) {
        return Err(Error::data(format!(
            "truncated payload: {} bytes is not a positive multiple of {voxel_bytes}",
            payload.len()
        )));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(VoxelTensor {
        bins,
        dims,
        count: payload.len() / voxel_bytes,
        data,
    })
}

pub fn write_voxel_file(t: &VoxelTensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_voxel_file(t)?).map_err(|e| Error::from(e).in_file(path))
}

pub fn read_voxel_file(path: impl AsRef<Path>) -> Result<VoxelTensor> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::from(e).in_file(path))?;
    decode_voxel_file(&bytes).map_err(|e| e.in_file(path))
}

/// Write discrete voxels as `f32`; fails if a count is not exactly representable.
pub fn write_voxels(voxels: &[DiscreteVoxel], path: impl AsRef<Path>) -> Result<()> {
    write_voxel_file(&VoxelTensor::from_discrete(voxels)?, path)
}

pub fn write_interpolated_voxels(
    voxels: &[InterpolatedVoxel],
    path: impl AsRef<Path>,
) -> Result<()> {
    write_voxel_file(&VoxelTensor::from_interpolated(voxels)?, path)
}

pub fn read_voxels(path: impl AsRef<Path>) -> Result<Vec<DiscreteVoxel>> {
    let path = path.as_ref();
    read_voxel_file(path)?
        .to_discrete()
        .map_err(|e| e.in_file(path))
}
