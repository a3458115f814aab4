//! Direct video-to-voxel conversion for event-camera training data.
//!
//! Frames are converted to discrete event voxels by simulating the
//! photoreceptor residual of an event sensor frame by frame, without ever
//! materializing a timestamped event stream. A brute-force event-stream
//! simulator in [`events`] serves as the reference the fast path is checked
//! against, and doubles as the converter for recorded event streams.
//!
//! Module map:
//! - [`types`], [`rng`]: shared domain types and the keyed RNG contract.
//! - [`sensor`]: parameter sampling and the frame-stepped simulation.
//! - [`events`]: reference event simulator, voxel builders, event file formats.
//! - [`ingest`]: frame readers, cropping and dynamic-range degradation.
//! - [`pipeline`]: slicing, sample assembly, voxel files, manifests, statistics.
//! - [`check`]: randomized agreement trials between the two simulation paths.
//! - [`cli`]: the `v2v` command-line tool.

pub mod check;
pub mod cli;
pub mod error;
pub mod events;
pub mod ingest;
pub mod pipeline;
pub mod rng;
pub mod sensor;
pub mod types;

pub use error::{Error, Result};
pub use rng::{derive_rng, RngKey, SceneKey, StreamTag};
pub use types::{
    Dims, DiscreteVoxel, EventRecord, EventStream, Frame, FrameSequence, Grid, HotPixel,
    HotPixelMap, InterpolatedVoxel, LinearLuminance, LogLuminance, ResidualState, SensorParams,
};
