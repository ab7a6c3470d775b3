//! Sparse-annotation land-cover segmentation at desk scale.
//!
//! The crate covers the full pipeline: typed rasters and a simple on-disk
//! format (`raster`), sparse ground-truth engineering from coarse label
//! sources (`annot`), a small convolutional segmentation network with manual
//! forward/backward passes (`net`), a teacher-student self-training engine
//! with pseudo-label mixing (`selftrain`), sparse-ground-truth evaluation
//! (`metrics`), plus a synthetic benchmark generator (`synth`), PNG map
//! rendering (`render`) and the command implementations behind the `spada`
//! binary (`commands`).

pub mod annot;
pub mod commands;
pub mod error;
pub mod metrics;
pub mod net;
pub mod raster;
pub mod render;
pub mod selftrain;
pub mod synth;

pub use error::{Error, Result};
