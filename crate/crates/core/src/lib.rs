//! Synthesis of full-scale arterial trees inside voxelized organ domains.
//!
//! The crate builds vascular networks in four stages: a binary organ mask
//! (measured or phantom) yields a cortex shell and a set of terminal vessel
//! positions; a preprocessed centerline graph yields a prebuilt large-artery
//! tree; a global constructive optimizer grows the full tree from both;
//! morphometric/hemodynamic analysis and voxel rasterization close the loop
//! back to image space.
//!
//! All internal physics uses a consistent μm / N / s unit system (see
//! [`units`]); interfaces accept and emit mmHg and ml/min where noted.

pub mod analysis;
pub mod centerline;
pub mod config;
pub mod error;
pub mod gco;
pub mod io;
pub mod linalg;
pub mod phantom;
pub mod pipeline;
pub mod raster;
pub mod sampling;
pub mod tree;
pub mod units;
pub mod voxel;

pub use error::{Error, Result};
pub use linalg::Vec3;
pub use tree::{EdgeId, HemoConfig, NodeId, VesselTree};
pub use voxel::{CortexParams, DistanceField, VoxelMask};
