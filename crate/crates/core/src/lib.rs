//! Non-learned math for monocular 3D lane detection: camera and lane
//! geometry, view-synthesis warping and its losses, 3D lane-anchor
//! machinery, training-time matching and losses, the standard 3D-lane
//! evaluation protocol, and per-segment focal-length self-calibration.
//! Everything is verifiable against the included synthetic road-scene
//! oracle in [`synth`].
//!
//! Module map:
//!
//! - [`camera`]: coordinate frames, pinhole projection/back-projection,
//!   point clouds and bilinear feature grids.
//! - [`view_synthesis`]: novel-view warping plus the photometric,
//!   smoothness and GPS-to-scale losses.
//! - [`anchor`]: 3D lane anchors, dual-pathway feature sampling, proposals.
//! - [`training`]: anchor/ground-truth matching and training losses.
//! - [`eval`]: min-cost lane matching, F1, category accuracy, near/far
//!   errors.
//! - [`intrinsics`]: per-segment focal-length fitting from learned
//!   intrinsics and rotations.
//! - [`synth`]: deterministic synthetic road scenes with exact depth,
//!   poses, lanes and feature fields.
//! - [`io`]: annotation, prediction, observation, report and anchor-dump
//!   formats.
//! - [`image`]: RGB rasters (PPM) and depth rasters.

// `!(x > 0.0)` rejects NaN along with the out-of-range values; the
// suggested `partial_cmp` form loses that.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// matrix copies between wire arrays and nalgebra read clearest as index loops
#![allow(clippy::needless_range_loop)]

pub mod anchor;
pub mod camera;
pub mod eval;
pub mod image;
pub mod intrinsics;
pub mod io;
mod mincost;
pub mod synth;
pub mod training;
pub mod view_synthesis;
