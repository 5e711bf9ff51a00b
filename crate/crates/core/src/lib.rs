//! Jacquard weave pattern codec.
//!
//! Fabric images are decoded into binary weave patterns by way of an
//! intermediate crossing-likelihood image:
//!
//! 1. [`pre`] removes loose fibers and estimates yarn axes and colors.
//! 2. [`midrep`] turns crossing annotations into label images and produces a
//!    likelihood map, either classically or from an external network's PNG.
//! 3. [`postproc`] tri-values the map, merges mixed regions, re-estimates the
//!    yarn grid and reads off the pattern.
//!
//! [`weavesim`] renders synthetic fabrics with exact ground truth and
//! [`eval`] scores decoded crossings and patterns against it.
//!
//! The numeric kernels are generic over [`Scalar`] (`f32` or `f64`).

pub mod error;
pub mod eval;
pub mod imgproc;
pub mod io;
pub mod midrep;
pub mod pattern;
pub mod postproc;
pub mod pre;
pub mod profile;
pub mod raster;
pub mod scalar;
pub mod weavesim;

pub use error::{Axis, Error, Result, Stage};
pub use pattern::{BinaryPattern, CrossPoint, CrossPointSet, RepColors, YarnGrid};
pub use raster::{BinaryMask, LabelMap, Raster, Tri, TriImage};
pub use scalar::Scalar;

/// Gray image in double precision; the default pixel type.
pub type GrayImage = Raster<f64>;
/// Gray image in single precision.
pub type GrayImageF32 = Raster<f32>;
