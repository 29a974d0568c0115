//! Synthesis of sparse scribble annotations from dense 3D label volumes,
//! partial (scribble-restricted) segmentation losses with analytic gradients,
//! and Dice evaluation.
//!
//! The crate is organised bottom-up:
//!
//! * [`volume`] and [`nifti`]: label grids and their NIfTI-1 codec.
//! * [`geometry`]: 2D mask primitives (erosion, components, contours, lines).
//! * [`nurbs`]: rational B-spline curves used as scribble backbones.
//! * [`scribble`]: the interior/border scribble generator.
//! * [`losses`]: partial cross-entropy, partial soft Dice and their sum.
//! * [`metrics`]: Dice scoring, scribble density and table aggregation.

pub mod error;
pub mod geometry;
pub mod losses;
pub mod metrics;
pub mod nifti;
pub mod nurbs;
pub mod scribble;
pub mod volume;

pub use error::{Error, Result};
pub use nifti::{read_nifti, write_nifti};
pub use volume::{LabelSlice, LabelVolume, SpatialHeader};
