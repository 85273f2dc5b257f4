//! Symmetry-aware 6-DoF pose evaluation.
//!
//! The crate is organized bottom-up:
//!
//! - [`geometry`]: rotations, poses, rigid alignment, pinhole projection
//! - [`symmetry`]: discrete symmetry sets per object category
//! - [`assignment`]: exact linear sum assignment
//! - [`metrics`]: ADD, ADD-S, MeanSSD, MSSD and ADD-H over sampled models
//! - [`evaluation`]: GT/prediction matching, detection curves, reports and
//!   the metric-comparison simulation
//! - [`fieldcal`]: depth-scale calibration, line-search depth refinement,
//!   cross-view annotation validation and Nakagami fitting
//! - [`io`]: BOP-style file formats and mesh loading
//!
//! Lengths are meters throughout; file formats use millimeters and are
//! converted at the boundary.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assignment;
pub mod evaluation;
pub mod fieldcal;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod symmetry;
