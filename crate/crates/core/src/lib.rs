//! Model-based edge tracking of a known wireframe object.
//!
//! The pipeline per frame: render an edge-ID buffer at the previous pose to
//! find visible edges, sample control points along them, search each point's
//! normal for the strongest gradient, then refine the pose with
//! Levenberg-Marquardt. Geometry, search and pose math are generic over
//! [`realmath::Real`], so the same code runs on `f64` and on 64-bit
//! fixed-point types.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod geometry;
pub mod harness;
pub mod imaging;
pub mod pose_estimation;
pub mod rasterizer;
pub mod realmath;
pub mod tracking;

pub use error::TrackError;
pub use geometry::{CameraIntrinsics, PoseSE3, WireframeModel};
pub use realmath::{Backend, Real, Q40_23, Q47_16};
