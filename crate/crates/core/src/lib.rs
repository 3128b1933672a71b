//! Guiding vector fields built online from discretized B-spline references.
//!
//! The pipeline: an occupancy grid feeds an obstacle distance field and a
//! grid path search; the path seeds a clamped B-spline whose interior control
//! points are refined by L-BFGS; the spline is sampled into path points,
//! rasterized, and distance-transformed into a trajectory field from which
//! [`gvf::GuidingField`] synthesizes a velocity direction at any position.
//! [`navigator`] closes the loop in a deterministic simulator and [`bench`]
//! runs seeded batches over generated scenes.

// Validation is written as `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod bspline;
pub mod classical;
pub mod config;
pub mod error;
pub mod exec;
pub mod global_path;
pub mod grid;
pub mod gvf;
pub mod lbfgs;
pub mod navigator;
pub mod scene;
pub mod traj_opt;

pub use error::{Error, Result};
pub use exec::Execution;

pub type Vec3 = nalgebra::Vector3<f64>;
