//! People counting from an overhead depth camera.
//!
//! Stages, in frame order: a farthest-depth [`background`] model isolates
//! foreground pixels; [`geometry`] back-projects them to a world-frame point
//! cloud and rasterizes a ground-plane height image; [`proposals`] finds
//! head-sized local maxima and grows bounded regions around them;
//! [`features`] describes each region and a [`classifier`] keeps likely
//! heads; the [`tracker`] links heads across frames and counts trajectories
//! that cross the door. [`pipeline`] wires the stages together and
//! [`synthgen`] renders synthetic scenes with exact ground truth.
//!
//! Floating-point stages are generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix `f64`.

// `!(x > 0)` style checks deliberately reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod background;
pub mod classifier;
pub mod error;
pub mod features;
pub mod frameio;
pub mod geometry;
pub mod pipeline;
pub mod proposals;
pub mod scalar;
pub mod synthgen;
pub mod tracker;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Intrinsics = geometry::CameraIntrinsics<f64>;
pub type Transform = geometry::RigidTransform<f64>;
pub type PointCloud = geometry::PointCloud<f64>;
pub type Grid = geometry::GridSpec<f64>;
pub type Model = classifier::SvmModel<f64>;
pub type Params = classifier::SvmParams<f64>;
pub type Tracker = tracker::Tracker<f64>;
pub type Pipeline = pipeline::Pipeline<f64>;
pub type Models = pipeline::Models<f64>;
