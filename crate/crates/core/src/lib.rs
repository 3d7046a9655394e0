//! Multi-target part tracking by joint 0-1 assignment and part association.
//!
//! Every frame, part candidates (heads, tail bases) and body candidates are
//! scored against the tracked targets with three terms: a constant-velocity
//! motion likelihood, a geometric prior built from body-relative part
//! templates, and pair-wise part affinities. Target-to-candidate assignment
//! and candidate-to-candidate association are then solved together as one
//! binary linear program, exactly, by LP relaxation plus branch-and-bound.
//!
//! Module map:
//!
//! - [`types`]: detections, boxes, target states and the tracker configuration.
//! - [`layout`]: variable indexing for the joint binary program.
//! - [`motion`]: prediction, detection likelihood and the information-form update.
//! - [`geometry`]: body selection, template neighbours and the geometric score.
//! - [`association`]: same-type and cross-type affinities, detection merging.
//! - [`ilp`]: problem construction, the simplex relaxation, branch-and-bound
//!   and an enumeration oracle.
//! - [`tracker`]: the per-frame pipeline and track lifecycle.
//! - [`metrics`]: CLEAR-MOT and identity metrics.

pub mod assignment;
pub mod association;
pub mod error;
pub mod geometry;
pub mod ilp;
pub mod layout;
pub mod metrics;
pub mod motion;
pub mod tracker;
pub mod types;

pub use error::{Error, Result};
pub use layout::{Variable, VariableLayout};
pub use metrics::{evaluate, GroundTruthEntry, GroundTruthTrack, MetricsReport};
pub use tracker::{Frame, FrameResult, Solver, Track, TrackStatus, Tracker, TrackingOutput};
pub use types::{
    BoundingBox, Detection, GeometricAggregation, MotionModel, PartType, TargetState, TrackerConfig, TrackingMode,
};
