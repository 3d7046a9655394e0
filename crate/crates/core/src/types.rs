//! Domain types shared by every stage of the tracker.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix2, Matrix2x4, Matrix4, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kind of a detection. `Body` candidates only feed the geometric prior and
/// the same-type affinity; they are never tracked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartType {
    Head,
    TailBase,
    Body,
}

impl PartType {
    /// Part kinds that can become tracking targets.
    pub const TRACKED: [PartType; 2] = [PartType::Head, PartType::TailBase];

    pub fn label(self) -> &'static str {
        match self {
            PartType::Head => "head",
            PartType::TailBase => "tail_base",
            PartType::Body => "body",
        }
    }

    pub fn is_trackable(self) -> bool {
        self != PartType::Body
    }
}

impl fmt::Display for PartType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PartType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "head" => Ok(PartType::Head),
            "tail_base" => Ok(PartType::TailBase),
            "body" => Ok(PartType::Body),
            other => Err(Error::invalid("part type", format!("unknown label {other:?}"))),
        }
    }
}

/// Axis-aligned rectangle in pixels; `(left, top)` is the minimum corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
}

impl BoundingBox {
    pub fn new(left: f64, top: f64, width: f64, height: f64) -> Self {
        Self {
            left,
            top,
            width,
            height,
        }
    }

    pub fn centered(center: Vector2<f64>, width: f64, height: f64) -> Self {
        Self::new(center.x - width / 2.0, center.y - height / 2.0, width, height)
    }

    pub fn right(&self) -> f64 {
        self.left + self.width
    }

    pub fn bottom(&self) -> f64 {
        self.top + self.height
    }

    pub fn center(&self) -> Vector2<f64> {
        Vector2::new(self.left + self.width / 2.0, self.top + self.height / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.width.max(0.0) * self.height.max(0.0)
    }

    pub fn contains_point(&self, p: &Vector2<f64>) -> bool {
        p.x >= self.left && p.x <= self.right() && p.y >= self.top && p.y <= self.bottom()
    }

    /// True when `inner` sticks out of `self` by at most `slack` pixels on every side.
    pub fn contains_with_slack(&self, inner: &BoundingBox, slack: f64) -> bool {
        inner.left >= self.left - slack
            && inner.top >= self.top - slack
            && inner.right() <= self.right() + slack
            && inner.bottom() <= self.bottom() + slack
    }

    pub fn intersection_area(&self, other: &BoundingBox) -> f64 {
        let w = self.right().min(other.right()) - self.left.max(other.left);
        let h = self.bottom().min(other.bottom()) - self.top.max(other.top);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    pub fn iou(&self, other: &BoundingBox) -> f64 {
        let inter = self.intersection_area(other);
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }
}

/// One part or body hypothesis in one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub id: usize,
    pub frame: u32,
    pub part_type: PartType,
    pub center: Vector2<f64>,
    pub bbox: BoundingBox,
    pub confidence: f64,
}

impl Detection {
    /// Detection whose box is centred on `center`.
    pub fn new(
        id: usize,
        frame: u32,
        part_type: PartType,
        center: Vector2<f64>,
        size: (f64, f64),
        confidence: f64,
    ) -> Self {
        Self {
            id,
            frame,
            part_type,
            center,
            bbox: BoundingBox::centered(center, size.0, size.1),
            confidence,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(Error::invalid(
                "detection",
                format!("confidence {} outside [0, 1]", self.confidence),
            ));
        }
        if !(self.bbox.width > 0.0 && self.bbox.height > 0.0) {
            return Err(Error::invalid(
                "detection",
                format!("box size {}x{} not positive", self.bbox.width, self.bbox.height),
            ));
        }
        if !self.center.iter().all(|v| v.is_finite()) || !self.bbox.contains_point(&self.center) {
            return Err(Error::invalid("detection", "center lies outside its box"));
        }
        Ok(())
    }
}

/// Kinematic state of one tracked part, ordered `(x, vx, y, vy)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetState {
    pub target_id: u64,
    pub part_type: PartType,
    pub mean: Vector4<f64>,
    pub covariance: Matrix4<f64>,
}

impl TargetState {
    /// Stationary state at `position` with the given initial covariance.
    pub fn at_rest(target_id: u64, part_type: PartType, position: Vector2<f64>, covariance: Matrix4<f64>) -> Self {
        Self {
            target_id,
            part_type,
            mean: Vector4::new(position.x, 0.0, position.y, 0.0),
            covariance,
        }
    }

    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.mean[0], self.mean[2])
    }

    pub fn velocity(&self) -> Vector2<f64> {
        Vector2::new(self.mean[1], self.mean[3])
    }
}

/// Linear-Gaussian constant-velocity model with a position-only observation.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionModel {
    pub transition: Matrix4<f64>,
    pub process_noise: Matrix4<f64>,
    pub observation: Matrix2x4<f64>,
    pub observation_noise: Matrix2<f64>,
    pub tau: f64,
    pub q_d: f64,
}

impl MotionModel {
    /// Per axis `[1, tau; 0, 1]` transition and `q_d [tau^3/3, tau^2/2; tau^2/2, tau]`
    /// process noise; observation noise `observation_variance * I`.
    pub fn constant_velocity(tau: f64, q_d: f64, observation_variance: f64) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::invalid("motion model", format!("tau {tau} must be positive")));
        }
        if !(q_d >= 0.0) || !(observation_variance >= 0.0) {
            return Err(Error::invalid("motion model", "noise parameters must be non-negative"));
        }
        let mut transition = Matrix4::identity();
        transition[(0, 1)] = tau;
        transition[(2, 3)] = tau;

        let axis = Matrix2::new(tau.powi(3) / 3.0, tau.powi(2) / 2.0, tau.powi(2) / 2.0, tau) * q_d;
        let mut process_noise = Matrix4::zeros();
        process_noise.fixed_view_mut::<2, 2>(0, 0).copy_from(&axis);
        process_noise.fixed_view_mut::<2, 2>(2, 2).copy_from(&axis);

        let observation = Matrix2x4::new(1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0);
        Ok(Self {
            transition,
            process_noise,
            observation,
            observation_noise: Matrix2::identity() * observation_variance,
            tau,
            q_d,
        })
    }
}

/// How the per-template Gaussians of the geometric prior are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GeometricAggregation {
    /// Exact sum of the isotropic per-template densities.
    #[default]
    Mixture,
    /// `|O|` times the density of the moment-matched Gaussian.
    MomentMatched,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TrackingMode {
    /// A known number of targets per part type; targets never die.
    #[default]
    Fixed,
    /// Births from persistent unassigned detections, deaths after `max_coast`.
    Open,
}

/// Tracker hyperparameters. Field names double as config-file keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerConfig {
    /// Clutter density per pixel². When absent it is `f_false / (w_im * h_im)`.
    pub beta: Option<f64>,
    pub f_false: f64,
    pub image_width: f64,
    pub image_height: f64,
    /// Containment slack for body selection, pixels.
    pub upsilon: f64,
    /// Geometric score used when no prior is available.
    pub epsilon_geo: f64,
    pub neighbor_count: usize,
    /// Variance of each per-template part Gaussian, pixels².
    pub template_variance: f64,
    pub geometric_aggregation: GeometricAggregation,
    pub iou_floor: f64,
    pub affinity_clamp: [f64; 2],
    pub birth_confidence: f64,
    pub birth_persistence: u32,
    /// Same-type detections closer than this are suppressed at birth, pixels.
    pub birth_radius: f64,
    pub max_coast: u32,
    pub mode: TrackingMode,
    /// Targets per tracked part type in fixed mode.
    pub targets_per_type: usize,
    pub tau: f64,
    pub q_d: f64,
    /// Observation noise variance `r` in `r * I`, pixels².
    pub observation_variance: f64,
    /// Diagonal of the birth covariance, `(x, vx, y, vy)`.
    pub initial_covariance: [f64; 4],
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            beta: None,
            f_false: 0.1,
            image_width: 480.0,
            image_height: 640.0,
            upsilon: 10.0,
            epsilon_geo: 1e-4,
            neighbor_count: 8,
            template_variance: 25.0,
            geometric_aggregation: GeometricAggregation::Mixture,
            iou_floor: 1e-3,
            affinity_clamp: [1e-4, 1e4],
            birth_confidence: 0.5,
            birth_persistence: 3,
            birth_radius: 10.0,
            max_coast: 30,
            mode: TrackingMode::Fixed,
            targets_per_type: 2,
            tau: 1.0,
            q_d: 2.0,
            observation_variance: 4.0,
            initial_covariance: [25.0, 100.0, 25.0, 100.0],
        }
    }
}

impl TrackerConfig {
    pub fn clutter_density(&self) -> f64 {
        self.beta
            .unwrap_or(self.f_false / (self.image_width * self.image_height))
    }

    pub fn motion_model(&self) -> Result<MotionModel> {
        MotionModel::constant_velocity(self.tau, self.q_d, self.observation_variance)
    }

    pub fn initial_covariance(&self) -> Matrix4<f64> {
        Matrix4::from_diagonal(&Vector4::from(self.initial_covariance))
    }

    pub fn validate(&self) -> Result<()> {
        let beta = self.clutter_density();
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::NonPositiveClutter(beta));
        }
        let [p_min, p_max] = self.affinity_clamp;
        if !(p_min > 0.0 && p_min <= p_max && p_max.is_finite()) {
            return Err(Error::invalid(
                "config",
                format!("affinity clamp [{p_min}, {p_max}] must satisfy 0 < min <= max < inf"),
            ));
        }
        if !(self.epsilon_geo > 0.0) {
            return Err(Error::invalid("config", "epsilon_geo must be positive"));
        }
        if !(self.template_variance > 0.0) {
            return Err(Error::invalid("config", "template_variance must be positive"));
        }
        if !(0.0..=1.0).contains(&self.birth_confidence) {
            return Err(Error::invalid("config", "birth_confidence must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.iou_floor) {
            return Err(Error::invalid("config", "iou_floor must lie in [0, 1]"));
        }
        if self.upsilon < 0.0 || self.birth_radius < 0.0 {
            return Err(Error::invalid(
                "config",
                "upsilon and birth_radius must be non-negative",
            ));
        }
        if self.initial_covariance.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::invalid("config", "initial covariance must be positive"));
        }
        self.motion_model().map(|_| ())
    }
}
