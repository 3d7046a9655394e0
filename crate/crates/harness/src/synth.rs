//! Seeded synthetic scenes of mice seen from above.
//!
//! Each mouse is a rigid head/tail-base segment whose centre follows the
//! constant-velocity model with white-noise acceleration. The segment turns
//! toward the velocity by at most `max_turn_rate` radians per frame; speed is
//! kept within `[min_speed, max_speed]` and the
//! centre reflects off the arena walls. Bodies are boxes around both parts.
//!
//! Three independent random streams are derived from the seed: motion,
//! observations and template sampling. Changing the observation settings
//! therefore leaves the trajectories unchanged.

use std::collections::BTreeMap;

use nalgebra::Vector2;
use parttrack::geometry::GeometricTemplate;
use parttrack::{BoundingBox, Detection, Frame, GroundTruthEntry, GroundTruthTrack, MotionModel, PartType};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OcclusionEpisode {
    pub start: u32,
    pub duration: u32,
    pub mouse: usize,
    pub parts: Vec<PartType>,
}

impl OcclusionEpisode {
    fn covers(&self, frame: u32, mouse: usize, part: PartType) -> bool {
        self.mouse == mouse && frame >= self.start && frame < self.start + self.duration && self.parts.contains(&part)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub mice: usize,
    pub frames: u32,
    pub arena_width: f64,
    pub arena_height: f64,
    pub tau: f64,
    pub q_d: f64,
    /// Standard deviation of the detection position noise, pixels.
    pub detection_noise: f64,
    pub miss_rate: f64,
    /// Probability of one false part detection per frame.
    pub f_false: f64,
    pub occlusions: Vec<OcclusionEpisode>,
    pub seed: u64,
    /// Head to tail-base distance, pixels.
    pub mouse_length: f64,
    pub part_size: f64,
    /// Padding added around the part boxes to form the body box.
    pub body_margin: f64,
    pub min_speed: f64,
    pub max_speed: f64,
    pub max_turn_rate: f64,
    pub min_separation: f64,
    pub template_count: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            mice: 2,
            frames: 300,
            arena_width: 640.0,
            arena_height: 480.0,
            tau: 1.0,
            q_d: 0.5,
            detection_noise: 1.0,
            miss_rate: 0.05,
            f_false: 0.1,
            occlusions: Vec::new(),
            seed: 0,
            mouse_length: 50.0,
            part_size: 16.0,
            body_margin: 8.0,
            min_speed: 1.5,
            max_speed: 5.0,
            max_turn_rate: 0.15,
            min_separation: 90.0,
            template_count: 200,
        }
    }
}

impl ScenarioConfig {
    pub fn two_mice(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    /// Three mice with two occlusion episodes: one hides a whole mouse, the
    /// other only a head.
    pub fn three_mice_with_occlusions(seed: u64) -> Self {
        Self {
            mice: 3,
            seed,
            occlusions: vec![
                OcclusionEpisode {
                    start: 90,
                    duration: 20,
                    mouse: 0,
                    parts: vec![PartType::Head, PartType::TailBase, PartType::Body],
                },
                OcclusionEpisode {
                    start: 200,
                    duration: 15,
                    mouse: 1,
                    parts: vec![PartType::Head],
                },
            ],
            ..Self::default()
        }
    }

    fn margin(&self) -> f64 {
        self.mouse_length / 2.0 + self.part_size / 2.0 + 2.0
    }

    pub fn validate(&self) -> Result<()> {
        let rate = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(HarnessError::Scenario(format!("{name} {v} outside [0, 1]")))
            }
        };
        rate("miss_rate", self.miss_rate)?;
        rate("f_false", self.f_false)?;
        if self.mice == 0 {
            return Err(HarnessError::Scenario("need at least one mouse".into()));
        }
        if !(self.detection_noise >= 0.0 && self.q_d >= 0.0 && self.tau > 0.0) {
            return Err(HarnessError::Scenario(
                "noise levels must be non-negative, tau positive".into(),
            ));
        }
        if !(0.0 < self.min_speed && self.min_speed <= self.max_speed) {
            return Err(HarnessError::Scenario("need 0 < min_speed <= max_speed".into()));
        }
        if !(self.max_turn_rate > 0.0) {
            return Err(HarnessError::Scenario("max_turn_rate must be positive".into()));
        }
        let m = self.margin();
        if self.arena_width <= 2.0 * m || self.arena_height <= 2.0 * m {
            return Err(HarnessError::Scenario("arena too small for the mice".into()));
        }
        for o in &self.occlusions {
            if o.mouse >= self.mice {
                return Err(HarnessError::Scenario(format!("occlusion names mouse {}", o.mouse)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub ground_truth: Vec<GroundTruthTrack>,
    pub frames: Vec<Frame>,
    pub templates: Vec<GeometricTemplate>,
}

#[derive(Debug, Clone, Copy)]
struct Pose {
    head: Vector2<f64>,
    tail: Vector2<f64>,
}

impl Pose {
    fn part(&self, p: PartType) -> Vector2<f64> {
        match p {
            PartType::Head => self.head,
            PartType::TailBase => self.tail,
            PartType::Body => (self.head + self.tail) / 2.0,
        }
    }

    fn body_box(&self, part_size: f64, margin: f64) -> BoundingBox {
        let pad = part_size / 2.0 + margin;
        let left = self.head.x.min(self.tail.x) - pad;
        let top = self.head.y.min(self.tail.y) - pad;
        let right = self.head.x.max(self.tail.x) + pad;
        let bottom = self.head.y.max(self.tail.y) + pad;
        BoundingBox::new(left, top, right - left, bottom - top)
    }
}

fn reflect(pos: &mut f64, vel: &mut f64, lo: f64, hi: f64) {
    // Bounces until inside; a single bounce suffices for realistic speeds.
    while *pos < lo || *pos > hi {
        if *pos < lo {
            *pos = 2.0 * lo - *pos;
        } else {
            *pos = 2.0 * hi - *pos;
        }
        *vel = -*vel;
    }
}

fn clamp_speed(v: Vector2<f64>, min: f64, max: f64) -> Vector2<f64> {
    let s = v.norm();
    if s > max {
        v * (max / s)
    } else if s < min {
        if s > 1e-9 {
            v * (min / s)
        } else {
            Vector2::new(min, 0.0)
        }
    } else {
        v
    }
}

fn turn_toward(heading: f64, target: f64, max_step: f64) -> f64 {
    let diff = (target - heading + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU) - std::f64::consts::PI;
    heading + diff.clamp(-max_step, max_step)
}

/// Trajectories of every mouse centre, frame-major.
fn simulate_poses(cfg: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<Pose>>> {
    let model = MotionModel::constant_velocity(cfg.tau, cfg.q_d, 1.0)?;
    let q = model.process_noise;
    // Per-axis 2x2 block (position, velocity) and its Cholesky factor.
    let (q00, q01, q11) = (q[(0, 0)], q[(0, 1)], q[(1, 1)]);
    let l00 = q00.sqrt();
    let l10 = if l00 > 0.0 { q01 / l00 } else { 0.0 };
    let l11 = (q11 - l10 * l10).max(0.0).sqrt();

    let m = cfg.margin();
    let (lo_x, hi_x, lo_y, hi_y) = (m, cfg.arena_width - m, m, cfg.arena_height - m);
    let mut centres: Vec<Vector2<f64>> = Vec::with_capacity(cfg.mice);
    let mut velocities = Vec::with_capacity(cfg.mice);
    let mut headings: Vec<f64> = Vec::with_capacity(cfg.mice);
    for _ in 0..cfg.mice {
        let mut placed = None;
        for _ in 0..10_000 {
            let c = Vector2::new(rng.random_range(lo_x..hi_x), rng.random_range(lo_y..hi_y));
            if centres.iter().all(|o| (o - c).norm() >= cfg.min_separation) {
                placed = Some(c);
                break;
            }
        }
        let c = placed.ok_or_else(|| HarnessError::Scenario("cannot place mice apart".into()))?;
        let angle = rng.random_range(0.0..std::f64::consts::TAU);
        let speed = rng.random_range(cfg.min_speed..=cfg.max_speed);
        centres.push(c);
        velocities.push(Vector2::new(angle.cos(), angle.sin()) * speed);
        headings.push(angle);
    }

    let pose = |c: Vector2<f64>, heading: f64| {
        let h = Vector2::new(heading.cos(), heading.sin()) * (cfg.mouse_length / 2.0);
        Pose {
            head: c + h,
            tail: c - h,
        }
    };
    let mut out = Vec::with_capacity(cfg.frames as usize);
    for f in 0..cfg.frames {
        if f > 0 {
            for k in 0..cfg.mice {
                let (c, v) = (&mut centres[k], &mut velocities[k]);
                let axis = |p: &mut f64, vel: &mut f64, lo: f64, hi: f64, rng: &mut ChaCha8Rng| {
                    let z0: f64 = StandardNormal.sample(rng);
                    let z1: f64 = StandardNormal.sample(rng);
                    *p += cfg.tau * *vel + l00 * z0;
                    *vel += l10 * z0 + l11 * z1;
                    reflect(p, vel, lo, hi);
                };
                axis(&mut c.x, &mut v.x, lo_x, hi_x, rng);
                axis(&mut c.y, &mut v.y, lo_y, hi_y, rng);
                *v = clamp_speed(*v, cfg.min_speed, cfg.max_speed);
                headings[k] = turn_toward(headings[k], v.y.atan2(v.x), cfg.max_turn_rate);
            }
        }
        out.push((0..cfg.mice).map(|k| pose(centres[k], headings[k])).collect());
    }
    Ok(out)
}

const TRACKED: [PartType; 2] = [PartType::Head, PartType::TailBase];

pub fn synthesize(cfg: &ScenarioConfig) -> Result<Scenario> {
    cfg.validate()?;
    let mut motion_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut obs_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut template_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xc2b2_ae3d_27d4_eb4f);
    let poses = simulate_poses(cfg, &mut motion_rng)?;
    let noise = Normal::new(0.0, cfg.detection_noise).expect("noise checked non-negative");
    let occluded = |f: u32, k: usize, p: PartType| cfg.occlusions.iter().any(|o| o.covers(f, k, p));

    let mut ground_truth: BTreeMap<u64, GroundTruthTrack> = BTreeMap::new();
    let mut frames = Vec::with_capacity(poses.len());
    let mut next_id = 0usize;
    for (f, mice) in poses.iter().enumerate() {
        let f = f as u32;
        let mut detections = Vec::new();
        for (k, pose) in mice.iter().enumerate() {
            for (j, &p) in TRACKED.iter().enumerate() {
                let center = pose.part(p);
                let hidden = occluded(f, k, p);
                ground_truth
                    .entry((2 * k + j) as u64)
                    .or_insert_with(|| GroundTruthTrack {
                        gt_id: (2 * k + j) as u64,
                        part_type: p,
                        entries: Vec::new(),
                    })
                    .entries
                    .push(GroundTruthEntry {
                        frame: f,
                        center,
                        bbox: BoundingBox::centered(center, cfg.part_size, cfg.part_size),
                        occluded: hidden,
                    });
                let missed = obs_rng.random_bool(cfg.miss_rate);
                let jitter = Vector2::new(noise.sample(&mut obs_rng), noise.sample(&mut obs_rng));
                let confidence = obs_rng.random_range(0.7..1.0);
                if !hidden && !missed {
                    detections.push(Detection::new(
                        next_id,
                        f,
                        p,
                        center + jitter,
                        (cfg.part_size, cfg.part_size),
                        confidence,
                    ));
                    next_id += 1;
                }
            }
            let body = pose.body_box(cfg.part_size, cfg.body_margin);
            let jitter = Vector2::new(noise.sample(&mut obs_rng), noise.sample(&mut obs_rng));
            let confidence = obs_rng.random_range(0.7..1.0);
            if !occluded(f, k, PartType::Body) {
                detections.push(Detection::new(
                    next_id,
                    f,
                    PartType::Body,
                    body.center() + jitter,
                    (body.width, body.height),
                    confidence,
                ));
                next_id += 1;
            }
        }
        if obs_rng.random_bool(cfg.f_false) {
            let half = cfg.part_size / 2.0;
            let center = Vector2::new(
                obs_rng.random_range(half..cfg.arena_width - half),
                obs_rng.random_range(half..cfg.arena_height - half),
            );
            let p = if obs_rng.random_bool(0.5) {
                PartType::Head
            } else {
                PartType::TailBase
            };
            let confidence = obs_rng.random_range(0.5..0.8);
            detections.push(Detection::new(
                next_id,
                f,
                p,
                center,
                (cfg.part_size, cfg.part_size),
                confidence,
            ));
            next_id += 1;
        }
        frames.push(Frame { index: f, detections });
    }

    let mut templates = Vec::with_capacity(cfg.template_count);
    if !poses.is_empty() {
        for template_id in 0..cfg.template_count {
            let f = template_rng.random_range(0..poses.len());
            let k = template_rng.random_range(0..cfg.mice);
            let pose = &poses[f][k];
            let body = pose.body_box(cfg.part_size, cfg.body_margin);
            let c = body.center();
            let part_offsets = TRACKED
                .iter()
                .map(|&p| {
                    let x = pose.part(p);
                    (p, Vector2::new((x.x - c.x) / body.width, (x.y - c.y) / body.height))
                })
                .collect();
            templates.push(GeometricTemplate {
                template_id,
                body_width: body.width,
                body_height: body.height,
                part_offsets,
            });
        }
    }

    Ok(Scenario {
        ground_truth: ground_truth.into_values().collect(),
        frames,
        templates,
    })
}
