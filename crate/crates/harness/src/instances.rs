//! Random per-frame assignment programs shaped like tracking frames.

use nalgebra::{Matrix2, Vector2};
use parttrack::association::DistanceModel;
use parttrack::ilp::{build_problem, AssignmentProblem, CostInputs};
use parttrack::motion::gaussian_log_density;
use parttrack::{Detection, PartType, TrackerConfig};
use rand::Rng;

/// Upper limits per tracked part type.
#[derive(Debug, Clone, Copy)]
pub struct InstanceLimits {
    pub max_targets: usize,
    pub max_detections: usize,
}

impl Default for InstanceLimits {
    fn default() -> Self {
        Self {
            max_targets: 3,
            max_detections: 5,
        }
    }
}

/// A scene of predicted targets and detections inside a 240 px square,
/// scored the way the tracker scores a frame. Same-type affinities are drawn
/// log-uniformly over the default clamp; cross-type ones come from a head to
/// tail-base distance model.
pub fn random_instance<R: Rng>(rng: &mut R, limits: InstanceLimits) -> AssignmentProblem {
    let config = TrackerConfig::default();
    let [p_min, p_max] = config.affinity_clamp;
    let distance = DistanceModel::new(50.0, 25.0, PartType::Head, PartType::TailBase).expect("valid distance model");

    let mut target_types = Vec::new();
    let mut predicted = Vec::new();
    let mut detections = Vec::new();
    while target_types.is_empty() {
        predicted.clear();
        detections.clear();
        for part in PartType::TRACKED {
            let n = rng.random_range(0..=limits.max_targets);
            let m = rng.random_range(0..=limits.max_detections);
            let mut centres = Vec::new();
            for _ in 0..n {
                let c = Vector2::new(rng.random_range(0.0..240.0), rng.random_range(0.0..240.0));
                target_types.push(part);
                predicted.push((c, rng.random_range(5.0..40.0)));
                centres.push(c);
            }
            for _ in 0..m {
                let c = if !centres.is_empty() && rng.random_bool(0.7) {
                    let base = centres[rng.random_range(0..centres.len())];
                    base + Vector2::new(rng.random_range(-8.0..8.0), rng.random_range(-8.0..8.0))
                } else {
                    Vector2::new(rng.random_range(0.0..240.0), rng.random_range(0.0..240.0))
                };
                let id = detections.len();
                detections.push(Detection::new(id, 0, part, c, (16.0, 16.0), rng.random_range(0.5..1.0)));
            }
        }
    }

    let n = target_types.len();
    let m = detections.len();
    let geo: Vec<f64> = (0..m).map(|_| rng.random_range(1e-4f64.ln()..0.05f64.ln())).collect();
    let geo_log = vec![geo; n];
    let motion_loglik: Vec<Vec<f64>> = predicted
        .iter()
        .map(|(c, s)| {
            detections
                .iter()
                .map(|d| gaussian_log_density(&d.center, c, &(Matrix2::identity() * *s)).expect("positive variance"))
                .collect()
        })
        .collect();
    let affinity: Vec<Vec<f64>> = (0..m)
        .map(|a| {
            (0..m)
                .map(|b| {
                    if detections[a].part_type == detections[b].part_type {
                        rng.random_range(p_min.ln()..p_max.ln()).exp()
                    } else {
                        distance
                            .mode_normalized((detections[a].center - detections[b].center).norm())
                            .clamp(p_min, p_max)
                    }
                })
                .collect()
        })
        .collect();

    build_problem(CostInputs {
        target_types: &target_types,
        detections: &detections,
        geo_log: &geo_log,
        motion_loglik: &motion_loglik,
        affinity: &affinity,
        beta: config.clutter_density(),
    })
    .expect("finite costs")
}
