use rand::Rng;

use super::AssignmentProblem;
use crate::types::PartType;

#[derive(Debug, Clone, Copy)]
pub(crate) struct InstanceShape {
    pub max_targets: usize,
    pub max_detections: usize,
    pub fake_range: (f64, f64),
    pub assign_range: (f64, f64),
    pub pair_range: (f64, f64),
}

impl Default for InstanceShape {
    fn default() -> Self {
        Self {
            max_targets: 3,
            max_detections: 4,
            fake_range: (5.0, 15.0),
            assign_range: (-5.0, 20.0),
            pair_range: (-6.0, 6.0),
        }
    }
}

fn part<R: Rng>(rng: &mut R) -> PartType {
    if rng.random_bool(0.5) {
        PartType::Head
    } else {
        PartType::TailBase
    }
}

pub(crate) fn random_problem<R: Rng>(rng: &mut R, shape: InstanceShape) -> AssignmentProblem {
    let n = rng.random_range(1..=shape.max_targets);
    let m = rng.random_range(0..=shape.max_detections);
    let targets: Vec<PartType> = (0..n).map(|_| part(rng)).collect();
    let detections: Vec<PartType> = (0..m).map(|_| part(rng)).collect();
    let mut draw = |(lo, hi): (f64, f64)| rng.random_range(lo..hi);
    let fake = (0..n).map(|_| draw(shape.fake_range)).collect();
    let assign = (0..n)
        .map(|_| (0..m).map(|_| draw(shape.assign_range)).collect())
        .collect();
    let pair = (0..m)
        .map(|_| (0..m).map(|_| draw(shape.pair_range)).collect())
        .collect();
    AssignmentProblem::from_costs(targets, detections, fake, assign, pair)
        .expect("generated costs are finite and well shaped")
}
