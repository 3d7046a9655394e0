//! Pair-wise part affinities and post-solve merging of connected candidates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{BoundingBox, Detection, PartType};

/// Floor applied to a fitted distance variance.
pub const VARIANCE_FLOOR: f64 = 1e-6;

/// 1-D Gaussian over the distance between two different parts of one animal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceModel {
    pub mean: f64,
    pub variance: f64,
    pub part_pair: (PartType, PartType),
}

impl DistanceModel {
    pub fn new(mean: f64, variance: f64, a: PartType, b: PartType) -> Result<Self> {
        if a == b || !a.is_trackable() || !b.is_trackable() {
            return Err(Error::invalid(
                "distance model",
                format!("pair ({a}, {b}) must be two distinct parts"),
            ));
        }
        if !(variance > 0.0) || !mean.is_finite() {
            return Err(Error::invalid(
                "distance model",
                format!("mean {mean}, variance {variance}"),
            ));
        }
        Ok(Self {
            mean,
            variance,
            part_pair: (a.min(b), a.max(b)),
        })
    }

    pub fn covers(&self, a: PartType, b: PartType) -> bool {
        (a.min(b), a.max(b)) == self.part_pair
    }

    /// Raw density of `distance`.
    pub fn density(&self, distance: f64) -> f64 {
        let z = distance - self.mean;
        (-z * z / (2.0 * self.variance)).exp() / (2.0 * std::f64::consts::PI * self.variance).sqrt()
    }

    /// Density divided by its peak value, so 1 at the mean.
    pub fn mode_normalized(&self, distance: f64) -> f64 {
        let z = distance - self.mean;
        (-z * z / (2.0 * self.variance)).exp()
    }
}

/// Sample mean and (unbiased) variance of the Euclidean distances between
/// paired locations.
pub fn fit_distance_model(
    samples: &[(nalgebra::Vector2<f64>, nalgebra::Vector2<f64>)],
    part_pair: (PartType, PartType),
) -> Result<DistanceModel> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples(samples.len()));
    }
    let dists: Vec<f64> = samples.iter().map(|(a, b)| (a - b).norm()).collect();
    let n = dists.len() as f64;
    let mean = dists.iter().sum::<f64>() / n;
    let var = dists.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
    DistanceModel::new(mean, var.max(VARIANCE_FLOOR), part_pair.0, part_pair.1)
}

fn clamp(value: f64, bounds: [f64; 2]) -> f64 {
    value.clamp(bounds[0], bounds[1])
}

/// `(1 - IoU) / IoU` of the two selected bodies, clamped. Missing bodies or
/// an overlap below `iou_floor` give the upper clamp.
pub fn same_type_affinity(
    m: &Detection,
    m2: &Detection,
    body_m: Option<&BoundingBox>,
    body_m2: Option<&BoundingBox>,
    iou_floor: f64,
    bounds: [f64; 2],
) -> f64 {
    debug_assert_eq!(m.part_type, m2.part_type);
    let (Some(a), Some(b)) = (body_m, body_m2) else {
        return bounds[1];
    };
    let iou = a.iou(b);
    if iou < iou_floor || iou <= 0.0 {
        return bounds[1];
    }
    clamp((1.0 - iou) / iou, bounds)
}

/// Mode-normalised distance density between two different parts, clamped.
pub fn cross_type_affinity(m: &Detection, m2: &Detection, models: &[DistanceModel], bounds: [f64; 2]) -> Result<f64> {
    let model = models
        .iter()
        .find(|d| d.covers(m.part_type, m2.part_type))
        .ok_or(Error::MissingDistanceModel(m.part_type, m2.part_type))?;
    let d = (m.center - m2.center).norm();
    Ok(clamp(model.mode_normalized(d), bounds))
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Replaces each connected component of `connected_pairs` (indices into
/// `detections`) by one detection at the confidence-weighted mean centre and
/// box, carrying the component's maximum confidence and smallest id. Output
/// order follows the first member of each component.
pub fn merge_same_type(detections: &[Detection], connected_pairs: &[(usize, usize)]) -> Vec<Detection> {
    let n = detections.len();
    let mut parent: Vec<usize> = (0..n).collect();
    for &(a, b) in connected_pairs {
        if a >= n || b >= n || detections[a].part_type != detections[b].part_type {
            continue;
        }
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            parent[hi] = lo;
        }
    }

    let mut out = Vec::new();
    for root in 0..n {
        if find(&mut parent, root) != root {
            continue;
        }
        let members: Vec<&Detection> = (0..n)
            .filter(|&i| find(&mut parent, i) == root)
            .map(|i| &detections[i])
            .collect();
        if members.len() == 1 {
            out.push(members[0].clone());
            continue;
        }
        let total: f64 = members.iter().map(|d| d.confidence).sum();
        let weight = |d: &Detection| {
            if total > 0.0 {
                d.confidence / total
            } else {
                1.0 / members.len() as f64
            }
        };
        let mut merged = members[0].clone();
        merged.center = members.iter().map(|d| d.center * weight(d)).sum();
        merged.bbox = BoundingBox::new(
            members.iter().map(|d| d.bbox.left * weight(d)).sum(),
            members.iter().map(|d| d.bbox.top * weight(d)).sum(),
            members.iter().map(|d| d.bbox.width * weight(d)).sum(),
            members.iter().map(|d| d.bbox.height * weight(d)).sum(),
        );
        merged.confidence = members.iter().map(|d| d.confidence).fold(0.0, f64::max);
        merged.id = members.iter().map(|d| d.id).min().unwrap_or(merged.id);
        out.push(merged);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector2;
    use proptest::prelude::*;

    const BOUNDS: [f64; 2] = [1e-4, 1e4];

    fn det(id: usize, part: PartType, x: f64, y: f64, conf: f64) -> Detection {
        Detection::new(id, 0, part, Vector2::new(x, y), (6.0, 6.0), conf)
    }

    #[test]
    fn distance_model_statistics() {
        let o = Vector2::zeros();
        let flat = vec![
            (o, Vector2::new(30.0, 0.0)),
            (o, Vector2::new(0.0, 30.0)),
            (o, Vector2::new(-30.0, 0.0)),
        ];
        let m = fit_distance_model(&flat, (PartType::Head, PartType::TailBase)).unwrap();
        assert!((m.mean - 30.0).abs() < 1e-12);
        assert_eq!(m.variance, VARIANCE_FLOOR);

        let two = vec![(o, Vector2::new(20.0, 0.0)), (o, Vector2::new(0.0, 40.0))];
        let m = fit_distance_model(&two, (PartType::TailBase, PartType::Head)).unwrap();
        assert!((m.mean - 30.0).abs() < 1e-12);
        assert!((m.variance - 200.0).abs() < 1e-9);
        assert_eq!(m.part_pair, (PartType::Head, PartType::TailBase));

        assert!(matches!(
            fit_distance_model(&two[..1], (PartType::Head, PartType::TailBase)),
            Err(Error::TooFewSamples(1))
        ));
    }

    #[test]
    fn distance_model_matches_plain_statistics() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let n = rng.random_range(2..40);
            let samples: Vec<_> = (0..n)
                .map(|_| {
                    (
                        Vector2::new(rng.random_range(0.0..100.0), rng.random_range(0.0..100.0)),
                        Vector2::new(rng.random_range(0.0..100.0), rng.random_range(0.0..100.0)),
                    )
                })
                .collect();
            let m = fit_distance_model(&samples, (PartType::Head, PartType::TailBase)).unwrap();
            let d: Vec<f64> = samples
                .iter()
                .map(|(a, b)| ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt())
                .collect();
            let mean = d.iter().sum::<f64>() / n as f64;
            let var = d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
            assert!((m.mean - mean).abs() < 1e-9);
            assert!((m.variance - var.max(VARIANCE_FLOOR)).abs() < 1e-9);
        }
    }

    #[test]
    fn same_type_formula_and_limits() {
        let a = det(0, PartType::Head, 0.0, 0.0, 0.9);
        let b = det(1, PartType::Head, 1.0, 0.0, 0.9);
        // Two 2x1 boxes overlapping by one third of their union: IoU 1/3 → 2.
        let ba = BoundingBox::new(0.0, 0.0, 2.0, 1.0);
        let bb = BoundingBox::new(1.0, 0.0, 2.0, 1.0);
        assert!((same_type_affinity(&a, &b, Some(&ba), Some(&bb), 1e-3, BOUNDS) - 2.0).abs() < 1e-12);
        // IoU exactly 0.5.
        let bc = BoundingBox::new(0.0, 0.0, 3.0, 1.0);
        let bd = BoundingBox::new(0.0, 0.0, 1.5, 1.0);
        assert!((same_type_affinity(&a, &b, Some(&bc), Some(&bd), 1e-3, BOUNDS) - 1.0).abs() < 1e-12);
        assert_eq!(same_type_affinity(&a, &b, Some(&ba), Some(&ba), 1e-3, BOUNDS), 1e-4);
        let far = BoundingBox::new(10.0, 10.0, 2.0, 1.0);
        assert_eq!(same_type_affinity(&a, &b, Some(&ba), Some(&far), 1e-3, BOUNDS), 1e4);
        assert_eq!(same_type_affinity(&a, &b, None, Some(&far), 1e-3, BOUNDS), 1e4);
    }

    #[test]
    fn cross_type_peaks_at_mean() {
        let model = DistanceModel::new(30.0, 25.0, PartType::Head, PartType::TailBase).unwrap();
        let h = det(0, PartType::Head, 0.0, 0.0, 0.9);
        let t = det(1, PartType::TailBase, 30.0, 0.0, 0.9);
        let models = [model];
        assert!((cross_type_affinity(&h, &t, &models, BOUNDS).unwrap() - 1.0).abs() < 1e-15);
        let t = det(1, PartType::TailBase, 0.0, 35.0, 0.9);
        assert!((cross_type_affinity(&h, &t, &models, BOUNDS).unwrap() - (-0.5f64).exp()).abs() < 1e-12);
        let t = det(1, PartType::TailBase, 1e5, 0.0, 0.9);
        assert_eq!(cross_type_affinity(&h, &t, &models, BOUNDS).unwrap(), 1e-4);
        assert!(matches!(
            cross_type_affinity(&h, &t, &[], BOUNDS),
            Err(Error::MissingDistanceModel(..))
        ));
    }

    #[test]
    fn raw_density_is_normal_pdf() {
        let model = DistanceModel::new(30.0, 4.0, PartType::Head, PartType::TailBase).unwrap();
        assert!((model.density(30.0) - 1.0 / (8.0 * std::f64::consts::PI).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn merge_weighted_pair() {
        let dets = vec![
            det(0, PartType::Head, 10.0, 10.0, 0.8),
            det(1, PartType::Head, 14.0, 10.0, 0.2),
        ];
        let out = merge_same_type(&dets, &[(0, 1)]);
        assert_eq!(out.len(), 1);
        assert!((out[0].center - Vector2::new(10.8, 10.0)).norm() < 1e-12);
        assert_eq!(out[0].confidence, 0.8);
        assert_eq!(merge_same_type(&dets, &[]), dets);
    }

    #[test]
    fn merge_transitive_component() {
        let dets = vec![
            det(0, PartType::Head, 0.0, 0.0, 0.5),
            det(1, PartType::Head, 3.0, 0.0, 0.5),
            det(2, PartType::TailBase, 50.0, 0.0, 0.5),
            det(3, PartType::Head, 6.0, 0.0, 0.5),
        ];
        let out = merge_same_type(&dets, &[(0, 1), (3, 1)]);
        assert_eq!(out.len(), 2);
        assert!((out[0].center.x - 3.0).abs() < 1e-12);
        assert_eq!(out[1].id, 2);
    }

    fn arb_det(id: usize) -> impl Strategy<Value = Detection> {
        (0.0..100.0f64, 0.0..100.0f64, 0.01..1.0f64).prop_map(move |(x, y, c)| det(id, PartType::Head, x, y, c))
    }

    proptest! {
        #[test]
        fn same_type_is_symmetric(ax in 0.0..50.0f64, ay in 0.0..50.0f64, bx in 0.0..50.0f64, by in 0.0..50.0f64) {
            let a = det(0, PartType::Head, 0.0, 0.0, 0.9);
            let b = det(1, PartType::Head, 1.0, 0.0, 0.9);
            let ba = BoundingBox::new(ax, ay, 30.0, 20.0);
            let bb = BoundingBox::new(bx, by, 25.0, 30.0);
            prop_assert_eq!(
                same_type_affinity(&a, &b, Some(&ba), Some(&bb), 1e-3, BOUNDS),
                same_type_affinity(&b, &a, Some(&bb), Some(&ba), 1e-3, BOUNDS)
            );
        }

        #[test]
        fn cross_type_depends_on_distance_only(x in -50.0..50.0f64, y in -50.0..50.0f64, theta in 0.0..std::f64::consts::TAU) {
            let models = [DistanceModel::new(30.0, 40.0, PartType::Head, PartType::TailBase).unwrap()];
            let h = det(0, PartType::Head, x, y, 0.9);
            let t = det(1, PartType::TailBase, x + 25.0, y, 0.9);
            let r = det(1, PartType::TailBase, x + 25.0 * theta.cos(), y + 25.0 * theta.sin(), 0.9);
            let a = cross_type_affinity(&h, &t, &models, BOUNDS).unwrap();
            prop_assert!((a - cross_type_affinity(&t, &h, &models, BOUNDS).unwrap()).abs() < 1e-15);
            prop_assert!((a - cross_type_affinity(&h, &r, &models, BOUNDS).unwrap()).abs() < 1e-9);
        }

        #[test]
        fn merge_preserves_weighted_centroids(
            dets in (2usize..8).prop_flat_map(|n| (0..n).map(arb_det).collect::<Vec<_>>()),
            raw_pairs in proptest::collection::vec((0usize..8, 0usize..8), 0..10),
        ) {
            let n = dets.len();
            let pairs: Vec<(usize, usize)> = raw_pairs.into_iter().filter(|(a, b)| *a < n && *b < n).collect();
            let out = merge_same_type(&dets, &pairs);

            // Components by repeated relaxation, independent of union-find.
            let mut label: Vec<usize> = (0..n).collect();
            loop {
                let mut changed = false;
                for &(a, b) in &pairs {
                    let l = label[a].min(label[b]);
                    if label[a] != l || label[b] != l {
                        label[a] = l;
                        label[b] = l;
                        changed = true;
                    }
                }
                if !changed { break; }
            }
            let mut roots: Vec<usize> = label.clone();
            roots.sort();
            roots.dedup();
            prop_assert_eq!(out.len(), roots.len());
            for (k, root) in roots.iter().enumerate() {
                let members: Vec<&Detection> = (0..n).filter(|&i| label[i] == *root).map(|i| &dets[i]).collect();
                let w: f64 = members.iter().map(|d| d.confidence).sum();
                let c: Vector2<f64> = members.iter().map(|d| d.center * d.confidence).sum::<Vector2<f64>>() / w;
                prop_assert!((out[k].center - c).norm() < 1e-9);
            }
        }
    }
}
