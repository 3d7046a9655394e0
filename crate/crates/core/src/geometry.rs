//! Geometric prior from body-relative part templates.
//!
//! A part candidate is first attached to the most confident body candidate
//! that contains it (up to a slack of `upsilon` pixels). The templates whose
//! body shape is closest to that body are de-normalised into it, and the
//! candidate is scored against the per-part Gaussians they induce.

use std::collections::BTreeMap;

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::motion::gaussian_log_density;
use crate::types::{Detection, GeometricAggregation, PartType};

/// One annotated sample: part locations as offsets from the body-box
/// centre, divided by the body-box width and height.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometricTemplate {
    pub template_id: usize,
    pub body_width: f64,
    pub body_height: f64,
    pub part_offsets: BTreeMap<PartType, Vector2<f64>>,
}

impl GeometricTemplate {
    /// Body-shape descriptor used for neighbour search: `(aspect, diagonal)`.
    pub fn body_descriptor(&self) -> [f64; 2] {
        body_descriptor(self.body_width, self.body_height)
    }

    /// Full descriptor: body shape followed by the normalised offsets in part order.
    pub fn descriptor(&self) -> Vec<f64> {
        let mut d = self.body_descriptor().to_vec();
        for off in self.part_offsets.values() {
            d.extend([off.x, off.y]);
        }
        d
    }

    /// Location of `part` in image pixels when placed into `body`.
    pub fn locate(&self, part: PartType, body: &Detection) -> Option<Vector2<f64>> {
        let off = self.part_offsets.get(&part)?;
        let c = body.bbox.center();
        Some(Vector2::new(
            c.x + off.x * body.bbox.width,
            c.y + off.y * body.bbox.height,
        ))
    }
}

fn body_descriptor(width: f64, height: f64) -> [f64; 2] {
    [width / height, width.hypot(height)]
}

/// Immutable template collection with the standardisation statistics of
/// its body descriptors.
#[derive(Debug, Clone, Default)]
pub struct TemplateLibrary {
    templates: Vec<GeometricTemplate>,
    scale: [f64; 2],
}

impl TemplateLibrary {
    pub fn new(templates: Vec<GeometricTemplate>) -> Self {
        let k = templates.len().max(1) as f64;
        let mut mean = [0.0; 2];
        for t in &templates {
            let d = t.body_descriptor();
            mean[0] += d[0] / k;
            mean[1] += d[1] / k;
        }
        let mut var = [0.0; 2];
        for t in &templates {
            let d = t.body_descriptor();
            var[0] += (d[0] - mean[0]).powi(2) / k;
            var[1] += (d[1] - mean[1]).powi(2) / k;
        }
        let scale = var.map(|v| if v.sqrt() > 1e-12 { v.sqrt() } else { 1.0 });
        Self { templates, scale }
    }

    pub fn templates(&self) -> &[GeometricTemplate] {
        &self.templates
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    /// Standardised Euclidean distance between a body box and a template's body.
    ///
    /// Only the body-shape components take part: a body candidate carries
    /// no part offsets of its own.
    pub fn descriptor_distance(&self, body: &Detection, template: &GeometricTemplate) -> f64 {
        let q = body_descriptor(body.bbox.width, body.bbox.height);
        let t = template.body_descriptor();
        (0..2)
            .map(|i| ((q[i] - t[i]) / self.scale[i]).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// The `min(count, K)` templates closest to `body`, ties by ascending id.
    pub fn nearest(&self, body: &Detection, count: usize) -> Vec<&GeometricTemplate> {
        let mut scored: Vec<(f64, &GeometricTemplate)> = self
            .templates
            .iter()
            .map(|t| (self.descriptor_distance(body, t), t))
            .collect();
        scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.template_id.cmp(&b.1.template_id)));
        scored.into_iter().take(count).map(|(_, t)| t).collect()
    }
}

/// Body candidate for `candidate`: the most confident body whose box contains
/// the candidate box within `upsilon` pixels on every side. Ties go to the
/// lowest id.
pub fn select_body<'a>(candidate: &Detection, bodies: &'a [Detection], upsilon: f64) -> Option<&'a Detection> {
    debug_assert!(candidate.part_type.is_trackable());
    bodies
        .iter()
        .filter(|b| b.part_type == PartType::Body && b.confidence > 0.0)
        .filter(|b| b.bbox.contains_with_slack(&candidate.bbox, upsilon))
        .min_by(|a, b| b.confidence.total_cmp(&a.confidence).then(a.id.cmp(&b.id)))
}

/// Per-part Gaussian of the prior, in image pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct PartGaussian {
    /// Moment-matched mean of the template locations.
    pub mean: Vector2<f64>,
    /// Population covariance of the template locations plus `σ I`.
    pub covariance: Matrix2<f64>,
    /// De-normalised location contributed by each neighbour template.
    pub components: Vec<Vector2<f64>>,
    /// Variance `σ` of each per-template isotropic Gaussian.
    pub component_variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometricPrior {
    pub per_part: BTreeMap<PartType, PartGaussian>,
    pub support: usize,
}

/// Fits the per-part Gaussians of `neighbors` placed into `body`.
pub fn fit_prior(neighbors: &[&GeometricTemplate], body: &Detection, sigma: f64) -> Result<GeometricPrior> {
    if neighbors.is_empty() {
        return Err(Error::EmptyNeighbours);
    }
    if !(sigma > 0.0) {
        return Err(Error::invalid("template variance", format!("{sigma} must be positive")));
    }
    let parts: Vec<PartType> = neighbors[0]
        .part_offsets
        .keys()
        .copied()
        .filter(|p| p.is_trackable())
        .filter(|p| neighbors.iter().all(|t| t.part_offsets.contains_key(p)))
        .collect();

    let mut per_part = BTreeMap::new();
    for part in parts {
        let components: Vec<Vector2<f64>> = neighbors
            .iter()
            .map(|t| t.locate(part, body).expect("part present in every neighbour"))
            .collect();
        let n = components.len() as f64;
        let mean = components.iter().sum::<Vector2<f64>>() / n;
        let spread = components
            .iter()
            .map(|x| (x - mean) * (x - mean).transpose())
            .sum::<Matrix2<f64>>()
            / n;
        per_part.insert(
            part,
            PartGaussian {
                mean,
                covariance: spread + Matrix2::identity() * sigma,
                components,
                component_variance: sigma,
            },
        );
    }
    Ok(GeometricPrior {
        per_part,
        support: neighbors.len(),
    })
}

/// `log Δ` for a candidate. Without a prior, or when the prior lacks the
/// candidate's part type, the score is `log epsilon`.
pub fn geometric_score(
    candidate: &Detection,
    prior: Option<&GeometricPrior>,
    aggregation: GeometricAggregation,
    epsilon: f64,
) -> f64 {
    let Some(g) = prior.and_then(|p| p.per_part.get(&candidate.part_type)) else {
        return epsilon.ln();
    };
    let x = &candidate.center;
    match aggregation {
        GeometricAggregation::Mixture => {
            let var = g.component_variance;
            let logs: Vec<f64> = g
                .components
                .iter()
                .map(|mu| -(2.0 * std::f64::consts::PI * var).ln() - (x - mu).norm_squared() / (2.0 * var))
                .collect();
            log_sum_exp(&logs)
        }
        GeometricAggregation::MomentMatched => {
            let log_density =
                gaussian_log_density(x, &g.mean, &g.covariance).expect("prior covariance is positive definite");
            (g.components.len() as f64).ln() + log_density
        }
    }
}

pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}
