//! Frame-by-frame tracking loop.
//!
//! Each [`Tracker::step`] scores the frame's part candidates against the
//! live targets, solves the joint assignment program and moves every target
//! forward: assigned targets take a measurement update, the rest coast.
//!
//! In [`TrackingMode::Fixed`] the tracker keeps `targets_per_type` targets of
//! each part type and never drops them. In [`TrackingMode::Open`] new targets
//! start tentative, are confirmed after `birth_persistence` consecutive hits
//! and are terminated after `max_coast` consecutive misses.

use std::collections::BTreeMap;

use nalgebra::Vector2;
use serde::Serialize;

use crate::association::{cross_type_affinity, fit_distance_model, merge_same_type, same_type_affinity, DistanceModel};
use crate::error::{Error, Result};
use crate::geometry::{fit_prior, geometric_score, select_body, GeometricPrior, TemplateLibrary};
use crate::ilp::{branch_and_bound, build_problem, exhaustive_oracle, AssignmentProblem, CostInputs, Solution};
use crate::motion::{coast, detection_log_likelihood, predict, update_from_prediction, Prediction};
use crate::types::{Detection, MotionModel, PartType, TargetState, TrackerConfig, TrackingMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackStatus {
    /// Open mode only: born but not yet confirmed, with its hit count.
    Tentative(u32),
    Active,
    /// Consecutive frames without a detection.
    Coasting(u32),
    Terminated,
}

impl TrackStatus {
    pub fn label(self) -> &'static str {
        match self {
            TrackStatus::Tentative(_) => "tentative",
            TrackStatus::Active => "active",
            TrackStatus::Coasting(_) => "coasting",
            TrackStatus::Terminated => "terminated",
        }
    }

    pub fn is_live(self) -> bool {
        self != TrackStatus::Terminated
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Track {
    pub target_id: u64,
    pub part_type: PartType,
    pub history: Vec<(u32, TargetState)>,
    pub status: TrackStatus,
    pub birth_frame: u32,
    /// Whether the track ever left the tentative state.
    pub confirmed: bool,
}

impl Track {
    pub fn current(&self) -> &TargetState {
        &self.history.last().expect("tracks are born with one state").1
    }

    pub fn last_frame(&self) -> u32 {
        self.history.last().expect("tracks are born with one state").0
    }

    pub fn state_at(&self, frame: u32) -> Option<&TargetState> {
        self.history
            .binary_search_by_key(&frame, |(f, _)| *f)
            .ok()
            .map(|i| &self.history[i].1)
    }
}

/// Outcome for one target in one frame.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TargetAssignment {
    pub target_id: u64,
    pub part_type: PartType,
    /// Id of the assigned detection, `None` for the fake candidate.
    pub detection: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameResult {
    pub frame: u32,
    pub assignments: Vec<TargetAssignment>,
    /// Detection ids of the associated candidate pairs.
    pub pairs: Vec<(usize, usize)>,
    pub merged: Vec<Detection>,
    pub objective: f64,
    pub node_count: usize,
    pub problem: AssignmentProblem,
    pub solution: Solution,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Solver {
    #[default]
    BranchAndBound,
    Exhaustive,
}

/// Detections of one frame. `index` is carried separately so that empty
/// frames keep their place in the sequence.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Frame {
    pub index: u32,
    pub detections: Vec<Detection>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrackingOutput {
    pub tracks: Vec<Track>,
    pub frames: Vec<FrameResult>,
}

pub struct Tracker {
    config: TrackerConfig,
    library: TemplateLibrary,
    distance_models: Vec<DistanceModel>,
    motion: MotionModel,
    solver: Solver,
    next_id: u64,
}

/// Head to tail-base distances of the templates placed in their own bodies.
pub fn distance_models_from_templates(library: &TemplateLibrary) -> Result<Vec<DistanceModel>> {
    let mut samples = Vec::new();
    for t in library.templates() {
        let body = Detection::new(
            0,
            0,
            PartType::Body,
            Vector2::zeros(),
            (t.body_width, t.body_height),
            1.0,
        );
        if let (Some(h), Some(b)) = (t.locate(PartType::Head, &body), t.locate(PartType::TailBase, &body)) {
            samples.push((h, b));
        }
    }
    Ok(vec![fit_distance_model(
        &samples,
        (PartType::Head, PartType::TailBase),
    )?])
}

impl Tracker {
    /// Distance models are fitted from the templates when there are enough
    /// of them; otherwise cross-type pairs get a neutral affinity of 1.
    pub fn new(config: TrackerConfig, library: TemplateLibrary) -> Result<Self> {
        config.validate()?;
        let motion = config.motion_model()?;
        let distance_models = match distance_models_from_templates(&library) {
            Ok(models) => models,
            Err(Error::TooFewSamples(_)) => Vec::new(),
            Err(e) => return Err(e),
        };
        Ok(Self {
            config,
            library,
            distance_models,
            motion,
            solver: Solver::default(),
            next_id: 0,
        })
    }

    pub fn with_distance_models(mut self, models: Vec<DistanceModel>) -> Self {
        self.distance_models = models;
        self
    }

    pub fn with_solver(mut self, solver: Solver) -> Self {
        self.solver = solver;
        self
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    pub fn distance_models(&self) -> &[DistanceModel] {
        &self.distance_models
    }

    fn new_track(&mut self, detection: &Detection, status: TrackStatus) -> Track {
        let id = self.next_id;
        self.next_id += 1;
        let state = TargetState::at_rest(
            id,
            detection.part_type,
            detection.center,
            self.config.initial_covariance(),
        );
        Track {
            target_id: id,
            part_type: detection.part_type,
            history: vec![(detection.frame, state)],
            status,
            birth_frame: detection.frame,
            confirmed: !matches!(status, TrackStatus::Tentative(_)),
        }
    }

    /// Birth candidates in preference order: inside a body first, then by
    /// confidence, then by id. Candidates within `birth_radius` of `taken`
    /// positions or of an earlier pick of the same type are skipped. In
    /// fixed mode a frame with body candidates only gives births inside them.
    fn birth_candidates<'a>(
        &self,
        candidates: impl Iterator<Item = &'a Detection>,
        bodies: &[Detection],
        taken: &[(PartType, Vector2<f64>)],
        quota: &BTreeMap<PartType, usize>,
    ) -> Vec<&'a Detection> {
        let need_body = self.config.mode == TrackingMode::Fixed && !bodies.is_empty();
        let mut pool: Vec<(bool, &Detection)> = candidates
            .filter(|d| d.part_type.is_trackable() && d.confidence >= self.config.birth_confidence)
            .map(|d| (select_body(d, bodies, self.config.upsilon).is_some(), d))
            .filter(|(in_body, _)| *in_body || !need_body)
            .collect();
        pool.sort_by(|a, b| {
            b.0.cmp(&a.0)
                .then(b.1.confidence.total_cmp(&a.1.confidence))
                .then(a.1.id.cmp(&b.1.id))
        });
        let mut occupied = taken.to_vec();
        let mut left = quota.clone();
        let mut picked = Vec::new();
        for (_, d) in pool {
            let slots = left.get(&d.part_type).copied().unwrap_or(usize::MAX);
            if slots == 0 {
                continue;
            }
            let near = occupied
                .iter()
                .any(|(p, x)| *p == d.part_type && (x - d.center).norm() < self.config.birth_radius);
            if near {
                continue;
            }
            occupied.push((d.part_type, d.center));
            if let Some(s) = left.get_mut(&d.part_type) {
                *s -= 1;
            }
            picked.push(d);
        }
        picked
    }

    fn quota(&self, tracks: &[Track]) -> BTreeMap<PartType, usize> {
        match self.config.mode {
            TrackingMode::Open => BTreeMap::new(),
            TrackingMode::Fixed => PartType::TRACKED
                .iter()
                .map(|p| {
                    let have = tracks
                        .iter()
                        .filter(|t| t.part_type == *p && t.status.is_live())
                        .count();
                    (*p, self.config.targets_per_type.saturating_sub(have))
                })
                .collect(),
        }
    }

    /// Tracks for the first frame. In fixed mode at most `targets_per_type`
    /// per part type are created.
    pub fn init_tracks(&mut self, detections: &[Detection]) -> Vec<Track> {
        let bodies: Vec<Detection> = detections
            .iter()
            .filter(|d| d.part_type == PartType::Body)
            .cloned()
            .collect();
        let quota = self.quota(&[]);
        let picked: Vec<Detection> = self
            .birth_candidates(detections.iter(), &bodies, &[], &quota)
            .into_iter()
            .cloned()
            .collect();
        picked.iter().map(|d| self.new_track(d, TrackStatus::Active)).collect()
    }

    fn score_frame(
        &self,
        targets: &[&Track],
        predictions: &[Prediction],
        parts: &[Detection],
        bodies: &[Detection],
    ) -> Result<AssignmentProblem> {
        let cfg = &self.config;
        let selected: Vec<Option<&Detection>> = parts.iter().map(|d| select_body(d, bodies, cfg.upsilon)).collect();

        let mut priors: BTreeMap<usize, GeometricPrior> = BTreeMap::new();
        if !self.library.is_empty() {
            for body in selected.iter().flatten() {
                if let std::collections::btree_map::Entry::Vacant(slot) = priors.entry(body.id) {
                    let neighbours = self.library.nearest(body, cfg.neighbor_count);
                    slot.insert(fit_prior(&neighbours, body, cfg.template_variance)?);
                }
            }
        }
        let geo: Vec<f64> = parts
            .iter()
            .zip(&selected)
            .map(|(d, body)| {
                let prior = body.and_then(|b| priors.get(&b.id));
                geometric_score(d, prior, cfg.geometric_aggregation, cfg.epsilon_geo)
            })
            .collect();
        let geo_log: Vec<Vec<f64>> = vec![geo; targets.len()];

        let mut motion_loglik = vec![vec![0.0; parts.len()]; targets.len()];
        for (t, track) in targets.iter().enumerate() {
            for (d, det) in parts.iter().enumerate() {
                if det.part_type == track.part_type {
                    motion_loglik[t][d] = detection_log_likelihood(&predictions[t], det)?;
                }
            }
        }

        let mut affinity = vec![vec![1.0; parts.len()]; parts.len()];
        for a in 0..parts.len() {
            for b in 0..parts.len() {
                if a == b {
                    continue;
                }
                affinity[a][b] = if parts[a].part_type == parts[b].part_type {
                    same_type_affinity(
                        &parts[a],
                        &parts[b],
                        selected[a].map(|d| &d.bbox),
                        selected[b].map(|d| &d.bbox),
                        cfg.iou_floor,
                        cfg.affinity_clamp,
                    )
                } else if self.distance_models.is_empty() {
                    1.0
                } else {
                    cross_type_affinity(&parts[a], &parts[b], &self.distance_models, cfg.affinity_clamp)?
                };
            }
        }

        let target_types: Vec<PartType> = targets.iter().map(|t| t.part_type).collect();
        build_problem(CostInputs {
            target_types: &target_types,
            detections: parts,
            geo_log: &geo_log,
            motion_loglik: &motion_loglik,
            affinity: &affinity,
            beta: cfg.clutter_density(),
        })
    }

    /// Advances `tracks` to `frame` using that frame's detections.
    pub fn step(&mut self, tracks: &mut Vec<Track>, frame: u32, detections: &[Detection]) -> Result<FrameResult> {
        if let Some(d) = detections.iter().find(|d| d.frame != frame) {
            return Err(Error::MixedFrames {
                expected: frame,
                found: d.frame,
            });
        }
        for d in detections {
            d.validate()?;
        }
        if let Some(t) = tracks.iter().find(|t| t.status.is_live() && t.last_frame() >= frame) {
            return Err(Error::UnorderedFrames {
                previous: t.last_frame(),
                found: frame,
            });
        }
        let parts: Vec<Detection> = detections
            .iter()
            .filter(|d| d.part_type.is_trackable() && d.confidence > 0.0)
            .cloned()
            .collect();
        let bodies: Vec<Detection> = detections
            .iter()
            .filter(|d| d.part_type == PartType::Body)
            .cloned()
            .collect();

        let live: Vec<usize> = (0..tracks.len()).filter(|&i| tracks[i].status.is_live()).collect();
        let predictions: Vec<Prediction> = live
            .iter()
            .map(|&i| predict(tracks[i].current(), &self.motion))
            .collect::<Result<_>>()?;
        let problem = {
            let targets: Vec<&Track> = live.iter().map(|&i| &tracks[i]).collect();
            self.score_frame(&targets, &predictions, &parts, &bodies)?
        };
        let solution = match self.solver {
            Solver::BranchAndBound => branch_and_bound(&problem)?,
            Solver::Exhaustive => exhaustive_oracle(&problem)?,
        };

        let layout = problem.layout;
        let mut used = vec![false; parts.len()];
        let mut assignments = Vec::with_capacity(live.len());
        for (t, &i) in live.iter().enumerate() {
            let choice = solution.target_choice(&layout, t);
            let track = &mut tracks[i];
            let state = match choice {
                Some(d) => {
                    used[d] = true;
                    update_from_prediction(track.current(), &predictions[t], &parts[d].center, &self.motion)?
                }
                None => coast(track.current(), &self.motion),
            };
            track.history.push((frame, state));
            track.status = next_status(track.status, choice.is_some(), &self.config);
            if track.status == TrackStatus::Active {
                track.confirmed = true;
            }
            assignments.push(TargetAssignment {
                target_id: track.target_id,
                part_type: track.part_type,
                detection: choice.map(|d| parts[d].id),
            });
        }

        let active_pairs = solution.active_pairs(&layout);
        let same_type: Vec<(usize, usize)> = active_pairs
            .iter()
            .copied()
            .filter(|&(a, b)| parts[a].part_type == parts[b].part_type)
            .collect();
        let merged = merge_same_type(&parts, &same_type);

        let taken: Vec<(PartType, Vector2<f64>)> = tracks
            .iter()
            .filter(|t| t.status.is_live())
            .map(|t| (t.part_type, t.current().position()))
            .collect();
        let quota = self.quota(tracks);
        let born: Vec<Detection> = self
            .birth_candidates(
                parts.iter().enumerate().filter(|(d, _)| !used[*d]).map(|(_, d)| d),
                &bodies,
                &taken,
                &quota,
            )
            .into_iter()
            .cloned()
            .collect();
        let stale: Vec<usize> = match self.config.mode {
            TrackingMode::Open => Vec::new(),
            TrackingMode::Fixed => (0..tracks.len())
                .filter(|&i| matches!(tracks[i].status, TrackStatus::Coasting(n) if n > self.config.max_coast))
                .collect(),
        };
        if !stale.is_empty() {
            let mut quota: BTreeMap<PartType, usize> = PartType::TRACKED.iter().map(|p| (*p, 0)).collect();
            for &i in &stale {
                *quota.entry(tracks[i].part_type).or_default() += 1;
            }
            let taken: Vec<(PartType, Vector2<f64>)> = tracks
                .iter()
                .enumerate()
                .filter(|(i, t)| !stale.contains(i) && t.status.is_live())
                .map(|(_, t)| (t.part_type, t.current().position()))
                .chain(born.iter().map(|d| (d.part_type, d.center)))
                .collect();
            let born_ids: Vec<usize> = born.iter().map(|d| d.id).collect();
            let picks: Vec<Detection> = self
                .birth_candidates(
                    parts
                        .iter()
                        .enumerate()
                        .filter(|(d, det)| !used[*d] && !born_ids.contains(&det.id))
                        .map(|(_, d)| d),
                    &bodies,
                    &taken,
                    &quota,
                )
                .into_iter()
                .cloned()
                .collect();
            let mut waiting = stale.clone();
            for d in &picks {
                let Some(k) = waiting.iter().position(|&i| tracks[i].part_type == d.part_type) else {
                    continue;
                };
                let track = &mut tracks[waiting.remove(k)];
                // Same identity, fresh state at the detection.
                let state = TargetState::at_rest(
                    track.target_id,
                    track.part_type,
                    d.center,
                    self.config.initial_covariance(),
                );
                track.history.last_mut().expect("updated above").1 = state;
                track.status = TrackStatus::Active;
            }
        }
        for d in &born {
            let status = match self.config.mode {
                TrackingMode::Fixed => TrackStatus::Active,
                TrackingMode::Open if self.config.birth_persistence <= 1 => TrackStatus::Active,
                TrackingMode::Open => TrackStatus::Tentative(1),
            };
            let track = self.new_track(d, status);
            tracks.push(track);
        }

        Ok(FrameResult {
            frame,
            assignments,
            pairs: active_pairs.iter().map(|&(a, b)| (parts[a].id, parts[b].id)).collect(),
            merged,
            objective: solution.objective,
            node_count: solution.node_count,
            problem,
            solution,
        })
    }

    /// Initialises on the first frame and steps through the rest. Tracks
    /// that were never confirmed are dropped from the output.
    pub fn run(&mut self, frames: &[Frame]) -> Result<TrackingOutput> {
        for w in frames.windows(2) {
            if w[1].index <= w[0].index {
                return Err(Error::UnorderedFrames {
                    previous: w[0].index,
                    found: w[1].index,
                });
            }
        }
        let Some((first, rest)) = frames.split_first() else {
            return Ok(TrackingOutput::default());
        };
        if let Some(d) = first.detections.iter().find(|d| d.frame != first.index) {
            return Err(Error::MixedFrames {
                expected: first.index,
                found: d.frame,
            });
        }
        let mut tracks = self.init_tracks(&first.detections);
        let mut results = Vec::with_capacity(rest.len());
        for frame in rest {
            results.push(self.step(&mut tracks, frame.index, &frame.detections)?);
        }
        tracks.retain(|t| t.confirmed);
        Ok(TrackingOutput {
            tracks,
            frames: results,
        })
    }
}

fn next_status(status: TrackStatus, hit: bool, config: &TrackerConfig) -> TrackStatus {
    match (status, hit) {
        (TrackStatus::Tentative(n), true) if n + 1 >= config.birth_persistence => TrackStatus::Active,
        (TrackStatus::Tentative(n), true) => TrackStatus::Tentative(n + 1),
        (TrackStatus::Tentative(_), false) => TrackStatus::Terminated,
        (TrackStatus::Terminated, _) => TrackStatus::Terminated,
        (_, true) => TrackStatus::Active,
        (TrackStatus::Coasting(n), false) => {
            if config.mode == TrackingMode::Open && n + 1 > config.max_coast {
                TrackStatus::Terminated
            } else {
                TrackStatus::Coasting(n + 1)
            }
        }
        (TrackStatus::Active, false) => TrackStatus::Coasting(1),
    }
}
