//! CLEAR-MOT and identity metrics for part trajectories.
//!
//! Hypotheses match ground truth of the same part type when their centres
//! are within the match threshold. A ground-truth entry flagged as occluded
//! may be matched or left alone; only an unmatched visible entry is a miss.

use std::collections::BTreeMap;

use nalgebra::Vector2;
use serde::Serialize;

use crate::assignment::min_cost_matching;
use crate::error::{Error, Result};
use crate::tracker::Track;
use crate::types::{BoundingBox, PartType};

pub const DEFAULT_MATCH_THRESHOLD: f64 = 15.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundTruthEntry {
    pub frame: u32,
    pub center: Vector2<f64>,
    pub bbox: BoundingBox,
    pub occluded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundTruthTrack {
    pub gt_id: u64,
    pub part_type: PartType,
    pub entries: Vec<GroundTruthEntry>,
}

impl GroundTruthTrack {
    pub fn validate(&self) -> Result<()> {
        for w in self.entries.windows(2) {
            if w[1].frame <= w[0].frame {
                return Err(Error::UnorderedFrames {
                    previous: w[0].frame,
                    found: w[1].frame,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameMatches {
    pub frame: u32,
    /// `(gt_id, target_id, distance)`.
    pub matches: Vec<(u64, u64, f64)>,
    pub false_positives: Vec<u64>,
    pub misses: Vec<u64>,
    pub switches: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub mota: f64,
    /// Mean centre distance over matches, pixels.
    pub motp: f64,
    pub mostly_tracked: usize,
    pub mostly_lost: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub id_switches: usize,
    pub idf1: f64,
    pub gt_appearances: usize,
    pub matches: usize,
    pub frames: Vec<FrameMatches>,
}

struct Hyp {
    id: u64,
    part: PartType,
    at: BTreeMap<u32, Vector2<f64>>,
}

fn within(a: &Vector2<f64>, b: &Vector2<f64>, threshold: f64) -> Option<f64> {
    let d = (a - b).norm();
    (d <= threshold).then_some(d)
}

/// Scores `hyp` against `gt`. The result does not depend on the order of
/// either list.
pub fn evaluate(gt: &[GroundTruthTrack], hyp: &[Track], match_threshold: f64) -> Result<MetricsReport> {
    if !(match_threshold > 0.0) || !match_threshold.is_finite() {
        return Err(Error::BadThreshold(match_threshold));
    }
    for g in gt {
        g.validate()?;
    }
    let mut gts: Vec<&GroundTruthTrack> = gt.iter().collect();
    gts.sort_by_key(|g| g.gt_id);
    let mut hyps: Vec<Hyp> = hyp
        .iter()
        .map(|t| Hyp {
            id: t.target_id,
            part: t.part_type,
            at: t.history.iter().map(|(f, s)| (*f, s.position())).collect(),
        })
        .collect();
    hyps.sort_by_key(|h| h.id);

    let mut frames: Vec<u32> = gts
        .iter()
        .flat_map(|g| g.entries.iter().map(|e| e.frame))
        .chain(hyps.iter().flat_map(|h| h.at.keys().copied()))
        .collect();
    frames.sort_unstable();
    frames.dedup();

    let gt_at: Vec<BTreeMap<u32, &GroundTruthEntry>> = gts
        .iter()
        .map(|g| g.entries.iter().map(|e| (e.frame, e)).collect())
        .collect();

    let mut last_match: Vec<Option<u64>> = vec![None; gts.len()];
    let mut tracked_visible = vec![0usize; gts.len()];
    let (mut fp, mut fn_, mut ids, mut matched, mut dist_sum) = (0, 0, 0, 0, 0.0);
    let mut log = Vec::with_capacity(frames.len());

    for &f in &frames {
        let present_gt: Vec<usize> = (0..gts.len()).filter(|&g| gt_at[g].contains_key(&f)).collect();
        let present_hyp: Vec<usize> = (0..hyps.len()).filter(|&h| hyps[h].at.contains_key(&f)).collect();
        let distance = |g: usize, h: usize| -> Option<f64> {
            if gts[g].part_type != hyps[h].part {
                return None;
            }
            within(&gt_at[g][&f].center, &hyps[h].at[&f], match_threshold)
        };

        let mut gt_taken: BTreeMap<usize, (usize, f64)> = BTreeMap::new();
        let mut hyp_taken = vec![false; hyps.len()];
        for &g in &present_gt {
            let Some(prev) = last_match[g] else { continue };
            let Some(&h) = present_hyp.iter().find(|&&h| hyps[h].id == prev) else {
                continue;
            };
            if hyp_taken[h] {
                continue;
            }
            if let Some(d) = distance(g, h) {
                gt_taken.insert(g, (h, d));
                hyp_taken[h] = true;
            }
        }
        let free_gt: Vec<usize> = present_gt
            .iter()
            .copied()
            .filter(|g| !gt_taken.contains_key(g))
            .collect();
        let free_hyp: Vec<usize> = present_hyp.iter().copied().filter(|h| !hyp_taken[*h]).collect();
        let cost: Vec<Vec<Option<f64>>> = free_gt
            .iter()
            .map(|&g| free_hyp.iter().map(|&h| distance(g, h)).collect())
            .collect();
        for (r, c) in min_cost_matching(&cost, free_hyp.len()) {
            let (g, h) = (free_gt[r], free_hyp[c]);
            gt_taken.insert(g, (h, cost[r][c].expect("matched entries are allowed")));
            hyp_taken[h] = true;
        }

        let mut entry = FrameMatches {
            frame: f,
            matches: Vec::new(),
            false_positives: Vec::new(),
            misses: Vec::new(),
            switches: Vec::new(),
        };
        for &g in &present_gt {
            let gt_entry = gt_at[g][&f];
            match gt_taken.get(&g) {
                Some(&(h, d)) => {
                    let hid = hyps[h].id;
                    if last_match[g].is_some_and(|prev| prev != hid) {
                        ids += 1;
                        entry.switches.push(gts[g].gt_id);
                    }
                    last_match[g] = Some(hid);
                    matched += 1;
                    dist_sum += d;
                    if !gt_entry.occluded {
                        tracked_visible[g] += 1;
                    }
                    entry.matches.push((gts[g].gt_id, hid, d));
                }
                None if gt_entry.occluded => {}
                None => {
                    fn_ += 1;
                    entry.misses.push(gts[g].gt_id);
                }
            }
        }
        for &h in &present_hyp {
            if !hyp_taken[h] {
                fp += 1;
                entry.false_positives.push(hyps[h].id);
            }
        }
        log.push(entry);
    }

    let gt_appearances: usize = gts.iter().map(|g| g.entries.len()).sum();
    let errors = fp + fn_ + ids;
    let mota = if gt_appearances == 0 {
        if errors == 0 {
            1.0
        } else {
            0.0
        }
    } else {
        (gt_appearances as f64 - errors as f64) / gt_appearances as f64
    };
    let motp = if matched == 0 { 0.0 } else { dist_sum / matched as f64 };

    let (mut mt, mut ml) = (0, 0);
    for (g, track) in gts.iter().enumerate() {
        let span = track.entries.iter().filter(|e| !e.occluded).count();
        if span == 0 {
            continue;
        }
        let ratio = tracked_visible[g] as f64 / span as f64;
        if ratio >= 0.8 {
            mt += 1;
        }
        if ratio < 0.2 {
            ml += 1;
        }
    }

    let identity: Vec<Vec<Option<f64>>> = gts
        .iter()
        .map(|track| {
            hyps.iter()
                .map(|h| {
                    if h.part != track.part_type {
                        return Some(0.0);
                    }
                    let overlap = track
                        .entries
                        .iter()
                        .filter(|e| {
                            h.at.get(&e.frame)
                                .is_some_and(|p| within(&e.center, p, match_threshold).is_some())
                        })
                        .count();
                    Some(-(overlap as f64))
                })
                .collect()
        })
        .collect();
    let idtp: f64 = min_cost_matching(&identity, hyps.len())
        .into_iter()
        .map(|(g, h)| -identity[g][h].unwrap_or(0.0))
        .sum();
    let hyp_entries: usize = hyps.iter().map(|h| h.at.len()).sum();
    let denominator = (gt_appearances + hyp_entries) as f64;
    let idf1 = if denominator == 0.0 {
        1.0
    } else {
        2.0 * idtp / denominator
    };

    Ok(MetricsReport {
        mota,
        motp,
        mostly_tracked: mt,
        mostly_lost: ml,
        false_positives: fp,
        false_negatives: fn_,
        id_switches: ids,
        idf1,
        gt_appearances,
        matches: matched,
        frames: log,
    })
}
