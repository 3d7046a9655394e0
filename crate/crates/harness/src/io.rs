//! Line-oriented CSV formats.
//!
//! | file         | header                                                  |
//! |--------------|---------------------------------------------------------|
//! | detections   | `frame,part_type,cx,cy,w,h,score`                       |
//! | templates    | `template_id,body_w,body_h,part_type,off_x,off_y`       |
//! | ground truth | `frame,gt_id,part_type,cx,cy,w,h,occluded`              |
//! | tracks       | `frame,target_id,part_type,status,x,vx,y,vy,p00,…,p33`  |
//!
//! `part_type` is one of `head`, `tail_base`, `body`; `occluded` is `0` or
//! `1`. Detection ids are the zero-based record index in the file. Track
//! rows carry the upper triangle of the state covariance.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use nalgebra::{Matrix4, Vector2, Vector4};
use parttrack::geometry::GeometricTemplate;
use parttrack::{
    BoundingBox, Detection, Frame, GroundTruthEntry, GroundTruthTrack, MetricsReport, PartType, TargetState, Track,
    TrackStatus,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Serialize, Deserialize)]
struct DetectionRecord {
    frame: u32,
    part_type: String,
    cx: f64,
    cy: f64,
    w: f64,
    h: f64,
    score: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct TemplateRecord {
    template_id: usize,
    body_w: f64,
    body_h: f64,
    part_type: String,
    off_x: f64,
    off_y: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct GroundTruthRecord {
    frame: u32,
    gt_id: u64,
    part_type: String,
    cx: f64,
    cy: f64,
    w: f64,
    h: f64,
    occluded: u8,
}

#[derive(Debug, Serialize, Deserialize)]
struct TrackRecord {
    frame: u32,
    target_id: u64,
    part_type: String,
    status: String,
    x: f64,
    vx: f64,
    y: f64,
    vy: f64,
    p00: f64,
    p01: f64,
    p02: f64,
    p03: f64,
    p11: f64,
    p12: f64,
    p13: f64,
    p22: f64,
    p23: f64,
    p33: f64,
}

/// Deserialises every record, tagging each with its 1-based line number.
fn read_records<T: DeserializeOwned>(path: &Path) -> Result<Vec<(u64, T)>> {
    let file = File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| HarnessError::parse(path, 1, e.to_string()))?
        .clone();
    if headers.is_empty() {
        return Err(HarnessError::parse(path, 1, "missing header line"));
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            HarnessError::parse(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let value = record
            .deserialize(Some(&headers))
            .map_err(|e| HarnessError::parse(path, line, e.to_string()))?;
        out.push((line, value));
    }
    Ok(out)
}

fn write_records<T: Serialize>(path: &Path, records: impl IntoIterator<Item = T>, header: &[&str]) -> Result<()> {
    let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    let to_io = |e: csv::Error| HarnessError::io(path, std::io::Error::other(e.to_string()));
    writer.write_record(header).map_err(to_io)?;
    for r in records {
        writer.serialize(r).map_err(to_io)?;
    }
    writer.flush().map_err(|e| HarnessError::io(path, e))
}

fn part(path: &Path, line: u64, label: &str) -> Result<PartType> {
    label
        .parse()
        .map_err(|e: parttrack::Error| HarnessError::parse(path, line, e.to_string()))
}

/// Frames from the first to the last frame index in the file, with empty
/// frames where no detection was recorded. Frame indices must not decrease.
pub fn load_detections(path: impl AsRef<Path>) -> Result<Vec<Frame>> {
    let path = path.as_ref();
    let mut frames: Vec<Frame> = Vec::new();
    for (id, (line, r)) in read_records::<DetectionRecord>(path)?.into_iter().enumerate() {
        let part_type = part(path, line, &r.part_type)?;
        let detection = Detection::new(id, r.frame, part_type, Vector2::new(r.cx, r.cy), (r.w, r.h), r.score);
        detection
            .validate()
            .map_err(|e| HarnessError::parse(path, line, e.to_string()))?;
        match frames.last() {
            Some(last) if r.frame < last.index => {
                return Err(HarnessError::parse(
                    path,
                    line,
                    format!("frame {} follows frame {}", r.frame, last.index),
                ));
            }
            Some(last) => {
                for index in last.index + 1..=r.frame {
                    frames.push(Frame {
                        index,
                        detections: Vec::new(),
                    });
                }
            }
            None => frames.push(Frame {
                index: r.frame,
                detections: Vec::new(),
            }),
        }
        frames
            .last_mut()
            .expect("frame pushed above")
            .detections
            .push(detection);
    }
    Ok(frames)
}

pub fn save_detections(path: impl AsRef<Path>, frames: &[Frame]) -> Result<()> {
    let records = frames.iter().flat_map(|f| &f.detections).map(|d| DetectionRecord {
        frame: d.frame,
        part_type: d.part_type.label().to_string(),
        cx: d.center.x,
        cy: d.center.y,
        w: d.bbox.width,
        h: d.bbox.height,
        score: d.confidence,
    });
    write_records(
        path.as_ref(),
        records,
        &["frame", "part_type", "cx", "cy", "w", "h", "score"],
    )
}

/// Templates grouped by id, in order of first appearance.
pub fn load_templates(path: impl AsRef<Path>) -> Result<Vec<GeometricTemplate>> {
    let path = path.as_ref();
    let mut templates: Vec<GeometricTemplate> = Vec::new();
    let mut index: BTreeMap<usize, usize> = BTreeMap::new();
    for (line, r) in read_records::<TemplateRecord>(path)? {
        let part_type = part(path, line, &r.part_type)?;
        if !(r.body_w > 0.0 && r.body_h > 0.0) {
            return Err(HarnessError::parse(path, line, "body size must be positive"));
        }
        let slot = *index.entry(r.template_id).or_insert_with(|| {
            templates.push(GeometricTemplate {
                template_id: r.template_id,
                body_width: r.body_w,
                body_height: r.body_h,
                part_offsets: BTreeMap::new(),
            });
            templates.len() - 1
        });
        let t = &mut templates[slot];
        if t.body_width != r.body_w || t.body_height != r.body_h {
            return Err(HarnessError::parse(
                path,
                line,
                format!("template {} has conflicting body sizes", r.template_id),
            ));
        }
        if t.part_offsets
            .insert(part_type, Vector2::new(r.off_x, r.off_y))
            .is_some()
        {
            return Err(HarnessError::parse(
                path,
                line,
                format!("template {} repeats part {part_type}", r.template_id),
            ));
        }
    }
    Ok(templates)
}

pub fn save_templates(path: impl AsRef<Path>, templates: &[GeometricTemplate]) -> Result<()> {
    let records = templates.iter().flat_map(|t| {
        t.part_offsets.iter().map(move |(p, off)| TemplateRecord {
            template_id: t.template_id,
            body_w: t.body_width,
            body_h: t.body_height,
            part_type: p.label().to_string(),
            off_x: off.x,
            off_y: off.y,
        })
    });
    write_records(
        path.as_ref(),
        records,
        &["template_id", "body_w", "body_h", "part_type", "off_x", "off_y"],
    )
}

/// Ground-truth tracks ordered by `gt_id`; frames must increase within each.
pub fn load_ground_truth(path: impl AsRef<Path>) -> Result<Vec<GroundTruthTrack>> {
    let path = path.as_ref();
    let mut tracks: BTreeMap<u64, GroundTruthTrack> = BTreeMap::new();
    for (line, r) in read_records::<GroundTruthRecord>(path)? {
        let part_type = part(path, line, &r.part_type)?;
        if r.occluded > 1 {
            return Err(HarnessError::parse(path, line, "occluded must be 0 or 1"));
        }
        let track = tracks.entry(r.gt_id).or_insert_with(|| GroundTruthTrack {
            gt_id: r.gt_id,
            part_type,
            entries: Vec::new(),
        });
        if track.part_type != part_type {
            return Err(HarnessError::parse(
                path,
                line,
                format!("gt {} changes part type", r.gt_id),
            ));
        }
        if track.entries.last().is_some_and(|e| e.frame >= r.frame) {
            return Err(HarnessError::parse(
                path,
                line,
                format!("gt {} frames out of order", r.gt_id),
            ));
        }
        let center = Vector2::new(r.cx, r.cy);
        track.entries.push(GroundTruthEntry {
            frame: r.frame,
            center,
            bbox: BoundingBox::centered(center, r.w, r.h),
            occluded: r.occluded == 1,
        });
    }
    Ok(tracks.into_values().collect())
}

/// Rows are ordered by frame, then by gt id.
pub fn save_ground_truth(path: impl AsRef<Path>, tracks: &[GroundTruthTrack]) -> Result<()> {
    let mut rows: Vec<(u32, u64, GroundTruthRecord)> = tracks
        .iter()
        .flat_map(|t| {
            t.entries.iter().map(move |e| {
                (
                    e.frame,
                    t.gt_id,
                    GroundTruthRecord {
                        frame: e.frame,
                        gt_id: t.gt_id,
                        part_type: t.part_type.label().to_string(),
                        cx: e.center.x,
                        cy: e.center.y,
                        w: e.bbox.width,
                        h: e.bbox.height,
                        occluded: u8::from(e.occluded),
                    },
                )
            })
        })
        .collect();
    rows.sort_by_key(|(f, id, _)| (*f, *id));
    write_records(
        path.as_ref(),
        rows.into_iter().map(|(_, _, r)| r),
        &["frame", "gt_id", "part_type", "cx", "cy", "w", "h", "occluded"],
    )
}

fn status_label(status: TrackStatus) -> String {
    match status {
        TrackStatus::Tentative(n) => format!("tentative:{n}"),
        TrackStatus::Coasting(n) => format!("coasting:{n}"),
        other => other.label().to_string(),
    }
}

fn parse_status(label: &str) -> Option<TrackStatus> {
    let (name, count) = match label.split_once(':') {
        Some((name, n)) => (name, Some(n.parse::<u32>().ok()?)),
        None => (label, None),
    };
    match (name, count) {
        ("active", None) => Some(TrackStatus::Active),
        ("terminated", None) => Some(TrackStatus::Terminated),
        ("coasting", Some(n)) if n > 0 => Some(TrackStatus::Coasting(n)),
        ("tentative", Some(n)) => Some(TrackStatus::Tentative(n)),
        _ => None,
    }
}

const TRACK_HEADER: [&str; 18] = [
    "frame",
    "target_id",
    "part_type",
    "status",
    "x",
    "vx",
    "y",
    "vy",
    "p00",
    "p01",
    "p02",
    "p03",
    "p11",
    "p12",
    "p13",
    "p22",
    "p23",
    "p33",
];

/// Rows are ordered by frame, then by target id. `status` is the track's
/// final status, repeated on each of its rows.
pub fn save_tracks(path: impl AsRef<Path>, tracks: &[Track]) -> Result<()> {
    let mut rows: Vec<(u32, u64, TrackRecord)> = Vec::new();
    for t in tracks {
        for (frame, s) in &t.history {
            let p = &s.covariance;
            rows.push((
                *frame,
                t.target_id,
                TrackRecord {
                    frame: *frame,
                    target_id: t.target_id,
                    part_type: t.part_type.label().to_string(),
                    status: status_label(t.status),
                    x: s.mean[0],
                    vx: s.mean[1],
                    y: s.mean[2],
                    vy: s.mean[3],
                    p00: p[(0, 0)],
                    p01: p[(0, 1)],
                    p02: p[(0, 2)],
                    p03: p[(0, 3)],
                    p11: p[(1, 1)],
                    p12: p[(1, 2)],
                    p13: p[(1, 3)],
                    p22: p[(2, 2)],
                    p23: p[(2, 3)],
                    p33: p[(3, 3)],
                },
            ));
        }
    }
    rows.sort_by_key(|(f, id, _)| (*f, *id));
    write_records(path.as_ref(), rows.into_iter().map(|(_, _, r)| r), &TRACK_HEADER)
}

pub fn load_tracks(path: impl AsRef<Path>) -> Result<Vec<Track>> {
    let path = path.as_ref();
    let mut tracks: BTreeMap<u64, Track> = BTreeMap::new();
    for (line, r) in read_records::<TrackRecord>(path)? {
        let part_type = part(path, line, &r.part_type)?;
        let status = parse_status(&r.status)
            .ok_or_else(|| HarnessError::parse(path, line, format!("unknown status {:?}", r.status)))?;
        let covariance = Matrix4::new(
            r.p00, r.p01, r.p02, r.p03, //
            r.p01, r.p11, r.p12, r.p13, //
            r.p02, r.p12, r.p22, r.p23, //
            r.p03, r.p13, r.p23, r.p33,
        );
        let state = TargetState {
            target_id: r.target_id,
            part_type,
            mean: Vector4::new(r.x, r.vx, r.y, r.vy),
            covariance,
        };
        let track = tracks.entry(r.target_id).or_insert_with(|| Track {
            target_id: r.target_id,
            part_type,
            history: Vec::new(),
            status,
            birth_frame: r.frame,
            confirmed: true,
        });
        if track.part_type != part_type || track.status != status {
            return Err(HarnessError::parse(
                path,
                line,
                format!("track {} changes part type or status", r.target_id),
            ));
        }
        if track.history.last().is_some_and(|(f, _)| *f >= r.frame) {
            return Err(HarnessError::parse(
                path,
                line,
                format!("track {} frames out of order", r.target_id),
            ));
        }
        track.history.push((r.frame, state));
    }
    Ok(tracks.into_values().collect())
}

/// Summary lines `key value`, one per metric.
pub fn report_text(report: &MetricsReport) -> String {
    let lines = [
        ("mota", report.mota.to_string()),
        ("motp", report.motp.to_string()),
        ("idf1", report.idf1.to_string()),
        ("mostly_tracked", report.mostly_tracked.to_string()),
        ("mostly_lost", report.mostly_lost.to_string()),
        ("false_positives", report.false_positives.to_string()),
        ("false_negatives", report.false_negatives.to_string()),
        ("id_switches", report.id_switches.to_string()),
        ("gt_appearances", report.gt_appearances.to_string()),
        ("matches", report.matches.to_string()),
    ];
    lines.iter().map(|(k, v)| format!("{k} {v}\n")).collect()
}

/// JSON (with the per-frame match log) when `path` ends in `.json`,
/// otherwise the text summary.
pub fn save_report(path: impl AsRef<Path>, report: &MetricsReport) -> Result<()> {
    let path = path.as_ref();
    let body = if path.extension().is_some_and(|e| e == "json") {
        let mut s = serde_json::to_string_pretty(report)
            .map_err(|e| HarnessError::io(path, std::io::Error::other(e.to_string())))?;
        s.push('\n');
        s
    } else {
        report_text(report)
    };
    let mut file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    file.write_all(body.as_bytes()).map_err(|e| HarnessError::io(path, e))
}
