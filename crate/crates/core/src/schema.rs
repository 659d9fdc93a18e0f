//! Line-delimited JSON files for tracklets, tracks and ground truth.
//!
//! Each file may open with a header record `{"schema": KIND, "version": 1}`.
//! Every other line is one record. Joints are `[x, y, confidence, visible]`
//! with `visible` 0 or 1. Numbers are written rounded to six decimals.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{GroundTruth, GtPerson};
use crate::types::{BBox, Hypothesis, HypothesisSet, Joint, Pose, Track, TrackMember, Tracklet};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemaKind {
    Tracklets,
    Tracks,
    GroundTruth,
}

impl SchemaKind {
    pub fn name(&self) -> &'static str {
        match self {
            SchemaKind::Tracklets => "tracklets",
            SchemaKind::Tracks => "tracks",
            SchemaKind::GroundTruth => "gt",
        }
    }
}

/// Records of a file, grouped by video id.
pub type ByVideo<T> = BTreeMap<String, Vec<T>>;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    schema: String,
    version: u32,
}

type JointRow = [f64; 4];

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseRecord {
    frame: usize,
    joints: Vec<JointRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    head_size: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrackletRecord {
    video_id: String,
    keyframe: usize,
    clip_len: usize,
    #[serde(rename = "box")]
    bbox: [f64; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source_id: Option<String>,
    poses: Vec<PoseRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MemberRecord {
    keyframe: usize,
    #[serde(rename = "box")]
    bbox: [f64; 4],
    source_id: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HypothesisRecord {
    source_keyframe: usize,
    joints: Vec<JointRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    head_size: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameRecord {
    frame: usize,
    hypotheses: Vec<HypothesisRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    merged: Option<Vec<JointRow>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrackRecord {
    video_id: String,
    track_id: u64,
    capacity: usize,
    members: Vec<MemberRecord>,
    frames: Vec<FrameRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GtPersonRecord {
    track_id: u64,
    head_size: f64,
    joints: Vec<JointRow>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GtRecord {
    video_id: String,
    frame: usize,
    people: Vec<GtPersonRecord>,
}

/// Rounds to six decimals.
pub fn quantize(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

fn joint_row(j: &Joint) -> JointRow {
    [
        quantize(j.x),
        quantize(j.y),
        quantize(j.confidence),
        if j.visible { 1.0 } else { 0.0 },
    ]
}

fn joint_from_row(row: &JointRow) -> std::result::Result<Joint, String> {
    if row.iter().any(|v| !v.is_finite()) {
        return Err("joint values must be finite".into());
    }
    if !(0.0..=1.0).contains(&row[2]) {
        return Err(format!("confidence {} outside [0, 1]", row[2]));
    }
    let visible = match row[3] {
        1.0 => true,
        0.0 => false,
        v => return Err(format!("visible flag must be 0 or 1, got {v}")),
    };
    Ok(Joint {
        x: row[0],
        y: row[1],
        confidence: row[2],
        visible,
    })
}

fn joints_from_rows(rows: &[JointRow]) -> std::result::Result<Vec<Joint>, String> {
    rows.iter().map(joint_from_row).collect()
}

fn box_row(b: &BBox) -> [f64; 4] {
    [quantize(b.x), quantize(b.y), quantize(b.w), quantize(b.h)]
}

fn box_from_row(row: &[f64; 4]) -> std::result::Result<BBox, String> {
    BBox::new(row[0], row[1], row[2], row[3]).map_err(|e| e.to_string())
}

fn head_size(h: Option<f64>) -> std::result::Result<Option<f64>, String> {
    match h {
        Some(v) if !(v > 0.0 && v.is_finite()) => Err(format!("head_size must be positive, got {v}")),
        other => Ok(other),
    }
}

fn pose_from(frame: usize, rows: &[JointRow], head: Option<f64>) -> std::result::Result<Pose, String> {
    let mut pose = Pose::new(frame, joints_from_rows(rows)?);
    pose.head_size = head_size(head)?;
    Ok(pose)
}

fn read_records<T: DeserializeOwned>(reader: impl BufRead, kind: SchemaKind) -> Result<Vec<(usize, T)>> {
    let mut out = Vec::new();
    let mut seen_record = false;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Schema {
            line: line_no,
            message: format!("invalid JSON: {e}"),
        })?;
        if value.get("schema").is_some() {
            if seen_record {
                return Err(Error::Schema {
                    line: line_no,
                    message: "header must precede all records".into(),
                });
            }
            let header: Header = serde_json::from_value(value).map_err(|e| Error::Schema {
                line: line_no,
                message: format!("invalid header: {e}"),
            })?;
            if header.schema != kind.name() || header.version != SCHEMA_VERSION {
                return Err(Error::Schema {
                    line: line_no,
                    message: format!(
                        "expected schema {} version {SCHEMA_VERSION}, found {} version {}",
                        kind.name(),
                        header.schema,
                        header.version
                    ),
                });
            }
            seen_record = true;
            continue;
        }
        seen_record = true;
        let record = serde_json::from_value(value).map_err(|e| Error::Schema {
            line: line_no,
            message: format!("invalid {} record: {e}", kind.name()),
        })?;
        out.push((line_no, record));
    }
    Ok(out)
}

fn write_records<T: Serialize>(mut writer: impl Write, kind: SchemaKind, records: &[T]) -> Result<()> {
    let header = Header {
        schema: kind.name().into(),
        version: SCHEMA_VERSION,
    };
    let to_io = |e: serde_json::Error| Error::Io(e.to_string());
    writeln!(writer, "{}", serde_json::to_string(&header).map_err(to_io)?)?;
    for r in records {
        writeln!(writer, "{}", serde_json::to_string(r).map_err(to_io)?)?;
    }
    writer.flush()?;
    Ok(())
}

fn schema_err(line: usize, what: &str, message: String) -> Error {
    Error::Schema {
        line,
        message: format!("{what}: {message}"),
    }
}

pub fn read_tracklets(reader: impl BufRead) -> Result<ByVideo<Tracklet>> {
    let mut out: ByVideo<Tracklet> = BTreeMap::new();
    for (line, r) in read_records::<TrackletRecord>(reader, SchemaKind::Tracklets)? {
        let what = format!("tracklet (video {}, keyframe {})", r.video_id, r.keyframe);
        let err = |m: String| schema_err(line, &what, m);
        let poses = r
            .poses
            .iter()
            .map(|p| pose_from(p.frame, &p.joints, p.head_size))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(err)?;
        let tracklet = Tracklet {
            keyframe: r.keyframe,
            clip_len: r.clip_len,
            bbox: box_from_row(&r.bbox).map_err(err)?,
            poses,
            source_id: r
                .source_id
                .unwrap_or_else(|| format!("{}:{}:{}", r.video_id, r.keyframe, line)),
        };
        tracklet.validate().map_err(|e| err(e.to_string()))?;
        out.entry(r.video_id).or_default().push(tracklet);
    }
    Ok(out)
}

pub fn write_tracklets(writer: impl Write, videos: &ByVideo<Tracklet>) -> Result<()> {
    let mut records = Vec::new();
    for (video_id, tracklets) in videos {
        for t in tracklets {
            records.push(TrackletRecord {
                video_id: video_id.clone(),
                keyframe: t.keyframe,
                clip_len: t.clip_len,
                bbox: box_row(&t.bbox),
                source_id: Some(t.source_id.clone()),
                poses: t
                    .poses
                    .iter()
                    .map(|p| PoseRecord {
                        frame: p.frame,
                        joints: p.joints.iter().map(joint_row).collect(),
                        head_size: p.head_size.map(quantize),
                    })
                    .collect(),
            });
        }
    }
    write_records(writer, SchemaKind::Tracklets, &records)
}

pub fn read_tracks(reader: impl BufRead) -> Result<ByVideo<Track>> {
    let mut out: ByVideo<Track> = BTreeMap::new();
    for (line, r) in read_records::<TrackRecord>(reader, SchemaKind::Tracks)? {
        let what = format!("track (video {}, id {})", r.video_id, r.track_id);
        let err = |m: String| schema_err(line, &what, m);
        let mut track = Track::new(r.track_id, r.capacity);
        for m in &r.members {
            track.members.push(TrackMember {
                keyframe: m.keyframe,
                bbox: box_from_row(&m.bbox).map_err(err)?,
                source_id: m.source_id.clone(),
            });
        }
        for fr in &r.frames {
            if track.frames.contains_key(&fr.frame) {
                return Err(err(format!("frame {} listed twice", fr.frame)));
            }
            let mut set = HypothesisSet::new(r.capacity);
            for h in &fr.hypotheses {
                set.push(Hypothesis {
                    pose: pose_from(fr.frame, &h.joints, h.head_size).map_err(err)?,
                    source_keyframe: h.source_keyframe,
                })
                .map_err(|e| err(e.to_string()))?;
            }
            track.frames.insert(fr.frame, set);
            if let Some(rows) = &fr.merged {
                track
                    .merged
                    .insert(fr.frame, pose_from(fr.frame, rows, None).map_err(err)?);
            }
        }
        out.entry(r.video_id).or_default().push(track);
    }
    Ok(out)
}

pub fn write_tracks(writer: impl Write, videos: &ByVideo<Track>) -> Result<()> {
    let mut records = Vec::new();
    for (video_id, tracks) in videos {
        for t in tracks {
            records.push(TrackRecord {
                video_id: video_id.clone(),
                track_id: t.track_id,
                capacity: t.capacity,
                members: t
                    .members
                    .iter()
                    .map(|m| MemberRecord {
                        keyframe: m.keyframe,
                        bbox: box_row(&m.bbox),
                        source_id: m.source_id.clone(),
                    })
                    .collect(),
                frames: t
                    .frames
                    .iter()
                    .map(|(&frame, set)| FrameRecord {
                        frame,
                        hypotheses: set
                            .hypotheses
                            .iter()
                            .map(|h| HypothesisRecord {
                                source_keyframe: h.source_keyframe,
                                joints: h.pose.joints.iter().map(joint_row).collect(),
                                head_size: h.pose.head_size.map(quantize),
                            })
                            .collect(),
                        merged: t.merged.get(&frame).map(|p| p.joints.iter().map(joint_row).collect()),
                    })
                    .collect(),
            });
        }
    }
    write_records(writer, SchemaKind::Tracks, &records)
}

pub fn read_ground_truth(reader: impl BufRead) -> Result<BTreeMap<String, GroundTruth>> {
    let mut out: BTreeMap<String, GroundTruth> = BTreeMap::new();
    for (line, r) in read_records::<GtRecord>(reader, SchemaKind::GroundTruth)? {
        let what = format!("ground truth (video {}, frame {})", r.video_id, r.frame);
        let err = |m: String| schema_err(line, &what, m);
        let gt = out.entry(r.video_id.clone()).or_default();
        if gt.frames.contains_key(&r.frame) {
            return Err(err("frame listed twice".into()));
        }
        let people = r
            .people
            .iter()
            .map(|p| {
                Ok(GtPerson {
                    track_id: p.track_id,
                    pose: pose_from(r.frame, &p.joints, Some(p.head_size))?,
                })
            })
            .collect::<std::result::Result<Vec<_>, String>>()
            .map_err(err)?;
        gt.frames.insert(r.frame, people);
        let single = GroundTruth {
            frames: BTreeMap::from([(r.frame, gt.frames[&r.frame].clone())]),
        };
        single.validate().map_err(|e| err(e.to_string()))?;
    }
    Ok(out)
}

pub fn write_ground_truth(writer: impl Write, videos: &BTreeMap<String, GroundTruth>) -> Result<()> {
    let mut records = Vec::new();
    for (video_id, gt) in videos {
        for (&frame, people) in &gt.frames {
            records.push(GtRecord {
                video_id: video_id.clone(),
                frame,
                people: people
                    .iter()
                    .map(|p| GtPersonRecord {
                        track_id: p.track_id,
                        head_size: quantize(p.pose.head_size.unwrap_or(0.0)),
                        joints: p.pose.joints.iter().map(joint_row).collect(),
                    })
                    .collect(),
            });
        }
    }
    write_records(writer, SchemaKind::GroundTruth, &records)
}
