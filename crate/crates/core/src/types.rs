//! Domain types shared by every stage of the pipeline.
//!
//! Poses carry a fixed number of joints (15 for the PoseTrack skeleton). A
//! joint flagged invisible has no positional meaning and is skipped by every
//! distance computation.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use crate::error::{Error, Result};

/// Joints in the PoseTrack skeleton.
pub const DEFAULT_NUM_JOINTS: usize = 15;

/// PoseTrack joint names, in index order.
pub const POSETRACK_JOINTS: [&str; DEFAULT_NUM_JOINTS] = [
    "right_ankle",
    "right_knee",
    "right_hip",
    "left_hip",
    "left_knee",
    "left_ankle",
    "right_wrist",
    "right_elbow",
    "right_shoulder",
    "left_shoulder",
    "left_elbow",
    "left_wrist",
    "head_bottom",
    "nose",
    "head_top",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Joint {
    pub x: f64,
    pub y: f64,
    pub confidence: f64,
    pub visible: bool,
}

impl Joint {
    pub fn new(x: f64, y: f64, confidence: f64) -> Self {
        Self {
            x,
            y,
            confidence: confidence.clamp(0.0, 1.0),
            visible: true,
        }
    }

    pub fn invisible() -> Self {
        Self {
            x: 0.0,
            y: 0.0,
            confidence: 0.0,
            visible: false,
        }
    }

    pub fn position(&self) -> [f64; 2] {
        [self.x, self.y]
    }

    pub fn dist2(&self, other: &Joint) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    pub joints: Vec<Joint>,
    pub frame: usize,
    /// Head size in pixels; present on ground truth.
    pub head_size: Option<f64>,
}

impl Pose {
    pub fn new(frame: usize, joints: Vec<Joint>) -> Self {
        Self {
            joints,
            frame,
            head_size: None,
        }
    }

    pub fn with_head_size(mut self, head_size: f64) -> Self {
        self.head_size = Some(head_size);
        self
    }

    pub fn num_joints(&self) -> usize {
        self.joints.len()
    }

    pub fn visible_count(&self) -> usize {
        self.joints.iter().filter(|j| j.visible).count()
    }

    /// Mean confidence over all joints; invisible joints count as zero.
    pub fn mean_confidence(&self) -> f64 {
        if self.joints.is_empty() {
            return 0.0;
        }
        let sum: f64 = self.joints.iter().filter(|j| j.visible).map(|j| j.confidence).sum();
        sum / self.joints.len() as f64
    }

    /// Tight axis-aligned extent of the visible joints. `None` when no joint
    /// is visible. The extent may be degenerate (zero width or height), so it
    /// is returned as raw `(x, y, w, h)` rather than a validated [`BBox`].
    pub fn extent(&self) -> Option<(f64, f64, f64, f64)> {
        let mut visible = self.joints.iter().filter(|j| j.visible);
        let first = visible.next()?;
        let (mut x0, mut y0, mut x1, mut y1) = (first.x, first.y, first.x, first.y);
        for j in visible {
            x0 = x0.min(j.x);
            y0 = y0.min(j.y);
            x1 = x1.max(j.x);
            y1 = y1.max(j.y);
        }
        Some((x0, y0, x1 - x0, y1 - y0))
    }

    pub fn extent_area(&self) -> f64 {
        self.extent().map(|(_, _, w, h)| w * h).unwrap_or(0.0)
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Pose {
        let joints = self
            .joints
            .iter()
            .map(|j| Joint {
                x: j.x + dx,
                y: j.y + dy,
                ..*j
            })
            .collect();
        Pose {
            joints,
            frame: self.frame,
            head_size: self.head_size,
        }
    }
}

/// Axis-aligned box, top-left corner plus size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        if !(w > 0.0 && h > 0.0) || !x.is_finite() || !y.is_finite() {
            return Err(Error::InvalidBox { w, h });
        }
        Ok(Self { x, y, w, h })
    }

    pub fn center(&self) -> [f64; 2] {
        [self.x + self.w / 2.0, self.y + self.h / 2.0]
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn diagonal(&self) -> f64 {
        self.w.hypot(self.h)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x && x <= self.x + self.w && y >= self.y && y <= self.y + self.h
    }
}

/// Clip length `|C|` and keyframe step `S`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ClipConfig {
    pub clip_len: usize,
    pub step: usize,
}

impl Default for ClipConfig {
    fn default() -> Self {
        Self { clip_len: 9, step: 1 }
    }
}

impl ClipConfig {
    pub fn new(clip_len: usize, step: usize) -> Result<Self> {
        let cfg = Self { clip_len, step };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.clip_len == 0 || self.clip_len.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "clip_len must be odd and >= 1, got {}",
                self.clip_len
            )));
        }
        if self.step == 0 || self.step > self.clip_len {
            return Err(Error::InvalidConfig(format!(
                "step must lie in 1..=clip_len ({}), got {}",
                self.clip_len, self.step
            )));
        }
        Ok(())
    }

    /// Half window `δ = (|C| - 1) / 2`.
    pub fn half_window(&self) -> usize {
        (self.clip_len - 1) / 2
    }

    /// Whether consecutive clips share at least one frame.
    pub fn overlapping(&self) -> bool {
        self.step < self.clip_len
    }

    /// Frames of the clip centered on `keyframe`, truncated to the video.
    pub fn window(&self, keyframe: usize, video_len: usize) -> RangeInclusive<usize> {
        let delta = self.half_window();
        let lo = keyframe.saturating_sub(delta);
        let hi = (keyframe + delta).min(video_len.saturating_sub(1));
        lo..=hi
    }
}

/// Poses of one person propagated from a single keyframe detection.
#[derive(Debug, Clone, PartialEq)]
pub struct Tracklet {
    pub keyframe: usize,
    pub clip_len: usize,
    /// Keyframe detection box, before enlargement.
    pub bbox: BBox,
    /// One pose per frame, consecutive, covering the (possibly truncated) clip.
    pub poses: Vec<Pose>,
    pub source_id: String,
}

impl Tracklet {
    pub fn first_frame(&self) -> usize {
        self.poses.first().map(|p| p.frame).unwrap_or(self.keyframe)
    }

    pub fn last_frame(&self) -> usize {
        self.poses.last().map(|p| p.frame).unwrap_or(self.keyframe)
    }

    pub fn pose_at(&self, frame: usize) -> Option<&Pose> {
        let first = self.first_frame();
        if frame < first {
            return None;
        }
        self.poses.get(frame - first)
    }

    /// Checks the structural invariants: odd clip length, consecutive frames
    /// inside the keyframe-centered window, and one skeleton size throughout.
    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| Error::InvalidTracklet {
            source_id: self.source_id.clone(),
            reason,
        };
        if self.clip_len == 0 || self.clip_len.is_multiple_of(2) {
            return Err(fail(format!("clip_len {} is not odd", self.clip_len)));
        }
        if self.poses.is_empty() {
            return Err(fail("no poses".into()));
        }
        if self.poses.len() > self.clip_len {
            return Err(fail(format!(
                "{} poses exceed clip_len {}",
                self.poses.len(),
                self.clip_len
            )));
        }
        let delta = (self.clip_len - 1) / 2;
        let k = self.poses[0].num_joints();
        for (i, pose) in self.poses.iter().enumerate() {
            if pose.frame != self.poses[0].frame + i {
                return Err(fail("pose frames are not consecutive".into()));
            }
            if pose.frame.abs_diff(self.keyframe) > delta {
                return Err(fail(format!(
                    "frame {} lies outside the window of keyframe {}",
                    pose.frame, self.keyframe
                )));
            }
            if pose.num_joints() != k {
                return Err(Error::SkeletonMismatch {
                    expected: k,
                    found: pose.num_joints(),
                });
            }
        }
        if self.pose_at(self.keyframe).is_none() {
            return Err(fail("keyframe pose missing".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub pose: Pose,
    pub source_keyframe: usize,
}

/// All pose estimates for one person at one frame, one per covering keyframe.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisSet {
    pub hypotheses: Vec<Hypothesis>,
    /// Largest number of hypotheses the keyframe schedule can produce.
    pub capacity: usize,
}

impl HypothesisSet {
    pub fn new(capacity: usize) -> Self {
        Self {
            hypotheses: Vec::new(),
            capacity,
        }
    }

    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }

    pub fn frame(&self) -> Option<usize> {
        self.hypotheses.first().map(|h| h.pose.frame)
    }

    pub fn push(&mut self, hypothesis: Hypothesis) -> Result<()> {
        if let Some(frame) = self.frame() {
            if hypothesis.pose.frame != frame {
                return Err(Error::ScheduleViolation(format!(
                    "hypothesis for frame {} added to set of frame {}",
                    hypothesis.pose.frame, frame
                )));
            }
        }
        if self
            .hypotheses
            .iter()
            .any(|h| h.source_keyframe == hypothesis.source_keyframe)
        {
            return Err(Error::ScheduleViolation(format!(
                "second hypothesis from keyframe {} at frame {}",
                hypothesis.source_keyframe, hypothesis.pose.frame
            )));
        }
        if self.hypotheses.len() >= self.capacity {
            return Err(Error::ScheduleViolation(format!(
                "frame {} exceeds hypothesis capacity {}",
                hypothesis.pose.frame, self.capacity
            )));
        }
        self.hypotheses.push(hypothesis);
        Ok(())
    }
}

/// Provenance of one tracklet merged into a track.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackMember {
    pub keyframe: usize,
    pub bbox: BBox,
    pub source_id: String,
}

/// An arbitrary-length identity built by stitching tracklets.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub track_id: u64,
    pub capacity: usize,
    pub frames: BTreeMap<usize, HypothesisSet>,
    /// Final per-frame pose, filled in by a merge stage.
    pub merged: BTreeMap<usize, Pose>,
    pub members: Vec<TrackMember>,
}

impl Track {
    pub fn new(track_id: u64, capacity: usize) -> Self {
        Self {
            track_id,
            capacity,
            frames: BTreeMap::new(),
            merged: BTreeMap::new(),
            members: Vec::new(),
        }
    }

    pub fn first_frame(&self) -> Option<usize> {
        self.frames.keys().next().copied()
    }

    pub fn last_frame(&self) -> Option<usize> {
        self.frames.keys().next_back().copied()
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn hypothesis_count(&self) -> usize {
        self.frames.values().map(HypothesisSet::len).sum()
    }

    /// Whether frame keys form one contiguous range.
    pub fn is_contiguous(&self) -> bool {
        match (self.first_frame(), self.last_frame()) {
            (Some(a), Some(b)) => b - a + 1 == self.frames.len(),
            _ => true,
        }
    }

    /// Detection box of the member whose keyframe is closest to `frame`.
    pub fn nearest_box(&self, frame: usize) -> Option<BBox> {
        self.members
            .iter()
            .min_by_key(|m| (m.keyframe.abs_diff(frame), m.keyframe))
            .map(|m| m.bbox)
    }

    pub fn member_for_keyframe(&self, keyframe: usize) -> Option<&TrackMember> {
        self.members.iter().find(|m| m.keyframe == keyframe)
    }

    /// Adds every pose of `tracklet` as a hypothesis sourced from its keyframe.
    pub fn absorb(&mut self, tracklet: &Tracklet) -> Result<()> {
        for pose in &tracklet.poses {
            self.frames
                .entry(pose.frame)
                .or_insert_with(|| HypothesisSet::new(self.capacity))
                .push(Hypothesis {
                    pose: pose.clone(),
                    source_keyframe: tracklet.keyframe,
                })?;
        }
        self.members.push(TrackMember {
            keyframe: tracklet.keyframe,
            bbox: tracklet.bbox,
            source_id: tracklet.source_id.clone(),
        });
        Ok(())
    }
}
