//! Stitching of overlapping tracklets into arbitrary-length tracks.
//!
//! Keyframes are processed in ascending order. At each keyframe the live
//! tracks and the keyframe's tracklets form a cost matrix of negated
//! tracklet similarity; the optimal assignment extends matched tracks with
//! the tracklet poses as new hypotheses and every unmatched tracklet opens a
//! new track.

use std::collections::BTreeSet;

use crate::assignment::{greedy_match, hungarian_solve, CostMatrix};
use crate::error::{Error, Result};
use crate::similarity::{oks, tracklet_scale, tracklet_similarity, OksParams, ScaleMode};
use crate::tube::{keyframe_schedule, schedule_capacity};
use crate::types::{BBox, ClipConfig, Pose, Track, Tracklet};

/// Default similarity floor below which a pair is never matched.
pub const DEFAULT_GATE: f64 = 0.3;

/// Stitches `tracklets` (any order) into tracks.
///
/// The video length is taken as one past the last frame any tracklet covers;
/// every keyframe must belong to [`keyframe_schedule`] for that length and
/// every tracklet must cover its full, truncated window. Tracks are returned
/// in creation order with ids `0, 1, 2, ...`; tracklets of one keyframe are
/// taken in `source_id` order, so the result does not depend on input order
/// when source ids are distinct.
pub fn stitch(tracklets: &[Tracklet], clip: &ClipConfig, params: &OksParams, gate: f64) -> Result<Vec<Track>> {
    clip.validate()?;
    if tracklets.is_empty() {
        return Ok(Vec::new());
    }
    for t in tracklets {
        t.validate()?;
    }
    let video_len = tracklets.iter().map(Tracklet::last_frame).max().unwrap_or(0) + 1;
    check_schedule(tracklets, clip, video_len)?;
    let capacity = schedule_capacity(video_len, clip);

    let mut order: Vec<usize> = (0..tracklets.len()).collect();
    order.sort_by(|&a, &b| {
        let (ta, tb) = (&tracklets[a], &tracklets[b]);
        (ta.keyframe, &ta.source_id, a).cmp(&(tb.keyframe, &tb.source_id, b))
    });

    let mut tracks: Vec<Track> = Vec::new();
    let mut last_keyframe: Vec<usize> = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let keyframe = tracklets[order[start]].keyframe;
        let end = start
            + order[start..]
                .iter()
                .take_while(|&&i| tracklets[i].keyframe == keyframe)
                .count();
        let group: Vec<&Tracklet> = order[start..end].iter().map(|&i| &tracklets[i]).collect();
        start = end;

        // tracks idle for longer than a clip can no longer overlap anything
        let active: Vec<usize> = (0..tracks.len())
            .filter(|&r| keyframe - last_keyframe[r] <= clip.clip_len)
            .collect();
        let mut costs = CostMatrix::new(active.len(), group.len());
        for (row, &r) in active.iter().enumerate() {
            for (col, t) in group.iter().enumerate() {
                match tracklet_similarity(&tracks[r], t, tracklet_scale(t, params), params) {
                    Ok(sim) if sim >= gate => costs.set(row, col, -sim),
                    Ok(_) | Err(Error::NoOverlap) => {}
                    Err(e) => return Err(e),
                }
            }
        }
        let assignment = hungarian_solve(&costs);
        for (col, t) in group.iter().enumerate() {
            match assignment.row_for_col(col) {
                Some(row) => {
                    let r = active[row];
                    tracks[r].absorb(t)?;
                    last_keyframe[r] = keyframe;
                }
                None => {
                    let mut track = Track::new(tracks.len() as u64, capacity);
                    track.absorb(t)?;
                    tracks.push(track);
                    last_keyframe.push(keyframe);
                }
            }
        }
    }
    Ok(tracks)
}

fn check_schedule(tracklets: &[Tracklet], clip: &ClipConfig, video_len: usize) -> Result<()> {
    let schedule: BTreeSet<usize> = keyframe_schedule(video_len, clip).into_iter().collect();
    for t in tracklets {
        if t.clip_len != clip.clip_len {
            return Err(Error::ScheduleViolation(format!(
                "tracklet {} has clip_len {}, expected {}",
                t.source_id, t.clip_len, clip.clip_len
            )));
        }
        if !schedule.contains(&t.keyframe) {
            return Err(Error::ScheduleViolation(format!(
                "tracklet {} keyframe {} is not on the schedule (step {})",
                t.source_id, t.keyframe, clip.step
            )));
        }
        let window = clip.window(t.keyframe, video_len);
        if t.first_frame() != *window.start() || t.last_frame() != *window.end() {
            return Err(Error::ScheduleViolation(format!(
                "tracklet {} covers frames {}..={}, window is {}..={}",
                t.source_id,
                t.first_frame(),
                t.last_frame(),
                window.start(),
                window.end()
            )));
        }
    }
    Ok(())
}

/// OKS scale for a lone pose: its extent area, or a head size proxy.
fn pose_scale(pose: &Pose, params: &OksParams) -> Option<f64> {
    let (_, _, w, h) = pose.extent()?;
    let s = match params.scale_mode {
        ScaleMode::BboxArea => w * h,
        ScaleMode::HeadSize => pose.head_size.unwrap_or(0.25 * w.hypot(h)),
    };
    (s > 0.0).then_some(s)
}

/// Frame-by-frame baseline: greedy OKS matching between consecutive frames.
///
/// `per_frame[f]` holds the detections of frame `f`. A track only continues
/// from the frame directly before, so a missed frame breaks it.
pub fn link_framewise(per_frame: &[Vec<Pose>], params: &OksParams, gate: f64) -> Result<Vec<Track>> {
    let mut tracks: Vec<Track> = Vec::new();
    for (frame, poses) in per_frame.iter().enumerate() {
        let active: Vec<usize> = (0..tracks.len())
            .filter(|&r| frame > 0 && tracks[r].last_frame() == Some(frame - 1))
            .collect();
        let mut costs = CostMatrix::new(active.len(), poses.len());
        for (row, &r) in active.iter().enumerate() {
            let prev = &tracks[r].frames[&(frame - 1)].hypotheses[0].pose;
            let Some(scale) = pose_scale(prev, params) else {
                continue;
            };
            for (col, pose) in poses.iter().enumerate() {
                match oks(prev, pose, scale, params) {
                    Ok(sim) if sim >= gate => costs.set(row, col, -sim),
                    Ok(_) | Err(Error::NoCommonVisibleJoints) => {}
                    Err(e) => return Err(e),
                }
            }
        }
        let assignment = greedy_match(&costs);
        for (col, pose) in poses.iter().enumerate() {
            let detection = single_frame_tracklet(frame, col, pose);
            match assignment.row_for_col(col) {
                Some(row) => tracks[active[row]].absorb(&detection)?,
                None => {
                    let mut track = Track::new(tracks.len() as u64, 1);
                    track.absorb(&detection)?;
                    tracks.push(track);
                }
            }
        }
    }
    Ok(tracks)
}

fn single_frame_tracklet(frame: usize, index: usize, pose: &Pose) -> Tracklet {
    let (x, y, w, h) = pose.extent().unwrap_or((0.0, 0.0, 1.0, 1.0));
    let mut pose = pose.clone();
    pose.frame = frame;
    Tracklet {
        keyframe: frame,
        clip_len: 1,
        bbox: BBox {
            x,
            y,
            w: w.max(1.0),
            h: h.max(1.0),
        },
        poses: vec![pose],
        source_id: format!("f{frame}:{index}"),
    }
}
