//! Per-joint AP and MOTA on PoseTrack-style annotations.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::types::{Joint, Pose, Track, POSETRACK_JOINTS};

pub const DEFAULT_MIN_TRACK_LEN: usize = 5;
pub const DEFAULT_MIN_BOX_AREA: f64 = 3200.0;
/// A predicted joint matches if it lies within this fraction of the head size.
pub const MATCH_RADIUS: f64 = 0.5;
/// Candidate thresholds `0.00, 0.05, ..., 0.95`.
pub const THRESHOLD_GRID_STEPS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct GtPerson {
    pub track_id: u64,
    /// Must carry a positive head size.
    pub pose: Pose,
}

/// Annotations of one video, keyed by frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroundTruth {
    pub frames: BTreeMap<usize, Vec<GtPerson>>,
}

impl GroundTruth {
    pub fn validate(&self) -> Result<()> {
        for (&frame, people) in &self.frames {
            let mut ids: Vec<u64> = people.iter().map(|p| p.track_id).collect();
            ids.sort_unstable();
            if ids.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidConfig(format!("duplicate track id in frame {frame}")));
            }
            if people.iter().any(|p| !p.pose.head_size.is_some_and(|h| h > 0.0)) {
                return Err(Error::InvalidConfig(format!("missing head size in frame {frame}")));
            }
        }
        Ok(())
    }

    pub fn person_frames(&self) -> usize {
        self.frames.values().map(Vec::len).sum()
    }
}

/// A predicted identity with one final pose per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PredTrack {
    pub track_id: u64,
    pub poses: BTreeMap<usize, Pose>,
}

impl PredTrack {
    /// Uses the merged poses of `track`.
    pub fn from_track(track: &Track) -> Self {
        Self {
            track_id: track.track_id,
            poses: track.merged.clone(),
        }
    }
}

/// One video's ground truth and predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoEval {
    pub gt: GroundTruth,
    pub predictions: Vec<PredTrack>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    pub min_len: usize,
    pub min_area: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            min_len: DEFAULT_MIN_TRACK_LEN,
            min_area: DEFAULT_MIN_BOX_AREA,
        }
    }
}

/// Drops joints below their threshold, then poses whose joint extent covers
/// less than `min_area` (or no joint at all), then tracks left with fewer
/// than `min_len` frames.
pub fn filter_predictions(tracks: &[PredTrack], thresholds: &[f64], cfg: &FilterConfig) -> Result<Vec<PredTrack>> {
    let mut out = Vec::with_capacity(tracks.len());
    for track in tracks {
        let mut poses = BTreeMap::new();
        for (&frame, pose) in &track.poses {
            if pose.num_joints() != thresholds.len() {
                return Err(Error::SkeletonMismatch {
                    expected: thresholds.len(),
                    found: pose.num_joints(),
                });
            }
            let mut pose = pose.clone();
            for (j, &t) in pose.joints.iter_mut().zip(thresholds) {
                if j.visible && j.confidence < t {
                    *j = Joint::invisible();
                }
            }
            if pose.visible_count() > 0 && pose.extent_area() >= cfg.min_area {
                poses.insert(frame, pose);
            }
        }
        if poses.len() >= cfg.min_len {
            out.push(PredTrack {
                track_id: track.track_id,
                poses,
            });
        }
    }
    Ok(out)
}

/// Greedy one-to-one matching of joint `joint` in one frame, closest pairs
/// first. A pair qualifies when both joints are visible and their distance is
/// at most [`MATCH_RADIUS`] times the ground-truth head size. Ties go to the
/// lower (prediction, ground truth) index pair.
///
/// Returns `(prediction index, ground-truth index)` pairs.
pub fn match_joints(pred: &[&Pose], gt: &[GtPerson], joint: usize) -> Vec<(usize, usize)> {
    let mut candidates = Vec::new();
    for (g, person) in gt.iter().enumerate() {
        let gj = &person.pose.joints[joint];
        if !gj.visible {
            continue;
        }
        let radius = MATCH_RADIUS * person.pose.head_size.unwrap_or(0.0);
        for (p, pose) in pred.iter().enumerate() {
            let pj = &pose.joints[joint];
            if !pj.visible {
                continue;
            }
            let d = pj.dist2(gj).sqrt();
            if d <= radius {
                candidates.push((d, p, g));
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut pred_used = vec![false; pred.len()];
    let mut gt_used = vec![false; gt.len()];
    let mut pairs = Vec::new();
    for (_, p, g) in candidates {
        if !pred_used[p] && !gt_used[g] {
            pred_used[p] = true;
            gt_used[g] = true;
            pairs.push((p, g));
        }
    }
    pairs.sort_unstable();
    pairs
}

/// Predictions of one video regrouped by frame as `(track id, pose)`.
fn predictions_by_frame(tracks: &[PredTrack]) -> BTreeMap<usize, Vec<(u64, &Pose)>> {
    let mut frames: BTreeMap<usize, Vec<(u64, &Pose)>> = BTreeMap::new();
    for t in tracks {
        for (&f, pose) in &t.poses {
            frames.entry(f).or_default().push((t.track_id, pose));
        }
    }
    frames
}

fn num_joints(videos: &[VideoEval]) -> Option<usize> {
    videos
        .iter()
        .flat_map(|v| v.gt.frames.values().flatten().map(|p| p.pose.num_joints()))
        .chain(videos.iter().flat_map(|v| {
            v.predictions
                .iter()
                .flat_map(|t| t.poses.values().map(Pose::num_joints))
        }))
        .next()
}

fn check_joints(videos: &[VideoEval], k: usize) -> Result<()> {
    for v in videos {
        let gt = v.gt.frames.values().flatten().map(|p| p.pose.num_joints());
        let pred = v
            .predictions
            .iter()
            .flat_map(|t| t.poses.values().map(Pose::num_joints));
        if let Some(found) = gt.chain(pred).find(|&n| n != k) {
            return Err(Error::SkeletonMismatch { expected: k, found });
        }
    }
    Ok(())
}

/// Area under the precision-recall curve sampled at 101 recall levels, in
/// percent. `scored` holds `(confidence, is_true_positive)` per prediction.
/// `None` when there is no ground truth.
pub fn average_precision(scored: &[(f64, bool)], num_gt: usize) -> Option<f64> {
    if num_gt == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| scored[b].0.total_cmp(&scored[a].0).then(a.cmp(&b)));
    let mut precision = Vec::with_capacity(order.len());
    let mut recall = Vec::with_capacity(order.len());
    let mut tp = 0usize;
    for (rank, &i) in order.iter().enumerate() {
        if scored[i].1 {
            tp += 1;
        }
        precision.push(tp as f64 / (rank + 1) as f64);
        recall.push(tp as f64 / num_gt as f64);
    }
    // precision envelope: best precision at this recall or beyond
    for i in (0..precision.len().saturating_sub(1)).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    let mut sum = 0.0;
    for level in 0..=100 {
        let r = level as f64 / 100.0;
        let idx = recall.partition_point(|&x| x < r - 1e-12);
        if idx < precision.len() {
            sum += precision[idx];
        }
    }
    Some(100.0 * sum / 101.0)
}

/// Per-joint AP over all videos, in percent. Joints without any ground truth
/// are `None`.
pub fn compute_ap(videos: &[VideoEval]) -> Result<Vec<Option<f64>>> {
    let Some(k) = num_joints(videos) else {
        return Ok(Vec::new());
    };
    check_joints(videos, k)?;
    let mut out = Vec::with_capacity(k);
    for joint in 0..k {
        let mut scored = Vec::new();
        let mut num_gt = 0;
        for v in videos {
            let pred = predictions_by_frame(&v.predictions);
            for (frame, poses) in &pred {
                let gt = v.gt.frames.get(frame).map(Vec::as_slice).unwrap_or(&[]);
                let refs: Vec<&Pose> = poses.iter().map(|(_, p)| *p).collect();
                let pairs = match_joints(&refs, gt, joint);
                for (p, pose) in refs.iter().enumerate() {
                    if pose.joints[joint].visible {
                        let tp = pairs.iter().any(|&(pp, _)| pp == p);
                        scored.push((pose.joints[joint].confidence, tp));
                    }
                }
            }
            num_gt +=
                v.gt.frames
                    .values()
                    .flatten()
                    .filter(|p| p.pose.joints[joint].visible)
                    .count();
        }
        out.push(average_precision(&scored, num_gt));
    }
    Ok(out)
}

/// Error counts of one joint type.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct MotaCounts {
    pub num_gt: usize,
    pub false_negatives: usize,
    pub false_positives: usize,
    pub id_switches: usize,
}

impl MotaCounts {
    /// `1 - (FN + FP + IDSW) / GT`, `None` without ground truth.
    pub fn mota(&self) -> Option<f64> {
        (self.num_gt > 0)
            .then(|| 1.0 - (self.false_negatives + self.false_positives + self.id_switches) as f64 / self.num_gt as f64)
    }
}

/// Per-joint MOTA counts over all videos. An identity switch is a matched
/// ground-truth joint whose predicted track differs from the one it was
/// matched to at its previous matched frame.
pub fn compute_mota(videos: &[VideoEval]) -> Result<Vec<MotaCounts>> {
    let Some(k) = num_joints(videos) else {
        return Ok(Vec::new());
    };
    check_joints(videos, k)?;
    let mut counts = vec![MotaCounts::default(); k];
    for v in videos {
        let pred = predictions_by_frame(&v.predictions);
        let mut last_match: HashMap<(u64, usize), u64> = HashMap::new();
        let frames: std::collections::BTreeSet<usize> = v.gt.frames.keys().chain(pred.keys()).copied().collect();
        for frame in frames {
            let gt = v.gt.frames.get(&frame).map(Vec::as_slice).unwrap_or(&[]);
            let poses = pred.get(&frame).map(Vec::as_slice).unwrap_or(&[]);
            let refs: Vec<&Pose> = poses.iter().map(|(_, p)| *p).collect();
            for (joint, c) in counts.iter_mut().enumerate() {
                let pairs = match_joints(&refs, gt, joint);
                let gt_visible = gt.iter().filter(|p| p.pose.joints[joint].visible).count();
                let pred_visible = refs.iter().filter(|p| p.joints[joint].visible).count();
                c.num_gt += gt_visible;
                c.false_negatives += gt_visible - pairs.len();
                c.false_positives += pred_visible - pairs.len();
                for &(p, g) in &pairs {
                    let pred_id = poses[p].0;
                    if let Some(prev) = last_match.insert((gt[g].track_id, joint), pred_id) {
                        if prev != pred_id {
                            c.id_switches += 1;
                        }
                    }
                }
            }
        }
    }
    Ok(counts)
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let defined: Vec<f64> = values.flatten().collect();
    (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
}

/// Evaluation summary. AP and MOTA are in percent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub joints: Vec<String>,
    pub ap: Vec<Option<f64>>,
    pub mean_ap: Option<f64>,
    pub mota: Vec<Option<f64>>,
    pub mean_mota: Option<f64>,
    pub counts: Vec<MotaCounts>,
}

impl EvalReport {
    pub fn total_false_negatives(&self) -> usize {
        self.counts.iter().map(|c| c.false_negatives).sum()
    }

    pub fn total_false_positives(&self) -> usize {
        self.counts.iter().map(|c| c.false_positives).sum()
    }

    pub fn total_id_switches(&self) -> usize {
        self.counts.iter().map(|c| c.id_switches).sum()
    }

    /// Fixed-width text table, one row per joint plus the mean.
    pub fn table(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.1}"));
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<12} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7}",
            "joint", "AP", "MOTA", "GT", "FN", "FP", "IDSW"
        );
        for (i, name) in self.joints.iter().enumerate() {
            let c = &self.counts[i];
            let _ = writeln!(
                s,
                "{:<12} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7}",
                name,
                fmt(self.ap[i]),
                fmt(self.mota[i]),
                c.num_gt,
                c.false_negatives,
                c.false_positives,
                c.id_switches
            );
        }
        let _ = writeln!(
            s,
            "{:<12} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7}",
            "mean",
            fmt(self.mean_ap),
            fmt(self.mean_mota),
            self.counts.iter().map(|c| c.num_gt).sum::<usize>(),
            self.total_false_negatives(),
            self.total_false_positives(),
            self.total_id_switches()
        );
        s
    }
}

/// Full evaluation: filtering without thresholds for AP, with `thresholds`
/// for MOTA.
pub fn evaluate(videos: &[VideoEval], thresholds: &[f64], cfg: &FilterConfig) -> Result<EvalReport> {
    let k = thresholds.len();
    let mut unthresholded = Vec::with_capacity(videos.len());
    let mut thresholded = Vec::with_capacity(videos.len());
    for v in videos {
        unthresholded.push(VideoEval {
            gt: v.gt.clone(),
            predictions: filter_predictions(&v.predictions, &vec![0.0; k], cfg)?,
        });
        thresholded.push(VideoEval {
            gt: v.gt.clone(),
            predictions: filter_predictions(&v.predictions, thresholds, cfg)?,
        });
    }
    let mut ap = compute_ap(&unthresholded)?;
    let mut counts = compute_mota(&thresholded)?;
    ap.resize(k, None);
    counts.resize(k, MotaCounts::default());
    let mota: Vec<Option<f64>> = counts.iter().map(|c| c.mota().map(|m| 100.0 * m)).collect();
    let joints = (0..k)
        .map(|j| {
            if k == POSETRACK_JOINTS.len() {
                POSETRACK_JOINTS[j].to_string()
            } else {
                format!("joint{j}")
            }
        })
        .collect();
    Ok(EvalReport {
        joints,
        mean_ap: mean_defined(ap.iter().copied()),
        mean_mota: mean_defined(mota.iter().copied()),
        ap,
        mota,
        counts,
    })
}

/// Per-joint confidence thresholds chosen from the grid `0.00..=0.95` to
/// maximize that joint's MOTA on `videos`, other joints unthresholded. Ties
/// keep the lower threshold.
pub fn learn_thresholds(videos: &[VideoEval], num_joints: usize, cfg: &FilterConfig) -> Result<Vec<f64>> {
    let mut best = vec![0.0; num_joints];
    for joint in 0..num_joints {
        let mut best_mota = f64::NEG_INFINITY;
        for step in 0..THRESHOLD_GRID_STEPS {
            let t = step as f64 * 0.05;
            let mut thresholds = vec![0.0; num_joints];
            thresholds[joint] = t;
            let filtered = videos
                .iter()
                .map(|v| {
                    Ok(VideoEval {
                        gt: v.gt.clone(),
                        predictions: filter_predictions(&v.predictions, &thresholds, cfg)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let m = compute_mota(&filtered)?
                .get(joint)
                .and_then(MotaCounts::mota)
                .unwrap_or(f64::NEG_INFINITY);
            if m > best_mota {
                best_mota = m;
                best[joint] = t;
            }
        }
    }
    Ok(best)
}
