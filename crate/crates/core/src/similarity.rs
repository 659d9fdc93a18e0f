//! Object Keypoint Similarity and OKS-based non-maximum suppression.

use crate::error::{Error, Result};
use crate::types::{Pose, Track, Tracklet, DEFAULT_NUM_JOINTS};

/// COCO keypoint sigmas mapped onto the PoseTrack skeleton. The neck takes
/// the shoulder sigma and the head top takes the ear sigma.
const POSETRACK_SIGMAS: [f64; DEFAULT_NUM_JOINTS] = [
    0.089, 0.087, 0.107, 0.107, 0.087, 0.089, // legs
    0.062, 0.072, 0.079, 0.079, 0.072, 0.062, // arms
    0.079, 0.026, 0.035, // head_bottom, nose, head_top
];

/// How the scalar passed to [`oks`] is turned into the scale `s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleMode {
    /// Scalar is a box area; `s = sqrt(area)`.
    BboxArea,
    /// Scalar is a head size; `s = head_size`.
    HeadSize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OksParams {
    /// Per-joint falloff constants, `κ = 2σ` in COCO terms.
    pub kappa: Vec<f64>,
    pub scale_mode: ScaleMode,
}

impl Default for OksParams {
    fn default() -> Self {
        Self::posetrack(ScaleMode::BboxArea)
    }
}

impl OksParams {
    pub fn new(kappa: Vec<f64>, scale_mode: ScaleMode) -> Result<Self> {
        if kappa.is_empty() || kappa.iter().any(|&k| !(k > 0.0 && k.is_finite())) {
            return Err(Error::InvalidConfig("kappa values must be positive and finite".into()));
        }
        Ok(Self { kappa, scale_mode })
    }

    pub fn posetrack(scale_mode: ScaleMode) -> Self {
        Self {
            kappa: POSETRACK_SIGMAS.iter().map(|s| 2.0 * s).collect(),
            scale_mode,
        }
    }

    pub fn num_joints(&self) -> usize {
        self.kappa.len()
    }

    pub fn with_scale_mode(mut self, scale_mode: ScaleMode) -> Self {
        self.scale_mode = scale_mode;
        self
    }

    fn scale_squared(&self, scale: f64) -> f64 {
        match self.scale_mode {
            ScaleMode::BboxArea => scale,
            ScaleMode::HeadSize => scale * scale,
        }
    }
}

/// Mean over jointly visible joints of `exp(-d² / (2 s² κ²))`.
pub fn oks(a: &Pose, b: &Pose, scale: f64, params: &OksParams) -> Result<f64> {
    let k = params.num_joints();
    for pose in [a, b] {
        if pose.num_joints() != k {
            return Err(Error::SkeletonMismatch {
                expected: k,
                found: pose.num_joints(),
            });
        }
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidConfig(format!("OKS scale must be > 0, got {scale}")));
    }
    let s2 = params.scale_squared(scale);
    let mut total = 0.0;
    let mut count = 0usize;
    for ((ja, jb), kappa) in a.joints.iter().zip(&b.joints).zip(&params.kappa) {
        if !(ja.visible && jb.visible) {
            continue;
        }
        total += (-ja.dist2(jb) / (2.0 * s2 * kappa * kappa)).exp();
        count += 1;
    }
    if count == 0 {
        return Err(Error::NoCommonVisibleJoints);
    }
    Ok(total / count as f64)
}

/// Anything that exposes poses indexed by frame: a single tracklet, or a
/// stitched track with several hypotheses per frame.
pub trait PoseSequence {
    /// Inclusive first and last frame, `None` when empty.
    fn frame_span(&self) -> Option<(usize, usize)>;
    fn poses_at(&self, frame: usize) -> Vec<&Pose>;
}

impl PoseSequence for Tracklet {
    fn frame_span(&self) -> Option<(usize, usize)> {
        if self.poses.is_empty() {
            None
        } else {
            Some((self.first_frame(), self.last_frame()))
        }
    }

    fn poses_at(&self, frame: usize) -> Vec<&Pose> {
        self.pose_at(frame).into_iter().collect()
    }
}

impl PoseSequence for Track {
    fn frame_span(&self) -> Option<(usize, usize)> {
        Some((self.first_frame()?, self.last_frame()?))
    }

    fn poses_at(&self, frame: usize) -> Vec<&Pose> {
        self.frames
            .get(&frame)
            .map(|set| set.hypotheses.iter().map(|h| &h.pose).collect())
            .unwrap_or_default()
    }
}

/// Scale argument for OKS between a tracklet and anything else, derived from
/// its detection box according to the scale mode.
pub fn tracklet_scale(tracklet: &Tracklet, params: &OksParams) -> f64 {
    match params.scale_mode {
        ScaleMode::BboxArea => tracklet.bbox.area(),
        ScaleMode::HeadSize => tracklet
            .pose_at(tracklet.keyframe)
            .and_then(|p| p.head_size)
            .unwrap_or(0.25 * tracklet.bbox.diagonal()),
    }
}

/// Average per-frame OKS between `a` and `b` over the frames they share.
///
/// When `a` holds several poses at one frame the frame's score is their mean
/// OKS against `b`. Frames without a jointly visible joint are skipped; if
/// nothing remains the result is [`Error::NoOverlap`].
pub fn tracklet_similarity<S: PoseSequence + ?Sized>(
    a: &S,
    b: &Tracklet,
    scale: f64,
    params: &OksParams,
) -> Result<f64> {
    let (Some((a0, a1)), Some((b0, b1))) = (a.frame_span(), b.frame_span()) else {
        return Err(Error::NoOverlap);
    };
    let lo = a0.max(b0);
    let hi = a1.min(b1);
    let mut total = 0.0;
    let mut frames = 0usize;
    for frame in lo..=hi {
        let Some(pb) = b.pose_at(frame) else { continue };
        let mut frame_total = 0.0;
        let mut n = 0usize;
        for pa in a.poses_at(frame) {
            match oks(pa, pb, scale, params) {
                Ok(v) => {
                    frame_total += v;
                    n += 1;
                }
                Err(Error::NoCommonVisibleJoints) => {}
                Err(e) => return Err(e),
            }
        }
        if n > 0 {
            total += frame_total / n as f64;
            frames += 1;
        }
    }
    if frames == 0 {
        return Err(Error::NoOverlap);
    }
    Ok(total / frames as f64)
}

/// Greedy OKS non-maximum suppression over poses of one frame.
///
/// Poses are visited by descending mean joint confidence; a pose is kept when
/// its OKS against every already kept pose is below `threshold`. OKS uses the
/// kept pose's scale. Returns indices into `poses` in keep order.
pub fn oks_nms(poses: &[Pose], threshold: f64, scales: &[f64], params: &OksParams) -> Result<Vec<usize>> {
    if scales.len() != poses.len() {
        return Err(Error::InvalidConfig(format!(
            "{} scales for {} poses",
            scales.len(),
            poses.len()
        )));
    }
    let mut order: Vec<usize> = (0..poses.len()).collect();
    order.sort_by(|&i, &j| {
        poses[j]
            .mean_confidence()
            .total_cmp(&poses[i].mean_confidence())
            .then(i.cmp(&j))
    });
    let mut kept: Vec<usize> = Vec::new();
    for cand in order {
        let mut suppressed = false;
        for &k in &kept {
            let sim = match oks(&poses[k], &poses[cand], scales[k], params) {
                Ok(v) => v,
                Err(Error::NoCommonVisibleJoints) => 0.0,
                Err(e) => return Err(e),
            };
            if sim >= threshold {
                suppressed = true;
                break;
            }
        }
        if !suppressed {
            kept.push(cand);
        }
    }
    Ok(kept)
}
