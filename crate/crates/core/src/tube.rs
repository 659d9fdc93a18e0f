//! Tube geometry: box enlargement and keyframe scheduling.

use crate::types::{BBox, ClipConfig};

/// Default tube enlargement, 25% along both dimensions.
pub const TUBE_ENLARGEMENT: f64 = 0.25;

/// Grows `bbox` by `factor` along both dimensions, keeping its center fixed.
///
/// # Panics
/// If `factor` is negative or not finite.
pub fn enlarge_bbox(bbox: &BBox, factor: f64) -> BBox {
    assert!(factor >= 0.0 && factor.is_finite(), "factor must be >= 0");
    let [cx, cy] = bbox.center();
    let w = bbox.w * (1.0 + factor);
    let h = bbox.h * (1.0 + factor);
    BBox {
        x: cx - w / 2.0,
        y: cy - h / 2.0,
        w,
        h,
    }
}

/// Keyframes `0, S, 2S, ...` below `video_len`.
///
/// When the step exceeds `δ + 1` the trailing frames can fall outside every
/// window; a final keyframe at `video_len - 1 - δ` is then appended so the
/// whole video stays covered. Windows are truncated at the video bounds.
pub fn keyframe_schedule(video_len: usize, cfg: &ClipConfig) -> Vec<usize> {
    if video_len == 0 {
        return Vec::new();
    }
    let mut keyframes: Vec<usize> = (0..video_len).step_by(cfg.step).collect();
    let delta = cfg.half_window();
    let last = *keyframes.last().expect("video_len >= 1");
    if video_len - 1 - last > delta {
        keyframes.push(video_len - 1 - delta);
    }
    keyframes
}

/// Most keyframe windows that can contain a single frame: `⌊(|C|-1)/S⌋ + 1`.
pub fn hypothesis_capacity(cfg: &ClipConfig) -> usize {
    (cfg.clip_len - 1) / cfg.step + 1
}

/// Largest number of windows covering any one frame of this particular
/// schedule. Differs from [`hypothesis_capacity`] on short videos and when a
/// trailing keyframe was appended.
pub fn schedule_capacity(video_len: usize, cfg: &ClipConfig) -> usize {
    let mut counts = vec![0usize; video_len];
    for k in keyframe_schedule(video_len, cfg) {
        for f in cfg.window(k, video_len) {
            counts[f] += 1;
        }
    }
    counts.into_iter().max().unwrap_or(0)
}
