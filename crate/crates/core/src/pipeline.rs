//! End-to-end runs: tracking, merging, filtering and evaluation, plus the
//! parameter sweep over synthetic scenarios.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::metrics::{evaluate, EvalReport, FilterConfig, GroundTruth, PredTrack, VideoEval};
use crate::similarity::OksParams;
use crate::stitcher::{link_framewise, stitch, DEFAULT_GATE};
use crate::stmerge::{baseline_merge_track, merge_track, MergeConfig, MergeMode};
use crate::synth::{generate, recovery_rate, Scenario};
use crate::types::{ClipConfig, Pose, Track, Tracklet};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub clip: ClipConfig,
    pub gate: f64,
    pub oks: OksParams,
    pub merge: MergeConfig,
    pub merge_mode: MergeMode,
    pub filter: FilterConfig,
    /// Per-joint confidence thresholds applied before MOTA; zeros if absent.
    pub thresholds: Option<Vec<f64>>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            clip: ClipConfig::default(),
            gate: DEFAULT_GATE,
            oks: OksParams::default(),
            merge: MergeConfig::default(),
            merge_mode: MergeMode::Full,
            filter: FilterConfig::default(),
            thresholds: None,
        }
    }
}

impl PipelineConfig {
    pub fn thresholds(&self) -> Vec<f64> {
        self.thresholds
            .clone()
            .unwrap_or_else(|| vec![0.0; self.oks.num_joints()])
    }
}

/// Which tracker and merge produce the final poses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Keyframe detections linked frame to frame.
    Framewise,
    Stitched(MergeMode),
}

impl Method {
    pub fn name(&self) -> String {
        match self {
            Method::Framewise => "framewise".into(),
            Method::Stitched(m) => format!("stitch+{}", m.name()),
        }
    }
}

/// Keyframe poses of `tracklets`, grouped by frame in `source_id` order.
pub fn keyframe_detections(tracklets: &[Tracklet]) -> Vec<Vec<Pose>> {
    let len = tracklets.iter().map(|t| t.keyframe + 1).max().unwrap_or(0);
    let mut per_frame = vec![Vec::new(); len];
    let mut sorted: Vec<&Tracklet> = tracklets.iter().collect();
    sorted.sort_by(|a, b| (a.keyframe, &a.source_id).cmp(&(b.keyframe, &b.source_id)));
    for t in sorted {
        if let Some(p) = t.pose_at(t.keyframe) {
            per_frame[t.keyframe].push(p.clone());
        }
    }
    per_frame
}

/// Tracks with hypothesis sets. Single-frame clips are plain detections, so
/// they are linked frame to frame instead of stitched.
pub fn track_video(tracklets: &[Tracklet], cfg: &PipelineConfig) -> Result<Vec<Track>> {
    if cfg.clip.clip_len > 1 {
        stitch(tracklets, &cfg.clip, &cfg.oks, cfg.gate)
    } else {
        cfg.clip.validate()?;
        link_framewise(&keyframe_detections(tracklets), &cfg.oks, cfg.gate)
    }
}

pub fn merge_tracks(tracks: &[Track], mode: MergeMode, cfg: &MergeConfig) -> Result<Vec<Track>> {
    tracks.par_iter().map(|t| merge_track(t, mode, cfg)).collect()
}

/// Merged tracks of one video under `method`.
pub fn run_method(tracklets: &[Tracklet], method: Method, cfg: &PipelineConfig) -> Result<(Vec<Track>, Vec<Track>)> {
    match method {
        Method::Framewise => {
            let tracks = link_framewise(&keyframe_detections(tracklets), &cfg.oks, cfg.gate)?;
            let merged = tracks.iter().map(baseline_merge_track).collect::<Result<Vec<_>>>()?;
            Ok((tracks, merged))
        }
        Method::Stitched(mode) => {
            let tracks = track_video(tracklets, cfg)?;
            let merged = merge_tracks(&tracks, mode, &cfg.merge)?;
            Ok((tracks, merged))
        }
    }
}

pub fn eval_video(gt: &GroundTruth, merged: &[Track], cfg: &PipelineConfig) -> Result<EvalReport> {
    let video = VideoEval {
        gt: gt.clone(),
        predictions: merged.iter().map(PredTrack::from_track).collect(),
    };
    evaluate(&[video], &cfg.thresholds(), &cfg.filter)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub method: String,
    pub recovery: f64,
    pub report: EvalReport,
}

/// Generates `scenario` and scores `method` on it. The scenario's clip
/// settings are used for generation and tracking.
pub fn run_scenario(scenario: &Scenario, method: Method, cfg: &PipelineConfig) -> Result<RunSummary> {
    let video = generate(scenario)?;
    let cfg = PipelineConfig {
        clip: scenario.clip(),
        ..cfg.clone()
    };
    let (tracks, merged) = run_method(&video.tracklets, method, &cfg)?;
    Ok(RunSummary {
        method: method.name(),
        recovery: recovery_rate(&video.gt, &tracks),
        report: eval_video(&video.gt, &merged, &cfg)?,
    })
}

/// Grid of settings for [`sweep`].
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub clip_lens: Vec<usize>,
    pub steps: Vec<usize>,
    pub lambdas: Vec<f64>,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub clip_len: usize,
    pub step: usize,
    pub lambda: f64,
    pub seed: u64,
    pub recovery: f64,
    pub mean_ap: Option<f64>,
    pub mean_mota: Option<f64>,
    pub false_negatives: usize,
    pub false_positives: usize,
    pub id_switches: usize,
}

/// Runs the full pipeline at every grid point that forms a valid clip
/// configuration, for every seed. Output is ordered by clip length, step,
/// lambda and seed regardless of scheduling.
pub fn sweep(base: &Scenario, grid: &SweepGrid, cfg: &PipelineConfig) -> Result<Vec<SweepPoint>> {
    let mut jobs = Vec::new();
    for &clip_len in &grid.clip_lens {
        for &step in &grid.steps {
            if ClipConfig::new(clip_len, step).is_err() {
                continue;
            }
            for &lambda in &grid.lambdas {
                for &seed in &grid.seeds {
                    jobs.push((clip_len, step, lambda, seed));
                }
            }
        }
    }
    jobs.par_iter()
        .map(|&(clip_len, step, lambda, seed)| {
            let scenario = Scenario {
                clip_len,
                step,
                seed,
                ..base.clone()
            };
            let cfg = PipelineConfig {
                merge: MergeConfig { lambda, ..cfg.merge },
                ..cfg.clone()
            };
            let run = run_scenario(&scenario, Method::Stitched(cfg.merge_mode), &cfg)?;
            Ok(SweepPoint {
                clip_len,
                step,
                lambda,
                seed,
                recovery: run.recovery,
                mean_ap: run.report.mean_ap,
                mean_mota: run.report.mean_mota,
                false_negatives: run.report.total_false_negatives(),
                false_positives: run.report.total_false_positives(),
                id_switches: run.report.total_id_switches(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_scenario_scores_perfectly() {
        let s = Scenario {
            n_people: 2,
            video_len: 30,
            miss_rate: 0.0,
            pose_noise: 0.0,
            ..Scenario::default()
        };
        let run = run_scenario(&s, Method::Stitched(MergeMode::Full), &PipelineConfig::default()).unwrap();
        assert_eq!(run.recovery, 1.0);
        assert_eq!(run.report.mean_mota, Some(100.0));
        assert_eq!(run.report.mean_ap, Some(100.0));
    }

    #[test]
    fn sweep_skips_invalid_points_and_is_ordered() {
        let s = Scenario {
            n_people: 2,
            video_len: 20,
            ..Scenario::default()
        };
        let grid = SweepGrid {
            clip_lens: vec![1, 3],
            steps: vec![1, 2],
            lambdas: vec![0.1],
            seeds: vec![0, 1],
        };
        let points = sweep(&s, &grid, &PipelineConfig::default()).unwrap();
        let keys: Vec<(usize, usize, u64)> = points.iter().map(|p| (p.clip_len, p.step, p.seed)).collect();
        assert_eq!(
            keys,
            vec![(1, 1, 0), (1, 1, 1), (3, 1, 0), (3, 1, 1), (3, 2, 0), (3, 2, 1)]
        );
        assert_eq!(points, sweep(&s, &grid, &PipelineConfig::default()).unwrap());
    }
}
