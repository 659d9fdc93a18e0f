//! Synthetic videos with known identities: ground-truth walkers, keyframe
//! detections with misses, and noisy tracklets that can borrow a neighbor's
//! joints for part of their window.
//!
//! Every random draw is keyed by `(seed, purpose, keyframe, person[, frame])`,
//! so detection misses and per-frame noise do not depend on the clip length.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{GroundTruth, GtPerson, MATCH_RADIUS};
use crate::tube::{enlarge_bbox, keyframe_schedule, TUBE_ENLARGEMENT};
use crate::types::{BBox, ClipConfig, Joint, Pose, Track, Tracklet, DEFAULT_NUM_JOINTS};

/// Standing pose in head units relative to the pelvis, PoseTrack joint order.
const TEMPLATE: [(f64, f64); DEFAULT_NUM_JOINTS] = [
    (-0.5, 3.5),
    (-0.5, 2.0),
    (-0.5, 0.3),
    (0.5, 0.3),
    (0.5, 2.0),
    (0.5, 3.5),
    (-1.2, 0.2),
    (-1.1, -1.2),
    (-0.9, -2.5),
    (0.9, -2.5),
    (1.1, -1.2),
    (1.2, 0.2),
    (0.0, -2.9),
    (0.0, -3.4),
    (0.0, -4.0),
];

/// Horizontal limb swing in head units, right side; the left side mirrors it.
const SWING: [f64; DEFAULT_NUM_JOINTS] = [
    0.3, 0.15, 0.0, 0.0, -0.15, -0.3, -0.25, -0.12, 0.0, 0.0, 0.12, 0.25, 0.0, 0.0, 0.0,
];

const ORIGIN: (f64, f64) = (200.0, 200.0);

const TAG_PERSON: u64 = 1;
const TAG_MISS: u64 = 2;
const TAG_SWAP: u64 = 3;
const TAG_NOISE: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Motion {
    /// Side-by-side walkers swaying around fixed lanes with a slow drift.
    Lanes,
    /// Walkers in alternating directions on closely stacked rows, passing
    /// each other mid-video.
    Crossing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub video_id: String,
    pub n_people: usize,
    pub video_len: usize,
    pub head_size: f64,
    /// Probability that a person is not detected at a keyframe.
    pub miss_rate: f64,
    /// Standard deviation of per-joint Gaussian noise, pixels.
    pub pose_noise: f64,
    /// Probability that a tracklet takes a neighbor's joints for part of its
    /// window.
    pub swap_rate: f64,
    pub seed: u64,
    pub motion: Motion,
    /// Walking speed for crossing motion, drift bound for lanes, px/frame.
    pub speed: f64,
    /// Sway amplitude, pixels.
    pub sway: f64,
    /// Lane spacing for lanes, row spacing for crossing, head units.
    pub spacing: f64,
    pub clip_len: usize,
    pub step: usize,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            video_id: "synth".into(),
            n_people: 5,
            video_len: 100,
            head_size: 30.0,
            miss_rate: 0.3,
            pose_noise: 2.0,
            swap_rate: 0.0,
            seed: 0,
            motion: Motion::Lanes,
            speed: 0.5,
            sway: 4.0,
            spacing: 4.0,
            clip_len: 9,
            step: 1,
        }
    }
}

impl Scenario {
    pub fn clip(&self) -> ClipConfig {
        ClipConfig {
            clip_len: self.clip_len,
            step: self.step,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.clip().validate()?;
        let prob = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} must lie in [0, 1], got {v}")))
            }
        };
        prob("miss_rate", self.miss_rate)?;
        prob("swap_rate", self.swap_rate)?;
        if !(self.pose_noise >= 0.0 && self.pose_noise.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "pose_noise must be >= 0, got {}",
                self.pose_noise
            )));
        }
        if self.head_size.is_nan() || self.head_size <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "head_size must be > 0, got {}",
                self.head_size
            )));
        }
        if self.video_len == 0 {
            return Err(Error::InvalidConfig("video_len must be >= 1".into()));
        }
        Ok(())
    }
}

/// What a generated tracklet really contains.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrackletTruth {
    pub person: usize,
    /// Frames whose pose was taken from `partner`.
    pub swapped_frames: Vec<usize>,
    pub partner: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthVideo {
    pub video_id: String,
    pub video_len: usize,
    pub head_size: f64,
    pub gt: GroundTruth,
    pub tracklets: Vec<Tracklet>,
    /// Parallel to `tracklets`.
    pub truth: Vec<TrackletTruth>,
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn rng_for(seed: u64, parts: &[u64]) -> ChaCha8Rng {
    let key = parts.iter().fold(mix(seed), |acc, &p| mix(acc ^ p));
    ChaCha8Rng::seed_from_u64(key)
}

struct Walker {
    start: (f64, f64),
    velocity: f64,
    sway_period: f64,
    sway_phase: f64,
    gait_period: f64,
    gait_phase: f64,
    scale: f64,
}

impl Walker {
    fn sample(s: &Scenario, person: usize) -> Self {
        let mut rng = rng_for(s.seed, &[TAG_PERSON, person as u64]);
        let head = s.head_size;
        let (start, velocity) = match s.motion {
            Motion::Lanes => (
                (ORIGIN.0 + person as f64 * s.spacing * head, ORIGIN.1),
                rng.random_range(-1.0..=1.0) * s.speed,
            ),
            Motion::Crossing => {
                let direction = if person.is_multiple_of(2) { 1.0 } else { -1.0 };
                let meet = s.video_len as f64 * rng.random_range(0.3..0.7);
                let center = ORIGIN.0 + 6.0 * head;
                (
                    (
                        center - direction * s.speed * meet,
                        ORIGIN.1 + person as f64 * s.spacing * head,
                    ),
                    direction * s.speed,
                )
            }
        };
        Self {
            start,
            velocity,
            sway_period: rng.random_range(20.0..40.0),
            sway_phase: rng.random_range(0.0..TAU),
            gait_period: rng.random_range(12.0..20.0),
            gait_phase: rng.random_range(0.0..TAU),
            scale: rng.random_range(0.9..1.1),
        }
    }

    fn pose(&self, frame: usize, head: f64, sway: f64) -> Pose {
        let t = frame as f64;
        let sway_arg = TAU * t / self.sway_period + self.sway_phase;
        let cx = self.start.0 + self.velocity * t + sway * sway_arg.sin();
        let cy = self.start.1 + 0.3 * sway * sway_arg.cos();
        let gait = (TAU * t / self.gait_period + self.gait_phase).sin();
        let unit = head * self.scale;
        let joints = TEMPLATE
            .iter()
            .zip(SWING)
            .map(|(&(x, y), swing)| Joint::new(cx + (x + swing * gait) * unit, cy + y * unit, 1.0))
            .collect();
        Pose::new(frame, joints).with_head_size(head)
    }
}

fn bbox_of(pose: &Pose) -> BBox {
    let (x, y, w, h) = pose.extent().expect("ground-truth poses are fully visible");
    BBox {
        x,
        y,
        w: w.max(1.0),
        h: h.max(1.0),
    }
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

fn pelvis(pose: &Pose) -> [f64; 2] {
    let (a, b) = (&pose.joints[2], &pose.joints[3]);
    [(a.x + b.x) / 2.0, (a.y + b.y) / 2.0]
}

/// Ground truth, tracklets and their truth labels for `s`.
pub fn generate(s: &Scenario) -> Result<SynthVideo> {
    s.validate()?;
    let clip = s.clip();
    let walkers: Vec<Walker> = (0..s.n_people).map(|i| Walker::sample(s, i)).collect();
    let gt_poses: Vec<Vec<Pose>> = walkers
        .iter()
        .map(|w| (0..s.video_len).map(|f| w.pose(f, s.head_size, s.sway)).collect())
        .collect();

    let mut gt = GroundTruth::default();
    for f in 0..s.video_len {
        let people = gt_poses
            .iter()
            .enumerate()
            .map(|(i, poses)| GtPerson {
                track_id: i as u64,
                pose: poses[f].clone(),
            })
            .collect();
        gt.frames.insert(f, people);
    }

    let mut tracklets = Vec::new();
    let mut truth = Vec::new();
    for k in keyframe_schedule(s.video_len, &clip) {
        for person in 0..s.n_people {
            let mut miss = rng_for(s.seed, &[TAG_MISS, k as u64, person as u64]);
            if miss.random::<f64>() < s.miss_rate {
                continue;
            }
            let window = clip.window(k, s.video_len);
            let (swapped, partner) = draw_swap(s, &gt_poses, k, person, *window.start(), *window.end());
            let bbox = bbox_of(&gt_poses[person][k]);
            let tube = enlarge_bbox(&bbox, TUBE_ENLARGEMENT);
            let poses = window
                .map(|f| {
                    let is_swapped = swapped.contains(&f);
                    let source = if is_swapped { partner.unwrap_or(person) } else { person };
                    noisy_pose(s, &gt_poses[source][f], k, person, f, (!is_swapped).then_some(&tube))
                })
                .collect();
            tracklets.push(Tracklet {
                keyframe: k,
                clip_len: clip.clip_len,
                bbox,
                poses,
                source_id: format!("{}:{k}:{person}", s.video_id),
            });
            truth.push(TrackletTruth {
                person,
                swapped_frames: swapped,
                partner,
            });
        }
    }
    Ok(SynthVideo {
        video_id: s.video_id.clone(),
        video_len: s.video_len,
        head_size: s.head_size,
        gt,
        tracklets,
        truth,
    })
}

/// A contiguous run of frames strictly on one side of the keyframe, taken
/// from the nearest other person. It never covers the keyframe, so it spans
/// less than half of the window.
fn draw_swap(
    s: &Scenario,
    gt: &[Vec<Pose>],
    keyframe: usize,
    person: usize,
    lo: usize,
    hi: usize,
) -> (Vec<usize>, Option<usize>) {
    let mut rng = rng_for(s.seed, &[TAG_SWAP, keyframe as u64, person as u64]);
    if s.n_people < 2 || rng.random::<f64>() >= s.swap_rate {
        return (Vec::new(), None);
    }
    let here = pelvis(&gt[person][keyframe]);
    let partner = (0..s.n_people)
        .filter(|&j| j != person)
        .min_by(|&a, &b| {
            let da = dist2(here, pelvis(&gt[a][keyframe]));
            let db = dist2(here, pelvis(&gt[b][keyframe]));
            da.total_cmp(&db).then(a.cmp(&b))
        })
        .expect("at least two people");
    let mut sides = Vec::new();
    if keyframe > lo {
        sides.push((lo, keyframe - 1));
    }
    if keyframe < hi {
        sides.push((keyframe + 1, hi));
    }
    if sides.is_empty() {
        return (Vec::new(), None);
    }
    let (a, b) = sides[rng.random_range(0..sides.len())];
    let max_len = (b - a + 1).min((hi - lo) / 2);
    if max_len == 0 {
        return (Vec::new(), None);
    }
    let len = rng.random_range(1..=max_len);
    let start = rng.random_range(a..=b + 1 - len);
    ((start..start + len).collect(), Some(partner))
}

fn noisy_pose(s: &Scenario, gt: &Pose, keyframe: usize, person: usize, frame: usize, tube: Option<&BBox>) -> Pose {
    let mut rng = rng_for(s.seed, &[TAG_NOISE, keyframe as u64, person as u64, frame as u64]);
    let sigma = s.pose_noise;
    let joints = gt
        .joints
        .iter()
        .map(|j| {
            let nx: f64 = StandardNormal.sample(&mut rng);
            let ny: f64 = StandardNormal.sample(&mut rng);
            let (dx, dy) = (sigma * nx, sigma * ny);
            let confidence = if sigma > 0.0 {
                (-(dx * dx + dy * dy) / (4.0 * sigma * sigma)).exp()
            } else {
                1.0
            };
            let (x, y) = (j.x + dx, j.y + dy);
            match tube {
                Some(b) if !b.contains(x, y) => Joint::invisible(),
                _ => Joint::new(x, y, confidence),
            }
        })
        .collect();
    Pose::new(frame, joints)
}

impl SynthVideo {
    /// Keyframe detections per frame: the keyframe pose of every tracklet.
    pub fn framewise_detections(&self) -> Vec<Vec<Pose>> {
        let mut per_frame = vec![Vec::new(); self.video_len];
        for t in &self.tracklets {
            if let Some(p) = t.pose_at(t.keyframe) {
                per_frame[t.keyframe].push(p.clone());
            }
        }
        per_frame
    }

    pub fn truth_by_source(&self) -> HashMap<&str, &TrackletTruth> {
        self.tracklets
            .iter()
            .zip(&self.truth)
            .map(|(t, truth)| (t.source_id.as_str(), truth))
            .collect()
    }
}

/// Whether `pose` lies on `gt`: more than half of the ground-truth joints
/// have a visible counterpart within the matching radius.
pub fn pose_matches(pose: &Pose, gt: &Pose) -> bool {
    let radius = MATCH_RADIUS * gt.head_size.unwrap_or(0.0);
    let close = pose
        .joints
        .iter()
        .zip(&gt.joints)
        .filter(|(p, g)| p.visible && g.visible && p.dist2(g) <= radius * radius)
        .count();
    2 * close > gt.visible_count()
}

/// Fraction of ground-truth person-frames for which some hypothesis of some
/// track matches the person.
pub fn recovery_rate(gt: &GroundTruth, tracks: &[Track]) -> f64 {
    let mut by_frame: BTreeMap<usize, Vec<&Pose>> = BTreeMap::new();
    for t in tracks {
        for (&f, set) in &t.frames {
            by_frame
                .entry(f)
                .or_default()
                .extend(set.hypotheses.iter().map(|h| &h.pose));
        }
    }
    let total = gt.person_frames();
    if total == 0 {
        return 1.0;
    }
    let recovered: usize = gt
        .frames
        .iter()
        .map(|(f, people)| {
            let hyps = by_frame.get(f).map(Vec::as_slice).unwrap_or(&[]);
            people
                .iter()
                .filter(|p| hyps.iter().any(|h| pose_matches(h, &p.pose)))
                .count()
        })
        .sum();
    recovered as f64 / total as f64
}

/// Outcome of merged joints on afflicted frames: frames where some, but
/// fewer than a given fraction of, the hypotheses show someone other than
/// the frame's owner.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CorrectionStats {
    pub afflicted_frames: usize,
    /// Afflicted `(frame, joint)` entries evaluated.
    pub joints: usize,
    /// Entries whose merged joint lies within the matching radius of the
    /// owner's ground truth.
    pub correct: usize,
}

impl CorrectionStats {
    pub fn rate(&self) -> Option<f64> {
        (self.joints > 0).then(|| self.correct as f64 / self.joints as f64)
    }

    pub fn add(&mut self, other: &CorrectionStats) {
        self.afflicted_frames += other.afflicted_frames;
        self.joints += other.joints;
        self.correct += other.correct;
    }
}

/// Scores the merged poses of `tracks` on afflicted frames. The owner of a
/// frame is the person most hypotheses were detected on; a hypothesis is
/// corrupted when it shows anyone else, whether through a swap or through a
/// stitching error.
pub fn correction_stats(video: &SynthVideo, tracks: &[Track], max_fraction: f64) -> CorrectionStats {
    let truth = video.truth_by_source();
    let radius = MATCH_RADIUS * video.head_size;
    let mut stats = CorrectionStats::default();
    for track in tracks {
        for (&f, set) in &track.frames {
            // (detected person, shown person) per hypothesis
            let labels: Vec<(usize, usize)> = set
                .hypotheses
                .iter()
                .filter_map(|h| {
                    let m = track.member_for_keyframe(h.source_keyframe)?;
                    let t = truth.get(m.source_id.as_str())?;
                    let shown = match t.partner {
                        Some(p) if t.swapped_frames.contains(&f) => p,
                        _ => t.person,
                    };
                    Some((t.person, shown))
                })
                .collect();
            let mut votes: BTreeMap<usize, usize> = BTreeMap::new();
            for &(person, _) in &labels {
                *votes.entry(person).or_default() += 1;
            }
            let Some(owner) = votes
                .iter()
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
                .map(|(&p, _)| p)
            else {
                continue;
            };
            let corrupted = labels.iter().filter(|&&(_, shown)| shown != owner).count();
            if corrupted == 0 || corrupted as f64 >= max_fraction * set.len() as f64 {
                continue;
            }
            let Some(merged) = track.merged.get(&f) else { continue };
            let gt = &video.gt.frames[&f][owner].pose;
            stats.afflicted_frames += 1;
            for (m, g) in merged.joints.iter().zip(&gt.joints) {
                stats.joints += 1;
                if m.visible && m.dist2(g) <= radius * radius {
                    stats.correct += 1;
                }
            }
        }
    }
    stats
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> Scenario {
        Scenario {
            n_people: 3,
            video_len: 40,
            ..Scenario::default()
        }
    }

    #[test]
    fn noiseless_tracklets_reproduce_ground_truth() {
        let s = Scenario {
            miss_rate: 0.0,
            pose_noise: 0.0,
            ..base()
        };
        let v = generate(&s).unwrap();
        assert_eq!(v.tracklets.len(), 40 * 3);
        for (t, truth) in v.tracklets.iter().zip(&v.truth) {
            for p in &t.poses {
                let g = &v.gt.frames[&p.frame][truth.person].pose;
                for (a, b) in p.joints.iter().zip(&g.joints) {
                    if a.visible {
                        assert_eq!((a.x, a.y, a.confidence), (b.x, b.y, 1.0));
                    }
                }
            }
        }
    }

    #[test]
    fn certain_miss_gives_nothing() {
        let v = generate(&Scenario {
            miss_rate: 1.0,
            ..base()
        })
        .unwrap();
        assert!(v.tracklets.is_empty());
    }

    #[test]
    fn same_seed_same_output() {
        let s = Scenario {
            swap_rate: 0.3,
            seed: 42,
            ..base()
        };
        assert_eq!(generate(&s).unwrap(), generate(&s).unwrap());
        let other = generate(&Scenario { seed: 43, ..s.clone() }).unwrap();
        assert_ne!(generate(&s).unwrap().tracklets, other.tracklets);
    }

    #[test]
    fn misses_do_not_depend_on_clip_length() {
        let keyframes = |clip_len| {
            let v = generate(&Scenario { clip_len, ..base() }).unwrap();
            v.tracklets
                .iter()
                .map(|t| (t.keyframe, t.source_id.clone()))
                .collect::<Vec<_>>()
        };
        assert_eq!(keyframes(1), keyframes(9));
    }

    #[test]
    fn keyframe_poses_do_not_depend_on_clip_length() {
        let a = generate(&Scenario { clip_len: 3, ..base() }).unwrap();
        let b = generate(&Scenario { clip_len: 9, ..base() }).unwrap();
        assert_eq!(a.framewise_detections(), b.framewise_detections());
    }

    #[test]
    fn swaps_are_minority_runs_off_the_keyframe() {
        let s = Scenario {
            swap_rate: 1.0,
            ..base()
        };
        let v = generate(&s).unwrap();
        for (t, truth) in v.tracklets.iter().zip(&v.truth) {
            assert!(!truth.swapped_frames.contains(&t.keyframe));
            assert!(2 * truth.swapped_frames.len() < t.poses.len());
            assert!(truth.swapped_frames.windows(2).all(|w| w[1] == w[0] + 1));
            for &f in &truth.swapped_frames {
                let partner = truth.partner.unwrap();
                assert_ne!(partner, truth.person);
                let pose = t.pose_at(f).unwrap();
                assert!(pose_matches(pose, &v.gt.frames[&f][partner].pose));
            }
        }
    }

    #[test]
    fn tracklets_validate_and_stay_on_schedule() {
        let s = Scenario {
            clip_len: 5,
            step: 3,
            ..base()
        };
        let v = generate(&s).unwrap();
        let schedule = keyframe_schedule(s.video_len, &s.clip());
        for t in &v.tracklets {
            t.validate().unwrap();
            assert!(schedule.contains(&t.keyframe));
        }
    }

    #[test]
    fn invalid_scenarios_rejected() {
        assert!(generate(&Scenario {
            miss_rate: 1.5,
            ..base()
        })
        .is_err());
        assert!(generate(&Scenario {
            pose_noise: -1.0,
            ..base()
        })
        .is_err());
        assert!(generate(&Scenario { clip_len: 4, ..base() }).is_err());
    }

    #[test]
    fn crossing_walkers_meet() {
        let s = Scenario {
            motion: Motion::Crossing,
            n_people: 2,
            speed: 2.0,
            spacing: 1.0,
            ..base()
        };
        let v = generate(&s).unwrap();
        let gap = |f: usize| {
            let people = &v.gt.frames[&f];
            (pelvis(&people[0].pose)[0] - pelvis(&people[1].pose)[0]).abs()
        };
        let closest = (0..s.video_len).map(gap).fold(f64::INFINITY, f64::min);
        assert!(closest < s.head_size);
        assert!(gap(0) > closest && gap(s.video_len - 1) > closest);
    }
}
