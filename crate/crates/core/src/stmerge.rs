//! Fusing per-frame pose hypotheses into one pose per frame.
//!
//! The baseline keeps, per joint, the most confident hypothesis. The
//! spatial-temporal merge clusters each joint's hypotheses per frame and picks
//! one cluster per frame by a shortest path through the clusters, where each
//! edge `(a, b)` between consecutive layers costs
//!
//! ```text
//! (|H| - |a|) + (|H| - |b|) + λ · ‖μ(a) - μ(b)‖²
//! ```
//!
//! rewarding well-supported clusters and small motion.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap};

use crate::error::{Error, Result};
use crate::meanshift::mean_shift;
use crate::types::{HypothesisSet, Joint, Pose, Track};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergeConfig {
    /// Weight of the squared-displacement term.
    pub lambda: f64,
    /// Cluster radius as a fraction of the head size.
    pub radius_scale: f64,
    /// Cluster radius in pixels, used when hypotheses carry no head size.
    pub fallback_radius: Option<f64>,
    /// Whether the cluster-size terms take part in the edge cost.
    pub spatial: bool,
}

impl Default for MergeConfig {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            radius_scale: 0.5,
            fallback_radius: None,
            spatial: true,
        }
    }
}

impl MergeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if self.radius_scale.is_nan() || self.radius_scale <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "radius_scale must be > 0, got {}",
                self.radius_scale
            )));
        }
        if let Some(r) = self.fallback_radius {
            if r.is_nan() || r <= 0.0 {
                return Err(Error::InvalidConfig(format!("fallback_radius must be > 0, got {r}")));
            }
        }
        Ok(())
    }
}

/// Which merge reduces hypothesis sets to poses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MergeMode {
    /// Most confident hypothesis per joint.
    Baseline,
    /// Cluster sizes only (`λ = 0`).
    Spatial,
    /// Displacement only (size terms dropped).
    Temporal,
    Full,
}

impl MergeMode {
    pub const ALL: [MergeMode; 4] = [
        MergeMode::Baseline,
        MergeMode::Spatial,
        MergeMode::Temporal,
        MergeMode::Full,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            MergeMode::Baseline => "baseline",
            MergeMode::Spatial => "spatial",
            MergeMode::Temporal => "temporal",
            MergeMode::Full => "full",
        }
    }

    /// `cfg` adjusted for this mode.
    pub fn apply(&self, cfg: &MergeConfig) -> MergeConfig {
        match self {
            MergeMode::Spatial => MergeConfig { lambda: 0.0, ..*cfg },
            MergeMode::Temporal => MergeConfig { spatial: false, ..*cfg },
            MergeMode::Baseline | MergeMode::Full => *cfg,
        }
    }
}

impl std::str::FromStr for MergeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MergeMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown merge mode {s:?}")))
    }
}

/// One mean-shift cluster of a single joint's hypotheses at one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct JointCluster {
    pub center: [f64; 2],
    /// Indices of the contributing hypotheses within the frame's set.
    pub members: Vec<usize>,
    /// Highest member confidence.
    pub confidence: f64,
    pub frame: usize,
    pub joint_id: usize,
}

impl JointCluster {
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

/// Per joint, the hypothesis with the highest confidence; ties go to the
/// earliest source keyframe. Joints invisible in every hypothesis stay
/// invisible.
pub fn baseline_merge(set: &HypothesisSet) -> Result<Pose> {
    let first = set
        .hypotheses
        .first()
        .ok_or(Error::EmptyHypotheses { track_id: 0, frame: 0 })?;
    let k = first.pose.num_joints();
    let mut joints = Vec::with_capacity(k);
    for j in 0..k {
        let best = set
            .hypotheses
            .iter()
            .filter(|h| h.pose.joints[j].visible)
            .max_by(|a, b| {
                a.pose.joints[j]
                    .confidence
                    .total_cmp(&b.pose.joints[j].confidence)
                    .then(b.source_keyframe.cmp(&a.source_keyframe))
            });
        joints.push(best.map_or(Joint::invisible(), |h| h.pose.joints[j]));
    }
    Ok(Pose::new(first.pose.frame, joints))
}

/// Edge cost between clusters of consecutive (non-empty) layers.
pub fn edge_cost(a: &JointCluster, b: &JointCluster, capacity: usize, cfg: &MergeConfig) -> f64 {
    node_cost(a, capacity, cfg) + node_cost(b, capacity, cfg) + cfg.lambda * dist2(a.center, b.center)
}

fn node_cost(c: &JointCluster, capacity: usize, cfg: &MergeConfig) -> f64 {
    if cfg.spatial {
        capacity as f64 - c.size() as f64
    } else {
        0.0
    }
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct QueueEntry {
    cost: f64,
    node: usize,
}

impl Eq for QueueEntry {}

impl Ord for QueueEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.cost.total_cmp(&other.cost).then(self.node.cmp(&other.node))
    }
}

impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Cheapest path through `layers`, one cluster per layer, from a virtual
/// source to a virtual sink. Entering the first layer and leaving the last
/// each cost that cluster's size term. Among equal-cost paths the one using
/// lower cluster indices wins, walking back from the sink.
///
/// Returns the chosen index per layer and the total cost.
pub fn shortest_path(layers: &[Vec<JointCluster>], capacity: usize, cfg: &MergeConfig) -> (Vec<usize>, f64) {
    if layers.is_empty() {
        return (Vec::new(), 0.0);
    }
    // node 0 is the source, then each layer's clusters, then the sink
    let mut offsets = Vec::with_capacity(layers.len() + 1);
    let mut next = 1;
    for layer in layers {
        offsets.push(next);
        next += layer.len();
    }
    let sink = next;
    let n = sink + 1;
    let locate = |node: usize| -> (usize, usize) {
        let layer = offsets.partition_point(|&o| o <= node) - 1;
        (layer, node - offsets[layer])
    };

    let mut dist = vec![f64::INFINITY; n];
    let mut pred: Vec<Option<usize>> = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[0] = 0.0;
    heap.push(Reverse(QueueEntry { cost: 0.0, node: 0 }));

    let relax = |from: usize,
                 to: usize,
                 w: f64,
                 dist: &mut Vec<f64>,
                 pred: &mut Vec<Option<usize>>,
                 heap: &mut BinaryHeap<Reverse<QueueEntry>>| {
        let cand = dist[from] + w;
        let better = cand < dist[to] || (cand == dist[to] && pred[to].is_some_and(|p| from < p));
        if better {
            dist[to] = cand;
            pred[to] = Some(from);
            heap.push(Reverse(QueueEntry { cost: cand, node: to }));
        }
    };

    while let Some(Reverse(QueueEntry { cost, node })) = heap.pop() {
        if done[node] || cost > dist[node] {
            continue;
        }
        done[node] = true;
        if node == sink {
            break;
        }
        if node == 0 {
            for (i, c) in layers[0].iter().enumerate() {
                relax(
                    0,
                    offsets[0] + i,
                    node_cost(c, capacity, cfg),
                    &mut dist,
                    &mut pred,
                    &mut heap,
                );
            }
            continue;
        }
        let (l, i) = locate(node);
        let here = &layers[l][i];
        if l + 1 == layers.len() {
            relax(
                node,
                sink,
                node_cost(here, capacity, cfg),
                &mut dist,
                &mut pred,
                &mut heap,
            );
        } else {
            for (j, c) in layers[l + 1].iter().enumerate() {
                let w = edge_cost(here, c, capacity, cfg);
                relax(node, offsets[l + 1] + j, w, &mut dist, &mut pred, &mut heap);
            }
        }
    }

    let mut path = vec![0usize; layers.len()];
    let mut node = pred[sink].expect("sink reachable");
    while node != 0 {
        let (l, i) = locate(node);
        path[l] = i;
        node = pred[node].expect("path to source");
    }
    (path, dist[sink])
}

/// Cluster radius for one frame of a track.
fn cluster_radius(track: &Track, frame: usize, set: &HypothesisSet, cfg: &MergeConfig) -> f64 {
    let heads: Vec<f64> = set.hypotheses.iter().filter_map(|h| h.pose.head_size).collect();
    if !heads.is_empty() {
        return cfg.radius_scale * heads.iter().sum::<f64>() / heads.len() as f64;
    }
    if let Some(r) = cfg.fallback_radius {
        return r;
    }
    let diag = track.nearest_box(frame).map(|b| b.diagonal()).or_else(|| {
        set.hypotheses
            .iter()
            .find_map(|h| h.pose.extent())
            .map(|(_, _, w, h)| w.hypot(h))
    });
    let head = 0.25 * diag.unwrap_or(0.0);
    let r = cfg.radius_scale * head;
    if r > 0.0 {
        r
    } else {
        1.0
    }
}

/// Mean-shift clusters of joint `joint` at every frame of `track`, keyed by
/// frame. Frames where no hypothesis sees the joint are absent.
pub fn joint_layers(track: &Track, joint: usize, cfg: &MergeConfig) -> Result<BTreeMap<usize, Vec<JointCluster>>> {
    let mut layers = BTreeMap::new();
    for (&frame, set) in &track.frames {
        if set.is_empty() {
            return Err(Error::EmptyHypotheses {
                track_id: track.track_id,
                frame,
            });
        }
        let mut points = Vec::new();
        let mut sources = Vec::new();
        for (h_idx, h) in set.hypotheses.iter().enumerate() {
            let j = &h.pose.joints[joint];
            if j.visible {
                points.push(j.position());
                sources.push(h_idx);
            }
        }
        if points.is_empty() {
            continue;
        }
        let radius = cluster_radius(track, frame, set, cfg);
        let clusters = mean_shift(&points, radius)
            .into_iter()
            .map(|c| {
                let members: Vec<usize> = c.members.iter().map(|&m| sources[m]).collect();
                let confidence = members
                    .iter()
                    .map(|&m| set.hypotheses[m].pose.joints[joint].confidence)
                    .fold(0.0, f64::max);
                JointCluster {
                    center: c.center,
                    members,
                    confidence,
                    frame,
                    joint_id: joint,
                }
            })
            .collect();
        layers.insert(frame, clusters);
    }
    Ok(layers)
}

/// Spatial-temporal merge of every frame of `track`. `capacity` is `|H|`;
/// it is raised to the largest hypothesis set if that is bigger.
pub fn st_merge(track: &Track, cfg: &MergeConfig, capacity: usize) -> Result<Track> {
    cfg.validate()?;
    let Some(first) = track.frames.values().next() else {
        return Ok(track.clone());
    };
    let k = first
        .hypotheses
        .first()
        .map(|h| h.pose.num_joints())
        .ok_or(Error::EmptyHypotheses {
            track_id: track.track_id,
            frame: track.first_frame().unwrap_or(0),
        })?;
    let capacity = track
        .frames
        .values()
        .map(HypothesisSet::len)
        .max()
        .unwrap_or(0)
        .max(capacity);

    let mut merged: BTreeMap<usize, Pose> = track
        .frames
        .keys()
        .map(|&f| (f, Pose::new(f, vec![Joint::invisible(); k])))
        .collect();
    for joint in 0..k {
        let layers = joint_layers(track, joint, cfg)?;
        let frames: Vec<usize> = layers.keys().copied().collect();
        let clusters: Vec<Vec<JointCluster>> = layers.into_values().collect();
        let (path, _) = shortest_path(&clusters, capacity, cfg);
        for ((frame, layer), choice) in frames.iter().zip(&clusters).zip(path) {
            let c = &layer[choice];
            let pose = merged.get_mut(frame).expect("frame present");
            pose.joints[joint] = Joint::new(c.center[0], c.center[1], c.confidence);
        }
    }
    let mut out = track.clone();
    out.merged = merged;
    Ok(out)
}

/// Baseline merge applied to every frame of `track`.
pub fn baseline_merge_track(track: &Track) -> Result<Track> {
    let mut out = track.clone();
    out.merged = BTreeMap::new();
    for (&frame, set) in &track.frames {
        let pose = baseline_merge(set).map_err(|_| Error::EmptyHypotheses {
            track_id: track.track_id,
            frame,
        })?;
        out.merged.insert(frame, pose);
    }
    Ok(out)
}

/// Dispatches on `mode`.
pub fn merge_track(track: &Track, mode: MergeMode, cfg: &MergeConfig) -> Result<Track> {
    match mode {
        MergeMode::Baseline => baseline_merge_track(track),
        _ => st_merge(track, &mode.apply(cfg), track.capacity),
    }
}
