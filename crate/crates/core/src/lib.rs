//! Pose tracking from overlapping clip tracklets.
//!
//! Tracklets propagated from keyframe detections are stitched into
//! arbitrary-length tracks by bipartite matching on keypoint similarity, and
//! the resulting per-frame pose hypotheses are fused by mean-shift clustering
//! and a shortest-path search over the clusters.

pub mod assignment;
pub mod config;
pub mod error;
pub mod meanshift;
pub mod metrics;
pub mod pipeline;
pub mod schema;
pub mod similarity;
pub mod stitcher;
pub mod stmerge;
pub mod synth;
pub mod tube;
pub mod types;

pub use error::{Error, Result};
