//! TOML configuration and per-joint value files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{FilterConfig, DEFAULT_MIN_BOX_AREA, DEFAULT_MIN_TRACK_LEN};
use crate::pipeline::PipelineConfig;
use crate::similarity::{OksParams, ScaleMode};
use crate::stitcher::DEFAULT_GATE;
use crate::stmerge::{MergeConfig, MergeMode};
use crate::synth::Scenario;
use crate::types::{ClipConfig, POSETRACK_JOINTS};

/// Every tunable of a pipeline run. Missing keys take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub clip_len: usize,
    pub step: usize,
    pub lambda: f64,
    pub radius_scale: f64,
    pub fallback_radius: Option<f64>,
    pub gate: f64,
    pub merge_mode: String,
    pub min_track_len: usize,
    pub min_box_area: f64,
    /// `bbox_area` or `head_size`.
    pub scale_mode: String,
    pub kappa: Option<Vec<f64>>,
    pub thresholds: Option<Vec<f64>>,
}

impl Default for Config {
    fn default() -> Self {
        let merge = MergeConfig::default();
        let clip = ClipConfig::default();
        Self {
            clip_len: clip.clip_len,
            step: clip.step,
            lambda: merge.lambda,
            radius_scale: merge.radius_scale,
            fallback_radius: merge.fallback_radius,
            gate: DEFAULT_GATE,
            merge_mode: MergeMode::Full.name().into(),
            min_track_len: DEFAULT_MIN_TRACK_LEN,
            min_box_area: DEFAULT_MIN_BOX_AREA,
            scale_mode: "bbox_area".into(),
            kappa: None,
            thresholds: None,
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn parse_toml<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::Schema {
        line: e.span().map_or(0, |s| text[..s.start].lines().count().max(1)),
        message: e.message().to_string(),
    })
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        parse_toml(text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read_text(path)?)
    }

    pub fn pipeline(&self) -> Result<PipelineConfig> {
        let clip = ClipConfig::new(self.clip_len, self.step)?;
        let scale_mode = match self.scale_mode.as_str() {
            "bbox_area" => ScaleMode::BboxArea,
            "head_size" => ScaleMode::HeadSize,
            other => return Err(Error::InvalidConfig(format!("unknown scale_mode {other:?}"))),
        };
        let oks = match &self.kappa {
            Some(k) => OksParams::new(k.clone(), scale_mode)?,
            None => OksParams::posetrack(scale_mode),
        };
        if let Some(t) = &self.thresholds {
            if t.len() != oks.num_joints() {
                return Err(Error::SkeletonMismatch {
                    expected: oks.num_joints(),
                    found: t.len(),
                });
            }
        }
        if !(0.0..=1.0).contains(&self.gate) {
            return Err(Error::InvalidConfig(format!(
                "gate must lie in [0, 1], got {}",
                self.gate
            )));
        }
        let merge = MergeConfig {
            lambda: self.lambda,
            radius_scale: self.radius_scale,
            fallback_radius: self.fallback_radius,
            spatial: true,
        };
        merge.validate()?;
        Ok(PipelineConfig {
            clip,
            gate: self.gate,
            oks,
            merge,
            merge_mode: self.merge_mode.parse()?,
            filter: FilterConfig {
                min_len: self.min_track_len,
                min_area: self.min_box_area,
            },
            thresholds: self.thresholds.clone(),
        })
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let s: Scenario = parse_toml(&read_text(path)?)?;
    s.validate()?;
    Ok(s)
}

/// Parses one value per joint, one per line, as `value` or `name value`.
/// Named lines may come in any order; `#` starts a comment.
pub fn parse_joint_values(text: &str, num_joints: usize) -> Result<Vec<f64>> {
    let mut positional = Vec::new();
    let mut named: Vec<Option<f64>> = vec![None; num_joints];
    let mut any_named = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Schema { line: line_no, message };
        let tokens: Vec<&str> = line
            .split(|c: char| c.is_whitespace() || c == '=' || c == ',')
            .filter(|t| !t.is_empty())
            .collect();
        let (name, value) = match tokens.as_slice() {
            [v] => (None, *v),
            [n, v] => (Some(*n), *v),
            _ => return Err(err(format!("expected `value` or `name value`, got {line:?}"))),
        };
        let value: f64 = value.parse().map_err(|_| err(format!("not a number: {value:?}")))?;
        if !value.is_finite() {
            return Err(err(format!("not a finite number: {value}")));
        }
        match name {
            None => positional.push(value),
            Some(n) => {
                any_named = true;
                let j = POSETRACK_JOINTS
                    .iter()
                    .position(|&p| p == n)
                    .filter(|&j| j < num_joints)
                    .ok_or_else(|| err(format!("unknown joint {n:?}")))?;
                if named[j].replace(value).is_some() {
                    return Err(err(format!("joint {n:?} given twice")));
                }
            }
        }
    }
    let values: Vec<f64> = if any_named {
        if !positional.is_empty() {
            return Err(Error::Schema {
                line: 0,
                message: "mix of named and unnamed values".into(),
            });
        }
        named
            .iter()
            .copied()
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| Error::Schema {
                line: 0,
                message: "some joints have no value".into(),
            })?
    } else {
        positional
    };
    if values.len() != num_joints {
        return Err(Error::SkeletonMismatch {
            expected: num_joints,
            found: values.len(),
        });
    }
    Ok(values)
}

pub fn load_joint_values(path: &Path, num_joints: usize) -> Result<Vec<f64>> {
    parse_joint_values(&read_text(path)?, num_joints)
}
