//! Stitch and pipeline parameters.

use crate::stitch::RowDir;
use serde::{Deserialize, Serialize};

pub const DEFAULT_STITCH_WIDTH: f64 = 2.0;
pub const DEFAULT_MAX_WARP_THREADS: usize = 100;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StitchParams {
    /// Stitch width (mm); fixed by the reed pitch.
    pub s_w: f64,
    /// Stitch height (mm); the warp release unit.
    pub s_h: f64,
    /// Warp beams available on the machine.
    pub max_warp_threads: usize,
}

impl StitchParams {
    pub fn with_height(s_h: f64) -> Self {
        StitchParams {
            s_w: DEFAULT_STITCH_WIDTH,
            s_h,
            max_warp_threads: DEFAULT_MAX_WARP_THREADS,
        }
    }

    /// Widest fabric the machine can form (mm).
    pub fn max_fabric_width(&self) -> f64 {
        (self.max_warp_threads - 1) as f64 * self.s_w
    }
}

/// Full pipeline configuration; the CLI loads this from flat JSON and
/// overrides single fields from flags.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "default_s_w")]
    pub s_w: f64,
    pub s_h: f64,
    #[serde(default = "default_max_warp")]
    pub max_warp_threads: usize,
    #[serde(default = "default_first_dir")]
    pub first_row_direction: RowDir,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<crate::source::SourceSpec>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_samples")]
    pub shape_samples: usize,
    /// Verification thresholds as multiples of s_h.
    #[serde(default = "default_rms_factor")]
    pub rms_threshold_factor: f64,
    #[serde(default = "default_max_factor")]
    pub max_threshold_factor: f64,
    /// Columns tagged as functional threads (e.g. optical fibre), 1-based.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tagged_columns: Vec<usize>,
    /// Target spacing between tagged columns, in stitch widths.
    #[serde(default = "default_k_spacing")]
    pub tag_spacing: usize,
}

fn default_s_w() -> f64 {
    DEFAULT_STITCH_WIDTH
}

fn default_max_warp() -> usize {
    DEFAULT_MAX_WARP_THREADS
}

fn default_first_dir() -> RowDir {
    RowDir::LeftToRight
}

fn default_seed() -> u64 {
    42
}

fn default_samples() -> usize {
    2000
}

fn default_rms_factor() -> f64 {
    1.0
}

fn default_max_factor() -> f64 {
    2.5
}

fn default_k_spacing() -> usize {
    7
}

impl PipelineConfig {
    pub fn with_height(s_h: f64) -> Self {
        serde_json::from_value(serde_json::json!({ "s_h": s_h })).expect("defaults apply")
    }

    pub fn stitch_params(&self) -> StitchParams {
        StitchParams {
            s_w: self.s_w,
            s_h: self.s_h,
            max_warp_threads: self.max_warp_threads,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.s_w > 0.0) {
            return Err(format!("s_w must be positive, got {}", self.s_w));
        }
        if !(self.s_h > 0.0) {
            return Err(format!("s_h must be positive, got {}", self.s_h));
        }
        if self.max_warp_threads < 2 {
            return Err("max_warp_threads must be at least 2".into());
        }
        Ok(())
    }
}
