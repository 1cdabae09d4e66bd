//! Tracker parameters.
//!
//! The on-disk form is one `key = value` pair per line (a flat TOML table).
//! Every key is optional; unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerConfig {
    /// Neighbor gate on 2D center distance, pixels. A rough default; tune per scene.
    pub epsilon1_px: f64,
    /// Neighbor gate on ground-plane distance, only consulted with a homography.
    pub epsilon2_m: f64,
    /// Inactivated trajectories last matched within `[t - T, t - 1]` may be linked.
    pub temporal_window: u32,
    /// Number of most recent snapshots feeding a trajectory's appearance model.
    pub model_window: usize,
    pub hist_bins: usize,
    pub pyramid_levels: usize,
    /// Minimum global similarity for an appearance-tracker link.
    pub link_threshold: f64,
    /// Descriptor similarities are clamped to `[ds_floor, 1]` before weighting.
    pub ds_floor: f64,
    /// Minimum geometric mean of the five component scores (length factor excluded)
    /// for a proposal to be accepted.
    pub accept_threshold: f64,
    /// Trajectories unmatched for longer than this are terminated.
    pub suspension_max_frames: u32,
    pub iou_eval_threshold: f64,
    /// Detections below this confidence never start a trajectory.
    pub min_seed_confidence: f64,
    /// Appearance links are gated to this center displacement per elapsed frame.
    pub max_speed_px: f64,

    pub klt_max_features: usize,
    /// Side of the square Lucas-Kanade integration window (odd).
    pub klt_window: usize,
    pub klt_pyramid_depth: usize,
    pub klt_max_iterations: usize,
    pub klt_epsilon: f64,
    pub klt_quality_ratio: f64,
    pub klt_min_distance: f64,
    /// Side of the structure-tensor block used for corner scoring (odd).
    pub klt_block_size: usize,
    /// Minimum eigenvalue of the normalized gradient matrix below which a point is lost.
    pub klt_min_eigen: f64,
    /// Forward-backward error bound in pixels; non-positive disables the check.
    pub klt_fb_threshold: f64,
    /// Mean absolute intensity residual above which a tracked point is lost.
    pub klt_max_residual: f64,
    /// Minimum S_KLT for a KLT-tracker link.
    pub klt_link_threshold: f64,
    /// A label needs this many points to count during detection evaluation and splitting.
    pub split_min_points: usize,
    /// ...and must have at least this fraction of all its points inside the detection.
    pub split_min_share: f64,

    pub dominant_colors: usize,
    pub dominant_merge_radius: f64,
    pub dominant_min_weight: f64,
    pub kmeans_iterations: usize,
    pub seed: u64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            epsilon1_px: 120.0,
            epsilon2_m: 2.0,
            temporal_window: 15,
            model_window: 10,
            hist_bins: 16,
            pyramid_levels: 2,
            link_threshold: 0.3,
            ds_floor: 0.1,
            accept_threshold: 0.05,
            suspension_max_frames: 15,
            iou_eval_threshold: 0.5,
            min_seed_confidence: 0.1,
            max_speed_px: 40.0,
            klt_max_features: 50,
            klt_window: 15,
            klt_pyramid_depth: 3,
            klt_max_iterations: 30,
            klt_epsilon: 0.01,
            klt_quality_ratio: 0.01,
            klt_min_distance: 5.0,
            klt_block_size: 3,
            klt_min_eigen: 1e-4,
            klt_fb_threshold: 1.0,
            klt_max_residual: 40.0,
            klt_link_threshold: 0.1,
            split_min_points: 3,
            split_min_share: 0.5,
            dominant_colors: 4,
            dominant_merge_radius: 25.0,
            dominant_min_weight: 0.05,
            kmeans_iterations: 20,
            seed: 0,
        }
    }
}

impl TrackerConfig {
    pub fn parse_text(text: &str) -> Result<Self> {
        let cfg: TrackerConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse_text(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("flat config always serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("epsilon1_px", self.epsilon1_px),
            ("epsilon2_m", self.epsilon2_m),
            ("ds_floor", self.ds_floor),
            ("accept_threshold", self.accept_threshold),
            ("iou_eval_threshold", self.iou_eval_threshold),
            ("max_speed_px", self.max_speed_px),
            ("klt_epsilon", self.klt_epsilon),
            ("klt_quality_ratio", self.klt_quality_ratio),
            ("klt_min_distance", self.klt_min_distance),
            ("klt_min_eigen", self.klt_min_eigen),
            ("klt_max_residual", self.klt_max_residual),
            ("klt_link_threshold", self.klt_link_threshold),
            ("dominant_merge_radius", self.dominant_merge_radius),
            ("dominant_min_weight", self.dominant_min_weight),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        let counts = [
            ("temporal_window", self.temporal_window as usize),
            ("model_window", self.model_window),
            ("hist_bins", self.hist_bins),
            ("pyramid_levels", self.pyramid_levels),
            ("suspension_max_frames", self.suspension_max_frames as usize),
            ("klt_max_features", self.klt_max_features),
            ("klt_pyramid_depth", self.klt_pyramid_depth),
            ("klt_max_iterations", self.klt_max_iterations),
            ("split_min_points", self.split_min_points),
            ("dominant_colors", self.dominant_colors),
            ("kmeans_iterations", self.kmeans_iterations),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if self.hist_bins < 2 {
            return Err(Error::Config("hist_bins must be at least 2".into()));
        }
        if !(self.split_min_share > 0.0 && self.split_min_share <= 1.0) {
            return Err(Error::Config("split_min_share must lie in (0, 1]".into()));
        }
        if self.ds_floor >= 1.0 {
            return Err(Error::Config("ds_floor must be below 1".into()));
        }
        if !(self.link_threshold > 0.0 && self.link_threshold < 1.0) {
            return Err(Error::Config("link_threshold must lie in (0, 1)".into()));
        }
        for (name, v) in [("klt_window", self.klt_window), ("klt_block_size", self.klt_block_size)] {
            if v < 3 || v % 2 == 0 {
                return Err(Error::Config(format!("{name} must be odd and at least 3")));
            }
        }
        Ok(())
    }
}
