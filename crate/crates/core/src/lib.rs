//! Multi-object tracking by detection with per-object selection between a
//! discriminative appearance tracker and a KLT feature tracker.

pub mod assignment;
pub mod config;
pub mod error;
pub mod geometry;
pub mod imaging;
pub mod io;
pub mod klt;
pub mod metrics;
pub mod models;
pub mod pipeline;
pub mod similarity;
pub mod track;

pub use config::TrackerConfig;
pub use error::{Error, Result};
pub use geometry::{center_distance_2d, iou, BoundingBox, Detection, Homography};
