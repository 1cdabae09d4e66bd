//! KLT feature selection and tracking, detection evaluation and correction,
//! and the feature-based object tracker.

pub mod correction;
pub mod features;
pub mod flow;
pub mod tracker;

pub use correction::{evaluate_detection, label_features, split_detection, DetectionVerdict, FeatureTrack, LabelRule, PrevObject};
pub use features::{detect_features, FeaturePoint, PointStatus};
pub use flow::{track_features, track_with_pyramids, Pyramid};
pub use tracker::{klt_propose, klt_score, klt_similarity, KltLink};
