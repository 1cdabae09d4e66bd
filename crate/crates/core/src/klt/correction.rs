//! Feature labeling, detection evaluation and split correction of merged detections.

use std::collections::{BTreeMap, BTreeSet};

use crate::geometry::{iou, BoundingBox, Detection};
use crate::track::TrackId;

/// A feature point followed from frame `t - 1` to frame `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureTrack {
    /// Index of frame `t`.
    pub frame: u32,
    pub prev: (f64, f64),
    pub next: (f64, f64),
    pub label: Option<TrackId>,
}

impl FeatureTrack {
    pub fn new(frame: u32, prev: (f64, f64), next: (f64, f64)) -> Self {
        Self { frame, prev, next, label: None }
    }
}

/// An object as observed at `t - 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrevObject {
    pub id: TrackId,
    pub bbox: BoundingBox,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DetectionVerdict {
    Correct,
    /// The detection covers several objects; carries at least two labels.
    Incorrect(BTreeSet<TrackId>),
}

/// Labels each track with the `t - 1` object whose box contains its `t - 1`
/// position. Points inside several boxes stay unlabeled: where objects overlap
/// the visible surface belongs to whichever is in front, which is unknown.
pub fn label_features(tracks: &mut [FeatureTrack], prev_objects: &[PrevObject]) {
    for t in tracks.iter_mut() {
        let (px, py) = t.prev;
        let mut inside = prev_objects.iter().filter(|o| o.bbox.contains(px, py));
        t.label = match (inside.next(), inside.next()) {
            (Some(o), None) => Some(o.id),
            _ => None,
        };
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Thresholds for a label to count inside a detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelRule {
    pub min_points: usize,
    /// Fraction of the label's points that must fall inside the detection.
    pub min_share: f64,
}

impl LabelRule {
    pub fn from_config(cfg: &crate::config::TrackerConfig) -> Self {
        Self { min_points: cfg.split_min_points, min_share: cfg.split_min_share }
    }
}

/// Labeled tracks whose `t` position falls inside `b`, grouped by label, keeping
/// labels that pass `rule`. The share test keeps an object whose edge pokes
/// into a neighbor's box from counting toward that box.
fn labels_inside<'a>(b: &BoundingBox, tracks: &'a [FeatureTrack], rule: LabelRule) -> BTreeMap<TrackId, Vec<&'a FeatureTrack>> {
    let mut total: BTreeMap<TrackId, usize> = BTreeMap::new();
    let mut out: BTreeMap<TrackId, Vec<&FeatureTrack>> = BTreeMap::new();
    for t in tracks {
        if let Some(label) = t.label {
            *total.entry(label).or_default() += 1;
            if b.contains(t.next.0, t.next.1) {
                out.entry(label).or_default().push(t);
            }
        }
    }
    out.retain(|label, pts| pts.len() >= rule.min_points && pts.len() as f64 >= rule.min_share * total[label] as f64);
    out
}

/// A detection is incorrect when it overlaps at least two `t - 1` objects and
/// holds points of at least two labels that pass `rule`.
pub fn evaluate_detection(d: &Detection, prev_objects: &[PrevObject], tracks: &[FeatureTrack], rule: LabelRule) -> DetectionVerdict {
    let overlapped = prev_objects.iter().filter(|o| iou(&o.bbox, &d.bbox) > 0.0).count();
    if overlapped < 2 {
        return DetectionVerdict::Correct;
    }
    let labels: BTreeSet<TrackId> = labels_inside(&d.bbox, tracks, rule).into_keys().collect();
    if labels.len() >= 2 {
        DetectionVerdict::Incorrect(labels)
    } else {
        DetectionVerdict::Correct
    }
}

/// Splits a merged detection into one box per label: the labeled object's
/// `t - 1` box moved by the median displacement of its points, clipped to the frame.
/// Labels failing `rule` produce nothing.
pub fn split_detection(
    d: &Detection,
    tracks: &[FeatureTrack],
    prev_objects: &[PrevObject],
    frame_size: (usize, usize),
    rule: LabelRule,
) -> Vec<(TrackId, Detection)> {
    let mut out = Vec::new();
    for (label, pts) in labels_inside(&d.bbox, tracks, rule) {
        let Some(prev) = prev_objects.iter().find(|o| o.id == label) else { continue };
        let dx = median(pts.iter().map(|t| t.next.0 - t.prev.0).collect());
        let dy = median(pts.iter().map(|t| t.next.1 - t.prev.1).collect());
        if let Some(bbox) = prev.bbox.translated(dx, dy).clip(frame_size.0 as f64, frame_size.1 as f64) {
            out.push((label, Detection { frame_index: d.frame_index, bbox, confidence: d.confidence }));
        }
    }
    out
}
