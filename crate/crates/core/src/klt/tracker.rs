//! Object linking by shared feature points.

use crate::assignment::{solve, AssignmentProblem};
use crate::geometry::BoundingBox;
use crate::klt::correction::{FeatureTrack, PrevObject};
use crate::track::TrackId;

/// `min(P / M_prev, P / M_t)`, zero when either object holds no features.
pub fn klt_score(shared: usize, m_prev: usize, m_t: usize) -> f64 {
    if m_prev == 0 || m_t == 0 {
        return 0.0;
    }
    (shared as f64 / m_prev as f64).min(shared as f64 / m_t as f64)
}

/// Similarity between an object at `t` and one at `t - 1` from the tracks
/// that start in the older box and end in the newer one.
pub fn klt_similarity(o_t: &BoundingBox, o_prev: &BoundingBox, tracks: &[FeatureTrack]) -> f64 {
    let mut m_prev = 0;
    let mut m_t = 0;
    let mut shared = 0;
    for t in tracks {
        let in_prev = o_prev.contains(t.prev.0, t.prev.1);
        let in_t = o_t.contains(t.next.0, t.next.1);
        m_prev += in_prev as usize;
        m_t += in_t as usize;
        shared += (in_prev && in_t) as usize;
    }
    klt_score(shared, m_prev, m_t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KltLink {
    pub track: TrackId,
    pub detection: usize,
    pub score: f64,
}

/// Best one-to-one links between `t - 1` objects and detections at `t`,
/// keeping only links scoring at least `threshold`.
pub fn klt_propose(detections: &[BoundingBox], prev_objects: &[PrevObject], tracks: &[FeatureTrack], threshold: f64) -> Vec<KltLink> {
    let rows = prev_objects.len();
    let cols = detections.len();
    let scores: Vec<f64> = prev_objects
        .iter()
        .flat_map(|o| detections.iter().map(move |d| klt_similarity(d, &o.bbox, tracks)))
        .collect();
    let problem = AssignmentProblem::new(rows, cols, scores, threshold);
    let matching = solve(&problem).expect("KLT scores are finite");
    matching
        .pairs
        .into_iter()
        .map(|(r, c)| KltLink { track: prev_objects[r].id, detection: c, score: problem.score(r, c) })
        .collect()
}
