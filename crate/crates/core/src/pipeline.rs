//! Per-frame orchestration.
//!
//! For each frame `t`:
//! 1. follow KLT features from `t - 1` into `t` and label them by the object they came from;
//! 2. split detections that cover several labeled objects;
//! 3. compute descriptors and discriminative weights for every surviving detection;
//! 4. let the appearance tracker and the KLT tracker each propose links;
//! 5. per trajectory, keep the proposal with the higher joint probability;
//! 6. extend matched trajectories, suspend or terminate the rest, start new
//!    trajectories from unmatched detector output and drop unmatched split boxes.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::assignment::{solve, AssignmentProblem};
use crate::config::TrackerConfig;
use crate::error::{Error, Result};
use crate::geometry::{center_distance_2d, BoundingBox, Detection, Homography};
use crate::imaging::{extract_all, ColorFrame, DescriptorSet, GrayFrame, Mask};
use crate::klt::{
    detect_features, evaluate_detection, klt_propose, label_features, split_detection, track_with_pyramids,
    DetectionVerdict, FeaturePoint, LabelRule, FeatureTrack, PointStatus, PrevObject, Pyramid,
};
use crate::models::{select_tracker, AppearanceModel, TrackerProposal};
use crate::similarity::{combine_similarities, descriptor_similarities, neighborhood, weights_from_similarities, NUM_DESCRIPTORS};
use crate::track::{LinkTag, ObjectSnapshot, Source, TrackId, TrackStatus, Trajectory, TrackerKind};

#[cfg(feature = "parallel")]
fn par_map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Vec<U> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Vec<U> {
    items.iter().map(f).collect()
}

/// Everything known about one frame besides its detections.
#[derive(Debug, Clone, Default)]
pub struct FrameInput {
    pub index: u32,
    pub color: Option<Arc<ColorFrame>>,
    pub mask: Option<Arc<Mask>>,
    /// Feature tracks from the previous frame into this one; bypasses image-based KLT.
    pub tracks: Option<Vec<FeatureTrack>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub track: TrackId,
    pub detection: Detection,
    pub tag: LinkTag,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameResult {
    pub frame: u32,
    /// Matched detections and the trajectories they extend, including new trajectories.
    pub links: Vec<Link>,
    pub new_tracks: Vec<TrackId>,
    pub suspended: Vec<TrackId>,
    pub terminated: Vec<TrackId>,
    /// Split detections no trajectory selected.
    pub noise: Vec<Detection>,
    /// Detections judged to cover several objects and replaced by their split parts.
    pub split_parents: Vec<Detection>,
}

#[derive(Debug, Clone, Default)]
pub struct TrackerState {
    pub trajectories: Vec<Trajectory>,
    pub next_id: TrackId,
    pub frame_index: Option<u32>,
}

struct Candidate {
    detection: Detection,
    source: Source,
}

/// Stateful tracker fed one frame at a time.
pub struct Tracker {
    cfg: TrackerConfig,
    ground: Option<Homography>,
    state: TrackerState,
    prev_gray: Option<(u32, GrayFrame, Pyramid)>,
}

impl Tracker {
    pub fn new(cfg: TrackerConfig, ground: Option<Homography>) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg, ground, state: TrackerState::default(), prev_gray: None })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    pub fn state(&self) -> &TrackerState {
        &self.state
    }

    pub fn into_trajectories(self) -> Vec<Trajectory> {
        self.state.trajectories
    }

    /// Objects matched at the previously processed frame.
    fn prev_objects(&self) -> Vec<PrevObject> {
        let Some(prev) = self.state.frame_index else { return Vec::new() };
        self.state
            .trajectories
            .iter()
            .filter(|t| t.status != TrackStatus::Terminated && t.last_matched_frame == prev)
            .map(|t| PrevObject { id: t.id, bbox: *t.last().bbox() })
            .collect()
    }

    fn feature_tracks(&mut self, input: &FrameInput, prev_objects: &[PrevObject]) -> Result<Vec<FeatureTrack>> {
        if let Some(tracks) = &input.tracks {
            return Ok(tracks.clone());
        }
        let Some(color) = &input.color else {
            return Err(Error::MissingFrame(input.index));
        };
        let gray = color.to_gray();
        let pyramid = Pyramid::build(&gray, self.cfg.klt_pyramid_depth);
        let mut out = Vec::new();
        if let Some((prev_index, prev_gray, prev_pyr)) = &self.prev_gray {
            let consecutive = self.state.frame_index == Some(*prev_index);
            if consecutive && prev_gray.width == gray.width && prev_gray.height == gray.height {
                let mut seen = BTreeSet::new();
                let mut points: Vec<FeaturePoint> = Vec::new();
                for o in prev_objects {
                    let Ok(found) = detect_features(prev_gray, &o.bbox, &self.cfg) else { continue };
                    for p in found {
                        if seen.insert((p.x as i64, p.y as i64)) {
                            points.push(p);
                        }
                    }
                }
                let moved = track_with_pyramids(prev_pyr, &pyramid, &points, &self.cfg);
                out = points
                    .iter()
                    .zip(&moved)
                    .filter(|(_, m)| m.status == PointStatus::Tracked)
                    .map(|(p, m)| FeatureTrack::new(input.index, (p.x, p.y), (m.x, m.y)))
                    .collect();
            }
        }
        self.prev_gray = Some((input.index, gray, pyramid));
        Ok(out)
    }

    /// Runs every step for one frame. Frames must arrive in increasing order.
    pub fn process_frame(&mut self, input: &FrameInput, detections: &[Detection]) -> Result<FrameResult> {
        let t = input.index;
        if let Some(prev) = self.state.frame_index {
            assert!(t > prev, "frames must be processed in increasing order");
        }
        let cfg = self.cfg.clone();
        for tr in &mut self.state.trajectories {
            if tr.status != TrackStatus::Terminated {
                tr.status = TrackStatus::Inactivated;
            }
        }

        // 1. Feature tracks and labels.
        let prev_objects = self.prev_objects();
        let mut tracks = self.feature_tracks(input, &prev_objects)?;
        label_features(&mut tracks, &prev_objects);

        let frame_size = match &input.color {
            Some(c) => (c.width, c.height),
            None => {
                let w = detections.iter().map(|d| d.bbox.right().ceil() as usize).max().unwrap_or(1);
                let h = detections.iter().map(|d| d.bbox.bottom().ceil() as usize).max().unwrap_or(1);
                (w.max(1), h.max(1))
            }
        };

        // 2. Detection evaluation and correction.
        let mut result = FrameResult { frame: t, ..Default::default() };
        let mut candidates: Vec<Candidate> = Vec::new();
        let rule = LabelRule::from_config(&cfg);
        for d in detections {
            let d = Detection { frame_index: t, ..*d };
            if let DetectionVerdict::Incorrect(_) = evaluate_detection(&d, &prev_objects, &tracks, rule) {
                let parts = split_detection(&d, &tracks, &prev_objects, frame_size, rule);
                if !parts.is_empty() {
                    result.split_parents.push(d);
                    candidates.extend(parts.into_iter().map(|(_, p)| Candidate { detection: p, source: Source::SplitCorrection }));
                    continue;
                }
            }
            candidates.push(Candidate { detection: d, source: Source::Detector });
        }

        // 3. Descriptors and discriminative weights.
        let fallback;
        let color: &ColorFrame = match &input.color {
            Some(c) => c,
            None => {
                fallback = ColorFrame::new(frame_size.0, frame_size.1, [128, 128, 128]);
                &fallback
            }
        };
        let mask = input.mask.as_deref();
        let descriptors: Vec<Arc<DescriptorSet>> = par_map(&candidates, |c| extract_all(color, &c.detection.bbox, mask, &cfg).map(Arc::new))
            .into_iter()
            .collect::<Result<_>>()?;
        let boxes: Vec<BoundingBox> = candidates.iter().map(|c| c.detection.bbox).collect();
        let idx: Vec<usize> = (0..candidates.len()).collect();
        let weights = par_map(&idx, |&i| {
            let sims = neighborhood(i, &boxes, &cfg, self.ground.as_ref())
                .into_iter()
                .map(|j| descriptor_similarities(&descriptors[i], &descriptors[j]))
                .collect::<Result<Vec<_>>>()?;
            Ok(weights_from_similarities(&sims, cfg.ds_floor))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let snapshots: Vec<ObjectSnapshot> = candidates
            .iter()
            .zip(descriptors)
            .zip(weights)
            .map(|((c, d), w)| ObjectSnapshot { detection: c.detection, descriptors: d, weights: w, source: c.source })
            .collect();

        // 4. Appearance tracker over inactivated trajectories in [t - T, t - 1].
        let eligible: Vec<usize> = (0..self.state.trajectories.len())
            .filter(|&k| {
                let tr = &self.state.trajectories[k];
                tr.status == TrackStatus::Inactivated && t - tr.last_matched_frame <= cfg.temporal_window
            })
            .collect();
        let pairs: Vec<(usize, usize)> = eligible.iter().flat_map(|&k| (0..snapshots.len()).map(move |i| (k, i))).collect();
        let scores = par_map(&pairs, |&(k, i)| {
            let tr = &self.state.trajectories[k];
            let last = tr.last();
            let gap = (t - tr.last_matched_frame) as f64;
            if center_distance_2d(last.bbox(), snapshots[i].bbox()) > cfg.max_speed_px * gap {
                return Ok(0.0);
            }
            let sims: [f64; NUM_DESCRIPTORS] = descriptor_similarities(&snapshots[i].descriptors, &last.descriptors)?;
            Ok(combine_similarities(&sims, &snapshots[i].weights, &last.weights))
        })
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
        let appearance = solve(&AssignmentProblem::new(eligible.len(), snapshots.len(), scores, cfg.link_threshold))?;
        let mut appearance_pick: BTreeMap<usize, usize> = BTreeMap::new();
        for (r, c) in appearance.pairs {
            appearance_pick.insert(eligible[r], c);
        }

        // 5. KLT tracker over objects matched at the previous frame.
        let klt_links = klt_propose(&boxes, &prev_objects, &tracks, cfg.klt_link_threshold);
        let mut klt_pick: BTreeMap<TrackId, usize> = BTreeMap::new();
        for l in klt_links {
            klt_pick.insert(l.track, l.detection);
        }

        // 6. Tracker selection per trajectory.
        let scored = par_map(&eligible, |&k| -> Result<Vec<TrackerProposal>> {
            let tr = &self.state.trajectories[k];
            let model = AppearanceModel::of_trajectory(tr, cfg.model_window)?;
            let mut props = Vec::new();
            if let Some(&c) = appearance_pick.get(&k) {
                props.push(TrackerProposal::score(TrackerKind::Appearance, tr.id, c, &snapshots[c].descriptors, &model)?);
            }
            if let Some(&c) = klt_pick.get(&tr.id) {
                props.push(TrackerProposal::score(TrackerKind::Klt, tr.id, c, &snapshots[c].descriptors, &model)?);
            }
            Ok(props)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

        let mut choices: Vec<(usize, TrackerProposal, Option<TrackerProposal>)> = Vec::new();
        for (&k, props) in eligible.iter().zip(&scored) {
            if let Some(best) = select_tracker(props, cfg.accept_threshold) {
                let alt = props
                    .iter()
                    .copied()
                    .find(|p| p.tracker != best.tracker && p.detection != best.detection && p.evidence >= cfg.accept_threshold);
                choices.push((k, best, alt));
            }
        }
        // Strongest selections claim their detection first.
        choices.sort_by(|a, b| {
            b.1.joint_probability
                .total_cmp(&a.1.joint_probability)
                .then(b.1.evidence.total_cmp(&a.1.evidence))
                .then(self.state.trajectories[a.0].id.cmp(&self.state.trajectories[b.0].id))
        });
        let mut taken = vec![false; snapshots.len()];
        let mut assigned: Vec<(usize, TrackerProposal)> = Vec::new();
        for (k, best, alt) in choices {
            if !taken[best.detection] {
                taken[best.detection] = true;
                assigned.push((k, best));
            } else if let Some(alt) = alt.filter(|a| !taken[a.detection]) {
                taken[alt.detection] = true;
                assigned.push((k, alt));
            }
        }

        // 7. Extend matched trajectories.
        let mut matched = BTreeSet::new();
        for (k, p) in &assigned {
            let snap = snapshots[p.detection].clone();
            let tag = LinkTag::Linked(p.tracker);
            let tr = &mut self.state.trajectories[*k];
            tr.push(snap.clone(), tag);
            matched.insert(*k);
            result.links.push(Link { track: tr.id, detection: snap.detection, tag });
        }

        // 8. Suspension and termination.
        for (k, tr) in self.state.trajectories.iter_mut().enumerate() {
            if tr.status != TrackStatus::Inactivated || matched.contains(&k) {
                continue;
            }
            if t - tr.last_matched_frame > cfg.suspension_max_frames {
                tr.status = TrackStatus::Terminated;
                result.terminated.push(tr.id);
            } else {
                tr.status = TrackStatus::Suspended;
                result.suspended.push(tr.id);
            }
        }

        // 9. New trajectories and noise.
        for (i, snap) in snapshots.into_iter().enumerate() {
            if taken[i] {
                continue;
            }
            match snap.source {
                Source::SplitCorrection => result.noise.push(snap.detection),
                Source::Detector if snap.detection.confidence >= cfg.min_seed_confidence => {
                    let id = self.state.next_id;
                    self.state.next_id += 1;
                    result.links.push(Link { track: id, detection: snap.detection, tag: LinkTag::New });
                    result.new_tracks.push(id);
                    self.state.trajectories.push(Trajectory::start(id, snap, cfg.model_window));
                }
                Source::Detector => {}
            }
        }
        result.links.sort_by_key(|l| l.track);

        self.state.frame_index = Some(t);
        Ok(result)
    }
}

/// Output row: one box of one trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackRow {
    pub frame: u32,
    pub id: TrackId,
    pub bbox: BoundingBox,
    pub confidence: f64,
    pub tag: LinkTag,
}

/// Flattens trajectories into rows sorted by `(frame, id)`.
pub fn track_rows(trajectories: &[Trajectory]) -> Vec<TrackRow> {
    let mut rows: Vec<TrackRow> = trajectories
        .iter()
        .flat_map(|t| {
            t.snapshots.iter().zip(&t.tags).map(move |(s, tag)| TrackRow {
                frame: s.frame(),
                id: t.id,
                bbox: *s.bbox(),
                confidence: s.detection.confidence,
                tag: *tag,
            })
        })
        .collect();
    rows.sort_by_key(|r| (r.frame, r.id));
    rows
}

/// Runs the tracker over a whole sequence. Frames are processed in increasing
/// index order; indices present in either input are visited.
pub fn run_sequence(
    frames: impl IntoIterator<Item = (FrameInput, Vec<Detection>)>,
    cfg: &TrackerConfig,
    ground: Option<Homography>,
) -> Result<(Vec<Trajectory>, Vec<FrameResult>)> {
    let mut tracker = Tracker::new(cfg.clone(), ground)?;
    let mut results = Vec::new();
    for (input, dets) in frames {
        results.push(tracker.process_frame(&input, &dets)?);
    }
    Ok((tracker.into_trajectories(), results))
}
