//! Object snapshots and trajectories.

use std::collections::VecDeque;
use std::sync::Arc;

use crate::geometry::{BoundingBox, Detection};
use crate::imaging::DescriptorSet;
use crate::similarity::WeightVector;

pub type TrackId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Source {
    Detector,
    SplitCorrection,
}

/// One observation of an object: its detection, appearance descriptors and
/// the discriminative weights computed against its own-frame neighbors.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectSnapshot {
    pub detection: Detection,
    pub descriptors: Arc<DescriptorSet>,
    pub weights: WeightVector,
    pub source: Source,
}

impl ObjectSnapshot {
    pub fn frame(&self) -> u32 {
        self.detection.frame_index
    }

    pub fn bbox(&self) -> &BoundingBox {
        &self.detection.bbox
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrackStatus {
    Active,
    Inactivated,
    Suspended,
    Terminated,
}

/// Which tracker produced the link that extended a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrackerKind {
    Appearance,
    Klt,
}

/// How a trajectory gained a given snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LinkTag {
    New,
    Linked(TrackerKind),
}

impl LinkTag {
    pub fn code(&self) -> &'static str {
        match self {
            LinkTag::New => "new",
            LinkTag::Linked(TrackerKind::Appearance) => "A",
            LinkTag::Linked(TrackerKind::Klt) => "K",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub id: TrackId,
    pub snapshots: Vec<ObjectSnapshot>,
    pub tags: Vec<LinkTag>,
    pub status: TrackStatus,
    pub last_matched_frame: u32,
    /// The most recent `capacity` snapshots.
    pub model_window: VecDeque<ObjectSnapshot>,
    capacity: usize,
}

impl Trajectory {
    pub fn start(id: TrackId, first: ObjectSnapshot, capacity: usize) -> Self {
        let frame = first.frame();
        let mut t = Self {
            id,
            snapshots: Vec::new(),
            tags: Vec::new(),
            status: TrackStatus::Active,
            last_matched_frame: frame,
            model_window: VecDeque::with_capacity(capacity),
            capacity: capacity.max(1),
        };
        t.push(first, LinkTag::New);
        t
    }

    /// Appends a snapshot. Frames must strictly increase.
    pub fn push(&mut self, snap: ObjectSnapshot, tag: LinkTag) {
        if let Some(last) = self.snapshots.last() {
            assert!(snap.frame() > last.frame(), "trajectory frames must strictly increase");
        }
        self.last_matched_frame = snap.frame();
        if self.model_window.len() == self.capacity {
            self.model_window.pop_front();
        }
        self.model_window.push_back(snap.clone());
        self.snapshots.push(snap);
        self.tags.push(tag);
        self.status = TrackStatus::Active;
    }

    pub fn last(&self) -> &ObjectSnapshot {
        self.snapshots.last().expect("trajectories are never empty")
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    /// Number of frames the trajectory spans, first to last observation.
    pub fn time_length(&self) -> u32 {
        self.last().frame() - self.snapshots[0].frame() + 1
    }
}
