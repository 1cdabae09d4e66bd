//! File formats, frame directories, synthetic sequences and overlays.

pub mod formats;
pub mod frames;
pub mod synth;

pub use formats::{
    parse_detections, parse_feature_tracks, read_annotations, read_boxes, read_homography, read_tags, read_tracks, tags_path,
    write_boxes, write_feature_tracks, write_tracks, BoxRecord,
};
pub use frames::{draw_overlay, list_frames, load_frame, write_overlays};
pub use synth::{MergeEvent, Synth, SynthObject, SynthSpec};

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::sync::Arc;

use crate::config::TrackerConfig;
use crate::error::Result;
use crate::geometry::Homography;
use crate::pipeline::{track_rows, FrameInput, TrackRow, Tracker};

/// Where per-frame image evidence comes from.
#[derive(Debug, Clone)]
pub enum FrameSource {
    Frames(PathBuf),
    FeatureTracks(PathBuf),
}

/// Runs the tracker over files on disk. Every frame index that appears in the
/// detections or the frame source is visited in increasing order.
pub fn track_files(detections: &std::path::Path, source: &FrameSource, cfg: &TrackerConfig, ground: Option<Homography>) -> Result<Vec<TrackRow>> {
    let dets = parse_detections(detections)?;
    let mut tracker = Tracker::new(cfg.clone(), ground)?;
    match source {
        FrameSource::Frames(dir) => {
            let frames = list_frames(dir)?;
            let indices: BTreeSet<u32> = dets.keys().chain(frames.keys()).copied().collect();
            for t in indices {
                let color = frames.get(&t).map(|p| load_frame(p).map(Arc::new)).transpose()?;
                let input = FrameInput { index: t, color, ..Default::default() };
                tracker.process_frame(&input, dets.get(&t).map_or(&[][..], Vec::as_slice))?;
            }
        }
        FrameSource::FeatureTracks(path) => {
            let mut tracks = parse_feature_tracks(path)?;
            let indices: BTreeSet<u32> = dets.keys().chain(tracks.keys()).copied().collect();
            for t in indices {
                let input = FrameInput { index: t, tracks: Some(tracks.remove(&t).unwrap_or_default()), ..Default::default() };
                tracker.process_frame(&input, dets.get(&t).map_or(&[][..], Vec::as_slice))?;
            }
        }
    }
    Ok(track_rows(&tracker.into_trajectories()))
}
