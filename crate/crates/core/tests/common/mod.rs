#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use tracksel::io::{BoxRecord, Synth, SynthSpec};
use tracksel::metrics::Annotation;
use tracksel::pipeline::{run_sequence, track_rows, FrameInput, TrackRow};
use tracksel::{Detection, TrackerConfig};

pub fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/scenarios").join(name)
}

pub fn load_synth(name: &str) -> Synth {
    Synth::new(SynthSpec::load(&scenario(name)).unwrap()).unwrap()
}

/// Runs the full pipeline over a synthetic sequence rendered in memory.
pub fn track_synth(s: &Synth, cfg: &TrackerConfig) -> Vec<TrackRow> {
    let frames = (1..=s.spec().frames).map(|f| {
        let dets: Vec<Detection> = s
            .detections
            .iter()
            .filter(|d| d.frame == f)
            .map(|d| Detection { frame_index: f, bbox: d.bbox, confidence: d.confidence })
            .collect();
        (FrameInput { index: f, color: Some(Arc::new(s.frame(f))), ..Default::default() }, dets)
    });
    let (trajectories, _) = run_sequence(frames, cfg, None).unwrap();
    track_rows(&trajectories)
}

pub fn annotations(rows: &[TrackRow]) -> Vec<Annotation> {
    rows.iter().map(|r| Annotation { frame: r.frame, id: r.id as i64, bbox: r.bbox }).collect()
}

pub fn gt_annotations(records: &[BoxRecord]) -> Vec<Annotation> {
    records.iter().map(BoxRecord::annotation).collect()
}

/// Frames where the ground-truth boxes of the two objects intersect.
pub fn crossing_span(s: &Synth) -> Vec<u32> {
    (1..=s.spec().frames)
        .filter(|&f| match (s.object_box(0, f), s.object_box(1, f)) {
            (Some(a), Some(b)) => a.intersection_area(&b) > 0.0,
            _ => false,
        })
        .collect()
}
