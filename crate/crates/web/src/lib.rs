//! Browser demo: a crossing scene tracked live, a planted-shift optical flow
//! probe and a descriptor-weight explorer.

use std::sync::Arc;

use wasm_bindgen::prelude::*;

use tracksel::geometry::{BoundingBox, Detection};
use tracksel::imaging::GrayFrame;
use tracksel::io::{draw_overlay, BoxRecord, MergeEvent, Synth, SynthObject, SynthSpec};
use tracksel::klt::{detect_features, track_features, PointStatus};
use tracksel::metrics::{clear_mot, Annotation};
use tracksel::pipeline::{run_sequence, track_rows, FrameInput, TrackRow};
use tracksel::similarity::{combine_similarities, weights_from_similarities, WeightVector, NUM_DESCRIPTORS};
use tracksel::track::{LinkTag, TrackerKind};
use tracksel::TrackerConfig;

fn err(e: tracksel::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn crossing_spec(seed: u64, same_color: bool, jitter: f64) -> SynthSpec {
    let red = [200, 50, 50];
    let obj = |color, size: [f64; 2], start: [f64; 2], vx: f64, texture_seed| SynthObject {
        color,
        size,
        start,
        velocity: [vx, 0.0],
        texture_seed,
        texture_amplitude: 60.0,
        first_frame: None,
        last_frame: None,
    };
    SynthSpec {
        width: 320,
        height: 240,
        frames: 200,
        background: 128,
        seed,
        jitter,
        miss_rate: 0.0,
        confidence: 1.0,
        objects: vec![
            obj(red, [30.0, 60.0], [10.0, 60.0], 1.4, seed.wrapping_mul(2) + 1),
            obj(if same_color { red } else { [50, 60, 200] }, [28.0, 58.0], [280.0, 95.0], -1.4, seed.wrapping_mul(2) + 2),
        ],
        merges: vec![MergeEvent { objects: [0, 1], from: 95, to: 110 }],
    }
}

/// Two objects crossing, tracked once up front and replayed frame by frame.
#[wasm_bindgen]
pub struct CrossingDemo {
    synth: Synth,
    rows: Vec<TrackRow>,
}

#[wasm_bindgen]
impl CrossingDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, same_color: bool, jitter: f64) -> Result<CrossingDemo, JsError> {
        let synth = Synth::new(crossing_spec(seed as u64, same_color, jitter)).map_err(err)?;
        let cfg = TrackerConfig::default();
        let frames = (1..=synth.spec().frames).map(|f| {
            let dets = synth.detections.iter().filter(|d| d.frame == f).map(|d| Detection::new(f, d.bbox)).collect();
            (FrameInput { index: f, color: Some(Arc::new(synth.frame(f))), ..Default::default() }, dets)
        });
        let (trajectories, _) = run_sequence(frames, &cfg, None).map_err(err)?;
        Ok(CrossingDemo { rows: track_rows(&trajectories), synth })
    }

    pub fn width(&self) -> usize {
        self.synth.spec().width
    }

    pub fn height(&self) -> usize {
        self.synth.spec().height
    }

    pub fn frames(&self) -> u32 {
        self.synth.spec().frames
    }

    /// RGBA pixels of frame `f` with raw detections in gray and tracks in color.
    pub fn render(&self, f: u32) -> Vec<u8> {
        let mut img = self.synth.frame(f);
        let dets: Vec<BoxRecord> = self.synth.detections.iter().filter(|d| d.frame == f).copied().collect();
        for d in &dets {
            img.draw_rect(&d.bbox.translated(-2.0, -2.0), [90, 90, 90]);
        }
        let tracks: Vec<BoxRecord> = self
            .rows
            .iter()
            .filter(|r| r.frame == f)
            .map(|r| BoxRecord { frame: r.frame, id: r.id as i64, bbox: r.bbox, confidence: r.confidence })
            .collect();
        draw_overlay(&mut img, &tracks, f);
        img.pixels.iter().flat_map(|p| [p[0], p[1], p[2], 255]).collect()
    }

    /// Which tracker extended each trajectory at frame `f`: `id:A`, `id:K` or `id:new`.
    pub fn tags(&self, f: u32) -> String {
        self.rows.iter().filter(|r| r.frame == f).map(|r| format!("{}:{}", r.id, r.tag.code())).collect::<Vec<_>>().join(" ")
    }

    pub fn summary(&self) -> String {
        let gt: Vec<Annotation> = self.synth.ground_truth.iter().map(BoxRecord::annotation).collect();
        let hyp: Vec<Annotation> = self.rows.iter().map(|r| Annotation { frame: r.frame, id: r.id as i64, bbox: r.bbox }).collect();
        let count = |t: LinkTag| self.rows.iter().filter(|r| r.tag == t).count();
        let ids: std::collections::BTreeSet<u32> = self.rows.iter().map(|r| r.id).collect();
        let m = match clear_mot(&gt, &hyp, 0.5) {
            Ok(m) => format!("MOTA {:.3}, MOTP {:.3}, IDSW {}", m.mota, m.motp, m.idsw),
            Err(e) => e.to_string(),
        };
        format!(
            "{m}; {} tracks; links: {} appearance, {} KLT",
            ids.len(),
            count(LinkTag::Linked(TrackerKind::Appearance)),
            count(LinkTag::Linked(TrackerKind::Klt))
        )
    }
}

fn texture(w: usize, h: usize, seed: u64) -> GrayFrame {
    // Small integer hash keeps the demo free of extra dependencies.
    let cell = |i: usize, j: usize| {
        let mut v = seed ^ ((i as u64) << 32 | j as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
        v ^= v >> 29;
        v = v.wrapping_mul(0xbf58_476d_1ce4_e5b9);
        v ^= v >> 32;
        (v % 256) as f64
    };
    let mut g = GrayFrame::new(w, h, 0.0);
    for y in 0..h {
        for x in 0..w {
            let (gx, gy) = (x as f64 / 5.0, y as f64 / 5.0);
            let (i, j) = (gx as usize, gy as usize);
            let (ax, ay) = (gx.fract(), gy.fract());
            g.pixels[y * w + x] = (1.0 - ay) * ((1.0 - ax) * cell(i, j) + ax * cell(i + 1, j))
                + ay * ((1.0 - ax) * cell(i, j + 1) + ax * cell(i + 1, j + 1));
        }
    }
    g
}

/// Shifts a textured 160x120 frame by `(dx, dy)` and tracks corners across it.
/// Returns `[features, recovered within 0.5 px, mean dx, mean dy]`.
#[wasm_bindgen]
pub fn lk_shift(dx: f64, dy: f64, seed: u32) -> Result<Vec<f64>, JsError> {
    let (w, h) = (160, 120);
    let a = texture(w, h, seed as u64);
    let mut b = a.clone();
    for y in 0..h {
        for x in 0..w {
            b.pixels[y * w + x] = a.sample(x as f64 - dx, y as f64 - dy);
        }
    }
    let cfg = TrackerConfig::default();
    let region = BoundingBox::new(20.0, 20.0, w as f64 - 40.0, h as f64 - 40.0).map_err(err)?;
    let pts = detect_features(&a, &region, &cfg).map_err(err)?;
    let moved = track_features(&a, &b, &pts, &cfg).map_err(err)?;
    let tracked: Vec<(f64, f64)> =
        pts.iter().zip(&moved).filter(|(_, q)| q.status == PointStatus::Tracked).map(|(p, q)| (q.x - p.x, q.y - p.y)).collect();
    let good = tracked.iter().filter(|(ex, ey)| (ex - dx).hypot(ey - dy) <= 0.5).count();
    let n = tracked.len().max(1) as f64;
    Ok(vec![
        pts.len() as f64,
        good as f64,
        tracked.iter().map(|t| t.0).sum::<f64>() / n,
        tracked.iter().map(|t| t.1).sum::<f64>() / n,
    ])
}

/// Descriptor weights from flattened per-neighbor similarities (five per
/// neighbor), followed by the global similarity of `pair_sims` when both
/// objects carry those weights.
#[wasm_bindgen]
pub fn weights(neighbor_sims: &[f64], pair_sims: &[f64], ds_floor: f64) -> Result<Vec<f64>, JsError> {
    explore_weights(neighbor_sims, pair_sims, ds_floor).map_err(JsError::new)
}

fn explore_weights(neighbor_sims: &[f64], pair_sims: &[f64], ds_floor: f64) -> Result<Vec<f64>, &'static str> {
    if !neighbor_sims.len().is_multiple_of(NUM_DESCRIPTORS) || pair_sims.len() != NUM_DESCRIPTORS {
        return Err("expected five similarities per neighbor and five for the pair");
    }
    if !(ds_floor > 0.0 && ds_floor < 1.0) {
        return Err("ds_floor must lie in (0, 1)");
    }
    let rows: Vec<[f64; NUM_DESCRIPTORS]> =
        neighbor_sims.chunks(NUM_DESCRIPTORS).map(|c| std::array::from_fn(|k| c[k].clamp(0.0, 1.0))).collect();
    let w = weights_from_similarities(&rows, ds_floor);
    let pair: [f64; NUM_DESCRIPTORS] = std::array::from_fn(|k| pair_sims[k].clamp(0.0, 1.0));
    let g = combine_similarities(&pair, &w, &w);
    let plain = combine_similarities(&pair, &WeightVector::UNIFORM, &WeightVector::UNIFORM);
    let mut out = w.0.to_vec();
    out.extend([g, plain]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lk_probe_recovers_shift() {
        let r = lk_shift(3.0, -2.0, 7).unwrap();
        assert!(r[0] >= 10.0);
        assert!(r[1] >= 0.9 * r[0]);
        assert!((r[2] - 3.0).abs() < 0.2 && (r[3] + 2.0).abs() < 0.2);
    }

    #[test]
    fn weights_explorer() {
        // One neighbor identical in color, different in size.
        let out = explore_weights(&[0.5, 0.5, 1.0, 1.0, 1.0], &[1.0, 1.0, 0.2, 0.2, 0.2], 0.1).unwrap();
        assert_eq!(out.len(), NUM_DESCRIPTORS + 2);
        assert!(out[2] == 0.0 && out[0] > 0.0);
        assert_eq!(out[5], 1.0, "only the size descriptors count");
        assert!((out[6] - 0.52).abs() < 1e-12);
        assert!(explore_weights(&[0.5; 4], &[1.0; 5], 0.1).is_err());
    }

    #[test]
    fn crossing_demo_renders() {
        let d = CrossingDemo::new(11, false, 1.0).unwrap();
        assert_eq!(d.render(1).len(), d.width() * d.height() * 4);
        assert!(d.summary().starts_with("MOTA"));
        assert!(d.tags(50).contains(":A") || d.tags(50).contains(":K"));
    }
}
