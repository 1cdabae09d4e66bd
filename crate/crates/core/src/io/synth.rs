//! Synthetic sequences: textured rectangles moving on a gray background.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::imaging::ColorFrame;
use crate::io::formats::{write_boxes, BoxRecord};

/// Texture cell size in pixels.
const CELL: usize = 3;

fn default_background() -> u8 {
    128
}
fn default_confidence() -> f64 {
    1.0
}
fn default_amplitude() -> f64 {
    60.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthObject {
    pub color: [u8; 3],
    /// Width and height in pixels.
    pub size: [f64; 2],
    /// Top-left corner at `first_frame`.
    pub start: [f64; 2],
    /// Pixels per frame.
    #[serde(default)]
    pub velocity: [f64; 2],
    #[serde(default)]
    pub texture_seed: u64,
    /// Peak brightness deviation of the texture.
    #[serde(default = "default_amplitude")]
    pub texture_amplitude: f64,
    #[serde(default)]
    pub first_frame: Option<u32>,
    #[serde(default)]
    pub last_frame: Option<u32>,
}

/// Two objects reported as their union box over `from..=to`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MergeEvent {
    pub objects: [usize; 2],
    pub from: u32,
    pub to: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub width: usize,
    pub height: usize,
    pub frames: u32,
    #[serde(default = "default_background")]
    pub background: u8,
    #[serde(default)]
    pub seed: u64,
    /// Standard deviation of detection noise on x, y, w and h, in pixels.
    #[serde(default)]
    pub jitter: f64,
    #[serde(default)]
    pub miss_rate: f64,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
    #[serde(default)]
    pub objects: Vec<SynthObject>,
    #[serde(default)]
    pub merges: Vec<MergeEvent>,
}

impl SynthSpec {
    pub fn parse_text(text: &str) -> Result<Self> {
        let s: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse_text(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.width == 0 || self.height == 0 || self.frames == 0 {
            return bad("width, height and frames must be positive".into());
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return bad(format!("jitter must be non-negative, got {}", self.jitter));
        }
        if !(0.0..=1.0).contains(&self.miss_rate) {
            return bad(format!("miss_rate must lie in [0, 1], got {}", self.miss_rate));
        }
        for (i, o) in self.objects.iter().enumerate() {
            if !(o.size[0] >= 1.0 && o.size[1] >= 1.0) {
                return bad(format!("object {i}: size must be at least 1 px"));
            }
        }
        for m in &self.merges {
            if m.objects.iter().any(|&k| k >= self.objects.len()) || m.objects[0] == m.objects[1] || m.from > m.to {
                return bad(format!("invalid merge event {m:?}"));
            }
        }
        Ok(())
    }
}

/// Rendered sequence; frames are produced on demand.
pub struct Synth {
    spec: SynthSpec,
    textures: Vec<Vec<f64>>,
    pub ground_truth: Vec<BoxRecord>,
    pub detections: Vec<BoxRecord>,
}

fn texture_cols(o: &SynthObject) -> usize {
    (o.size[0].ceil() as usize).div_ceil(CELL) + 1
}

impl Synth {
    pub fn new(spec: SynthSpec) -> Result<Self> {
        spec.validate()?;
        let textures = spec
            .objects
            .iter()
            .map(|o| {
                let mut rng = ChaCha8Rng::seed_from_u64(o.texture_seed);
                let rows = (o.size[1].ceil() as usize).div_ceil(CELL) + 1;
                (0..rows * texture_cols(o)).map(|_| rng.random_range(-1.0..1.0) * o.texture_amplitude).collect()
            })
            .collect();
        let mut s = Self { spec, textures, ground_truth: Vec::new(), detections: Vec::new() };
        s.annotate();
        Ok(s)
    }

    pub fn spec(&self) -> &SynthSpec {
        &self.spec
    }

    /// Rendered box of object `k` at frame `f`, clipped to the frame.
    pub fn object_box(&self, k: usize, f: u32) -> Option<BoundingBox> {
        let o = &self.spec.objects[k];
        let first = o.first_frame.unwrap_or(1);
        if f < first || o.last_frame.is_some_and(|l| f > l) {
            return None;
        }
        let dt = (f - first) as f64;
        let x = (o.start[0] + o.velocity[0] * dt).round();
        let y = (o.start[1] + o.velocity[1] * dt).round();
        BoundingBox { x, y, w: o.size[0].round(), h: o.size[1].round() }.clip(self.spec.width as f64, self.spec.height as f64)
    }

    fn unclipped_origin(&self, k: usize, f: u32) -> (f64, f64) {
        let o = &self.spec.objects[k];
        let dt = (f - o.first_frame.unwrap_or(1)) as f64;
        ((o.start[0] + o.velocity[0] * dt).round(), (o.start[1] + o.velocity[1] * dt).round())
    }

    fn annotate(&mut self) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.spec.seed);
        let noise = Normal::new(0.0, self.spec.jitter).expect("jitter validated");
        for f in 1..=self.spec.frames {
            let mut seen: Vec<Option<BoundingBox>> = Vec::with_capacity(self.spec.objects.len());
            for k in 0..self.spec.objects.len() {
                let Some(b) = self.object_box(k, f) else {
                    seen.push(None);
                    continue;
                };
                self.ground_truth.push(BoxRecord { frame: f, id: k as i64 + 1, bbox: b, confidence: 1.0 });
                let missed = self.spec.miss_rate > 0.0 && rng.random::<f64>() < self.spec.miss_rate;
                let mut j = [0.0; 4];
                if self.spec.jitter > 0.0 {
                    for v in &mut j {
                        *v = noise.sample(&mut rng);
                    }
                }
                seen.push((!missed).then(|| BoundingBox { x: b.x + j[0], y: b.y + j[1], w: (b.w + j[2]).max(1.0), h: (b.h + j[3]).max(1.0) }));
            }
            let mut merged = vec![false; seen.len()];
            let mut frame_dets = Vec::new();
            for m in &self.spec.merges {
                let [a, b] = m.objects;
                if f < m.from || f > m.to || merged[a] || merged[b] {
                    continue;
                }
                if let (Some(ba), Some(bb)) = (seen[a], seen[b]) {
                    merged[a] = true;
                    merged[b] = true;
                    frame_dets.push((a.min(b), ba.union_box(&bb)));
                }
            }
            for (k, b) in seen.iter().enumerate() {
                if let (Some(b), false) = (b, merged[k]) {
                    frame_dets.push((k, *b));
                }
            }
            frame_dets.sort_by_key(|(k, _)| *k);
            self.detections.extend(frame_dets.into_iter().map(|(_, bbox)| BoxRecord { frame: f, id: -1, bbox, confidence: self.spec.confidence }));
        }
    }

    /// Renders frame `f` (1-based). Later objects are drawn over earlier ones.
    pub fn frame(&self, f: u32) -> ColorFrame {
        let bg = self.spec.background;
        let mut img = ColorFrame::new(self.spec.width, self.spec.height, [bg, bg, bg]);
        for (k, o) in self.spec.objects.iter().enumerate() {
            let Some(b) = self.object_box(k, f) else { continue };
            let (ox, oy) = self.unclipped_origin(k, f);
            let cols = texture_cols(o);
            let tex = &self.textures[k];
            for y in b.y as usize..(b.y + b.h) as usize {
                for x in b.x as usize..(b.x + b.w) as usize {
                    let tx = (x as f64 - ox) as usize / CELL;
                    let ty = (y as f64 - oy) as usize / CELL;
                    let d = tex[ty * cols + tx];
                    let px = o.color.map(|c| (c as f64 + d).round().clamp(0.0, 255.0) as u8);
                    img.set(x, y, px);
                }
            }
        }
        img
    }

    /// Writes `frames/NNNNNN.ppm`, `det.csv` and `gt.csv` under `out`.
    pub fn write(&self, out: &Path) -> Result<()> {
        let frames = out.join("frames");
        std::fs::create_dir_all(&frames)?;
        for f in 1..=self.spec.frames {
            self.frame(f).write_ppm(&frames.join(frame_file_name(f)))?;
        }
        write_boxes(&self.detections, &out.join("det.csv"))?;
        write_boxes(&self.ground_truth, &out.join("gt.csv"))?;
        Ok(())
    }
}

pub fn frame_file_name(f: u32) -> String {
    format!("{f:06}.ppm")
}
