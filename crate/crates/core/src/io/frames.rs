//! Frame directories and overlay rendering.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::imaging::{ColorFrame, GrayFrame};
use crate::io::formats::BoxRecord;

/// PPM/PGM files in `dir` keyed by the frame number in their file stem.
pub fn list_frames(dir: &Path) -> Result<BTreeMap<u32, PathBuf>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if !matches!(ext.as_deref(), Some("ppm" | "pgm")) {
            continue;
        }
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
        let digits: String = stem.chars().rev().take_while(char::is_ascii_digit).collect::<Vec<_>>().into_iter().rev().collect();
        let Ok(index) = digits.parse::<u32>() else {
            return Err(Error::Image { path, msg: "file name carries no frame number".into() });
        };
        if let Some(prev) = out.insert(index, path.clone()) {
            return Err(Error::Image { path, msg: format!("frame {index} also provided by {}", prev.display()) });
        }
    }
    Ok(out)
}

/// Loads a PPM, or a PGM replicated into three channels.
pub fn load_frame(path: &Path) -> Result<ColorFrame> {
    let is_pgm = path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("pgm"));
    if !is_pgm {
        return ColorFrame::read_ppm(path);
    }
    let g = GrayFrame::read_pgm(path)?;
    let pixels = g.pixels.iter().map(|&v| [v.round().clamp(0.0, 255.0) as u8; 3]).collect();
    ColorFrame::from_pixels(g.width, g.height, pixels)
}

/// 3x5 digit glyphs, one row per entry, three low bits per row.
const DIGITS: [[u8; 5]; 10] = [
    [7, 5, 5, 5, 7],
    [2, 6, 2, 2, 7],
    [7, 1, 7, 4, 7],
    [7, 1, 7, 1, 7],
    [5, 5, 7, 1, 1],
    [7, 4, 7, 1, 7],
    [7, 4, 7, 5, 7],
    [7, 1, 1, 1, 1],
    [7, 5, 7, 5, 7],
    [7, 5, 7, 1, 7],
];

fn draw_number(img: &mut ColorFrame, x: isize, y: isize, n: u32, color: [u8; 3]) {
    const SCALE: isize = 2;
    for (i, ch) in n.to_string().bytes().enumerate() {
        let glyph = DIGITS[(ch - b'0') as usize];
        let gx = x + i as isize * 4 * SCALE;
        for (row, bits) in glyph.iter().enumerate() {
            for col in 0..3 {
                if bits & (4 >> col) == 0 {
                    continue;
                }
                for dy in 0..SCALE {
                    for dx in 0..SCALE {
                        let px = gx + col as isize * SCALE + dx;
                        let py = y + row as isize * SCALE + dy;
                        if px >= 0 && py >= 0 && (px as usize) < img.width && (py as usize) < img.height {
                            img.set(px as usize, py as usize, color);
                        }
                    }
                }
            }
        }
    }
}

/// Stable, well-separated color per track id.
pub fn id_color(id: i64) -> [u8; 3] {
    const PALETTE: [[u8; 3]; 8] =
        [[255, 255, 0], [0, 255, 255], [255, 0, 255], [0, 255, 0], [255, 128, 0], [255, 255, 255], [0, 128, 255], [255, 0, 0]];
    PALETTE[id.rem_euclid(PALETTE.len() as i64) as usize]
}

/// Draws every row of frame `frame` as a box with its id above the top-left
/// corner. Negative ids (raw detections) get a box only.
pub fn draw_overlay(img: &mut ColorFrame, rows: &[BoxRecord], frame: u32) {
    for r in rows.iter().filter(|r| r.frame == frame) {
        let c = id_color(r.id);
        img.draw_rect(&r.bbox, c);
        if let Ok(id) = u32::try_from(r.id) {
            draw_number(img, r.bbox.x.round() as isize, r.bbox.y.round() as isize - 12, id, c);
        }
    }
}

/// Writes one annotated PPM per input frame into `out`. Returns the count.
pub fn write_overlays(frames_dir: &Path, rows: &[BoxRecord], out: &Path) -> Result<usize> {
    std::fs::create_dir_all(out)?;
    let frames = list_frames(frames_dir)?;
    for (&index, path) in &frames {
        let mut img = load_frame(path)?;
        draw_overlay(&mut img, rows, index);
        img.write_ppm(&out.join(format!("{index:06}.ppm")))?;
    }
    Ok(frames.len())
}
