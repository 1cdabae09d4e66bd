//! Shi-Tomasi corner selection.

use crate::config::TrackerConfig;
use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::imaging::{GrayFrame, PixelRect};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointStatus {
    Tracked,
    Lost,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeaturePoint {
    pub x: f64,
    pub y: f64,
    /// Minimum eigenvalue of the structure tensor at selection time.
    pub quality: f64,
    pub status: PointStatus,
}

/// Central-difference gradients with clamped borders.
pub(crate) fn gradients(f: &GrayFrame) -> (Vec<f64>, Vec<f64>) {
    let (w, h) = (f.width, f.height);
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let (xi, yi) = (x as isize, y as isize);
            gx[y * w + x] = (f.get_clamped(xi + 1, yi) - f.get_clamped(xi - 1, yi)) / 2.0;
            gy[y * w + x] = (f.get_clamped(xi, yi + 1) - f.get_clamped(xi, yi - 1)) / 2.0;
        }
    }
    (gx, gy)
}

#[inline]
fn min_eigenvalue(a: f64, b: f64, c: f64) -> f64 {
    // Smaller eigenvalue of [[a, b], [b, c]].
    (a + c) / 2.0 - (((a - c) / 2.0).powi(2) + b * b).sqrt()
}

/// Selects corners inside `b`: local maxima of the minimum structure-tensor
/// eigenvalue that reach `klt_quality_ratio` times the strongest response,
/// thinned to `klt_min_distance` and capped at `klt_max_features`.
pub fn detect_features(f: &GrayFrame, b: &BoundingBox, cfg: &TrackerConfig) -> Result<Vec<FeaturePoint>> {
    let rect = PixelRect::from_box(b, f.width, f.height)
        .ok_or(Error::BoxOutsideFrame { width: f.width, height: f.height })?;
    let half = cfg.klt_block_size / 2;
    let margin = half + 1;
    if f.width <= 2 * margin || f.height <= 2 * margin {
        return Ok(Vec::new());
    }
    let x0 = rect.x0.max(margin);
    let y0 = rect.y0.max(margin);
    let x1 = rect.x1.min(f.width - margin);
    let y1 = rect.y1.min(f.height - margin);
    if x1 <= x0 || y1 <= y0 {
        return Ok(Vec::new());
    }

    // Gradients over the region the blocks touch.
    let gx0 = x0 - half;
    let gy0 = y0 - half;
    let gw = x1 - x0 + 2 * half;
    let gh = y1 - y0 + 2 * half;
    let mut ixx = vec![0.0; gw * gh];
    let mut iyy = vec![0.0; gw * gh];
    let mut ixy = vec![0.0; gw * gh];
    for yy in 0..gh {
        for xx in 0..gw {
            let (x, y) = ((gx0 + xx) as isize, (gy0 + yy) as isize);
            let dx = (f.get_clamped(x + 1, y) - f.get_clamped(x - 1, y)) / 2.0;
            let dy = (f.get_clamped(x, y + 1) - f.get_clamped(x, y - 1)) / 2.0;
            ixx[yy * gw + xx] = dx * dx;
            iyy[yy * gw + xx] = dy * dy;
            ixy[yy * gw + xx] = dx * dy;
        }
    }

    let (sw, sh) = (x1 - x0, y1 - y0);
    let mut score = vec![0.0; sw * sh];
    let mut best = 0.0f64;
    for sy in 0..sh {
        for sx in 0..sw {
            let (mut a, mut bb, mut c) = (0.0, 0.0, 0.0);
            for by in 0..cfg.klt_block_size {
                let row = (sy + by) * gw + sx;
                for bx in 0..cfg.klt_block_size {
                    a += ixx[row + bx];
                    bb += ixy[row + bx];
                    c += iyy[row + bx];
                }
            }
            let s = min_eigenvalue(a, bb, c).max(0.0);
            score[sy * sw + sx] = s;
            best = best.max(s);
        }
    }
    if best <= 0.0 {
        return Ok(Vec::new());
    }

    let floor = cfg.klt_quality_ratio * best;
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for sy in 0..sh {
        for sx in 0..sw {
            let s = score[sy * sw + sx];
            if s <= 0.0 || s < floor {
                continue;
            }
            let mut is_max = true;
            'nb: for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    let (nx, ny) = (sx as isize + dx, sy as isize + dy);
                    if (dx, dy) == (0, 0) || nx < 0 || ny < 0 || nx >= sw as isize || ny >= sh as isize {
                        continue;
                    }
                    if score[ny as usize * sw + nx as usize] > s {
                        is_max = false;
                        break 'nb;
                    }
                }
            }
            if is_max {
                candidates.push((s, x0 + sx, y0 + sy));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.2.cmp(&b.2)).then(a.1.cmp(&b.1)));

    let min_d2 = cfg.klt_min_distance * cfg.klt_min_distance;
    let mut out: Vec<FeaturePoint> = Vec::new();
    for (s, x, y) in candidates {
        if out.len() >= cfg.klt_max_features {
            break;
        }
        let (xf, yf) = (x as f64, y as f64);
        if out.iter().all(|p| (p.x - xf).powi(2) + (p.y - yf).powi(2) >= min_d2) {
            out.push(FeaturePoint { x: xf, y: yf, quality: s, status: PointStatus::Tracked });
        }
    }
    Ok(out)
}
