//! Pyramidal Lucas-Kanade point tracking (translation model).

use crate::config::TrackerConfig;
use crate::error::{Error, Result};
use crate::imaging::GrayFrame;
use crate::klt::features::{gradients, FeaturePoint, PointStatus};

struct Level {
    image: GrayFrame,
    gx: Vec<f64>,
    gy: Vec<f64>,
}

impl Level {
    fn new(image: GrayFrame) -> Self {
        let (gx, gy) = gradients(&image);
        Self { image, gx, gy }
    }

    fn sample_grad(&self, x: f64, y: f64) -> (f64, f64) {
        let w = self.image.width;
        let h = self.image.height;
        let x0 = x.floor();
        let y0 = y.floor();
        let ax = x - x0;
        let ay = y - y0;
        let at = |v: &[f64], xi: isize, yi: isize| {
            let xi = xi.clamp(0, w as isize - 1) as usize;
            let yi = yi.clamp(0, h as isize - 1) as usize;
            v[yi * w + xi]
        };
        let (xi, yi) = (x0 as isize, y0 as isize);
        let bil = |v: &[f64]| {
            (1.0 - ay) * ((1.0 - ax) * at(v, xi, yi) + ax * at(v, xi + 1, yi))
                + ay * ((1.0 - ax) * at(v, xi, yi + 1) + ax * at(v, xi + 1, yi + 1))
        };
        (bil(&self.gx), bil(&self.gy))
    }
}

/// Gaussian pyramid, finest level first.
pub struct Pyramid {
    levels: Vec<Level>,
}

fn downsample(f: &GrayFrame) -> GrayFrame {
    const K: [f64; 5] = [1.0, 4.0, 6.0, 4.0, 1.0];
    let (w, h) = (f.width, f.height);
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut s = 0.0;
            for (k, kv) in K.iter().enumerate() {
                s += kv * f.get_clamped(x as isize + k as isize - 2, y as isize);
            }
            tmp[y * w + x] = s / 16.0;
        }
    }
    let (nw, nh) = (w.div_ceil(2), h.div_ceil(2));
    let mut out = vec![0.0; nw * nh];
    for y in 0..nh {
        for x in 0..nw {
            let mut s = 0.0;
            for (k, kv) in K.iter().enumerate() {
                let yy = (2 * y as isize + k as isize - 2).clamp(0, h as isize - 1) as usize;
                s += kv * tmp[yy * w + 2 * x];
            }
            out[y * nw + x] = s / 16.0;
        }
    }
    GrayFrame { width: nw, height: nh, pixels: out }
}

impl Pyramid {
    pub fn build(f: &GrayFrame, depth: usize) -> Self {
        let mut levels = vec![Level::new(f.clone())];
        while levels.len() < depth {
            let last = &levels.last().unwrap().image;
            if last.width < 16 || last.height < 16 {
                break;
            }
            let next = downsample(last);
            levels.push(Level::new(next));
        }
        Self { levels }
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    fn base(&self) -> &GrayFrame {
        &self.levels[0].image
    }
}

/// Tracks one point from `prev` to `next`. Returns the new position or `None` when lost.
fn track_point(prev: &Pyramid, next: &Pyramid, x: f64, y: f64, cfg: &TrackerConfig) -> Option<(f64, f64)> {
    let half = (cfg.klt_window / 2) as isize;
    let n_win = (cfg.klt_window * cfg.klt_window) as f64;
    let depth = prev.depth().min(next.depth());
    let mut guess = (0.0f64, 0.0f64);
    let mut template = Vec::with_capacity(cfg.klt_window * cfg.klt_window);
    for level in (0..depth).rev() {
        let scale = (1u32 << level) as f64;
        let (px, py) = (x / scale, y / scale);
        let lp = &prev.levels[level];
        let ln = &next.levels[level];

        template.clear();
        let (mut gxx, mut gxy, mut gyy) = (0.0, 0.0, 0.0);
        for wy in -half..=half {
            for wx in -half..=half {
                let (sx, sy) = (px + wx as f64, py + wy as f64);
                let (ix, iy) = lp.sample_grad(sx, sy);
                template.push((lp.image.sample(sx, sy), ix, iy));
                gxx += ix * ix;
                gxy += ix * iy;
                gyy += iy * iy;
            }
        }
        let det = gxx * gyy - gxy * gxy;
        let min_eig = ((gxx + gyy) / 2.0 - (((gxx - gyy) / 2.0).powi(2) + gxy * gxy).sqrt()) / (n_win * 255.0 * 255.0);
        if min_eig < cfg.klt_min_eigen || det.abs() < f64::EPSILON {
            return None;
        }

        let mut d = (0.0f64, 0.0f64);
        for _ in 0..cfg.klt_max_iterations {
            let (mut bx, mut by) = (0.0, 0.0);
            let mut k = 0;
            for wy in -half..=half {
                for wx in -half..=half {
                    let (t, ix, iy) = template[k];
                    k += 1;
                    let j = ln.image.sample(px + wx as f64 + guess.0 + d.0, py + wy as f64 + guess.1 + d.1);
                    let e = t - j;
                    bx += e * ix;
                    by += e * iy;
                }
            }
            let step = ((gyy * bx - gxy * by) / det, (gxx * by - gxy * bx) / det);
            d.0 += step.0;
            d.1 += step.1;
            if step.0.hypot(step.1) < cfg.klt_epsilon {
                break;
            }
        }
        guess = if level > 0 { (2.0 * (guess.0 + d.0), 2.0 * (guess.1 + d.1)) } else { (guess.0 + d.0, guess.1 + d.1) };
        if !(guess.0.is_finite() && guess.1.is_finite()) {
            return None;
        }
    }

    let (nx, ny) = (x + guess.0, y + guess.1);
    let base = next.base();
    if nx < 0.0 || ny < 0.0 || nx > (base.width - 1) as f64 || ny > (base.height - 1) as f64 {
        return None;
    }
    let src = prev.base();
    let mut residual = 0.0;
    for wy in -half..=half {
        for wx in -half..=half {
            residual += (src.sample(x + wx as f64, y + wy as f64) - base.sample(nx + wx as f64, ny + wy as f64)).abs();
        }
    }
    if residual / n_win > cfg.klt_max_residual {
        return None;
    }
    Some((nx, ny))
}

/// Tracks points between two prebuilt pyramids.
pub fn track_with_pyramids(prev: &Pyramid, next: &Pyramid, pts: &[FeaturePoint], cfg: &TrackerConfig) -> Vec<FeaturePoint> {
    pts.iter()
        .map(|p| {
            let lost = FeaturePoint { status: PointStatus::Lost, ..*p };
            if p.status == PointStatus::Lost {
                return lost;
            }
            let Some((nx, ny)) = track_point(prev, next, p.x, p.y, cfg) else { return lost };
            if cfg.klt_fb_threshold > 0.0 {
                match track_point(next, prev, nx, ny, cfg) {
                    Some((bx, by)) if (bx - p.x).hypot(by - p.y) <= cfg.klt_fb_threshold => {}
                    _ => return FeaturePoint { x: nx, y: ny, ..lost },
                }
            }
            FeaturePoint { x: nx, y: ny, quality: p.quality, status: PointStatus::Tracked }
        })
        .collect()
}

/// Tracks `pts` from `prev` into `next`. Output is index-aligned with the input;
/// points that cannot be followed come back with status `Lost`.
pub fn track_features(prev: &GrayFrame, next: &GrayFrame, pts: &[FeaturePoint], cfg: &TrackerConfig) -> Result<Vec<FeaturePoint>> {
    if prev.width != next.width || prev.height != next.height {
        return Err(Error::FrameSizeMismatch(prev.width, prev.height, next.width, next.height));
    }
    let a = Pyramid::build(prev, cfg.klt_pyramid_depth);
    let b = Pyramid::build(next, cfg.klt_pyramid_depth);
    Ok(track_with_pyramids(&a, &b, pts, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BoundingBox;
    use crate::klt::features::detect_features;

    fn textured(w: usize, h: usize, seed: u64) -> GrayFrame {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let cells: Vec<f64> = (0..(w / 4 + 2) * (h / 4 + 2)).map(|_| rng.random_range(0.0..255.0)).collect();
        let cw = w / 4 + 2;
        let raw = GrayFrame {
            width: w,
            height: h,
            pixels: (0..w * h).map(|i| cells[(i / w / 4) * cw + (i % w) / 4]).collect(),
        };
        downsample_blur(&raw)
    }

    fn downsample_blur(f: &GrayFrame) -> GrayFrame {
        let mut out = f.clone();
        for y in 0..f.height {
            for x in 0..f.width {
                let mut s = 0.0;
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        s += f.get_clamped(x as isize + dx, y as isize + dy);
                    }
                }
                out.pixels[y * f.width + x] = s / 9.0;
            }
        }
        out
    }

    #[test]
    fn identical_frames_give_zero_motion() {
        let f = textured(80, 60, 1);
        let cfg = TrackerConfig::default();
        let pts = detect_features(&f, &BoundingBox::new(10.0, 10.0, 60.0, 40.0).unwrap(), &cfg).unwrap();
        assert!(!pts.is_empty());
        let out = track_features(&f, &f, &pts, &cfg).unwrap();
        for (a, b) in pts.iter().zip(&out) {
            assert_eq!(b.status, PointStatus::Tracked);
            assert!((a.x - b.x).abs() <= 1e-6 && (a.y - b.y).abs() <= 1e-6);
        }
    }

    #[test]
    fn recovers_a_three_pixel_shift() {
        let f = textured(120, 90, 2);
        let mut g = f.clone();
        for y in 0..f.height {
            for x in 0..f.width {
                g.pixels[y * f.width + x] = f.get_clamped(x as isize - 3, y as isize);
            }
        }
        let cfg = TrackerConfig::default();
        let pts = detect_features(&f, &BoundingBox::new(20.0, 20.0, 80.0, 50.0).unwrap(), &cfg).unwrap();
        let out = track_features(&f, &g, &pts, &cfg).unwrap();
        let good = pts
            .iter()
            .zip(&out)
            .filter(|(a, b)| b.status == PointStatus::Tracked && (b.x - a.x - 3.0).abs() < 0.2 && (b.y - a.y).abs() < 0.2)
            .count();
        assert!(good * 10 >= pts.len() * 9, "{good} of {}", pts.len());
    }

    #[test]
    fn flat_region_is_lost() {
        let f = GrayFrame::new(40, 40, 100.0);
        let p = FeaturePoint { x: 20.0, y: 20.0, quality: 1.0, status: PointStatus::Tracked };
        let out = track_features(&f, &f, &[p], &TrackerConfig::default()).unwrap();
        assert_eq!(out[0].status, PointStatus::Lost);
    }

    #[test]
    fn size_mismatch_is_error() {
        let a = GrayFrame::new(10, 10, 0.0);
        let b = GrayFrame::new(11, 10, 0.0);
        assert!(track_features(&a, &b, &[], &TrackerConfig::default()).is_err());
    }
}
