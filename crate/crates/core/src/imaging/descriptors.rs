//! The five appearance descriptors of an object snapshot.
//!
//! Color descriptors are computed per cell of a horizontal-stripe pyramid:
//! level 0 is the whole box, level `l` splits it into `2^l` stripes of equal
//! height. Cells are stored level-major, so a pyramid of `L` levels holds
//! `2^L - 1` cells.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::TrackerConfig;
use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::imaging::frame::{ColorFrame, Mask, PixelRect};

/// Dimension of the per-pixel covariance feature vector.
pub const COV_DIM: usize = 11;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PyramidCell {
    pub level: usize,
    pub bbox: BoundingBox,
}

/// Normalized R, G and B histograms of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellHistogram {
    pub channels: [Vec<f64>; 3],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DominantColor {
    pub color: [f64; 3],
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSet {
    pub shape_ratio: f64,
    pub area: f64,
    pub levels: usize,
    pub color_histogram: Vec<CellHistogram>,
    pub color_covariance: Vec<DMatrix<f64>>,
    pub dominant_colors: Vec<Vec<DominantColor>>,
}

pub fn shape_ratio(b: &BoundingBox) -> f64 {
    b.w / b.h
}

pub fn area(b: &BoundingBox) -> f64 {
    b.w * b.h
}

pub fn cell_count(levels: usize) -> usize {
    (1usize << levels) - 1
}

pub fn pyramid_cells(b: &BoundingBox, levels: usize) -> Vec<PyramidCell> {
    let mut cells = Vec::with_capacity(cell_count(levels));
    for level in 0..levels {
        let n = 1usize << level;
        let h = b.h / n as f64;
        for i in 0..n {
            cells.push(PyramidCell {
                level,
                bbox: BoundingBox { x: b.x, y: b.y + i as f64 * h, w: b.w, h },
            });
        }
    }
    cells
}

fn check_inside(f: &ColorFrame, b: &BoundingBox) -> Result<()> {
    if b.clip(f.width as f64, f.height as f64).is_none() {
        return Err(Error::BoxOutsideFrame { width: f.width, height: f.height });
    }
    Ok(())
}

#[inline]
fn bin_of(v: u8, bins: usize) -> usize {
    (v as usize * bins) / 256
}

pub fn color_histogram(
    f: &ColorFrame,
    b: &BoundingBox,
    mask: Option<&Mask>,
    cfg: &TrackerConfig,
) -> Result<Vec<CellHistogram>> {
    check_inside(f, b)?;
    let bins = cfg.hist_bins;
    Ok(pyramid_cells(b, cfg.pyramid_levels)
        .iter()
        .map(|cell| {
            let mut counts = [vec![0usize; bins], vec![0usize; bins], vec![0usize; bins]];
            let mut total = 0usize;
            if let Some(r) = PixelRect::from_box(&cell.bbox, f.width, f.height) {
                for (x, y) in r.coords() {
                    if mask.is_some_and(|m| !m.get(x, y)) {
                        continue;
                    }
                    let p = f.get(x, y);
                    for c in 0..3 {
                        counts[c][bin_of(p[c], bins)] += 1;
                    }
                    total += 1;
                }
            }
            let normalize = |counts: &[usize]| -> Vec<f64> {
                if total == 0 {
                    vec![1.0 / bins as f64; bins]
                } else {
                    counts.iter().map(|&n| n as f64 / total as f64).collect()
                }
            };
            CellHistogram { channels: [normalize(&counts[0]), normalize(&counts[1]), normalize(&counts[2])] }
        })
        .collect())
}

/// Central-difference gradient of channel `c` at `(x, y)`, with clamped borders.
fn gradient(f: &ColorFrame, x: usize, y: usize, c: usize) -> (f64, f64) {
    let xm = x.saturating_sub(1);
    let xp = (x + 1).min(f.width - 1);
    let ym = y.saturating_sub(1);
    let yp = (y + 1).min(f.height - 1);
    let gx = (f.get(xp, y)[c] as f64 - f.get(xm, y)[c] as f64) / 2.0;
    let gy = (f.get(x, yp)[c] as f64 - f.get(x, ym)[c] as f64) / 2.0;
    (gx, gy)
}

fn pixel_features(f: &ColorFrame, r: &PixelRect, x: usize, y: usize) -> [f64; COV_DIM] {
    let norm = |v: usize, lo: usize, n: usize| if n > 1 { (v - lo) as f64 / (n - 1) as f64 } else { 0.5 };
    let p = f.get(x, y);
    let mut out = [0.0; COV_DIM];
    out[0] = norm(x, r.x0, r.width());
    out[1] = norm(y, r.y0, r.height());
    for c in 0..3 {
        out[2 + c] = p[c] as f64;
        let (gx, gy) = gradient(f, x, y, c);
        out[5 + c] = gx.hypot(gy);
        out[8 + c] = gy.atan2(gx);
    }
    out
}

/// Regularized 11x11 sample covariance of a cell's per-pixel features.
fn cell_covariance(f: &ColorFrame, rect: Option<PixelRect>) -> DMatrix<f64> {
    let mut cov = DMatrix::<f64>::zeros(COV_DIM, COV_DIM);
    if let Some(r) = rect.filter(|r| r.len() >= 2) {
        let feats: Vec<[f64; COV_DIM]> = r.coords().map(|(x, y)| pixel_features(f, &r, x, y)).collect();
        let n = feats.len() as f64;
        let mut mean = [0.0; COV_DIM];
        for v in &feats {
            for i in 0..COV_DIM {
                mean[i] += v[i];
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        for v in &feats {
            let d: [f64; COV_DIM] = std::array::from_fn(|i| v[i] - mean[i]);
            for i in 0..COV_DIM {
                for j in i..COV_DIM {
                    cov[(i, j)] += d[i] * d[j];
                }
            }
        }
        for i in 0..COV_DIM {
            for j in i..COV_DIM {
                let v = cov[(i, j)] / (n - 1.0);
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
        }
    }
    let lambda = 1e-6 * cov.trace() / COV_DIM as f64 + 1e-9;
    for i in 0..COV_DIM {
        cov[(i, i)] += lambda;
    }
    cov
}

pub fn color_covariance(f: &ColorFrame, b: &BoundingBox, cfg: &TrackerConfig) -> Result<Vec<DMatrix<f64>>> {
    check_inside(f, b)?;
    Ok(pyramid_cells(b, cfg.pyramid_levels)
        .iter()
        .map(|cell| cell_covariance(f, PixelRect::from_box(&cell.bbox, f.width, f.height)))
        .collect())
}

fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (0..3).map(|i| (a[i] - b[i]).powi(2)).sum()
}

/// Order-independent fingerprint of a weighted color set.
fn fingerprint(colors: &BTreeMap<[u8; 3], usize>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for (c, n) in colors {
        for byte in c.iter().copied().chain(n.to_le_bytes()) {
            h ^= byte as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

/// Weighted k-means over distinct colors, followed by merging and pruning.
fn dominant_of_pixels(pixels: impl Iterator<Item = [u8; 3]>, cfg: &TrackerConfig) -> Vec<DominantColor> {
    let mut counts: BTreeMap<[u8; 3], usize> = BTreeMap::new();
    for p in pixels {
        *counts.entry(p).or_default() += 1;
    }
    if counts.is_empty() {
        return Vec::new();
    }
    let points: Vec<([f64; 3], f64)> =
        counts.iter().map(|(c, &n)| ([c[0] as f64, c[1] as f64, c[2] as f64], n as f64)).collect();
    let total: f64 = points.iter().map(|p| p.1).sum();
    let k = cfg.dominant_colors.min(points.len());

    // k-means++ seeding over distinct colors, weighted by pixel count.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ fingerprint(&counts));
    let pick = |rng: &mut ChaCha8Rng, weights: &[f64]| -> usize {
        let sum: f64 = weights.iter().sum();
        let mut r = rng.random::<f64>() * sum;
        for (i, w) in weights.iter().enumerate() {
            if r < *w {
                return i;
            }
            r -= w;
        }
        weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
    };
    let mut centers: Vec<[f64; 3]> = Vec::with_capacity(k);
    let first = pick(&mut rng, &points.iter().map(|p| p.1).collect::<Vec<_>>());
    centers.push(points[first].0);
    while centers.len() < k {
        let weights: Vec<f64> = points
            .iter()
            .map(|(c, n)| n * centers.iter().map(|z| dist2(c, z)).fold(f64::INFINITY, f64::min))
            .collect();
        if weights.iter().all(|w| *w <= 0.0) {
            break;
        }
        centers.push(points[pick(&mut rng, &weights)].0);
    }

    let nearest = |c: &[f64; 3], centers: &[[f64; 3]]| -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, z) in centers.iter().enumerate() {
            let d = dist2(c, z);
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        best
    };
    let mut assign = vec![0usize; points.len()];
    for _ in 0..cfg.kmeans_iterations {
        let mut changed = false;
        for (i, (c, _)) in points.iter().enumerate() {
            let a = nearest(c, &centers);
            if a != assign[i] {
                assign[i] = a;
                changed = true;
            }
        }
        let mut sums = vec![[0.0f64; 3]; centers.len()];
        let mut mass = vec![0.0f64; centers.len()];
        for (i, (c, n)) in points.iter().enumerate() {
            for d in 0..3 {
                sums[assign[i]][d] += c[d] * n;
            }
            mass[assign[i]] += n;
        }
        for (j, z) in centers.iter_mut().enumerate() {
            if mass[j] > 0.0 {
                *z = [sums[j][0] / mass[j], sums[j][1] / mass[j], sums[j][2] / mass[j]];
            }
        }
        if !changed {
            break;
        }
    }
    for (i, (c, _)) in points.iter().enumerate() {
        assign[i] = nearest(c, &centers);
    }
    let mut clusters: Vec<DominantColor> = centers
        .iter()
        .enumerate()
        .map(|(j, z)| {
            let w: f64 = points.iter().zip(&assign).filter(|(_, &a)| a == j).map(|(p, _)| p.1).sum();
            DominantColor { color: *z, weight: w / total }
        })
        .filter(|d| d.weight > 0.0)
        .collect();

    // Merge the closest pair while any two clusters sit within the merge radius.
    let r2 = cfg.dominant_merge_radius * cfg.dominant_merge_radius;
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..clusters.len() {
            for j in i + 1..clusters.len() {
                let d = dist2(&clusters[i].color, &clusters[j].color);
                if d < r2 && best.is_none_or(|b| d < b.2) {
                    best = Some((i, j, d));
                }
            }
        }
        let Some((i, j, _)) = best else { break };
        let (a, b) = (clusters[i], clusters[j]);
        let w = a.weight + b.weight;
        clusters[i] = DominantColor {
            color: std::array::from_fn(|d| (a.color[d] * a.weight + b.color[d] * b.weight) / w),
            weight: w,
        };
        clusters.remove(j);
    }

    clusters.retain(|d| d.weight >= cfg.dominant_min_weight);
    let kept: f64 = clusters.iter().map(|d| d.weight).sum();
    clusters.iter_mut().for_each(|d| d.weight /= kept);
    clusters.sort_by(|a, b| {
        b.weight.total_cmp(&a.weight).then_with(|| {
            a.color.iter().zip(&b.color).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    clusters
}

pub fn dominant_color(f: &ColorFrame, b: &BoundingBox, cfg: &TrackerConfig) -> Result<Vec<Vec<DominantColor>>> {
    check_inside(f, b)?;
    Ok(pyramid_cells(b, cfg.pyramid_levels)
        .iter()
        .map(|cell| match PixelRect::from_box(&cell.bbox, f.width, f.height) {
            Some(r) => dominant_of_pixels(r.coords().map(|(x, y)| f.get(x, y)), cfg),
            None => Vec::new(),
        })
        .collect())
}

pub fn extract_all(
    f: &ColorFrame,
    b: &BoundingBox,
    mask: Option<&Mask>,
    cfg: &TrackerConfig,
) -> Result<DescriptorSet> {
    Ok(DescriptorSet {
        shape_ratio: shape_ratio(b),
        area: area(b),
        levels: cfg.pyramid_levels,
        color_histogram: color_histogram(f, b, mask, cfg)?,
        color_covariance: color_covariance(f, b, cfg)?,
        dominant_colors: dominant_color(f, b, cfg)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bb(x: f64, y: f64, w: f64, h: f64) -> BoundingBox {
        BoundingBox::new(x, y, w, h).unwrap()
    }

    fn cfg1() -> TrackerConfig {
        TrackerConfig { pyramid_levels: 1, ..Default::default() }
    }

    #[test]
    fn size_descriptors() {
        assert_eq!(shape_ratio(&bb(0.0, 0.0, 5.0, 5.0)), 1.0);
        assert_eq!(shape_ratio(&bb(0.0, 0.0, 2.0, 4.0)), 0.5);
        assert_eq!(shape_ratio(&bb(0.0, 0.0, 30.0, 80.0)), 0.375);
        assert_eq!(area(&bb(0.0, 0.0, 1.0, 1.0)), 1.0);
        assert_eq!(area(&bb(0.0, 0.0, 2.0, 4.0)), 8.0);
        assert_eq!(area(&bb(0.0, 0.0, 30.0, 80.0)), 2400.0);
    }

    #[test]
    fn pyramid_cell_counts() {
        let b = bb(0.0, 0.0, 10.0, 40.0);
        assert_eq!(pyramid_cells(&b, 1).len(), 1);
        assert_eq!(pyramid_cells(&b, 2).len(), 3);
        let c3 = pyramid_cells(&b, 3);
        assert_eq!(c3.len(), 7);
        assert!(c3[3..].iter().all(|c| c.level == 2 && c.bbox.h == 10.0));
        assert_eq!(c3[6].bbox.y, 30.0);
    }

    #[test]
    fn red_patch_histogram() {
        let f = ColorFrame::new(4, 4, [255, 0, 0]);
        let h = color_histogram(&f, &bb(0.0, 0.0, 4.0, 4.0), None, &cfg1()).unwrap();
        assert_eq!(h[0].channels[0][15], 1.0);
        assert_eq!(h[0].channels[1][0], 1.0);
        assert_eq!(h[0].channels[2][0], 1.0);
    }

    #[test]
    fn half_red_half_blue_histogram() {
        let f = ColorFrame::from_pixels(2, 2, vec![[255, 0, 0], [0, 0, 255], [255, 0, 0], [0, 0, 255]]).unwrap();
        let h = color_histogram(&f, &bb(0.0, 0.0, 2.0, 2.0), None, &cfg1()).unwrap();
        assert_eq!(h[0].channels[0][0], 0.5);
        assert_eq!(h[0].channels[0][15], 0.5);
        assert_eq!(h[0].channels[2][0], 0.5);
        assert_eq!(h[0].channels[2][15], 0.5);
    }

    #[test]
    fn mask_restricts_histogram_and_empty_mask_is_uniform() {
        let f = ColorFrame::from_pixels(2, 1, vec![[255, 255, 255], [0, 0, 0]]).unwrap();
        let mask = Mask { width: 2, height: 1, data: vec![true, false] };
        let h = color_histogram(&f, &bb(0.0, 0.0, 2.0, 1.0), Some(&mask), &cfg1()).unwrap();
        assert_eq!(h[0].channels[1][15], 1.0);
        let none = Mask { width: 2, height: 1, data: vec![false, false] };
        let h = color_histogram(&f, &bb(0.0, 0.0, 2.0, 1.0), Some(&none), &cfg1()).unwrap();
        assert!(h[0].channels[0].iter().all(|v| (v - 1.0 / 16.0).abs() < 1e-15));
    }

    #[test]
    fn box_outside_frame_is_error() {
        let f = ColorFrame::new(4, 4, [0, 0, 0]);
        let cfg = TrackerConfig::default();
        assert!(color_histogram(&f, &bb(10.0, 10.0, 2.0, 2.0), None, &cfg).is_err());
        assert!(color_covariance(&f, &bb(10.0, 10.0, 2.0, 2.0), &cfg).is_err());
        assert!(dominant_color(&f, &bb(10.0, 10.0, 2.0, 2.0), &cfg).is_err());
    }

    #[test]
    fn constant_cell_covariance_is_location_only() {
        let f = ColorFrame::new(20, 20, [40, 90, 200]);
        let (w, h) = (6usize, 4usize);
        let cov = color_covariance(&f, &bb(3.0, 5.0, w as f64, h as f64), &cfg1()).unwrap().remove(0);
        // Closed-form sample variance of k/(n-1), k = 0..n-1, each value repeated `m` times.
        let var = |n: usize, m: usize| {
            let big_n = (n * m) as f64;
            let pop = ((n * n - 1) as f64 / 12.0) / ((n - 1) as f64).powi(2);
            pop * big_n / (big_n - 1.0)
        };
        let lambda = 1e-6 * (var(w, h) + var(h, w)) / 11.0 + 1e-9;
        assert!((cov[(0, 0)] - lambda - var(w, h)).abs() < 1e-12);
        assert!((cov[(1, 1)] - lambda - var(h, w)).abs() < 1e-12);
        assert!(cov[(0, 1)].abs() < 1e-12);
        for i in 2..COV_DIM {
            for j in 0..COV_DIM {
                let expect = if i == j { lambda } else { 0.0 };
                assert!((cov[(i, j)] - expect).abs() < 1e-12, "({i},{j}) = {}", cov[(i, j)]);
            }
        }
    }

    #[test]
    fn degenerate_cell_covariance_is_scaled_identity() {
        let f = ColorFrame::new(4, 4, [1, 2, 3]);
        let cov = color_covariance(&f, &bb(1.0, 1.0, 1.0, 1.0), &cfg1()).unwrap().remove(0);
        assert_eq!(cov, DMatrix::identity(COV_DIM, COV_DIM) * 1e-9);
    }

    #[test]
    fn single_color_dominant() {
        let f = ColorFrame::new(5, 5, [12, 200, 30]);
        let d = dominant_color(&f, &bb(0.0, 0.0, 5.0, 5.0), &cfg1()).unwrap();
        assert_eq!(d[0].len(), 1);
        assert_eq!(d[0][0].weight, 1.0);
        assert_eq!(d[0][0].color, [12.0, 200.0, 30.0]);
    }

    #[test]
    fn seventy_thirty_dominant() {
        let mut px = vec![[255, 0, 0]; 70];
        px.extend(vec![[0, 0, 255]; 30]);
        let f = ColorFrame::from_pixels(10, 10, px).unwrap();
        let d = dominant_color(&f, &bb(0.0, 0.0, 10.0, 10.0), &cfg1()).unwrap().remove(0);
        assert_eq!(d.len(), 2);
        assert!((d[0].weight - 0.7).abs() < 1e-12);
        assert_eq!(d[0].color, [255.0, 0.0, 0.0]);
        assert!((d[1].weight - 0.3).abs() < 1e-12);
    }

    #[test]
    fn near_colors_merge_and_small_clusters_drop() {
        let mut px = vec![[100, 100, 100]; 50];
        px.extend(vec![[110, 100, 100]; 48]);
        px.extend(vec![[0, 255, 0]; 2]);
        let f = ColorFrame::from_pixels(10, 10, px).unwrap();
        let d = dominant_color(&f, &bb(0.0, 0.0, 10.0, 10.0), &cfg1()).unwrap().remove(0);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].weight, 1.0);
        assert!((d[0].color[0] - (100.0 * 50.0 + 110.0 * 48.0) / 98.0).abs() < 1e-9);
    }

    #[test]
    fn extract_all_shapes() {
        let f = ColorFrame::new(30, 30, [9, 9, 9]);
        let d = extract_all(&f, &bb(2.0, 2.0, 10.0, 20.0), None, &TrackerConfig::default()).unwrap();
        assert_eq!(d.color_histogram.len(), 3);
        assert_eq!(d.color_covariance.len(), 3);
        assert_eq!(d.dominant_colors.len(), 3);
        assert_eq!(d.shape_ratio, 0.5);
        assert_eq!(d.area, 200.0);
    }
}
