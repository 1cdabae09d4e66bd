//! Descriptor similarities, discriminative descriptor weights and the
//! weighted global similarity between two object snapshots.
//!
//! Every similarity lives in `[0, 1]` and equals 1 on identical inputs.
//! Distances are turned into similarities as `1 - normalized EMD` for the
//! histogram and dominant-color descriptors and `1 / (1 + d)` for the
//! covariance descriptor.

use nalgebra::DMatrix;

use crate::config::TrackerConfig;
use crate::error::{Error, Result};
use crate::geometry::{center_distance_2d, BoundingBox, Homography};
use crate::imaging::{CellHistogram, DescriptorSet, DominantColor};

/// Number of appearance descriptors.
pub const NUM_DESCRIPTORS: usize = 5;

/// Per-object descriptor weights, in descriptor order
/// (shape ratio, area, color histogram, color covariance, dominant color).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightVector(pub [f64; NUM_DESCRIPTORS]);

impl WeightVector {
    pub const UNIFORM: WeightVector = WeightVector([1.0; NUM_DESCRIPTORS]);
}

/// Ratio of the smaller to the larger value.
pub fn ds_size(a: f64, b: f64) -> Result<f64> {
    for v in [a, b] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::NonPositive(v));
        }
    }
    Ok(a.min(b) / a.max(b))
}

fn check_normalized(h: &[f64]) -> Result<()> {
    let s: f64 = h.iter().sum();
    if (s - 1.0).abs() > 1e-6 || h.iter().any(|v| *v < 0.0) {
        return Err(Error::UnnormalizedHistogram(s));
    }
    Ok(())
}

/// Exact earth mover's distance between two normalized histograms on a line,
/// unit ground distance between adjacent bins.
pub fn emd_1d(h1: &[f64], h2: &[f64]) -> Result<f64> {
    if h1.len() != h2.len() {
        return Err(Error::ShapeMismatch(format!("{} vs {} bins", h1.len(), h2.len())));
    }
    check_normalized(h1)?;
    check_normalized(h2)?;
    let mut cdf = 0.0;
    let mut total = 0.0;
    for (a, b) in h1.iter().zip(h2).take(h1.len().saturating_sub(1)) {
        cdf += a - b;
        total += cdf.abs();
    }
    Ok(total)
}

/// Minimum-cost transport between two mass distributions of equal total,
/// by successive shortest augmenting paths on the residual graph.
/// `cost` is row-major `supply.len() x demand.len()`.
pub fn min_cost_transport(supply: &[f64], demand: &[f64], cost: &[f64]) -> f64 {
    const EPS: f64 = 1e-13;
    let (n, m) = (supply.len(), demand.len());
    debug_assert_eq!(cost.len(), n * m);
    let mut left = supply.to_vec();
    let mut need = demand.to_vec();
    let mut flow = vec![0.0f64; n * m];
    // Nodes: 0..n sources, n..n+m sinks.
    loop {
        if left.iter().all(|v| *v <= EPS) || need.iter().all(|v| *v <= EPS) {
            break;
        }
        let mut dist = vec![f64::INFINITY; n + m];
        let mut prev = vec![usize::MAX; n + m];
        for i in 0..n {
            if left[i] > EPS {
                dist[i] = 0.0;
            }
        }
        // Bellman-Ford: residual arcs i->j always, j->i while flow(i, j) > 0.
        for _ in 0..n + m {
            let mut changed = false;
            for i in 0..n {
                if dist[i].is_finite() {
                    for j in 0..m {
                        let d = dist[i] + cost[i * m + j];
                        if d < dist[n + j] - 1e-15 {
                            dist[n + j] = d;
                            prev[n + j] = i;
                            changed = true;
                        }
                    }
                }
            }
            for j in 0..m {
                if dist[n + j].is_finite() {
                    for i in 0..n {
                        if flow[i * m + j] > EPS {
                            let d = dist[n + j] - cost[i * m + j];
                            if d < dist[i] - 1e-15 {
                                dist[i] = d;
                                prev[i] = n + j;
                                changed = true;
                            }
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let Some(end) = (0..m)
            .filter(|&j| need[j] > EPS && dist[n + j].is_finite())
            .min_by(|&a, &b| dist[n + a].total_cmp(&dist[n + b]))
        else {
            break;
        };
        // Walk back to the originating source to find the bottleneck.
        let mut amount = need[end];
        let mut node = n + end;
        loop {
            let p = prev[node];
            if node >= n {
                if p == usize::MAX {
                    break;
                }
                node = p;
            } else {
                if p == usize::MAX {
                    amount = amount.min(left[node]);
                    break;
                }
                let (i, j) = (node, p - n);
                amount = amount.min(flow[i * m + j]);
                node = p;
            }
        }
        let mut node = n + end;
        loop {
            let p = prev[node];
            if node >= n {
                let (i, j) = (p, node - n);
                flow[i * m + j] += amount;
                node = p;
            } else {
                if p == usize::MAX {
                    left[node] -= amount;
                    break;
                }
                let (i, j) = (node, p - n);
                flow[i * m + j] -= amount;
                node = p;
            }
        }
        need[end] -= amount;
    }
    flow.iter().zip(cost).map(|(f, c)| f * c).sum()
}

/// Pyramid-match combination of per-cell similarities stored level-major.
/// Level 0 gets weight `2^-(L-1)`, level `l >= 1` gets `2^-(L-l)`; the
/// weights sum to 1.
pub fn pyramid_combine(cell_sims: &[f64], levels: usize) -> f64 {
    let mut offset = 0;
    let mut out = 0.0;
    for level in 0..levels {
        let n = 1usize << level;
        let cells = &cell_sims[offset..offset + n];
        offset += n;
        let mean = cells.iter().sum::<f64>() / n as f64;
        let weight = if level == 0 { 0.5f64.powi(levels as i32 - 1) } else { 0.5f64.powi((levels - level) as i32) };
        out += weight * mean;
    }
    out
}

fn check_shapes(a: &DescriptorSet, b: &DescriptorSet) -> Result<()> {
    if a.levels != b.levels
        || a.color_histogram.len() != b.color_histogram.len()
        || a.color_covariance.len() != b.color_covariance.len()
        || a.dominant_colors.len() != b.dominant_colors.len()
    {
        return Err(Error::ShapeMismatch("pyramid layouts differ".into()));
    }
    Ok(())
}

/// Mean over channels of `1 - EMD / (B - 1)` for one cell.
pub fn histogram_cell_similarity(a: &CellHistogram, b: &CellHistogram) -> Result<f64> {
    let mut s = 0.0;
    for c in 0..3 {
        let bins = a.channels[c].len();
        if bins != b.channels[c].len() || bins < 2 {
            return Err(Error::ShapeMismatch("histogram bin counts differ".into()));
        }
        s += 1.0 - emd_1d(&a.channels[c], &b.channels[c])? / (bins - 1) as f64;
    }
    Ok((s / 3.0).clamp(0.0, 1.0))
}

pub fn ds_histogram(a: &DescriptorSet, b: &DescriptorSet) -> Result<f64> {
    check_shapes(a, b)?;
    let sims = a
        .color_histogram
        .iter()
        .zip(&b.color_histogram)
        .map(|(x, y)| histogram_cell_similarity(x, y))
        .collect::<Result<Vec<_>>>()?;
    Ok(pyramid_combine(&sims, a.levels))
}

/// Förstner-Moonen distance `sqrt(sum ln^2 lambda_i)` over the generalized
/// eigenvalues of `(c1, c2)`.
pub fn forstner_distance(c1: &DMatrix<f64>, c2: &DMatrix<f64>) -> Result<f64> {
    if c1.shape() != c2.shape() || !c1.is_square() {
        return Err(Error::ShapeMismatch(format!("{:?} vs {:?}", c1.shape(), c2.shape())));
    }
    if c1.clone().cholesky().is_none() {
        return Err(Error::NotSpd);
    }
    let l = c2.clone().cholesky().ok_or(Error::NotSpd)?.unpack();
    // A = L^-1 C1 L^-T shares its eigenvalues with C2^-1 C1.
    let y = l.solve_lower_triangular(c1).ok_or(Error::NotSpd)?;
    let a = l.solve_lower_triangular(&y.transpose()).ok_or(Error::NotSpd)?;
    let a = (&a + a.transpose()) * 0.5;
    let eig = a.symmetric_eigenvalues();
    let mut s = 0.0;
    for lambda in eig.iter() {
        if *lambda <= 0.0 {
            return Err(Error::NotSpd);
        }
        s += lambda.ln().powi(2);
    }
    Ok(s.sqrt())
}

pub fn ds_covariance(a: &DescriptorSet, b: &DescriptorSet) -> Result<f64> {
    check_shapes(a, b)?;
    let sims = a
        .color_covariance
        .iter()
        .zip(&b.color_covariance)
        .map(|(x, y)| Ok(1.0 / (1.0 + forstner_distance(x, y)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(pyramid_combine(&sims, a.levels))
}

/// EMD between two weighted color sets, ground distance normalized to `[0, 1]`.
pub fn dominant_color_emd(a: &[DominantColor], b: &[DominantColor]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("dominant color set"));
    }
    let norm = 255.0 * 3f64.sqrt();
    let cost: Vec<f64> = a
        .iter()
        .flat_map(|x| {
            b.iter().map(move |y| {
                (0..3).map(|d| (x.color[d] - y.color[d]).powi(2)).sum::<f64>().sqrt() / norm
            })
        })
        .collect();
    let wa: Vec<f64> = a.iter().map(|d| d.weight).collect();
    let wb: Vec<f64> = b.iter().map(|d| d.weight).collect();
    let (sa, sb) = (wa.iter().sum::<f64>(), wb.iter().sum::<f64>());
    let wa: Vec<f64> = wa.iter().map(|w| w / sa).collect();
    let wb: Vec<f64> = wb.iter().map(|w| w / sb).collect();
    Ok(min_cost_transport(&wa, &wb, &cost))
}

pub fn ds_dominant_color(a: &DescriptorSet, b: &DescriptorSet) -> Result<f64> {
    check_shapes(a, b)?;
    let sims = a
        .dominant_colors
        .iter()
        .zip(&b.dominant_colors)
        .map(|(x, y)| match (x.is_empty(), y.is_empty()) {
            (true, true) => Ok(1.0),
            (true, false) | (false, true) => Ok(0.0),
            _ => Ok((1.0 - dominant_color_emd(x, y)?).clamp(0.0, 1.0)),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(pyramid_combine(&sims, a.levels))
}

/// All five descriptor similarities, in descriptor order.
pub fn descriptor_similarities(a: &DescriptorSet, b: &DescriptorSet) -> Result<[f64; NUM_DESCRIPTORS]> {
    Ok([
        ds_size(a.shape_ratio, b.shape_ratio)?,
        ds_size(a.area, b.area)?,
        ds_histogram(a, b)?,
        ds_covariance(a, b)?,
        ds_dominant_color(a, b)?,
    ])
}

/// Indices of the objects in `boxes` that neighbor `boxes[index]`: closer than
/// `epsilon1_px` in the image and, when a homography is given, closer than
/// `epsilon2_m` on the ground plane.
pub fn neighborhood(index: usize, boxes: &[BoundingBox], cfg: &TrackerConfig, ground: Option<&Homography>) -> Vec<usize> {
    let me = &boxes[index];
    (0..boxes.len())
        .filter(|&j| j != index)
        .filter(|&j| center_distance_2d(me, &boxes[j]) < cfg.epsilon1_px)
        .filter(|&j| match ground {
            Some(h) => h.ground_distance(me, &boxes[j]).is_some_and(|d| d < cfg.epsilon2_m),
            None => true,
        })
        .collect()
}

/// Discriminative weights from precomputed similarities to each neighbor:
/// `w_k = mean_j log10(1 / clamp(DS_k, ds_floor, 1))`, uniform when there are
/// no neighbors.
pub fn weights_from_similarities(neighbor_sims: &[[f64; NUM_DESCRIPTORS]], ds_floor: f64) -> WeightVector {
    if neighbor_sims.is_empty() {
        return WeightVector::UNIFORM;
    }
    let mut w = [0.0; NUM_DESCRIPTORS];
    for sims in neighbor_sims {
        for k in 0..NUM_DESCRIPTORS {
            w[k] += (1.0 / sims[k].clamp(ds_floor, 1.0)).log10();
        }
    }
    let n = neighbor_sims.len() as f64;
    WeightVector(w.map(|v| v / n))
}

pub fn descriptor_weights(obj: &DescriptorSet, neighbors: &[&DescriptorSet], cfg: &TrackerConfig) -> Result<WeightVector> {
    let sims = neighbors.iter().map(|n| descriptor_similarities(obj, n)).collect::<Result<Vec<_>>>()?;
    Ok(weights_from_similarities(&sims, cfg.ds_floor))
}

/// Weighted mean of descriptor similarities with weights `w_a + w_b`,
/// falling back to the plain mean when every weight is zero.
pub fn combine_similarities(sims: &[f64; NUM_DESCRIPTORS], wa: &WeightVector, wb: &WeightVector) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..NUM_DESCRIPTORS {
        let w = wa.0[k] + wb.0[k];
        num += w * sims[k];
        den += w;
    }
    if den > 0.0 {
        (num / den).clamp(0.0, 1.0)
    } else {
        sims.iter().sum::<f64>() / NUM_DESCRIPTORS as f64
    }
}

pub fn global_similarity(a: &DescriptorSet, wa: &WeightVector, b: &DescriptorSet, wb: &WeightVector) -> Result<f64> {
    Ok(combine_similarities(&descriptor_similarities(a, b)?, wa, wb))
}
