//! Online tracking evaluation: per-trajectory appearance models, the joint
//! probability of a candidate under a model, and tracker selection.
//!
//! Every component score lies in `[0, 1]`. Each is multiplied by the
//! trajectory reliability factor `min(|T| / Q, 1)`, where `|T|` is the
//! trajectory's time length in frames.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::imaging::{CellHistogram, DescriptorSet};
use crate::similarity::{ds_dominant_color, forstner_distance, histogram_cell_similarity, NUM_DESCRIPTORS};
use crate::track::{Source, TrackId, Trajectory, TrackerKind};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianStat {
    pub mean: f64,
    pub std: f64,
}

impl GaussianStat {
    fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let floor = 0.05 * mean.abs() + 1e-6;
        Self { mean, std: var.sqrt().max(floor) }
    }

    /// Gaussian scaled to peak at 1.
    pub fn score(&self, v: f64) -> f64 {
        (-(v - self.mean).powi(2) / (2.0 * self.std * self.std)).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SizeDescriptor {
    ShapeRatio,
    Area,
}

/// Appearance model of one trajectory, built from its last `Q` snapshots.
#[derive(Debug, Clone)]
pub struct AppearanceModel {
    pub window: Vec<std::sync::Arc<DescriptorSet>>,
    pub q: usize,
    pub time_length: u32,
    pub shape_ratio: GaussianStat,
    pub area: GaussianStat,
    /// Mean level-0 histogram per channel.
    pub mean_histogram: CellHistogram,
    /// Log-Euclidean mean of the level-0 covariance matrices.
    pub mean_covariance: DMatrix<f64>,
}

fn spd_map(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(f));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

/// `exp(mean(log C_i))`.
pub fn log_euclidean_mean(mats: &[&DMatrix<f64>]) -> Result<DMatrix<f64>> {
    let first = mats.first().ok_or(Error::Empty("covariance window"))?;
    let mut acc = DMatrix::<f64>::zeros(first.nrows(), first.ncols());
    for m in mats {
        if (*m).clone().cholesky().is_none() {
            return Err(Error::NotSpd);
        }
        acc += spd_map(m, f64::ln);
    }
    acc /= mats.len() as f64;
    Ok(spd_map(&acc, f64::exp))
}

impl AppearanceModel {
    pub fn new(window: Vec<std::sync::Arc<DescriptorSet>>, q: usize, time_length: u32) -> Result<Self> {
        if window.is_empty() {
            return Err(Error::Empty("appearance model window"));
        }
        let shape: Vec<f64> = window.iter().map(|d| d.shape_ratio).collect();
        let area: Vec<f64> = window.iter().map(|d| d.area).collect();
        let bins = window[0].color_histogram[0].channels[0].len();
        let mut mean = [vec![0.0; bins], vec![0.0; bins], vec![0.0; bins]];
        for d in &window {
            for (c, ch) in d.color_histogram[0].channels.iter().enumerate() {
                if ch.len() != bins {
                    return Err(Error::ShapeMismatch("histogram bins differ across the window".into()));
                }
                for (m, v) in mean[c].iter_mut().zip(ch) {
                    *m += v;
                }
            }
        }
        let n = window.len() as f64;
        mean.iter_mut().for_each(|ch| ch.iter_mut().for_each(|v| *v /= n));
        let covs: Vec<&DMatrix<f64>> = window.iter().map(|d| &d.color_covariance[0]).collect();
        let mean_covariance = log_euclidean_mean(&covs)?;
        Ok(Self {
            shape_ratio: GaussianStat::of(&shape),
            area: GaussianStat::of(&area),
            mean_histogram: CellHistogram { channels: mean },
            mean_covariance,
            window,
            q,
            time_length,
        })
    }

    pub fn of_trajectory(t: &Trajectory, q: usize) -> Result<Self> {
        let window = t.model_window.iter().map(|s| s.descriptors.clone()).collect();
        Self::new(window, q, t.time_length())
    }

    pub fn length_factor(&self) -> f64 {
        (self.time_length as f64 / self.q as f64).min(1.0)
    }

    fn size_score(&self, candidate: &DescriptorSet, which: SizeDescriptor) -> f64 {
        match which {
            SizeDescriptor::ShapeRatio => self.shape_ratio.score(candidate.shape_ratio),
            SizeDescriptor::Area => self.area.score(candidate.area),
        }
    }

    fn histogram_score(&self, candidate: &DescriptorSet) -> Result<f64> {
        histogram_cell_similarity(&candidate.color_histogram[0], &self.mean_histogram)
    }

    fn covariance_score(&self, candidate: &DescriptorSet) -> Result<f64> {
        Ok(1.0 / (1.0 + forstner_distance(&candidate.color_covariance[0], &self.mean_covariance)?))
    }

    fn dominant_score(&self, candidate: &DescriptorSet) -> Result<f64> {
        let mut s = 0.0;
        for d in &self.window {
            s += ds_dominant_color(candidate, d)?;
        }
        Ok(s / self.window.len() as f64)
    }

    /// The five component scores without the reliability factor.
    pub fn evidence(&self, candidate: &DescriptorSet) -> Result<[f64; NUM_DESCRIPTORS]> {
        Ok([
            self.size_score(candidate, SizeDescriptor::ShapeRatio),
            self.size_score(candidate, SizeDescriptor::Area),
            self.histogram_score(candidate)?,
            self.covariance_score(candidate)?,
            self.dominant_score(candidate)?,
        ])
    }
}

pub fn prob_size(candidate: &DescriptorSet, m: &AppearanceModel, which: SizeDescriptor) -> f64 {
    m.size_score(candidate, which) * m.length_factor()
}

pub fn prob_histogram(candidate: &DescriptorSet, m: &AppearanceModel) -> Result<f64> {
    Ok(m.histogram_score(candidate)? * m.length_factor())
}

pub fn prob_covariance(candidate: &DescriptorSet, m: &AppearanceModel) -> Result<f64> {
    Ok(m.covariance_score(candidate)? * m.length_factor())
}

pub fn prob_dominant_color(candidate: &DescriptorSet, m: &AppearanceModel) -> Result<f64> {
    Ok(m.dominant_score(candidate)? * m.length_factor())
}

/// Product of the five component probabilities.
pub fn joint_probability(candidate: &DescriptorSet, m: &AppearanceModel) -> Result<f64> {
    let lf = m.length_factor();
    Ok(m.evidence(candidate)?.iter().map(|s| s * lf).product())
}

/// Index of the candidate with the highest joint probability; ties go to the lowest index.
pub fn best_candidate(m: &AppearanceModel, candidates: &[&DescriptorSet]) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::Empty("candidate set"));
    }
    let mut best = 0;
    let mut best_p = f64::NEG_INFINITY;
    for (i, c) in candidates.iter().enumerate() {
        let p = joint_probability(c, m)?;
        if p > best_p {
            best = i;
            best_p = p;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerProposal {
    pub tracker: TrackerKind,
    pub track: TrackId,
    pub detection: usize,
    /// Joint probability including the reliability factor.
    pub joint_probability: f64,
    /// Geometric mean of the component scores without the reliability factor.
    pub evidence: f64,
}

impl TrackerProposal {
    pub fn score(tracker: TrackerKind, track: TrackId, detection: usize, candidate: &DescriptorSet, m: &AppearanceModel) -> Result<Self> {
        let product: f64 = m.evidence(candidate)?.iter().product();
        let lf = m.length_factor();
        Ok(Self {
            tracker,
            track,
            detection,
            joint_probability: product * lf.powi(NUM_DESCRIPTORS as i32),
            evidence: product.powf(1.0 / NUM_DESCRIPTORS as f64),
        })
    }
}

/// Picks the proposal with the highest joint probability among those whose
/// evidence reaches `accept`. Ties favor the appearance tracker.
pub fn select_tracker(proposals: &[TrackerProposal], accept: f64) -> Option<TrackerProposal> {
    let rank = |p: &TrackerProposal| (p.joint_probability, matches!(p.tracker, TrackerKind::Appearance));
    proposals
        .iter()
        .filter(|p| p.evidence >= accept)
        .fold(None, |best: Option<&TrackerProposal>, p| match best {
            None => Some(p),
            Some(b) => {
                let (pj, pa) = rank(p);
                let (bj, ba) = rank(b);
                if pj > bj || (pj == bj && pa && !ba) || (pj == bj && pa == ba && p.detection < b.detection) {
                    Some(p)
                } else {
                    Some(b)
                }
            }
        })
        .copied()
}

/// Split-corrected objects that no trajectory selected are noise.
pub fn is_noise(source: Source, matched: bool) -> bool {
    source == Source::SplitCorrection && !matched
}
