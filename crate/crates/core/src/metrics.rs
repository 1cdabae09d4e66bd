//! CLEAR-MOT and trajectory-coverage scores.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::assignment::{solve, AssignmentProblem};
use crate::error::{Error, Result};
use crate::geometry::{iou, BoundingBox};

/// One labeled box, ground truth or hypothesis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Annotation {
    pub frame: u32,
    pub id: i64,
    pub bbox: BoundingBox,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClearMot {
    pub mota: f64,
    /// Mean IoU over matched pairs; 0 when nothing matched.
    pub motp: f64,
    pub fp: usize,
    pub fn_: usize,
    pub idsw: usize,
    pub matches: usize,
    pub gt_total: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coverage {
    pub mt: f64,
    pub pt: f64,
    pub ml: f64,
    pub mt_count: usize,
    pub pt_count: usize,
    pub ml_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub clear: ClearMot,
    pub coverage: Coverage,
    /// Mean of MOTA and MOTP.
    pub m_bar: f64,
}

struct Matched {
    clear: ClearMot,
    /// Per gt id: (frames present, frames matched).
    per_gt: BTreeMap<i64, (usize, usize)>,
}

fn by_frame(rows: &[Annotation]) -> BTreeMap<u32, Vec<Annotation>> {
    let mut out: BTreeMap<u32, Vec<Annotation>> = BTreeMap::new();
    for r in rows {
        out.entry(r.frame).or_default().push(*r);
    }
    out
}

fn match_sequence(gt: &[Annotation], hyp: &[Annotation], iou_thr: f64) -> Result<Matched> {
    if gt.is_empty() {
        return Err(Error::Empty("ground truth"));
    }
    let gt_frames = by_frame(gt);
    let hyp_frames = by_frame(hyp);
    for (&frame, rows) in &gt_frames {
        let mut seen = BTreeSet::new();
        for r in rows {
            if !seen.insert(r.id) {
                return Err(Error::DuplicateId { frame, id: r.id });
            }
        }
    }
    let frames: BTreeSet<u32> = gt_frames.keys().chain(hyp_frames.keys()).copied().collect();
    let empty = Vec::new();
    let ok = |a: &BoundingBox, b: &BoundingBox| {
        let v = iou(a, b);
        (v >= iou_thr && v > 0.0).then_some(v)
    };

    let mut mapping: HashMap<i64, i64> = HashMap::new();
    let (mut fp, mut fn_, mut idsw, mut matches) = (0, 0, 0, 0);
    let mut iou_sum = 0.0;
    let mut per_gt: BTreeMap<i64, (usize, usize)> = BTreeMap::new();

    for f in frames {
        let g = gt_frames.get(&f).unwrap_or(&empty);
        let h = hyp_frames.get(&f).unwrap_or(&empty);
        let mut g_used = vec![false; g.len()];
        let mut h_used = vec![false; h.len()];
        let mut pairs: Vec<(usize, usize, f64)> = Vec::new();

        // Keep last correspondences that still overlap enough.
        for (gi, ga) in g.iter().enumerate() {
            let Some(&hid) = mapping.get(&ga.id) else { continue };
            if let Some(hi) = h.iter().enumerate().position(|(hi, hb)| !h_used[hi] && hb.id == hid) {
                if let Some(v) = ok(&ga.bbox, &h[hi].bbox) {
                    g_used[gi] = true;
                    h_used[hi] = true;
                    pairs.push((gi, hi, v));
                }
            }
        }

        let gi_free: Vec<usize> = (0..g.len()).filter(|&i| !g_used[i]).collect();
        let hi_free: Vec<usize> = (0..h.len()).filter(|&i| !h_used[i]).collect();
        let scores: Vec<f64> = gi_free
            .iter()
            .flat_map(|&gi| hi_free.iter().map(move |&hi| ok(&g[gi].bbox, &h[hi].bbox).unwrap_or(0.0)))
            .collect();
        let m = solve(&AssignmentProblem::new(gi_free.len(), hi_free.len(), scores, iou_thr.max(f64::MIN_POSITIVE)))?;
        for (r, c) in m.pairs {
            let (gi, hi) = (gi_free[r], hi_free[c]);
            let v = iou(&g[gi].bbox, &h[hi].bbox);
            if let Some(&prev) = mapping.get(&g[gi].id) {
                if prev != h[hi].id {
                    idsw += 1;
                }
            }
            g_used[gi] = true;
            h_used[hi] = true;
            pairs.push((gi, hi, v));
        }

        for &(gi, hi, v) in &pairs {
            mapping.insert(g[gi].id, h[hi].id);
            iou_sum += v;
        }
        matches += pairs.len();
        fn_ += g.len() - pairs.len();
        fp += h.len() - pairs.len();
        for (gi, ga) in g.iter().enumerate() {
            let e = per_gt.entry(ga.id).or_default();
            e.0 += 1;
            e.1 += g_used[gi] as usize;
        }
    }

    let gt_total = gt.len();
    let clear = ClearMot {
        mota: 1.0 - (fn_ + fp + idsw) as f64 / gt_total as f64,
        motp: if matches == 0 { 0.0 } else { iou_sum / matches as f64 },
        fp,
        fn_,
        idsw,
        matches,
        gt_total,
    };
    Ok(Matched { clear, per_gt })
}

/// Frame-by-frame CLEAR-MOT: correspondences persist while their overlap stays
/// above `iou_thr`; the remaining boxes are matched by maximum total IoU.
pub fn clear_mot(gt: &[Annotation], hyp: &[Annotation], iou_thr: f64) -> Result<ClearMot> {
    Ok(match_sequence(gt, hyp, iou_thr)?.clear)
}

fn coverage_of(per_gt: &BTreeMap<i64, (usize, usize)>) -> Coverage {
    let (mut mt, mut pt, mut ml) = (0, 0, 0);
    for &(present, matched) in per_gt.values() {
        // Integer comparisons keep the 0.8 / 0.2 boundaries exact.
        if matched * 5 > present * 4 {
            mt += 1;
        } else if matched * 5 < present {
            ml += 1;
        } else {
            pt += 1;
        }
    }
    let n = per_gt.len() as f64;
    Coverage {
        mt: 100.0 * mt as f64 / n,
        pt: 100.0 * pt as f64 / n,
        ml: 100.0 * ml as f64 / n,
        mt_count: mt,
        pt_count: pt,
        ml_count: ml,
    }
}

/// Mostly tracked (> 80 % of frames matched), mostly lost (< 20 %) and the rest.
pub fn trajectory_coverage(gt: &[Annotation], hyp: &[Annotation], iou_thr: f64) -> Result<Coverage> {
    Ok(coverage_of(&match_sequence(gt, hyp, iou_thr)?.per_gt))
}

pub fn evaluate(gt: &[Annotation], hyp: &[Annotation], iou_thr: f64) -> Result<EvalReport> {
    let m = match_sequence(gt, hyp, iou_thr)?;
    let coverage = coverage_of(&m.per_gt);
    Ok(EvalReport { clear: m.clear, coverage, m_bar: (m.clear.mota + m.clear.motp) / 2.0 })
}
