mod common;

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tracksel::assignment::{solve, AssignmentProblem};
use tracksel::imaging::{color_covariance, color_histogram, extract_all, ColorFrame, DescriptorSet, COV_DIM};
use tracksel::io::formats::{format_boxes, parse_boxes};
use tracksel::io::{BoxRecord, Synth, SynthObject, SynthSpec};
use tracksel::klt::{detect_features, klt_score, split_detection, track_features, FeatureTrack, LabelRule, PointStatus, PrevObject};
use tracksel::metrics::{clear_mot, trajectory_coverage, Annotation};
use tracksel::models::{best_candidate, joint_probability, select_tracker, AppearanceModel, TrackerProposal};
use tracksel::pipeline::{run_sequence, FrameInput};
use tracksel::similarity::{
    descriptor_similarities, emd_1d, forstner_distance, global_similarity, weights_from_similarities, WeightVector, NUM_DESCRIPTORS,
};
use tracksel::track::TrackerKind;
use tracksel::{iou, BoundingBox, Detection, TrackerConfig};

fn noise_frame(w: usize, h: usize, seed: u64) -> ColorFrame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pixels = (0..w * h).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
    ColorFrame::from_pixels(w, h, pixels).unwrap()
}

/// Blocky texture on a colored body, the kind of region the tracker sees.
fn body_frame(w: usize, h: usize, seed: u64) -> ColorFrame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base: [u8; 3] = [rng.random_range(40..200), rng.random_range(40..200), rng.random_range(40..200)];
    let cells: Vec<i16> = (0..(w / 4 + 1) * (h / 4 + 1)).map(|_| rng.random_range(-50..50)).collect();
    let mut f = ColorFrame::new(w, h, [0; 3]);
    for y in 0..h {
        for x in 0..w {
            let d = cells[(y / 4) * (w / 4 + 1) + x / 4];
            f.set(x, y, base.map(|c| (c as i16 + d).clamp(0, 255) as u8));
        }
    }
    f
}

fn descriptors(seed: u64) -> DescriptorSet {
    let f = body_frame(64, 96, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let b = BoundingBox::new(rng.random_range(0.0..10.0), rng.random_range(0.0..10.0), rng.random_range(20.0..50.0), rng.random_range(30.0..80.0))
        .unwrap();
    extract_all(&f, &b, None, &TrackerConfig::default()).unwrap()
}

fn arb_box() -> impl Strategy<Value = BoundingBox> {
    (-50.0..200.0f64, -50.0..200.0f64, 0.5..120.0f64, 0.5..120.0f64).prop_map(|(x, y, w, h)| BoundingBox::new(x, y, w, h).unwrap())
}

fn arb_hist(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..1.0f64, n).prop_map(|v| {
        let s: f64 = v.iter().sum();
        if s < 1e-9 {
            vec![1.0 / v.len() as f64; v.len()]
        } else {
            v.iter().map(|x| x / s).collect()
        }
    })
}

fn arb_spd() -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0..1.0f64, 16).prop_map(|v| {
        let a = DMatrix::from_vec(4, 4, v);
        &a * a.transpose() + DMatrix::identity(4, 4) * 0.1
    })
}

fn arb_scores() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1usize..=6, 1usize..=6).prop_flat_map(|(r, c)| prop::collection::vec(prop::collection::vec(0.0..1.0f64, c), r))
}

// Geometry.

proptest! {
    #[test]
    fn iou_bounded_and_symmetric(a in arb_box(), b in arb_box()) {
        let v = iou(&a, &b);
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert_eq!(v, iou(&b, &a));
        prop_assert!((iou(&a, &a) - 1.0).abs() < 1e-12);
    }
}

// Descriptors.

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn histograms_sum_to_one(seed in any::<u64>(), x in 0.0..20.0f64, y in 0.0..20.0f64, w in 2.0..40.0f64, h in 2.0..40.0f64) {
        let f = noise_frame(64, 64, seed);
        let b = BoundingBox::new(x, y, w, h).unwrap();
        for cell in color_histogram(&f, &b, None, &TrackerConfig::default()).unwrap() {
            for ch in &cell.channels {
                prop_assert!((ch.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn covariance_symmetric_positive_definite(seed in any::<u64>(), w in 4.0..40.0f64, h in 4.0..40.0f64) {
        let f = body_frame(64, 64, seed);
        let b = BoundingBox::new(5.0, 5.0, w, h).unwrap();
        for c in color_covariance(&f, &b, &TrackerConfig::default()).unwrap() {
            prop_assert_eq!(c.nrows(), COV_DIM);
            prop_assert!((&c - c.transpose()).amax() == 0.0);
            prop_assert!(c.clone().cholesky().is_some());
        }
    }

    #[test]
    fn covariance_follows_translated_content(seed in any::<u64>(), dx in 0usize..8, dy in 0usize..8) {
        let f = body_frame(48, 48, seed);
        let mut g = ColorFrame::new(60, 60, [0; 3]);
        for y in 0..48 {
            for x in 0..48 {
                g.set(x + dx, y + dy, f.get(x, y));
            }
        }
        let cfg = TrackerConfig::default();
        let b = BoundingBox::new(6.0, 6.0, 30.0, 34.0).unwrap();
        let a = color_covariance(&f, &b, &cfg).unwrap();
        let t = color_covariance(&g, &b.translated(dx as f64, dy as f64), &cfg).unwrap();
        for (ca, ct) in a.iter().zip(&t) {
            prop_assert!((ca - ct).amax() <= 1e-9 * ca.amax());
        }
    }
}

// Similarity.

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn descriptor_similarities_bounded_symmetric(s1 in any::<u64>(), s2 in any::<u64>()) {
        let (a, b) = (descriptors(s1), descriptors(s2));
        let ab = descriptor_similarities(&a, &b).unwrap();
        let ba = descriptor_similarities(&b, &a).unwrap();
        for k in 0..NUM_DESCRIPTORS {
            prop_assert!((0.0..=1.0).contains(&ab[k]));
            prop_assert!((ab[k] - ba[k]).abs() < 1e-9, "k={} {} vs {}", k, ab[k], ba[k]);
        }
        for v in descriptor_similarities(&a, &a).unwrap() {
            prop_assert!((v - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn global_similarity_between_extremes(s1 in any::<u64>(), s2 in any::<u64>(), w in prop::array::uniform5(0.0..1.0f64)) {
        let (a, b) = (descriptors(s1), descriptors(s2));
        let sims = descriptor_similarities(&a, &b).unwrap();
        let g = global_similarity(&a, &WeightVector(w), &b, &WeightVector::UNIFORM).unwrap();
        let lo = sims.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = sims.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(g >= lo - 1e-12 && g <= hi + 1e-12);
    }
}

proptest! {
    #[test]
    fn emd_triangle_inequality(a in arb_hist(8), b in arb_hist(8), c in arb_hist(8)) {
        let ab = emd_1d(&a, &b).unwrap();
        let bc = emd_1d(&b, &c).unwrap();
        let ac = emd_1d(&a, &c).unwrap();
        prop_assert!(ac <= ab + bc + 1e-12);
        prop_assert!((ab - emd_1d(&b, &a).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn forstner_symmetric_and_zero_on_self(a in arb_spd(), b in arb_spd()) {
        prop_assert!(forstner_distance(&a, &a).unwrap() < 1e-9);
        let d = forstner_distance(&a, &b).unwrap();
        prop_assert!((d - forstner_distance(&b, &a).unwrap()).abs() < 1e-9);
        prop_assert!(d >= 0.0);
    }

    #[test]
    fn weights_bounded_and_order_free(sims in prop::collection::vec(prop::array::uniform5(0.0..=1.0f64), 0..6)) {
        let floor = 0.1;
        let w = weights_from_similarities(&sims, floor);
        for v in w.0 {
            prop_assert!((0.0..=(1.0f64 / floor).log10() + 1e-12).contains(&v));
        }
        let mut rev = sims.clone();
        rev.reverse();
        let wr = weights_from_similarities(&rev, floor);
        for k in 0..NUM_DESCRIPTORS {
            prop_assert!((w.0[k] - wr.0[k]).abs() < 1e-12);
        }
        // An identical neighbor (all similarities 1) never raises a weight.
        if !sims.is_empty() {
            let mut more = sims.clone();
            more.push([1.0; NUM_DESCRIPTORS]);
            let wm = weights_from_similarities(&more, floor);
            for k in 0..NUM_DESCRIPTORS {
                prop_assert!(wm.0[k] <= w.0[k] + 1e-12);
            }
        }
    }
}

// Assignment.

proptest! {
    #[test]
    fn matching_is_feasible(rows in arb_scores(), forbid in 0.0..1.0f64) {
        let m = solve(&AssignmentProblem::from_rows(&rows, forbid)).unwrap();
        let rs: BTreeSet<usize> = m.pairs.iter().map(|p| p.0).collect();
        let cs: BTreeSet<usize> = m.pairs.iter().map(|p| p.1).collect();
        prop_assert_eq!(rs.len(), m.pairs.len());
        prop_assert_eq!(cs.len(), m.pairs.len());
        for &(r, c) in &m.pairs {
            prop_assert!(rows[r][c] >= forbid);
        }
    }

    #[test]
    fn raising_forbid_never_adds_pairs(rows in arb_scores(), lo in 0.0..0.5f64, step in 0.0..0.5f64) {
        let a = solve(&AssignmentProblem::from_rows(&rows, lo)).unwrap();
        let b = solve(&AssignmentProblem::from_rows(&rows, lo + step)).unwrap();
        prop_assert!(b.pairs.len() <= a.pairs.len());
    }

    #[test]
    fn row_permutation_is_equivariant(rows in arb_scores(), seed in any::<u64>()) {
        let mut perm: Vec<usize> = (0..rows.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..perm.len()).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let permuted: Vec<Vec<f64>> = perm.iter().map(|&i| rows[i].clone()).collect();
        let a = solve(&AssignmentProblem::from_rows(&rows, 0.0)).unwrap();
        let b = solve(&AssignmentProblem::from_rows(&permuted, 0.0)).unwrap();
        prop_assert!((a.total - b.total).abs() < 1e-9);
        // Continuous random scores make the optimum unique.
        let mut mapped: Vec<(usize, usize)> = b.pairs.iter().map(|&(r, c)| (perm[r], c)).collect();
        mapped.sort();
        prop_assert_eq!(mapped, a.pairs);
    }
}

// KLT.

proptest! {
    #[test]
    fn klt_score_bounded_and_monotone(m_prev in 0usize..50, m_t in 0usize..50, p in 0usize..50) {
        let p = p.min(m_prev).min(m_t);
        let s = klt_score(p, m_prev, m_t);
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert_eq!(s, klt_score(p, m_t, m_prev));
        if p < m_prev.min(m_t) {
            prop_assert!(klt_score(p + 1, m_prev, m_t) >= s);
        }
    }

    #[test]
    fn split_boxes_stay_in_frame(
        boxes in prop::collection::vec(arb_box(), 1..4),
        moves in prop::collection::vec((0.0..200.0f64, 0.0..200.0f64, -30.0..30.0f64, -30.0..30.0f64), 0..60),
    ) {
        let prev: Vec<PrevObject> = boxes.iter().enumerate().map(|(i, b)| PrevObject { id: i as u32 + 1, bbox: *b }).collect();
        let mut tracks: Vec<FeatureTrack> = moves.iter().map(|&(x, y, dx, dy)| FeatureTrack::new(2, (x, y), (x + dx, y + dy))).collect();
        tracksel::klt::label_features(&mut tracks, &prev);
        let d = Detection::new(2, BoundingBox::new(0.0, 0.0, 160.0, 160.0).unwrap());
        let labels: BTreeSet<u32> = tracks.iter().filter_map(|t| t.label).collect();
        let parts = split_detection(&d, &tracks, &prev, (160, 120), LabelRule { min_points: 1, min_share: 0.0 });
        prop_assert!(parts.len() <= labels.len());
        for (_, p) in parts {
            prop_assert!(p.bbox.x >= 0.0 && p.bbox.y >= 0.0 && p.bbox.right() <= 160.0 && p.bbox.bottom() <= 120.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn tracking_a_frame_onto_itself_is_still(seed in any::<u64>()) {
        let cfg = TrackerConfig::default();
        let g = body_frame(96, 96, seed).to_gray();
        let pts = detect_features(&g, &BoundingBox::new(10.0, 10.0, 76.0, 76.0).unwrap(), &cfg).unwrap();
        for (p, q) in pts.iter().zip(track_features(&g, &g, &pts, &cfg).unwrap()) {
            prop_assert_eq!(q.status, PointStatus::Tracked);
            prop_assert!((q.x - p.x).hypot(q.y - p.y) <= 1e-6);
        }
    }
}

// Models.

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn model_scores_bounded(seeds in prop::collection::vec(any::<u64>(), 1..5), cand in any::<u64>(), q in 1usize..8, len in 0u32..12) {
        let window: Vec<Arc<DescriptorSet>> = seeds.iter().map(|&s| Arc::new(descriptors(s))).collect();
        let m = AppearanceModel::new(window, q, len).unwrap();
        let c = descriptors(cand);
        for s in m.evidence(&c).unwrap() {
            prop_assert!((0.0..=1.0).contains(&s));
        }
        let j = joint_probability(&c, &m).unwrap();
        prop_assert!(j.is_finite() && (0.0..=1.0).contains(&j));
        let lf = m.length_factor();
        if len as usize >= q {
            prop_assert_eq!(lf, 1.0);
        }
        if len == 0 {
            prop_assert_eq!(lf, 0.0);
            prop_assert_eq!(j, 0.0);
        }
    }

    #[test]
    fn best_candidate_is_argmax(model in any::<u64>(), cands in prop::collection::vec(any::<u64>(), 1..5)) {
        let m = AppearanceModel::new(vec![Arc::new(descriptors(model))], 3, 5).unwrap();
        let sets: Vec<DescriptorSet> = cands.iter().map(|&s| descriptors(s)).collect();
        let refs: Vec<&DescriptorSet> = sets.iter().collect();
        let best = best_candidate(&m, &refs).unwrap();
        let bj = joint_probability(refs[best], &m).unwrap();
        for c in &refs {
            prop_assert!(joint_probability(c, &m).unwrap() <= bj);
        }
    }
}

fn arb_proposal() -> impl Strategy<Value = TrackerProposal> {
    (any::<bool>(), 0usize..4, 0.0..1.0f64, 0.0..1.0f64).prop_map(|(klt, detection, joint, evidence)| TrackerProposal {
        tracker: if klt { TrackerKind::Klt } else { TrackerKind::Appearance },
        track: 1,
        detection,
        joint_probability: joint,
        evidence,
    })
}

proptest! {
    #[test]
    fn select_tracker_ignores_order(mut props in prop::collection::vec(arb_proposal(), 0..6), seed in any::<u64>()) {
        let a = select_tracker(&props, 0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..props.len()).rev() {
            props.swap(i, rng.random_range(0..=i));
        }
        prop_assert_eq!(a, select_tracker(&props, 0.3));
        if let Some(p) = a {
            prop_assert!(p.evidence >= 0.3);
        }
    }
}

// Pipeline.

fn random_synth(seed: u64) -> Synth {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let objects = (0..rng.random_range(1..=3))
        .map(|k| SynthObject {
            color: [rng.random_range(30..230), rng.random_range(30..230), rng.random_range(30..230)],
            size: [rng.random_range(16.0..30.0), rng.random_range(30.0..60.0)],
            start: [rng.random_range(0.0..120.0), 10.0 + 60.0 * k as f64],
            velocity: [rng.random_range(-2.0..2.0), rng.random_range(-0.5..0.5)],
            texture_seed: rng.random(),
            texture_amplitude: 60.0,
            first_frame: None,
            last_frame: None,
        })
        .collect();
    let spec = SynthSpec {
        width: 200,
        height: 200,
        frames: 12,
        background: 128,
        seed,
        jitter: rng.random_range(0.0..1.5),
        miss_rate: rng.random_range(0.0..0.2),
        confidence: 1.0,
        objects,
        merges: vec![],
    };
    Synth::new(spec).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn pipeline_keeps_tracks_well_formed(seed in any::<u64>()) {
        let s = random_synth(seed);
        let frames = (1..=s.spec().frames).map(|f| {
            let dets = s.detections.iter().filter(|d| d.frame == f).map(|d| Detection::new(f, d.bbox)).collect();
            (FrameInput { index: f, color: Some(Arc::new(s.frame(f))), ..Default::default() }, dets)
        });
        let (trajectories, results) = run_sequence(frames, &TrackerConfig::default(), None).unwrap();
        for r in &results {
            let tracks: BTreeSet<u32> = r.links.iter().map(|l| l.track).collect();
            prop_assert_eq!(tracks.len(), r.links.len(), "a trajectory extended twice in frame {}", r.frame);
            for (i, a) in r.links.iter().enumerate() {
                for b in &r.links[i + 1..] {
                    prop_assert!(a.detection.bbox != b.detection.bbox, "detection used twice in frame {}", r.frame);
                }
            }
        }
        let ids: BTreeSet<u32> = trajectories.iter().map(|t| t.id).collect();
        prop_assert_eq!(ids.len(), trajectories.len());
        for t in &trajectories {
            let frames: Vec<u32> = t.snapshots.iter().map(|s| s.frame()).collect();
            prop_assert!(frames.windows(2).all(|w| w[0] < w[1]));
        }
    }
}

// Metrics.

fn arb_annotations(frames: u32, ids: i64) -> impl Strategy<Value = Vec<Annotation>> {
    prop::collection::vec((1..=frames, 1..=ids, 0.0..100.0f64, 0.0..100.0f64), 1..40).prop_map(|rows| {
        let mut seen = BTreeSet::new();
        rows.into_iter()
            .filter(|r| seen.insert((r.0, r.1)))
            .map(|(frame, id, x, y)| Annotation { frame, id, bbox: BoundingBox::new(x, y, 20.0, 20.0).unwrap() })
            .collect()
    })
}

proptest! {
    #[test]
    fn mota_at_most_one_and_noise_never_helps(gt in arb_annotations(8, 4), hyp in arb_annotations(8, 5), nx in 0.0..100.0f64) {
        let m = clear_mot(&gt, &hyp, 0.5).unwrap();
        prop_assert!(m.mota <= 1.0);
        prop_assert!((0.0..=1.0).contains(&m.motp));
        let noise_id = 1000;
        let mut noisy = hyp.clone();
        noisy.extend((1..=8).map(|f| Annotation { frame: f, id: noise_id, bbox: BoundingBox::new(nx, 300.0, 20.0, 20.0).unwrap() }));
        prop_assert!(clear_mot(&gt, &noisy, 0.5).unwrap().mota <= m.mota);
        let c = trajectory_coverage(&gt, &hyp, 0.5).unwrap();
        prop_assert_eq!(c.mt_count + c.pt_count + c.ml_count, gt.iter().map(|a| a.id).collect::<BTreeSet<_>>().len());
        prop_assert!((c.mt + c.pt + c.ml - 100.0).abs() < 1e-9);
    }

    #[test]
    fn identical_inputs_score_perfectly(gt in arb_annotations(8, 4)) {
        let m = clear_mot(&gt, &gt, 0.5).unwrap();
        prop_assert_eq!((m.mota, m.motp), (1.0, 1.0));
    }
}

// IO.

proptest! {
    #[test]
    fn box_files_round_trip(rows in prop::collection::vec((0u32..500, -1i64..50, arb_box(), 0.0..1.0f64), 0..20)) {
        let records: Vec<BoxRecord> = rows.into_iter().map(|(frame, id, bbox, confidence)| BoxRecord { frame, id, bbox, confidence }).collect();
        let parsed = parse_boxes(&format_boxes(&records), Path::new("mem.csv")).unwrap();
        prop_assert_eq!(parsed, records);
    }

    #[test]
    fn config_text_round_trips(link in 0.01..0.99f64, window in 1u32..30, seed in any::<u64>()) {
        let cfg = TrackerConfig { link_threshold: link, temporal_window: window, seed, ..TrackerConfig::default() };
        prop_assert_eq!(TrackerConfig::parse_text(&cfg.to_text()).unwrap(), cfg);
    }
}

#[test]
fn default_config_drives_the_scenarios() {
    // Every scenario runs with an empty config file.
    let cfg = TrackerConfig::parse_text("").unwrap();
    assert_eq!(cfg, TrackerConfig::default());
    let s = common::load_synth("parallel_lanes.toml");
    let rows = common::track_synth(&s, &cfg);
    let m = clear_mot(&common::gt_annotations(&s.ground_truth), &common::annotations(&rows), 0.5).unwrap();
    assert_eq!(m.mota, 1.0);
}
