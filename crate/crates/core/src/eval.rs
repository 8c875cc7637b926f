//! The 3D lane evaluation protocol: pairwise lane costs with visibility
//! penalties, min-cost one-to-one matching, the 75%-within-threshold rule,
//! F1 / category accuracy and near/far x/z error metrics.

use crate::anchor::{Lane3D, Proposal, YSteps};
use crate::mincost::solve_square_assignment;
use serde::{Deserialize, Serialize};

/// Evaluation protocol parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Point-distance threshold for the match ratio rule (meters).
    pub distance_threshold: f64,
    /// Fraction of visible points that must fall under the threshold.
    pub match_ratio: f64,
    /// Distance charged to points with mispredicted visibility (meters).
    pub visibility_penalty: f64,
    /// Forward distance separating near from far errors (meters).
    pub near_far_boundary: f64,
    /// Minimum detection confidence for a prediction to participate.
    pub prob_threshold: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            distance_threshold: 1.5,
            match_ratio: 0.75,
            visibility_penalty: 1.5,
            near_far_boundary: 40.0,
            prob_threshold: 0.5,
        }
    }
}

/// Pairwise lane cost plus the per-point threshold outcomes.
#[derive(Debug, Clone)]
pub struct LanePairCost {
    /// Square root of the summed per-point distances.
    pub cost: f64,
    /// Per point: distance below the threshold. Only meaningful at points
    /// where the ground truth is visible.
    pub point_ok: Vec<bool>,
    /// Number of gt-visible points.
    pub gt_visible: usize,
    /// Number of gt-visible points with distance below the threshold.
    pub ok_count: usize,
}

impl LanePairCost {
    /// The 75% rule: at least `match_ratio` of the gt-visible point
    /// distances are below the threshold. Lanes with no visible points
    /// never match.
    pub fn passes_match_ratio(&self, cfg: &EvalConfig) -> bool {
        self.gt_visible > 0 && self.ok_count as f64 >= cfg.match_ratio * self.gt_visible as f64
    }
}

/// Per-point distances: Euclidean (x, z) distance where both lanes are
/// visible, the visibility penalty where exactly one is, zero where neither
/// is. The pair cost is the square root of their sum.
pub fn lane_pair_cost(gt: &Lane3D, pred: &Proposal, cfg: &EvalConfig) -> LanePairCost {
    assert_eq!(gt.len(), pred.len(), "lanes must share y steps");
    let n = gt.len();
    let mut sum = 0.0;
    let mut point_ok = vec![false; n];
    let mut gt_visible = 0;
    let mut ok_count = 0;
    for k in 0..n {
        let gv = gt.is_visible(k);
        let pv = pred.is_visible(k);
        let d = if gv && pv {
            let dx = gt.x[k] - pred.x[k];
            let dz = gt.z[k] - pred.z[k];
            (dx * dx + dz * dz).sqrt()
        } else if gv != pv {
            cfg.visibility_penalty
        } else {
            0.0
        };
        sum += d;
        if gv {
            gt_visible += 1;
            if d < cfg.distance_threshold {
                point_ok[k] = true;
                ok_count += 1;
            }
        }
    }
    LanePairCost { cost: sum.sqrt(), point_ok, gt_visible, ok_count }
}

/// Cost charged for leaving a lane unmatched: the cost of a pair whose every
/// point carries the visibility penalty.
pub fn unmatched_cost(n_points: usize, cfg: &EvalConfig) -> f64 {
    (n_points as f64 * cfg.visibility_penalty).sqrt()
}

/// One matched (gt, pred) pair.
#[derive(Debug, Clone)]
pub struct MatchedPair {
    pub gt: usize,
    pub pred: usize,
    pub cost: f64,
    /// Whether the pair passes the match-ratio rule and counts as a true
    /// positive.
    pub true_positive: bool,
}

/// Result of matching one frame.
#[derive(Debug, Clone, Default)]
pub struct MatchOutcome {
    pub pairs: Vec<MatchedPair>,
    pub unmatched_gts: Vec<usize>,
    /// Participating predictions left unmatched.
    pub unmatched_preds: Vec<usize>,
    /// Predictions below the confidence threshold (ignored entirely).
    pub skipped_preds: Vec<usize>,
    /// Total matching objective: matched costs plus the unmatched penalty
    /// for every unmatched lane on either side.
    pub objective: f64,
}

/// Minimum-total-cost one-to-one partial matching between ground-truth lanes
/// and participating predictions. Leaving a lane unmatched costs
/// [`unmatched_cost`]; the optimum is computed exactly.
///
/// The solver runs on a dummy-padded square matrix, cubic in the combined
/// lane count; it is meant for per-frame lane sets, with the confidence
/// threshold keeping raw proposal floods out.
pub fn match_lanes(gts: &[Lane3D], preds: &[Proposal], cfg: &EvalConfig) -> MatchOutcome {
    let mut outcome = MatchOutcome::default();
    let active: Vec<usize> = (0..preds.len())
        .filter(|&j| {
            let keep = preds[j].confidence() >= cfg.prob_threshold;
            if !keep {
                outcome.skipped_preds.push(j);
            }
            keep
        })
        .collect();

    let n = gts.len();
    let m = active.len();
    if n == 0 && m == 0 {
        return outcome;
    }
    let n_points = if n > 0 { gts[0].len() } else { preds[active[0]].len() };
    let cap = unmatched_cost(n_points, cfg);

    // Square matrix with dummy rows/columns: matching against a dummy means
    // staying unmatched at cost `cap`; dummy-dummy pairs are free.
    let size = n + m;
    let mut cost = vec![0.0f64; size * size];
    let mut pair_costs = vec![LanePairCost { cost: 0.0, point_ok: vec![], gt_visible: 0, ok_count: 0 }; n * m];
    for i in 0..size {
        for j in 0..size {
            cost[i * size + j] = match (i < n, j < m) {
                (true, true) => {
                    let pc = lane_pair_cost(&gts[i], &preds[active[j]], cfg);
                    let c = pc.cost;
                    pair_costs[i * m + j] = pc;
                    c
                }
                (false, false) => 0.0,
                _ => cap,
            };
        }
    }
    let assignment = solve_square_assignment(size, &cost);

    let mut objective = 0.0;
    for (i, &j) in assignment.iter().enumerate() {
        match (i < n, j < m) {
            (true, true) => {
                let pc = &pair_costs[i * m + j];
                objective += pc.cost;
                outcome.pairs.push(MatchedPair {
                    gt: i,
                    pred: active[j],
                    cost: pc.cost,
                    true_positive: pc.passes_match_ratio(cfg),
                });
            }
            (true, false) => {
                objective += cap;
                outcome.unmatched_gts.push(i);
            }
            (false, true) => {
                objective += cap;
                outcome.unmatched_preds.push(active[j]);
            }
            (false, false) => {}
        }
    }
    outcome.pairs.sort_by_key(|p| p.gt);
    outcome.unmatched_gts.sort_unstable();
    outcome.unmatched_preds.sort_unstable();
    outcome.objective = objective;
    outcome
}

/// Per-frame tallies; merging them is associative and order-independent for
/// the counts and error sums.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FrameStats {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub category_correct: usize,
    pub x_near_sum: f64,
    pub x_near_count: usize,
    pub x_far_sum: f64,
    pub x_far_count: usize,
    pub z_near_sum: f64,
    pub z_near_count: usize,
    pub z_far_sum: f64,
    pub z_far_count: usize,
}

impl FrameStats {
    pub fn merge(&mut self, other: &FrameStats) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.category_correct += other.category_correct;
        self.x_near_sum += other.x_near_sum;
        self.x_near_count += other.x_near_count;
        self.x_far_sum += other.x_far_sum;
        self.x_far_count += other.x_far_count;
        self.z_near_sum += other.z_near_sum;
        self.z_near_count += other.z_near_count;
        self.z_far_sum += other.z_far_sum;
        self.z_far_count += other.z_far_count;
    }
}

/// Evaluate one frame: match, apply the match-ratio rule and accumulate
/// error statistics over true-positive pairs.
pub fn evaluate_frame(
    gts: &[Lane3D],
    preds: &[Proposal],
    ysteps: &YSteps,
    cfg: &EvalConfig,
) -> FrameStats {
    for lane in gts {
        assert_eq!(lane.len(), ysteps.len(), "gt lane not aligned to y steps");
    }
    for p in preds {
        assert_eq!(p.len(), ysteps.len(), "prediction not aligned to y steps");
    }
    let outcome = match_lanes(gts, preds, cfg);
    let mut stats = FrameStats::default();
    let participating = preds.len() - outcome.skipped_preds.len();
    for pair in &outcome.pairs {
        if !pair.true_positive {
            continue;
        }
        stats.tp += 1;
        let gt = &gts[pair.gt];
        let pred = &preds[pair.pred];
        if pred.argmax_class() == gt.category as usize {
            stats.category_correct += 1;
        }
        for k in 0..ysteps.len() {
            if !(gt.is_visible(k) && pred.is_visible(k)) {
                continue;
            }
            let dx = (gt.x[k] - pred.x[k]).abs();
            let dz = (gt.z[k] - pred.z[k]).abs();
            if ysteps.values()[k] <= cfg.near_far_boundary {
                stats.x_near_sum += dx;
                stats.x_near_count += 1;
                stats.z_near_sum += dz;
                stats.z_near_count += 1;
            } else {
                stats.x_far_sum += dx;
                stats.x_far_count += 1;
                stats.z_far_sum += dz;
                stats.z_far_count += 1;
            }
        }
    }
    stats.fp = participating - stats.tp;
    stats.fn_ = gts.len() - stats.tp;
    stats
}

/// Aggregated evaluation report. Error metrics and category accuracy are
/// absent (`None`, JSON null) when there are no true positives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub category_accuracy: Option<f64>,
    pub x_near: Option<f64>,
    pub x_far: Option<f64>,
    pub z_near: Option<f64>,
    pub z_far: Option<f64>,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub frames: usize,
}

/// Fold per-frame statistics into the final report.
pub fn aggregate_report(stats: impl IntoIterator<Item = FrameStats>, frames: usize) -> EvalReport {
    let mut acc = FrameStats::default();
    for s in stats {
        acc.merge(&s);
    }
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = ratio(acc.tp, acc.tp + acc.fp);
    let recall = ratio(acc.tp, acc.tp + acc.fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    let mean = |sum: f64, count: usize| if count == 0 { None } else { Some(sum / count as f64) };
    EvalReport {
        f1,
        precision,
        recall,
        category_accuracy: if acc.tp == 0 { None } else { Some(ratio(acc.category_correct, acc.tp)) },
        x_near: mean(acc.x_near_sum, acc.x_near_count),
        x_far: mean(acc.x_far_sum, acc.x_far_count),
        z_near: mean(acc.z_near_sum, acc.z_near_count),
        z_far: mean(acc.z_far_sum, acc.z_far_count),
        tp: acc.tp,
        fp: acc.fp,
        fn_: acc.fn_,
        frames,
    }
}

/// Ground truth and predictions of one frame.
#[derive(Debug, Clone)]
pub struct FrameLanes {
    pub gts: Vec<Lane3D>,
    pub preds: Vec<Proposal>,
}

/// Evaluate a set of frames into one report.
pub fn compute_report(frames: &[FrameLanes], ysteps: &YSteps, cfg: &EvalConfig) -> EvalReport {
    aggregate_report(
        frames.iter().map(|f| evaluate_frame(&f.gts, &f.preds, ysteps, cfg)),
        frames.len(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn gt_lane(x: Vec<f64>, z: Vec<f64>, v: Vec<f64>) -> Lane3D {
        Lane3D::new(2, x, z, v).unwrap()
    }

    fn pred_from(lane: &Lane3D, score: f64) -> Proposal {
        Proposal::from_category_score(
            lane.category,
            score,
            14,
            lane.x.clone(),
            lane.z.clone(),
            lane.visibility.clone(),
        )
        .unwrap()
    }

    #[test]
    fn pair_cost_identical_is_zero() {
        let cfg = EvalConfig::default();
        let gt = gt_lane(vec![1.0; 4], vec![0.0; 4], vec![1.0; 4]);
        let pc = lane_pair_cost(&gt, &pred_from(&gt, 1.0), &cfg);
        assert_eq!(pc.cost, 0.0);
        assert!(pc.point_ok.iter().all(|&b| b));
        assert!(pc.passes_match_ratio(&cfg));
    }

    #[test]
    fn pair_cost_all_visibility_penalties() {
        let cfg = EvalConfig::default();
        let gt = gt_lane(vec![0.0; 4], vec![0.0; 4], vec![1.0; 4]);
        let mut pred = pred_from(&gt, 1.0);
        pred.visibility = vec![0.0; 4];
        let pc = lane_pair_cost(&gt, &pred, &cfg);
        assert!((pc.cost - 6.0f64.sqrt()).abs() < 1e-12);
        assert_eq!(pc.ok_count, 0);
        assert!(!pc.passes_match_ratio(&cfg));
    }

    #[test]
    fn pair_cost_threshold_semantics() {
        let cfg = EvalConfig::default();
        let gt = gt_lane(vec![0.0; 4], vec![0.0; 4], vec![1.0; 4]);
        let mut pred = pred_from(&gt, 1.0);
        pred.x[2] = 2.0; // one point off by 2 m
        let pc = lane_pair_cost(&gt, &pred, &cfg);
        assert_eq!(pc.point_ok, vec![true, true, false, true]);
        assert!(pc.passes_match_ratio(&cfg)); // 3 of 4 = 75%
    }

    #[test]
    fn single_identical_pred_is_true_positive() {
        let cfg = EvalConfig::default();
        let ysteps = YSteps::uniform(4, 5.0, 60.0).unwrap();
        let gt = gt_lane(vec![1.0; 4], vec![0.0; 4], vec![1.0; 4]);
        let pred = pred_from(&gt, 1.0);
        let report = compute_report(
            &[FrameLanes { gts: vec![gt], preds: vec![pred] }],
            &ysteps,
            &cfg,
        );
        assert_eq!(report.f1, 1.0);
        assert_eq!(report.tp, 1);
        assert_eq!(report.category_accuracy, Some(1.0));
        assert_eq!(report.x_near, Some(0.0));
    }

    #[test]
    fn crossed_costs_pick_non_crossing_pairing() {
        let cfg = EvalConfig::default();
        let a = gt_lane(vec![0.0; 4], vec![0.0; 4], vec![1.0; 4]);
        let b = gt_lane(vec![3.0; 4], vec![0.0; 4], vec![1.0; 4]);
        let pa = pred_from(&a, 1.0);
        let pb = pred_from(&b, 1.0);
        // preds supplied in swapped order: optimal matching must un-swap
        let outcome = match_lanes(&[a, b], &[pb, pa], &cfg);
        let pairs: Vec<(usize, usize)> = outcome.pairs.iter().map(|p| (p.gt, p.pred)).collect();
        assert_eq!(pairs, vec![(0, 1), (1, 0)]);
        assert!(outcome.pairs.iter().all(|p| p.true_positive));
        assert!(outcome.objective.abs() < 1e-12);
    }

    /// Enumerate every one-to-one partial matching and return the minimal
    /// objective (pair costs plus the unmatched penalty on both sides).
    fn brute_force_objective(gts: &[Lane3D], preds: &[Proposal], cfg: &EvalConfig) -> f64 {
        let active: Vec<&Proposal> =
            preds.iter().filter(|p| p.confidence() >= cfg.prob_threshold).collect();
        if gts.is_empty() && active.is_empty() {
            return 0.0;
        }
        let n_points = if gts.is_empty() { active[0].len() } else { gts[0].len() };
        let cap = unmatched_cost(n_points, cfg);
        #[allow(clippy::too_many_arguments)]
        fn rec(
            gts: &[Lane3D],
            preds: &[&Proposal],
            cfg: &EvalConfig,
            cap: f64,
            i: usize,
            used: &mut Vec<bool>,
            acc: f64,
            best: &mut f64,
        ) {
            if i == gts.len() {
                let unmatched_preds = used.iter().filter(|&&u| !u).count();
                *best = best.min(acc + cap * unmatched_preds as f64);
                return;
            }
            rec(gts, preds, cfg, cap, i + 1, used, acc + cap, best); // leave gt i unmatched
            for j in 0..preds.len() {
                if !used[j] {
                    used[j] = true;
                    let c = lane_pair_cost(&gts[i], preds[j], cfg).cost;
                    rec(gts, preds, cfg, cap, i + 1, used, acc + c, best);
                    used[j] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        rec(gts, &active, cfg, cap, 0, &mut vec![false; active.len()], 0.0, &mut best);
        best
    }

    #[test]
    fn matching_objective_equals_brute_force() {
        let cfg = EvalConfig::default();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(31);
        for _ in 0..40 {
            let n = rng.gen_range(0..=5);
            let m = rng.gen_range(0..=5);
            let mk = |rng: &mut rand_chacha::ChaCha12Rng| {
                gt_lane(
                    (0..6).map(|_| rng.gen_range(-8.0..8.0)).collect(),
                    (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                    (0..6).map(|_| if rng.gen_bool(0.85) { 1.0 } else { 0.0 }).collect(),
                )
            };
            let gts: Vec<Lane3D> = (0..n).map(|_| mk(&mut rng)).collect();
            let preds: Vec<Proposal> = (0..m).map(|_| pred_from(&mk(&mut rng), 1.0)).collect();
            let outcome = match_lanes(&gts, &preds, &cfg);
            let want = brute_force_objective(&gts, &preds, &cfg);
            assert!(
                (outcome.objective - want).abs() < 1e-9,
                "objective {} vs brute force {}",
                outcome.objective,
                want
            );
        }
    }

    #[test]
    fn low_confidence_predictions_change_nothing() {
        let cfg = EvalConfig::default();
        let ysteps = YSteps::uniform(4, 5.0, 60.0).unwrap();
        let gt = gt_lane(vec![1.0; 4], vec![0.0; 4], vec![1.0; 4]);
        let pred = pred_from(&gt, 1.0);
        let mut junk = pred_from(&gt, 0.3);
        junk.x = vec![15.0; 4];
        let base = compute_report(
            &[FrameLanes { gts: vec![gt.clone()], preds: vec![pred.clone()] }],
            &ysteps,
            &cfg,
        );
        let with_junk = compute_report(
            &[FrameLanes { gts: vec![gt], preds: vec![pred, junk] }],
            &ysteps,
            &cfg,
        );
        assert_eq!(base, with_junk);
    }

    #[test]
    fn empty_predictions_give_zero_f1_absent_errors() {
        let cfg = EvalConfig::default();
        let ysteps = YSteps::uniform(4, 5.0, 60.0).unwrap();
        let gt = gt_lane(vec![1.0; 4], vec![0.0; 4], vec![1.0; 4]);
        let report =
            compute_report(&[FrameLanes { gts: vec![gt], preds: vec![] }], &ysteps, &cfg);
        assert_eq!(report.f1, 0.0);
        assert_eq!(report.recall, 0.0);
        assert_eq!(report.fn_, 1);
        assert_eq!(report.x_near, None);
        assert_eq!(report.category_accuracy, None);
    }

    #[test]
    fn constant_x_shift_reports_exact_errors() {
        let cfg = EvalConfig::default();
        let ysteps = YSteps::default_steps(); // spans the 40 m boundary
        let n = ysteps.len();
        let gt = gt_lane(vec![2.0; n], vec![0.3; n], vec![1.0; n]);
        let mut pred = pred_from(&gt, 1.0);
        for x in &mut pred.x {
            *x += 0.1;
        }
        let report =
            compute_report(&[FrameLanes { gts: vec![gt], preds: vec![pred] }], &ysteps, &cfg);
        assert_eq!(report.f1, 1.0);
        assert!((report.x_near.unwrap() - 0.1).abs() < 1e-9);
        assert!((report.x_far.unwrap() - 0.1).abs() < 1e-9);
        assert_eq!(report.z_near, Some(0.0));
        assert_eq!(report.z_far, Some(0.0));
    }

    #[test]
    fn tp_count_monotone_in_distance_threshold() {
        // on a fixed matching, enlarging the threshold never loses TPs
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(77);
        let gt = gt_lane(
            (0..8).map(|_| rng.gen_range(-5.0..5.0)).collect(),
            vec![0.0; 8],
            vec![1.0; 8],
        );
        let mut pred = pred_from(&gt, 1.0);
        for x in &mut pred.x {
            *x += rng.gen_range(-2.0..2.0);
        }
        let mut prev_tp = 0;
        for thresh in [0.5, 1.0, 1.5, 2.0, 3.0] {
            let cfg = EvalConfig { distance_threshold: thresh, ..EvalConfig::default() };
            let pc = lane_pair_cost(&gt, &pred, &cfg);
            let tp = usize::from(pc.passes_match_ratio(&cfg));
            assert!(tp >= prev_tp, "threshold {thresh} lost a TP");
            prev_tp = tp;
        }
    }

    #[test]
    fn fixed_point_on_self() {
        let cfg = EvalConfig::default();
        let ysteps = YSteps::default_steps();
        let n = ysteps.len();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(3);
        let frames: Vec<FrameLanes> = (0..10)
            .map(|_| {
                let gts: Vec<Lane3D> = (0..rng.gen_range(1..=4))
                    .map(|_| {
                        gt_lane(
                            (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect(),
                            (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                            (0..n).map(|_| if rng.gen_bool(0.7) { 1.0 } else { 0.0 }).collect(),
                        )
                    })
                    .filter(|l| l.visibility.iter().sum::<f64>() > 0.0)
                    .collect();
                let preds = gts.iter().map(|g| pred_from(g, 1.0)).collect();
                FrameLanes { gts, preds }
            })
            .collect();
        let report = compute_report(&frames, &ysteps, &cfg);
        assert_eq!(report.f1, 1.0);
        assert_eq!(report.precision, 1.0);
        assert_eq!(report.recall, 1.0);
        assert_eq!(report.fp, 0);
        assert_eq!(report.fn_, 0);
        for v in [report.x_near, report.x_far, report.z_near, report.z_far].into_iter().flatten() {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn report_json_field_names() {
        let report = aggregate_report(std::iter::empty(), 0);
        let json = serde_json::to_value(&report).unwrap();
        for key in [
            "f1",
            "precision",
            "recall",
            "category_accuracy",
            "x_near",
            "x_far",
            "z_near",
            "z_far",
            "tp",
            "fp",
            "fn",
            "frames",
        ] {
            assert!(json.get(key).is_some(), "missing report field {key}");
        }
        assert!(json["x_near"].is_null());
    }
}
