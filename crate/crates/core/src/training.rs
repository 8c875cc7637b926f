//! Training-time anchor assignment and losses as pure evaluatable functions:
//! geometric matching cost, greedy positive/negative assignment, masked
//! regression losses and the focal classification loss.

use crate::anchor::{Lane3D, LaneAnchor, Proposal};

/// Default positive/negative anchor counts per ground-truth lane.
pub const DEFAULT_M_POS: usize = 3;
pub const DEFAULT_M_NEG: usize = 9;
/// Default focal loss parameters.
pub const DEFAULT_FOCAL_ALPHA: f64 = 0.25;
pub const DEFAULT_FOCAL_GAMMA: f64 = 2.0;

#[derive(Debug, thiserror::Error)]
pub enum TrainingError {
    #[error("not enough anchors: need {required}, have {available}")]
    InsufficientAnchors { required: usize, available: usize },
    #[error("ground-truth lane has no visible points; x/z regression is undefined")]
    NoVisiblePoints,
    #[error("positive proposal set is empty")]
    EmptyPositives,
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
}

/// Visibility-weighted mean point distance between a ground-truth lane and an
/// anchor. `None` when the lane has zero total visibility (unmatchable).
pub fn matching_cost(gt: &Lane3D, anchor: &LaneAnchor) -> Option<f64> {
    assert_eq!(gt.len(), anchor.x.len(), "lane and anchor must share y steps");
    let vis_sum: f64 = gt.visibility.iter().sum();
    if vis_sum == 0.0 {
        return None;
    }
    let weighted: f64 = (0..gt.len())
        .map(|k| {
            let dx = gt.x[k] - anchor.x[k];
            let dz = gt.z[k] - anchor.z[k];
            gt.visibility[k] * (dx * dx + dz * dz).sqrt()
        })
        .sum();
    Some(weighted / vis_sum)
}

/// Anchor indices assigned to one ground-truth lane.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LaneAssignment {
    pub positives: Vec<usize>,
    pub negatives: Vec<usize>,
}

/// Result of [`assign_anchors`]: per-lane positive/negative sets plus the
/// anchors left to the background class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub per_lane: Vec<LaneAssignment>,
    pub background: Vec<usize>,
}

/// Greedily assign the `m_pos` lowest-cost unclaimed anchors (then the next
/// `m_neg`) to every ground-truth lane, in input order, ties broken by anchor
/// index. Each anchor is claimed at most once; lanes with zero total
/// visibility claim nothing.
pub fn assign_anchors(
    gts: &[Lane3D],
    anchors: &[LaneAnchor],
    m_pos: usize,
    m_neg: usize,
) -> Result<Assignment, TrainingError> {
    let required = gts.len() * (m_pos + m_neg);
    if anchors.len() < required {
        return Err(TrainingError::InsufficientAnchors { required, available: anchors.len() });
    }
    let mut claimed = vec![false; anchors.len()];
    let mut per_lane = Vec::with_capacity(gts.len());
    for gt in gts {
        let mut ranked: Vec<(f64, usize)> = Vec::new();
        for (j, anchor) in anchors.iter().enumerate() {
            if claimed[j] {
                continue;
            }
            match matching_cost(gt, anchor) {
                Some(c) => ranked.push((c, j)),
                None => break, // zero-visibility lane: unmatchable by definition
            }
        }
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut lane = LaneAssignment::default();
        for (rank, (_, j)) in ranked.into_iter().take(m_pos + m_neg).enumerate() {
            claimed[j] = true;
            if rank < m_pos {
                lane.positives.push(j);
            } else {
                lane.negatives.push(j);
            }
        }
        per_lane.push(lane);
    }
    let background = (0..anchors.len()).filter(|&j| !claimed[j]).collect();
    Ok(Assignment { per_lane, background })
}

/// Masked L1 regression losses of positive proposals against one lane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionLoss {
    /// Total visibility-masked |dx|, divided by the lane's visible weight.
    pub x: f64,
    /// Same for z.
    pub z: f64,
    /// Mean |v_hat - v| over all points and proposals.
    pub visibility: f64,
}

/// Compute the x/z/visibility regression losses. The x/z terms are undefined
/// (an error) when the lane has zero total visibility; use
/// [`visibility_loss`] directly in that case.
pub fn regression_loss(gt: &Lane3D, positives: &[Proposal]) -> Result<RegressionLoss, TrainingError> {
    if positives.is_empty() {
        return Err(TrainingError::EmptyPositives);
    }
    for p in positives {
        if p.len() != gt.len() {
            return Err(TrainingError::LengthMismatch(format!(
                "gt {} vs proposal {}",
                gt.len(),
                p.len()
            )));
        }
    }
    let vis_sum: f64 = gt.visibility.iter().sum();
    if vis_sum == 0.0 {
        return Err(TrainingError::NoVisiblePoints);
    }
    let mut x_total = 0.0;
    let mut z_total = 0.0;
    for p in positives {
        for k in 0..gt.len() {
            x_total += gt.visibility[k] * (p.x[k] - gt.x[k]).abs();
            z_total += gt.visibility[k] * (p.z[k] - gt.z[k]).abs();
        }
    }
    Ok(RegressionLoss {
        x: x_total / vis_sum,
        z: z_total / vis_sum,
        visibility: visibility_loss(gt, positives)?,
    })
}

/// Mean absolute visibility disagreement over all points and proposals.
/// Defined even for lanes with no visible points.
pub fn visibility_loss(gt: &Lane3D, positives: &[Proposal]) -> Result<f64, TrainingError> {
    if positives.is_empty() {
        return Err(TrainingError::EmptyPositives);
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for p in positives {
        if p.len() != gt.len() {
            return Err(TrainingError::LengthMismatch(format!(
                "gt {} vs proposal {}",
                gt.len(),
                p.len()
            )));
        }
        for k in 0..gt.len() {
            total += (p.visibility[k] - gt.visibility[k]).abs();
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// Focal loss `-alpha * (1 - p_t)^gamma * ln(p_t)` with `p_t` clamped below
/// at 1e-12 before the log.
pub fn focal_loss(probs: &[f64], target_class: usize, alpha: f64, gamma: f64) -> f64 {
    assert!(target_class < probs.len(), "target class out of range");
    assert!(gamma >= 0.0, "gamma must be non-negative");
    let p_t = probs[target_class];
    -alpha * (1.0 - p_t).powf(gamma) * p_t.max(1e-12).ln()
}
