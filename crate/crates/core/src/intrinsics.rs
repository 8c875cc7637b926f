//! Per-segment focal length estimation from per-frame learned intrinsics and
//! intra-frame rotations.
//!
//! A learned focal length can deviate from the true focal by at most
//! `2 f^2 / (W^2 r_z)` given rotation `r_z`; the segment fit minimizes the
//! total amount by which observations exceed that envelope and returns the
//! smallest minimizer inside a bounded search interval (the objective decays
//! to zero at large focal lengths, so the raw argmin is unbounded).

/// One frame's observation: rotation magnitude and learned focal length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameObservation {
    /// Intra-frame rotation magnitude, radians.
    pub r_z: f64,
    /// Learned focal length, pixels.
    pub f_hat: f64,
}

/// All observations of one driving segment.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentObservations {
    /// Horizontal pairs (r_z, f_x) per frame.
    pub frames: Vec<FrameObservation>,
    /// Optional vertical pairs (r_x, f_y); usually empty for automotive data.
    pub vertical: Vec<FrameObservation>,
    /// Image width in pixels.
    pub width: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum FitError {
    #[error("segment has no observations")]
    EmptyObservations,
    #[error("segment uninformative, lower rz_min or extend segment")]
    Uninformative,
    #[error("invalid search interval [{0}, {1}]")]
    InvalidSearchInterval(f64, f64),
    #[error("observations must have positive focal lengths and non-negative rotations")]
    InvalidObservation,
}

impl SegmentObservations {
    pub fn new(width: usize, frames: Vec<FrameObservation>) -> Result<Self, FitError> {
        Self::with_vertical(width, frames, Vec::new())
    }

    pub fn with_vertical(
        width: usize,
        frames: Vec<FrameObservation>,
        vertical: Vec<FrameObservation>,
    ) -> Result<Self, FitError> {
        if width == 0 {
            return Err(FitError::InvalidObservation);
        }
        let ok = |o: &FrameObservation| o.f_hat > 0.0 && o.f_hat.is_finite() && o.r_z >= 0.0 && o.r_z.is_finite();
        if !frames.iter().all(ok) || !vertical.iter().all(ok) {
            return Err(FitError::InvalidObservation);
        }
        Ok(Self { frames, vertical, width })
    }
}

/// Maximum deviation of a learned focal from the true focal `f` given image
/// width and rotation magnitude: `2 f^2 / (W^2 r_z)`. A zero rotation makes
/// the frame uninformative (infinite bound).
pub fn focal_bound(f: f64, width: usize, r_z: f64) -> f64 {
    debug_assert!(f > 0.0 && width > 0 && r_z >= 0.0);
    if r_z == 0.0 {
        return f64::INFINITY;
    }
    let w = width as f64;
    2.0 * f * f / (w * w * r_z)
}

fn hinge_sum(f: f64, frames: &[FrameObservation], width: usize) -> f64 {
    frames
        .iter()
        .map(|o| ((f - o.f_hat).abs() - focal_bound(f, width, o.r_z)).max(0.0))
        .sum()
}

/// Total amount by which the observations exceed the theoretical envelope at
/// candidate focal `f`: `sum_i relu(|f - f_hat_i| - 2 f^2 / (W^2 r_z_i))`.
pub fn hinge_objective(f: f64, obs: &SegmentObservations) -> Result<f64, FitError> {
    if obs.frames.is_empty() {
        return Err(FitError::EmptyObservations);
    }
    Ok(hinge_sum(f, &obs.frames, obs.width))
}

/// Result of one segment fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// Fitted focal length, pixels.
    pub f_fit: f64,
    /// Hinge objective at the fitted focal.
    pub objective_value: f64,
    /// Observations that survived the rotation filter.
    pub used_count: usize,
    /// Observations dropped by the rotation filter.
    pub filtered_count: usize,
    /// Search interval the fit ran over.
    pub search: (f64, f64),
}

/// Default search interval: `[0.5 median(f_hat), 2 median(f_hat)]`.
pub fn default_search_interval(frames: &[FrameObservation]) -> Option<(f64, f64)> {
    if frames.is_empty() {
        return None;
    }
    let mut f: Vec<f64> = frames.iter().map(|o| o.f_hat).collect();
    f.sort_by(f64::total_cmp);
    let median = if f.len() % 2 == 1 {
        f[f.len() / 2]
    } else {
        0.5 * (f[f.len() / 2 - 1] + f[f.len() / 2])
    };
    Some((0.5 * median, 2.0 * median))
}

/// Fit one list of (rotation, focal) pairs: drop frames with rotation below
/// `rz_min`, then return the smallest focal in `search` minimizing the hinge
/// objective. A 1 px scan locates the minimum; a 0.01 px local scan refines
/// it. Deterministic. Observations must satisfy `f_hat > 0` and `r_z >= 0`
/// (guaranteed when they come from a validated [`SegmentObservations`]).
pub fn fit_focal(
    frames: &[FrameObservation],
    width: usize,
    rz_min: f64,
    search: (f64, f64),
) -> Result<FitResult, FitError> {
    if frames.is_empty() {
        return Err(FitError::EmptyObservations);
    }
    let (lo, hi) = search;
    if !(lo > 0.0) || !(hi > lo) || !hi.is_finite() {
        return Err(FitError::InvalidSearchInterval(lo, hi));
    }
    let used: Vec<FrameObservation> =
        frames.iter().copied().filter(|o| o.r_z >= rz_min).collect();
    if used.is_empty() {
        return Err(FitError::Uninformative);
    }

    let scan = |start: f64, end: f64, step: f64| -> (f64, f64) {
        let mut best_f = start;
        let mut best_v = f64::INFINITY;
        let count = ((end - start) / step).floor() as usize;
        for k in 0..=count {
            let f = start + k as f64 * step;
            let v = hinge_sum(f, &used, width);
            if v < best_v {
                best_v = v;
                best_f = f;
            }
        }
        // make sure the right endpoint participates
        let v_end = hinge_sum(end, &used, width);
        if v_end < best_v {
            (end, v_end)
        } else {
            (best_f, best_v)
        }
    };

    let (coarse_f, _) = scan(lo, hi, 1.0);
    let (fine_f, fine_v) = scan((coarse_f - 1.0).max(lo), (coarse_f + 1.0).min(hi), 0.01);

    Ok(FitResult {
        f_fit: fine_f,
        objective_value: fine_v,
        used_count: used.len(),
        filtered_count: frames.len() - used.len(),
        search: (lo, hi),
    })
}

/// Fit the horizontal focal length of a segment. When `search` is absent the
/// default interval around the median observation is used.
pub fn fit_segment_focal(
    obs: &SegmentObservations,
    rz_min: f64,
    search: Option<(f64, f64)>,
) -> Result<FitResult, FitError> {
    let search = match search {
        Some(s) => s,
        None => default_search_interval(&obs.frames).ok_or(FitError::EmptyObservations)?,
    };
    fit_focal(&obs.frames, obs.width, rz_min, search)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn focal_bound_arithmetic() {
        let b = focal_bound(500.0, 480, 0.02);
        assert!((b - 500000.0 / 4608.0).abs() < 1e-9);
        assert!((b - 108.5069).abs() < 1e-3);
        // quadratic homogeneity in f
        assert!((focal_bound(1000.0, 480, 0.02) - 4.0 * b).abs() < 1e-9);
        // large rotations drive the bound to zero
        assert!(focal_bound(500.0, 480, 1e9) < 1e-3);
        assert!(focal_bound(500.0, 480, 0.0).is_infinite());
    }

    #[test]
    fn hinge_objective_examples() {
        let obs = SegmentObservations::new(
            480,
            vec![FrameObservation { r_z: 0.05, f_hat: 516.0 }; 7],
        )
        .unwrap();
        assert_eq!(hinge_objective(516.0, &obs).unwrap(), 0.0);

        let one = SegmentObservations::new(
            480,
            vec![FrameObservation { r_z: 0.03, f_hat: 400.0 }],
        )
        .unwrap();
        let v = hinge_objective(516.0, &one).unwrap();
        let bound = 2.0 * 516.0 * 516.0 / (480.0 * 480.0 * 0.03);
        assert!((v - (116.0 - bound)).abs() < 1e-9);
        assert!((v - 38.9583).abs() < 1e-3);

        let empty = SegmentObservations::new(480, vec![]).unwrap();
        assert!(matches!(hinge_objective(500.0, &empty), Err(FitError::EmptyObservations)));
    }

    #[test]
    fn hinge_objective_slope_matches_finite_differences() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(8);
        let frames: Vec<FrameObservation> = (0..40)
            .map(|_| FrameObservation {
                r_z: rng.gen_range(0.01..0.2),
                f_hat: rng.gen_range(300.0..700.0),
            })
            .collect();
        let width = 480;
        let analytic_slope = |f: f64| -> f64 {
            frames
                .iter()
                .map(|o| {
                    let bound = focal_bound(f, width, o.r_z);
                    if (f - o.f_hat).abs() - bound > 0.0 {
                        (f - o.f_hat).signum() - 4.0 * f / (width as f64 * width as f64 * o.r_z)
                    } else {
                        0.0
                    }
                })
                .sum()
        };
        let away_from_kinks = |f: f64| {
            frames.iter().all(|o| {
                let margin = ((f - o.f_hat).abs() - focal_bound(f, width, o.r_z)).abs();
                margin > 0.05 && (f - o.f_hat).abs() > 0.05
            })
        };
        let h = 1e-4;
        let mut checked = 0;
        for i in 0..200 {
            let f = 250.0 + i as f64 * 3.0;
            if !away_from_kinks(f) {
                continue;
            }
            let num = (hinge_sum(f + h, &frames, width) - hinge_sum(f - h, &frames, width)) / (2.0 * h);
            let ana = analytic_slope(f);
            assert!((num - ana).abs() < 1e-6, "slope mismatch at f={f}: {num} vs {ana}");
            checked += 1;
        }
        assert!(checked > 50, "too few kink-free probes: {checked}");
    }

    /// Full-interval 0.01 px scan returning the smallest minimizer.
    fn brute_force_scan(frames: &[FrameObservation], width: usize, lo: f64, hi: f64) -> f64 {
        let mut best_f = lo;
        let mut best_v = f64::INFINITY;
        let count = ((hi - lo) / 0.01).floor() as usize;
        for j in 0..=count {
            let f = lo + j as f64 * 0.01;
            let v = hinge_sum(f, frames, width);
            if v < best_v {
                best_v = v;
                best_f = f;
            }
        }
        best_f
    }

    #[test]
    fn fit_zero_noise_segment_finds_zero_objective() {
        // tight bounds, observations all at the true focal
        let frames: Vec<FrameObservation> = (0..50)
            .map(|i| FrameObservation { r_z: 0.1 + 0.002 * i as f64, f_hat: 516.0 })
            .collect();
        let fit = fit_focal(&frames, 480, 0.0, (258.0, 1032.0)).unwrap();
        assert_eq!(fit.objective_value, 0.0);
        assert!(fit.f_fit <= 516.0);
        let oracle = brute_force_scan(&frames, 480, 258.0, 1032.0);
        assert!(
            (fit.f_fit - oracle).abs() <= 0.02,
            "fit {} vs oracle {}",
            fit.f_fit,
            oracle
        );
    }

    #[test]
    fn fit_matches_brute_force_on_random_segments() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(4242);
        for trial in 0..20 {
            let f_true = rng.gen_range(350.0..700.0);
            let width = 480;
            let frames: Vec<FrameObservation> = (0..rng.gen_range(5..60))
                .map(|_| {
                    let r_z = rng.gen_range(0.005..0.3);
                    let bound = focal_bound(f_true, width, r_z);
                    // mix of within-bound and violating observations
                    let noise = rng.gen_range(-1.4..1.1) * bound.min(f_true * 0.6);
                    FrameObservation { r_z, f_hat: (f_true + noise).max(20.0) }
                })
                .collect();
            let (lo, hi) = default_search_interval(&frames).unwrap();
            let fit = fit_focal(&frames, width, 0.0, (lo, hi)).unwrap();
            let oracle = brute_force_scan(&frames, width, lo, hi);
            assert!(
                (fit.f_fit - oracle).abs() <= 0.02,
                "trial {trial}: fit {} vs oracle {}",
                fit.f_fit,
                oracle
            );
        }
    }

    #[test]
    fn fit_invariant_to_duplicated_observations() {
        let frames: Vec<FrameObservation> = (0..20)
            .map(|i| FrameObservation { r_z: 0.02 + 0.01 * (i % 5) as f64, f_hat: 480.0 + 7.0 * (i % 7) as f64 })
            .collect();
        let doubled: Vec<FrameObservation> =
            frames.iter().chain(frames.iter()).copied().collect();
        let a = fit_focal(&frames, 480, 0.0, (200.0, 1000.0)).unwrap();
        let b = fit_focal(&doubled, 480, 0.0, (200.0, 1000.0)).unwrap();
        assert_eq!(a.f_fit, b.f_fit);
        assert!((b.objective_value - 2.0 * a.objective_value).abs() < 1e-9);
    }

    #[test]
    fn raising_rz_min_never_enlarges_used_set() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(5);
        let frames: Vec<FrameObservation> = (0..100)
            .map(|_| FrameObservation { r_z: rng.gen_range(0.0..0.1), f_hat: rng.gen_range(300.0..600.0) })
            .collect();
        let mut prev = usize::MAX;
        for rz_min in [0.0, 0.01, 0.02, 0.03, 0.05] {
            let fit = fit_focal(&frames, 480, rz_min, (200.0, 1000.0)).unwrap();
            assert!(fit.used_count <= prev);
            assert_eq!(fit.used_count + fit.filtered_count, frames.len());
            prev = fit.used_count;
        }
    }

    #[test]
    fn all_frames_filtered_is_uninformative() {
        let frames = vec![FrameObservation { r_z: 0.001, f_hat: 500.0 }; 10];
        let err = fit_focal(&frames, 480, 0.05, (200.0, 1000.0)).unwrap_err();
        assert_eq!(err.to_string(), "segment uninformative, lower rz_min or extend segment");
    }
}
