//! 3D lane anchors: generation from casting angles, projection to image and
//! ground-plane coordinates, dual-pathway feature sampling and proposal
//! assembly.

use crate::camera::{CameraModel, FeatureGrid, GridDomain};

#[derive(Debug, thiserror::Error)]
pub enum AnchorError {
    #[error("need at least one lateral start and non-empty angle lists")]
    EmptyConfiguration,
    #[error("casting angle {0} rad is outside (-pi/2, pi/2)")]
    AngleOutOfRange(f64),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("y steps must be >= 2 strictly increasing values with y_min >= 0")]
    InvalidYSteps,
    #[error("roi must satisfy x_min < x_max and y_min < y_max")]
    InvalidRoi,
    #[error("visibility values must lie in [0, 1]")]
    InvalidVisibility,
    #[error("class probabilities must be non-negative and sum to 1 within {tol}")]
    InvalidSimplex { tol: f64 },
    #[error("feature grid domain mismatch: expected {expected:?}, got {got:?}")]
    DomainMismatch { expected: GridDomain, got: GridDomain },
}

/// The predefined forward coordinates shared by lanes, anchors and proposals.
#[derive(Debug, Clone, PartialEq)]
pub struct YSteps {
    y: Vec<f64>,
}

impl YSteps {
    pub fn new(y: Vec<f64>) -> Result<Self, AnchorError> {
        if y.len() < 2 || y[0] < 0.0 || !y.iter().all(|v| v.is_finite()) {
            return Err(AnchorError::InvalidYSteps);
        }
        if !y.windows(2).all(|w| w[0] < w[1]) {
            return Err(AnchorError::InvalidYSteps);
        }
        Ok(Self { y })
    }

    /// `count` uniformly spaced steps covering `[y_min, y_max]` inclusive.
    /// Both endpoints are hit exactly.
    pub fn uniform(count: usize, y_min: f64, y_max: f64) -> Result<Self, AnchorError> {
        if count < 2 || !(y_max > y_min) {
            return Err(AnchorError::InvalidYSteps);
        }
        let step = (y_max - y_min) / (count - 1) as f64;
        Self::new(
            (0..count)
                .map(|k| if k == count - 1 { y_max } else { y_min + k as f64 * step })
                .collect(),
        )
    }

    /// Default evaluation steps: 20 uniform samples over the default ROI
    /// depth range `[0.1, 80]`.
    pub fn default_steps() -> Self {
        Self::uniform(20, 0.1, 80.0).expect("default steps are valid")
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Bird's-eye-view region of interest.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoiConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl RoiConfig {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self, AnchorError> {
        if !(x_min < x_max) || !(y_min < y_max) {
            return Err(AnchorError::InvalidRoi);
        }
        Ok(Self { x_min, x_max, y_min, y_max })
    }
}

impl Default for RoiConfig {
    /// Lateral extent 20 m, depth 0.1 m to 80 m.
    fn default() -> Self {
        Self { x_min: -20.0, x_max: 20.0, y_min: 0.1, y_max: 80.0 }
    }
}

/// A straight 3D anchor ray cast from `(origin_x, 0, 0)` at fixed pitch and
/// yaw, sampled at the shared y steps.
#[derive(Debug, Clone, PartialEq)]
pub struct LaneAnchor {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub origin_x: f64,
    pub pitch: f64,
    pub yaw: f64,
}

/// A ground-truth lane: category, geometry at the shared y steps and a
/// per-point soft visibility in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lane3D {
    pub category: u32,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub visibility: Vec<f64>,
}

impl Lane3D {
    pub fn new(category: u32, x: Vec<f64>, z: Vec<f64>, visibility: Vec<f64>) -> Result<Self, AnchorError> {
        if x.len() != z.len() || x.len() != visibility.len() {
            return Err(AnchorError::LengthMismatch(format!(
                "x {} z {} visibility {}",
                x.len(),
                z.len(),
                visibility.len()
            )));
        }
        if !visibility.iter().all(|v| (0.0..=1.0).contains(v)) {
            return Err(AnchorError::InvalidVisibility);
        }
        Ok(Self { category, x, z, visibility })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Protocol-level boolean visibility: soft value >= 0.5.
    pub fn is_visible(&self, k: usize) -> bool {
        self.visibility[k] >= 0.5
    }
}

/// A detector proposal: class distribution over background + L categories,
/// geometry and per-point visibility.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub class_probs: Vec<f64>,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub visibility: Vec<f64>,
}

/// Tolerance for the probability-simplex invariant.
pub const SIMPLEX_TOL: f64 = 1e-6;

impl Proposal {
    pub fn new(
        class_probs: Vec<f64>,
        x: Vec<f64>,
        z: Vec<f64>,
        visibility: Vec<f64>,
    ) -> Result<Self, AnchorError> {
        if x.len() != z.len() || x.len() != visibility.len() {
            return Err(AnchorError::LengthMismatch(format!(
                "x {} z {} visibility {}",
                x.len(),
                z.len(),
                visibility.len()
            )));
        }
        if !visibility.iter().all(|v| (0.0..=1.0).contains(v)) {
            return Err(AnchorError::InvalidVisibility);
        }
        validate_simplex(&class_probs, SIMPLEX_TOL)?;
        Ok(Self { class_probs, x, z, visibility })
    }

    /// Build from a single category id and detection score: the score goes to
    /// the category, the remainder to background (index 0).
    pub fn from_category_score(
        category: u32,
        score: f64,
        num_classes: usize,
        x: Vec<f64>,
        z: Vec<f64>,
        visibility: Vec<f64>,
    ) -> Result<Self, AnchorError> {
        if !(0.0..=1.0).contains(&score) || category as usize > num_classes {
            return Err(AnchorError::InvalidSimplex { tol: SIMPLEX_TOL });
        }
        let mut probs = vec![0.0; num_classes + 1];
        probs[category as usize] = score;
        probs[0] += 1.0 - score;
        Self::new(probs, x, z, visibility)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn is_visible(&self, k: usize) -> bool {
        self.visibility[k] >= 0.5
    }

    /// Most probable class index (0 is background).
    pub fn argmax_class(&self) -> usize {
        self.class_probs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }

    /// Highest non-background probability, the detection confidence.
    pub fn confidence(&self) -> f64 {
        self.class_probs[1..].iter().copied().fold(0.0, f64::max)
    }
}

pub(crate) fn validate_simplex(probs: &[f64], tol: f64) -> Result<(), AnchorError> {
    if probs.is_empty()
        || !probs.iter().all(|p| p.is_finite() && *p >= -tol)
        || (probs.iter().sum::<f64>() - 1.0).abs() > tol
    {
        return Err(AnchorError::InvalidSimplex { tol });
    }
    Ok(())
}

/// Cast `lateral_starts x |pitches| x |yaws|` straight anchors. Starts are
/// uniformly spaced over the ROI's lateral extent; angle lists are sorted so
/// the output order is lexicographic in (origin_x, pitch, yaw).
///
/// ```
/// use lanekit::anchor::{generate_anchors, RoiConfig, YSteps};
///
/// let ysteps = YSteps::uniform(20, 0.1, 80.0).unwrap();
/// let anchors = generate_anchors(
///     45,
///     &RoiConfig::default(),
///     &[0.0, 1f64.to_radians(), (-1f64).to_radians()],
///     &[0.0, 3f64.to_radians(), (-3f64).to_radians()],
///     &ysteps,
/// ).unwrap();
/// assert_eq!(anchors.len(), 45 * 3 * 3);
/// ```
pub fn generate_anchors(
    lateral_starts: usize,
    roi: &RoiConfig,
    pitches: &[f64],
    yaws: &[f64],
    ysteps: &YSteps,
) -> Result<Vec<LaneAnchor>, AnchorError> {
    if lateral_starts == 0 || pitches.is_empty() || yaws.is_empty() {
        return Err(AnchorError::EmptyConfiguration);
    }
    let limit = std::f64::consts::FRAC_PI_2;
    for &a in pitches.iter().chain(yaws.iter()) {
        if !a.is_finite() || a.abs() >= limit {
            return Err(AnchorError::AngleOutOfRange(a));
        }
    }
    let mut pitches = pitches.to_vec();
    let mut yaws = yaws.to_vec();
    pitches.sort_by(f64::total_cmp);
    yaws.sort_by(f64::total_cmp);

    let origins: Vec<f64> = if lateral_starts == 1 {
        vec![0.5 * (roi.x_min + roi.x_max)]
    } else {
        let step = (roi.x_max - roi.x_min) / (lateral_starts - 1) as f64;
        (0..lateral_starts)
            .map(|k| if k == lateral_starts - 1 { roi.x_max } else { roi.x_min + k as f64 * step })
            .collect()
    };

    let y = ysteps.values();
    let mut anchors = Vec::with_capacity(lateral_starts * pitches.len() * yaws.len());
    for &origin_x in &origins {
        for &pitch in &pitches {
            let tan_pitch = pitch.tan();
            for &yaw in &yaws {
                let tan_yaw = yaw.tan();
                anchors.push(LaneAnchor {
                    x: y.iter().map(|&yk| origin_x + yk * tan_yaw).collect(),
                    z: y.iter().map(|&yk| yk * tan_pitch).collect(),
                    origin_x,
                    pitch,
                    yaw,
                });
            }
        }
    }
    Ok(anchors)
}

/// One anchor point projected to the image: normalized coordinates plus an
/// in-frustum flag (in front of the camera and inside the image). Points
/// behind the camera carry zeroed coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorImagePoint {
    pub u: f64,
    pub v: f64,
    pub in_frustum: bool,
}

/// Project every anchor point into normalized image coordinates.
pub fn project_anchor_to_image(
    anchor: &LaneAnchor,
    ysteps: &YSteps,
    cam: &CameraModel,
) -> Vec<AnchorImagePoint> {
    ysteps
        .values()
        .iter()
        .enumerate()
        .map(|(k, &y)| {
            let p = nalgebra::Vector3::new(anchor.x[k], y, anchor.z[k]);
            match cam.project_to_image(&p) {
                Some(proj) => AnchorImagePoint { u: proj.u, v: proj.v, in_frustum: proj.in_image() },
                None => AnchorImagePoint { u: 0.0, v: 0.0, in_frustum: false },
            }
        })
        .collect()
}

/// Normalized ground-plane coordinates of every anchor point. Out-of-ROI
/// values fall outside `[0, 1]` and are clamped (and flagged) at sampling.
pub fn anchor_to_bev(anchor: &LaneAnchor, ysteps: &YSteps, roi: &RoiConfig) -> Vec<(f64, f64)> {
    ysteps
        .values()
        .iter()
        .enumerate()
        .map(|(k, &y)| {
            (
                (anchor.x[k] - roi.x_min) / (roi.x_max - roi.x_min),
                (y - roi.y_min) / (roi.y_max - roi.y_min),
            )
        })
        .collect()
}

/// Sampled anchor features: per anchor and point, front-view features
/// followed by bird's-eye-view features.
#[derive(Debug, Clone)]
pub struct AnchorFeatures {
    pub num_anchors: usize,
    pub num_points: usize,
    pub dim_fv: usize,
    pub dim_bev: usize,
    data: Vec<f64>,
}

impl AnchorFeatures {
    pub fn dim(&self) -> usize {
        self.dim_fv + self.dim_bev
    }

    /// Feature vector of point `k` of anchor `a`.
    pub fn point_features(&self, a: usize, k: usize) -> &[f64] {
        let d = self.dim();
        let i = (a * self.num_points + k) * d;
        &self.data[i..i + d]
    }
}

/// Sample front-view features at projected image coordinates and
/// bird's-eye-view features at normalized ground coordinates, concatenated
/// FV-then-BEV. Out-of-frustum points get zero FV features; out-of-ROI
/// points get zero BEV features.
pub fn sample_anchor_features(
    anchors: &[LaneAnchor],
    ysteps: &YSteps,
    cam: &CameraModel,
    roi: &RoiConfig,
    f_fv: &FeatureGrid,
    f_bev: &FeatureGrid,
) -> Result<AnchorFeatures, AnchorError> {
    if f_fv.domain() != GridDomain::Image {
        return Err(AnchorError::DomainMismatch { expected: GridDomain::Image, got: f_fv.domain() });
    }
    if f_bev.domain() != GridDomain::Ground {
        return Err(AnchorError::DomainMismatch { expected: GridDomain::Ground, got: f_bev.domain() });
    }
    let n = ysteps.len();
    let (d_fv, d_bev) = (f_fv.channels(), f_bev.channels());
    let d = d_fv + d_bev;
    let mut data = vec![0.0; anchors.len() * n * d];
    let mut bev = vec![0.0; d_bev];
    for (a, anchor) in anchors.iter().enumerate() {
        let image_points = project_anchor_to_image(anchor, ysteps, cam);
        let bev_points = anchor_to_bev(anchor, ysteps, roi);
        for k in 0..n {
            let base = (a * n + k) * d;
            if image_points[k].in_frustum {
                f_fv.sample_into(image_points[k].u, image_points[k].v, &mut data[base..base + d_fv]);
            }
            let (bx, by) = bev_points[k];
            let clamped = f_bev.sample_into(bx, by, &mut bev);
            if !clamped {
                data[base + d_fv..base + d].copy_from_slice(&bev);
            }
        }
    }
    Ok(AnchorFeatures { num_anchors: anchors.len(), num_points: n, dim_fv: d_fv, dim_bev: d_bev, data })
}

/// Apply predicted offsets to an anchor: `x = x_a + dx`, `z = z_a + dz`,
/// copying visibility and class probabilities into a proposal.
pub fn assemble_proposal(
    anchor: &LaneAnchor,
    dx: &[f64],
    dz: &[f64],
    visibility: &[f64],
    class_probs: &[f64],
) -> Result<Proposal, AnchorError> {
    let n = anchor.x.len();
    if dx.len() != n || dz.len() != n || visibility.len() != n {
        return Err(AnchorError::LengthMismatch(format!(
            "anchor {} dx {} dz {} visibility {}",
            n,
            dx.len(),
            dz.len(),
            visibility.len()
        )));
    }
    Proposal::new(
        class_probs.to_vec(),
        anchor.x.iter().zip(dx).map(|(a, d)| a + d).collect(),
        anchor.z.iter().zip(dz).map(|(a, d)| a + d).collect(),
        visibility.to_vec(),
    )
}
