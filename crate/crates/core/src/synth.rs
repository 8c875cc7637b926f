//! Deterministic synthetic road scenes: polynomial lanes on a quadratic
//! height-field terrain, rendered with exact ray-terrain depth, procedural
//! ground texture, ground-truth lanes and inter-frame poses. Also provides
//! analytic bilinear feature fields and the learned-intrinsics noise
//! simulator, so every sampling and fitting path can be tested without
//! trained networks.

use crate::anchor::{Lane3D, RoiConfig, YSteps};
use crate::camera::{make_extrinsics, CameraModel, DepthMap, FeatureGrid, GeometryError, GridDomain, RigidTransform};
use crate::image::ImageRgb;
use crate::intrinsics::{focal_bound, FrameObservation, SegmentObservations};
use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

/// Color painted on lane stripes (kept distinct from the road texture range).
pub const LANE_COLOR: [f64; 3] = [0.93, 0.91, 0.86];

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid scene spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// One lane's centerline: `x(y) = offset_x + sum_j curvature[j] * y^(j+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaneSpec {
    pub category: u32,
    pub offset_x: f64,
    pub curvature: Vec<f64>,
}

impl LaneSpec {
    pub fn x_at(&self, y: f64) -> f64 {
        let mut x = self.offset_x;
        let mut p = y;
        for c in &self.curvature {
            x += c * p;
            p *= y;
        }
        x
    }

}

/// Camera parameters of the scene.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraSpec {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    /// Camera height above the ego origin, meters.
    pub camera_height: f64,
    /// Camera pitch, radians; positive tilts toward the ground.
    pub pitch: f64,
}

impl CameraSpec {
    pub fn to_camera(&self) -> Result<CameraModel, GeometryError> {
        CameraModel::new(
            self.fx,
            self.fy,
            self.cx,
            self.cy,
            self.width,
            self.height,
            make_extrinsics(self.camera_height, self.pitch),
        )
    }
}

/// Vehicle pose along the trajectory: forward position on the world Y axis
/// and heading about the vertical axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPose {
    pub y: f64,
    pub yaw: f64,
}

/// Full scene description. Deterministic given `seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub seed: u64,
    pub lanes: Vec<LaneSpec>,
    /// Terrain height `z(y) = a0 + a1 y + a2 y^2` (constant in x).
    pub terrain: [f64; 3],
    pub camera: CameraSpec,
    pub trajectory: Vec<TrajectoryPose>,
    pub roi: RoiConfig,
    pub ysteps: YSteps,
    /// Half width of the painted lane stripes, meters.
    pub lane_half_width: f64,
    pub d_min: f64,
    pub d_max: f64,
}

impl SceneSpec {
    pub fn terrain_height(&self, y: f64) -> f64 {
        self.terrain[0] + self.terrain[1] * y + self.terrain[2] * y * y
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.trajectory.is_empty() {
            return Err(SynthError::InvalidSpec("trajectory is empty".into()));
        }
        if !(self.d_min > 0.0) || !(self.d_max > self.d_min) {
            return Err(SynthError::InvalidSpec(format!(
                "bad depth range [{}, {}]",
                self.d_min, self.d_max
            )));
        }
        if !(self.lane_half_width > 0.0) {
            return Err(SynthError::InvalidSpec("lane_half_width must be positive".into()));
        }
        self.camera.to_camera()?;
        Ok(())
    }
}

/// One rendered frame with exact ground truth.
#[derive(Debug, Clone)]
pub struct RenderedFrame {
    pub image: ImageRgb,
    pub depth: DepthMap,
    pub gt_lanes: Vec<Lane3D>,
    /// Rigid pose mapping this frame's camera coordinates to the previous
    /// frame's camera coordinates (identity for the first frame).
    pub pose_to_previous: RigidTransform,
    pub cam: CameraModel,
}

/// Seeded sinusoidal ground texture. Amplitudes taper with forward distance
/// so the far field stays resolvable after projection.
struct GroundTexture {
    // per channel: 3 components of (amplitude, wx, wy, phase)
    comps: [[(f64, f64, f64, f64); 3]; 3],
}

impl GroundTexture {
    fn new(seed: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(0xA11CE);
        let mut comps = [[(0.0, 0.0, 0.0, 0.0); 3]; 3];
        for channel in &mut comps {
            for comp in channel.iter_mut() {
                let amp = rng.gen_range(0.10..0.15);
                let wavelength_x = rng.gen_range(8.0..25.0);
                let wavelength_y = rng.gen_range(30.0..90.0);
                let phase = rng.gen_range(0.0..std::f64::consts::TAU);
                *comp = (
                    amp,
                    std::f64::consts::TAU / wavelength_x,
                    std::f64::consts::TAU / wavelength_y,
                    phase,
                );
            }
        }
        Self { comps }
    }

    fn color(&self, x: f64, y: f64) -> [f64; 3] {
        let taper = 1.0 / (1.0 + (y / 25.0) * (y / 25.0));
        let mut rgb = [0.0; 3];
        for (c, channel) in self.comps.iter().enumerate() {
            let mut v = 0.5;
            for &(amp, wx, wy, phase) in channel {
                v += amp * taper * (wx * x + wy * y + phase).sin();
            }
            rgb[c] = v.clamp(0.05, 0.95);
        }
        rgb
    }
}

fn sky_color(v_frac: f64) -> [f64; 3] {
    [0.45 + 0.1 * v_frac, 0.55 + 0.12 * v_frac, 0.75 + 0.15 * v_frac]
}

/// Smallest `t` in `[d_min, d_max]` with `c + t d` on the terrain, if any.
fn ray_terrain_depth(spec: &SceneSpec, c: &Vector3<f64>, d: &Vector3<f64>) -> Option<f64> {
    let [a0, a1, a2] = spec.terrain;
    let qa = a2 * d.y * d.y;
    let qb = a1 * d.y + 2.0 * a2 * c.y * d.y - d.z;
    let qc = a0 + a1 * c.y + a2 * c.y * c.y - c.z;

    let mut candidates: [Option<f64>; 2] = [None, None];
    if qa.abs() < 1e-14 {
        if qb.abs() > 1e-14 {
            candidates[0] = Some(-qc / qb);
        }
    } else {
        let disc = qb * qb - 4.0 * qa * qc;
        if disc < 0.0 {
            return None;
        }
        let sq = disc.sqrt();
        let q = -0.5 * (qb + qb.signum() * sq);
        candidates[0] = Some(q / qa);
        if q != 0.0 {
            candidates[1] = Some(qc / q);
        }
    }
    let mut best: Option<f64> = None;
    for t in candidates.into_iter().flatten() {
        if t >= spec.d_min && t <= spec.d_max && best.is_none_or(|b| t < b) {
            best = Some(t);
        }
    }
    best
}

struct FramePose {
    /// World-to-camera rotation.
    rotation: Matrix3<f64>,
    /// Camera center in world coordinates.
    center: Vector3<f64>,
    /// Ego origin in world coordinates.
    origin: Vector3<f64>,
    yaw: f64,
}

fn frame_pose(spec: &SceneSpec, pose: &TrajectoryPose, g2c: &RigidTransform) -> FramePose {
    let origin = Vector3::new(0.0, pose.y, spec.terrain_height(pose.y));
    let center = origin + Vector3::new(0.0, 0.0, spec.camera.camera_height);
    let (s, c) = pose.yaw.sin_cos();
    // world -> ego is a rotation by -yaw about Z
    let rz_inv = Matrix3::new(c, s, 0.0, -s, c, 0.0, 0.0, 0.0, 1.0);
    FramePose { rotation: g2c.rotation * rz_inv, center, origin, yaw: pose.yaw }
}

/// Solve for the world y where the lane crosses the ego-frame forward
/// coordinate `y_e` (bisection; closed form when the heading is zero).
fn lane_world_y(lane: &LaneSpec, fp: &FramePose, y_e: f64) -> Option<f64> {
    if fp.yaw == 0.0 {
        return Some(fp.origin.y + y_e);
    }
    let (s, c) = fp.yaw.sin_cos();
    let g = |yw: f64| -s * lane.x_at(yw) + c * (yw - fp.origin.y) - y_e;
    let mut lo = fp.origin.y - 30.0;
    let mut hi = fp.origin.y + y_e.abs() + 120.0;
    let (glo, ghi) = (g(lo), g(hi));
    if glo > 0.0 || ghi < 0.0 {
        return None;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if g(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

fn render_frame(spec: &SceneSpec, index: usize, texture: &GroundTexture) -> Result<RenderedFrame, SynthError> {
    let cam = spec.camera.to_camera()?;
    let g2c = &cam.t_g2c;
    let fp = frame_pose(spec, &spec.trajectory[index], g2c);
    let cam_to_world = fp.rotation.transpose();

    let (w, h) = (spec.camera.width, spec.camera.height);
    let mut depth_values = vec![0.0f64; w * h];
    let mut image = ImageRgb::filled(w, h, [0.0; 3]);
    for v in 0..h {
        for u in 0..w {
            let ray_cam = Vector3::new(
                (u as f64 - spec.camera.cx) / spec.camera.fx,
                (v as f64 - spec.camera.cy) / spec.camera.fy,
                1.0,
            );
            let ray_world = cam_to_world * ray_cam;
            match ray_terrain_depth(spec, &fp.center, &ray_world) {
                Some(t) => {
                    depth_values[v * w + u] = t;
                    let hit = fp.center + ray_world * t;
                    let on_stripe = spec
                        .lanes
                        .iter()
                        .any(|l| (hit.x - l.x_at(hit.y)).abs() <= spec.lane_half_width);
                    let rgb = if on_stripe { LANE_COLOR } else { texture.color(hit.x, hit.y) };
                    image.set_pixel(u, v, rgb);
                }
                None => {
                    image.set_pixel(u, v, sky_color(v as f64 / h as f64));
                }
            }
        }
    }
    let depth = DepthMap::new(w, h, depth_values, spec.d_min, spec.d_max)?;

    // ground-truth lanes in this frame's ego coordinates
    let mut gt_lanes = Vec::new();
    for lane in &spec.lanes {
        let mut xs = Vec::with_capacity(spec.ysteps.len());
        let mut zs = Vec::with_capacity(spec.ysteps.len());
        let mut vis = Vec::with_capacity(spec.ysteps.len());
        let (s, c) = fp.yaw.sin_cos();
        for &y_e in spec.ysteps.values() {
            match lane_world_y(lane, &fp, y_e) {
                Some(yw) => {
                    let dx = lane.x_at(yw);
                    let dy = yw - fp.origin.y;
                    let x_e = c * dx + s * dy;
                    let z_e = spec.terrain_height(yw) - fp.origin.z;
                    let in_roi = x_e >= spec.roi.x_min
                        && x_e <= spec.roi.x_max
                        && y_e >= spec.roi.y_min
                        && y_e <= spec.roi.y_max;
                    let in_frustum = cam
                        .project_to_image(&Vector3::new(x_e, y_e, z_e))
                        .map(|p| p.in_image())
                        .unwrap_or(false);
                    xs.push(x_e);
                    zs.push(z_e);
                    vis.push(if in_roi && in_frustum { 1.0 } else { 0.0 });
                }
                None => {
                    xs.push(0.0);
                    zs.push(0.0);
                    vis.push(0.0);
                }
            }
        }
        if vis.iter().any(|&v| v > 0.0) {
            gt_lanes.push(
                Lane3D::new(lane.category, xs, zs, vis)
                    .map_err(|e| SynthError::InvalidSpec(e.to_string()))?,
            );
        }
    }

    // pose relative to the previous frame
    let pose_to_previous = if index == 0 {
        RigidTransform::identity()
    } else {
        let prev = frame_pose(spec, &spec.trajectory[index - 1], g2c);
        RigidTransform {
            rotation: prev.rotation * fp.rotation.transpose(),
            translation: prev.rotation * (fp.center - prev.center),
        }
    };

    Ok(RenderedFrame { image, depth, gt_lanes, pose_to_previous, cam })
}

/// Render every trajectory frame. Deterministic; frames are rendered in
/// parallel and returned in trajectory order.
pub fn render_scene(spec: &SceneSpec) -> Result<Vec<RenderedFrame>, SynthError> {
    spec.validate()?;
    let texture = GroundTexture::new(spec.seed);
    (0..spec.trajectory.len())
        .into_par_iter()
        .map(|i| render_frame(spec, i, &texture))
        .collect()
}

/// Analytic bilinear feature fields standing in for learned encoders. Every
/// channel holds `f(a, b) = alpha a + beta b + gamma ab`; the coefficients
/// are returned so tests can use the closed form as an oracle.
#[derive(Debug, Clone)]
pub struct FeatureFields {
    pub fv: FeatureGrid,
    pub bev: FeatureGrid,
    /// Per FV channel: (alpha, beta, gamma).
    pub fv_coeffs: Vec<[f64; 3]>,
    /// Per BEV channel: (alpha, beta, gamma).
    pub bev_coeffs: Vec<[f64; 3]>,
}

pub fn make_feature_fields(spec: &SceneSpec, d_fv: usize, d_bev: usize) -> FeatureFields {
    assert!(d_fv >= 1 && d_bev >= 1, "need at least one channel per pathway");
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    rng.set_stream(0xF1E1D5);
    let mut draw = |count: usize| -> Vec<[f64; 3]> {
        (0..count)
            .map(|_| {
                [
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(-2.0..2.0),
                ]
            })
            .collect()
    };
    let fv_coeffs = draw(d_fv);
    let bev_coeffs = draw(d_bev);
    fn field(coeffs: &[[f64; 3]]) -> impl FnMut(f64, f64, usize) -> f64 + '_ {
        move |a, b, c| {
            let [alpha, beta, gamma] = coeffs[c];
            alpha * a + beta * b + gamma * a * b
        }
    }
    let fv = FeatureGrid::from_fn(GridDomain::Image, 16, 24, d_fv, field(&fv_coeffs));
    let bev = FeatureGrid::from_fn(GridDomain::Ground, 24, 16, d_bev, field(&bev_coeffs));
    FeatureFields { fv, bev, fv_coeffs, bev_coeffs }
}

/// Simulate unstable per-frame learned intrinsics along the trajectory: one
/// observation per trajectory step, rotation taken from the actual yaw delta
/// plus a small jitter, and the learned focal drawn uniformly below the
/// theoretical envelope at the true focal. Deterministic given `seed`;
/// per-frame draws use independent streams so the result is independent of
/// evaluation order.
pub fn simulate_learned_intrinsics(spec: &SceneSpec, f_true: f64, seed: u64) -> SegmentObservations {
    assert!(f_true > 0.0, "true focal must be positive");
    let width = spec.camera.width;
    let mut frames = Vec::new();
    for i in 1..spec.trajectory.len() {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let delta = (spec.trajectory[i].yaw - spec.trajectory[i - 1].yaw).abs();
        let r_z = delta + rng.gen_range(0.0..0.002);
        let bound = focal_bound(f_true, width, r_z);
        let lo = (f_true - bound).max(1.0);
        let f_hat = rng.gen_range(lo..=f_true);
        frames.push(FrameObservation { r_z, f_hat });
    }
    SegmentObservations::new(width, frames).expect("simulated observations are valid")
}
