//! Camera and scene geometry: coordinate frames, pinhole projection and
//! back-projection, point-cloud construction and bilinear feature sampling.
//!
//! Coordinate conventions:
//!
//! - **Ego frame** `(X_g, Y_g, Z_g)`: origin at the projection of the camera
//!   center onto the ground, X right, Y forward, Z up.
//! - **Camera frame** `(X_c, Y_c, Z_c)`: origin at the camera center, X right,
//!   Y down, Z forward (optical axis).
//! - **Image frame** `(u, v)`: origin at the top-left sensor corner, u right,
//!   v down, in pixels; normalized coordinates divide by width and height.

use crate::image::ImageRgb;
use nalgebra::{Matrix3, Vector3};

/// Tolerance for rotation orthonormality checks.
const ROTATION_TOL: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum GeometryError {
    #[error("focal lengths and image dimensions must be positive and finite")]
    InvalidIntrinsics,
    #[error("rotation is not orthonormal with determinant +1 (tolerance 1e-9)")]
    InvalidRotation,
    #[error("depth {0} is not a positive finite value")]
    InvalidDepth(f64),
    #[error("invalid depth range [{0}, {1}]: need 0 < d_min <= d_max")]
    InvalidDepthRange(f64, f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Rigid transform `p -> R p + t`. Used both for the ego-to-camera extrinsics
/// and for relative camera poses.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl RigidTransform {
    /// Build and validate: the rotation must be orthonormal with determinant
    /// +1 within 1e-9.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeometryError> {
        if !rotation_is_valid(&rotation) || !translation.iter().all(|v| v.is_finite()) {
            return Err(GeometryError::InvalidRotation);
        }
        Ok(Self { rotation, translation })
    }

    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    pub fn is_identity(&self) -> bool {
        self.rotation == Matrix3::identity() && self.translation == Vector3::zeros()
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self { rotation: rt, translation: -(rt * self.translation) }
    }

    /// Magnitudes of the yaw (about camera Y) and pitch (about camera X)
    /// components of the rotation vector, in radians.
    pub fn yaw_pitch_magnitudes(&self) -> (f64, f64) {
        let rot = nalgebra::Rotation3::from_matrix_unchecked(self.rotation);
        let w = rot.scaled_axis();
        (w.y.abs(), w.x.abs())
    }
}

fn rotation_is_valid(r: &Matrix3<f64>) -> bool {
    if !r.iter().all(|v| v.is_finite()) {
        return false;
    }
    let gram = r.transpose() * r;
    let mut max_dev: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let target = if i == j { 1.0 } else { 0.0 };
            max_dev = max_dev.max((gram[(i, j)] - target).abs());
        }
    }
    max_dev <= ROTATION_TOL && (r.determinant() - 1.0).abs() <= ROTATION_TOL
}

/// Pinhole camera: intrinsics, image size and the ego-to-camera extrinsics.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub t_g2c: RigidTransform,
}

/// A point projected into the image: normalized coordinates in units of the
/// image size, plus the camera-frame depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedPoint {
    /// Horizontal coordinate divided by the image width.
    pub u: f64,
    /// Vertical coordinate divided by the image height.
    pub v: f64,
    /// Camera-frame depth in meters.
    pub depth: f64,
}

impl ProjectedPoint {
    /// True when the normalized coordinates fall inside the image.
    pub fn in_image(&self) -> bool {
        (0.0..=1.0).contains(&self.u) && (0.0..=1.0).contains(&self.v)
    }
}

impl CameraModel {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
        t_g2c: RigidTransform,
    ) -> Result<Self, GeometryError> {
        let finite = [fx, fy, cx, cy].iter().all(|v| v.is_finite());
        if !finite || fx <= 0.0 || fy <= 0.0 || width == 0 || height == 0 {
            return Err(GeometryError::InvalidIntrinsics);
        }
        if !rotation_is_valid(&t_g2c.rotation) {
            return Err(GeometryError::InvalidRotation);
        }
        Ok(Self { fx, fy, cx, cy, width, height, t_g2c })
    }

    /// Intrinsic matrix `K`.
    pub fn intrinsic_matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    /// Project an ego-frame point. Returns `None` when the point has
    /// non-positive camera-frame depth (behind the camera); coordinates of
    /// points outside the image are returned unclamped.
    ///
    /// ```
    /// use lanekit::camera::{make_extrinsics, CameraModel};
    /// use nalgebra::Vector3;
    ///
    /// let cam = CameraModel::new(
    ///     100.0, 100.0, 240.0, 160.0, 480, 320, make_extrinsics(1.5, 0.0),
    /// ).unwrap();
    /// // a point on the optical axis projects to the principal point
    /// let p = cam.project_to_image(&Vector3::new(0.0, 10.0, 1.5)).unwrap();
    /// assert!((p.u - 0.5).abs() < 1e-12 && (p.v - 0.5).abs() < 1e-12);
    /// assert_eq!(p.depth, 10.0);
    /// ```
    pub fn project_to_image(&self, point_ego: &Vector3<f64>) -> Option<ProjectedPoint> {
        let pc = self.t_g2c.apply(point_ego);
        self.project_camera_point(&pc)
    }

    /// Project a camera-frame point (no extrinsics applied).
    pub fn project_camera_point(&self, pc: &Vector3<f64>) -> Option<ProjectedPoint> {
        if !(pc.z > 0.0) {
            return None;
        }
        let u = (self.fx * pc.x / pc.z + self.cx) / self.width as f64;
        let v = (self.fy * pc.y / pc.z + self.cy) / self.height as f64;
        Some(ProjectedPoint { u, v, depth: pc.z })
    }

    /// Back-project pixel coordinates and a camera-frame depth into the ego
    /// frame. Inverse of [`Self::project_to_image`] for in-frustum points.
    pub fn backproject_pixel(&self, u: f64, v: f64, depth: f64) -> Result<Vector3<f64>, GeometryError> {
        if !depth.is_finite() || depth <= 0.0 {
            return Err(GeometryError::InvalidDepth(depth));
        }
        let pc = Vector3::new(
            (u - self.cx) * depth / self.fx,
            (v - self.cy) * depth / self.fy,
            depth,
        );
        Ok(self.t_g2c.inverse().apply(&pc))
    }
}

/// Build the ego-to-camera extrinsics for a camera `camera_height` meters
/// above the ego origin. Positive pitch tilts the optical axis toward the
/// ground. Roll and yaw default to zero; see [`make_extrinsics_full`].
pub fn make_extrinsics(camera_height: f64, pitch: f64) -> RigidTransform {
    make_extrinsics_full(camera_height, pitch, 0.0, 0.0)
}

/// [`make_extrinsics`] with explicit roll (about the optical axis) and yaw
/// (about the camera's vertical axis) applied as intrinsic camera rotations.
pub fn make_extrinsics_full(camera_height: f64, pitch: f64, roll: f64, yaw: f64) -> RigidTransform {
    assert!(camera_height > 0.0, "camera_height must be positive");
    assert!(pitch.abs() < std::f64::consts::FRAC_PI_2, "|pitch| must be < pi/2");
    // Base axis relabeling: X_c = X_g, Y_c = -Z_g, Z_c = Y_g.
    let base = Matrix3::new(1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0);
    let (sp, cp) = pitch.sin_cos();
    let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, cp, -sp, 0.0, sp, cp);
    let (sy, cy) = yaw.sin_cos();
    let ry = Matrix3::new(cy, 0.0, sy, 0.0, 1.0, 0.0, -sy, 0.0, cy);
    let (sr, cr) = roll.sin_cos();
    let rz = Matrix3::new(cr, -sr, 0.0, sr, cr, 0.0, 0.0, 0.0, 1.0);
    let rotation = rz * rx * ry * base;
    let center = Vector3::new(0.0, 0.0, camera_height);
    let translation = -(rotation * center);
    RigidTransform { rotation, translation }
}

/// Dense per-pixel depth in meters. Values outside `[d_min, d_max]` (or
/// non-finite) mark invalid pixels such as sky.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
    d_min: f64,
    d_max: f64,
}

impl DepthMap {
    pub fn new(
        width: usize,
        height: usize,
        values: Vec<f64>,
        d_min: f64,
        d_max: f64,
    ) -> Result<Self, GeometryError> {
        if !(d_min > 0.0) || !(d_max >= d_min) || !d_max.is_finite() {
            return Err(GeometryError::InvalidDepthRange(d_min, d_max));
        }
        if values.len() != width * height {
            return Err(GeometryError::DimensionMismatch(format!(
                "depth values {} != {}x{}",
                values.len(),
                width,
                height
            )));
        }
        Ok(Self { width, height, values, d_min, d_max })
    }

    pub fn constant(width: usize, height: usize, depth: f64, d_min: f64, d_max: f64) -> Result<Self, GeometryError> {
        Self::new(width, height, vec![depth; width * height], d_min, d_max)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn d_min(&self) -> f64 {
        self.d_min
    }

    pub fn d_max(&self) -> f64 {
        self.d_max
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        debug_assert!(u < self.width && v < self.height);
        self.values[v * self.width + u]
    }

    pub fn is_valid(&self, u: usize, v: usize) -> bool {
        let d = self.get(u, v);
        d.is_finite() && d >= self.d_min && d <= self.d_max
    }

    pub fn valid_count(&self) -> usize {
        (0..self.height)
            .map(|v| (0..self.width).filter(|&u| self.is_valid(u, v)).count())
            .sum()
    }
}

/// One back-projected pixel: ego position, color and source pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointRow {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub r: f64,
    pub g: f64,
    pub b: f64,
    pub u: f64,
    pub v: f64,
}

/// Point cloud with one row per valid-depth pixel (xyz + rgb + uv).
#[derive(Debug, Clone, Default)]
pub struct PointCloud8 {
    pub rows: Vec<PointRow>,
}

/// Back-project every valid-depth pixel into the ego frame, carrying color
/// and uv context. Rows are emitted in row-major pixel order.
pub fn build_point_cloud(
    image: &ImageRgb,
    depth: &DepthMap,
    cam: &CameraModel,
) -> Result<PointCloud8, GeometryError> {
    if image.width() != depth.width() || image.height() != depth.height() {
        return Err(GeometryError::DimensionMismatch(format!(
            "image {}x{} vs depth {}x{}",
            image.width(),
            image.height(),
            depth.width(),
            depth.height()
        )));
    }
    if image.width() != cam.width || image.height() != cam.height {
        return Err(GeometryError::DimensionMismatch(format!(
            "image {}x{} vs camera {}x{}",
            image.width(),
            image.height(),
            cam.width,
            cam.height
        )));
    }
    let t_c2g = cam.t_g2c.inverse();
    let mut rows = Vec::with_capacity(depth.valid_count());
    for v in 0..depth.height() {
        for u in 0..depth.width() {
            if !depth.is_valid(u, v) {
                continue;
            }
            let d = depth.get(u, v);
            let uf = u as f64;
            let vf = v as f64;
            let pc = Vector3::new((uf - cam.cx) * d / cam.fx, (vf - cam.cy) * d / cam.fy, d);
            let pg = t_c2g.apply(&pc);
            let rgb = image.pixel(u, v);
            rows.push(PointRow {
                x: pg.x,
                y: pg.y,
                z: pg.z,
                r: rgb[0],
                g: rgb[1],
                b: rgb[2],
                u: uf,
                v: vf,
            });
        }
    }
    Ok(PointCloud8 { rows })
}

/// Domain a feature grid is indexed by.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridDomain {
    /// Queries are normalized image coordinates (u/W, v/H).
    Image,
    /// Queries are normalized ground-plane coordinates.
    Ground,
}

/// Regular H×W grid of d-channel features, queried with normalized
/// coordinates in `[0, 1]²` (grid corners map to the unit square corners).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    domain: GridDomain,
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl FeatureGrid {
    pub fn new(
        domain: GridDomain,
        height: usize,
        width: usize,
        channels: usize,
        data: Vec<f64>,
    ) -> Result<Self, GeometryError> {
        if height < 2 || width < 2 || channels == 0 {
            return Err(GeometryError::DimensionMismatch(
                "feature grid needs height >= 2, width >= 2, channels >= 1".into(),
            ));
        }
        if data.len() != height * width * channels {
            return Err(GeometryError::DimensionMismatch(format!(
                "feature data {} != {}x{}x{}",
                data.len(),
                height,
                width,
                channels
            )));
        }
        Ok(Self { domain, height, width, channels, data })
    }

    /// Fill node `(x, y)` from a function of its normalized coordinates.
    pub fn from_fn(
        domain: GridDomain,
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(f64, f64, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(height * width * channels);
        for y in 0..height {
            for x in 0..width {
                let a = x as f64 / (width - 1) as f64;
                let b = y as f64 / (height - 1) as f64;
                for c in 0..channels {
                    data.push(f(a, b, c));
                }
            }
        }
        Self { domain, height, width, channels, data }
    }

    pub fn domain(&self) -> GridDomain {
        self.domain
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn node(&self, x: usize, y: usize) -> &[f64] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    /// Bilinear sample at normalized `(a, b)`. Out-of-range queries are
    /// clamped to the grid and flagged; the returned bool is true when the
    /// query was clamped.
    pub fn sample(&self, a: f64, b: f64) -> (Vec<f64>, bool) {
        let mut out = vec![0.0; self.channels];
        let clamped = self.sample_into(a, b, &mut out);
        (out, clamped)
    }

    /// As [`Self::sample`] but writing into a caller buffer of `channels` len.
    pub fn sample_into(&self, a: f64, b: f64, out: &mut [f64]) -> bool {
        assert_eq!(out.len(), self.channels);
        let mut clamped = false;
        let a = if a.is_finite() {
            if !(0.0..=1.0).contains(&a) {
                clamped = true;
            }
            a.clamp(0.0, 1.0)
        } else {
            clamped = true;
            0.0
        };
        let b = if b.is_finite() {
            if !(0.0..=1.0).contains(&b) {
                clamped = true;
            }
            b.clamp(0.0, 1.0)
        } else {
            clamped = true;
            0.0
        };
        let x = a * (self.width - 1) as f64;
        let y = b * (self.height - 1) as f64;
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fu = x - x0 as f64;
        let fv = y - y0 as f64;
        let n00 = self.node(x0, y0);
        let n10 = self.node(x1, y0);
        let n01 = self.node(x0, y1);
        let n11 = self.node(x1, y1);
        for c in 0..self.channels {
            out[c] = n00[c] * (1.0 - fu) * (1.0 - fv)
                + n10[c] * fu * (1.0 - fv)
                + n01[c] * (1.0 - fu) * fv
                + n11[c] * fu * fv;
        }
        clamped
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn test_camera() -> CameraModel {
        CameraModel::new(100.0, 100.0, 240.0, 160.0, 480, 320, make_extrinsics(1.5, 0.0)).unwrap()
    }

    #[test]
    fn extrinsics_zero_pitch_relabels_axes() {
        let t = make_extrinsics(1.5, 0.0);
        let p = t.apply(&Vector3::new(0.0, 10.0, 0.0));
        assert_relative_eq!(p, Vector3::new(0.0, 1.5, 10.0), epsilon = 1e-12);
        let center = t.apply(&Vector3::new(0.0, 0.0, 1.5));
        assert_relative_eq!(center, Vector3::new(0.0, 0.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn extrinsics_pitch_rotates_about_camera_x() {
        let t = make_extrinsics(1.5, 0.1);
        let p = t.apply(&Vector3::new(0.0, 10.0, 0.0));
        let expect_z = 10.0 * 0.1f64.cos() + 1.5 * 0.1f64.sin();
        assert_relative_eq!(p.z, expect_z, epsilon = 1e-12);
        assert_relative_eq!(p.x, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn extrinsics_is_isometry() {
        let t = make_extrinsics_full(1.7, 0.2, 0.05, -0.1);
        let a = Vector3::new(3.0, 25.0, 1.0);
        let b = Vector3::new(-2.0, 60.0, -0.5);
        let d0 = (a - b).norm();
        let d1 = (t.apply(&a) - t.apply(&b)).norm();
        assert_relative_eq!(d0, d1, epsilon = 1e-9);
    }

    #[test]
    fn project_principal_point() {
        let cam = test_camera();
        // point on the optical axis: ego (0, 10, 1.5) maps to camera (0, 0, 10)
        let p = cam.project_to_image(&Vector3::new(0.0, 10.0, 1.5)).unwrap();
        assert_relative_eq!(p.u, 0.5, epsilon = 1e-12);
        assert_relative_eq!(p.v, 0.5, epsilon = 1e-12);
        assert_relative_eq!(p.depth, 10.0, epsilon = 1e-12);
    }

    #[test]
    fn project_known_offset() {
        let cam = test_camera();
        let p = cam.project_camera_point(&Vector3::new(1.0, 0.0, 10.0)).unwrap();
        assert_relative_eq!(p.u, (100.0 * 0.1 + 240.0) / 480.0, epsilon = 1e-15);
        assert_relative_eq!(p.v, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn project_behind_camera_is_none() {
        let cam = test_camera();
        assert!(cam.project_camera_point(&Vector3::new(0.0, 0.0, -1.0)).is_none());
        assert!(cam.project_camera_point(&Vector3::new(0.0, 0.0, 0.0)).is_none());
    }

    #[test]
    fn backproject_principal_point_lands_on_axis() {
        let cam = test_camera();
        let p = cam.backproject_pixel(240.0, 160.0, 7.0).unwrap();
        // optical axis at depth d: ego (0, d, camera_height)
        assert_relative_eq!(p, Vector3::new(0.0, 7.0, 1.5), epsilon = 1e-12);
    }

    #[test]
    fn backproject_rejects_bad_depth() {
        let cam = test_camera();
        assert!(matches!(
            cam.backproject_pixel(10.0, 10.0, -2.0),
            Err(GeometryError::InvalidDepth(_))
        ));
        assert!(cam.backproject_pixel(10.0, 10.0, f64::NAN).is_err());
    }

    #[test]
    fn round_trip_random_pixels() {
        use rand::{Rng, SeedableRng};
        let cam = CameraModel::new(
            120.0,
            110.0,
            239.5,
            161.0,
            480,
            320,
            make_extrinsics(1.45, 0.08),
        )
        .unwrap();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(9);
        for _ in 0..1000 {
            let u = rng.gen_range(0.0..480.0);
            let v = rng.gen_range(0.0..320.0);
            let d = rng.gen_range(0.2..80.0);
            let p = cam.backproject_pixel(u, v, d).unwrap();
            let proj = cam.project_to_image(&p).unwrap();
            let err = ((proj.u - u / 480.0).powi(2)
                + (proj.v - v / 320.0).powi(2)
                + ((proj.depth - d) / d).powi(2))
            .sqrt();
            assert!(err < 1e-6, "round trip error {err}");
        }
    }

    #[test]
    fn projection_is_scale_invariant_in_uv() {
        let cam = test_camera();
        let p = Vector3::new(0.7, -0.3, 12.0);
        let a = cam.project_camera_point(&p).unwrap();
        let b = cam.project_camera_point(&(p * 3.5)).unwrap();
        assert_relative_eq!(a.u, b.u, epsilon = 1e-12);
        assert_relative_eq!(a.v, b.v, epsilon = 1e-12);
        assert_relative_eq!(b.depth, a.depth * 3.5, epsilon = 1e-9);
    }

    #[test]
    fn point_cloud_counts_valid_pixels() {
        let cam = CameraModel::new(100.0, 100.0, 1.0, 1.0, 2, 2, make_extrinsics(1.5, 0.0)).unwrap();
        let img = ImageRgb::filled(2, 2, [0.25, 0.5, 0.75]);
        let all = DepthMap::new(2, 2, vec![5.0; 4], 0.1, 80.0).unwrap();
        let cloud = build_point_cloud(&img, &all, &cam).unwrap();
        assert_eq!(cloud.rows.len(), 4);
        assert_eq!(cloud.rows[0].r, 0.25);
        assert_eq!(cloud.rows[3].u, 1.0);
        assert_eq!(cloud.rows[3].v, 1.0);

        let none = DepthMap::new(2, 2, vec![0.0; 4], 0.1, 80.0).unwrap();
        assert!(build_point_cloud(&img, &none, &cam).unwrap().rows.is_empty());
    }

    #[test]
    fn point_cloud_rejects_dimension_mismatch() {
        let cam = test_camera();
        let img = ImageRgb::filled(2, 2, [0.0; 3]);
        let depth = DepthMap::new(3, 2, vec![1.0; 6], 0.1, 80.0).unwrap();
        assert!(matches!(
            build_point_cloud(&img, &depth, &cam),
            Err(GeometryError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn grid_sample_nodes_and_constants() {
        let grid = FeatureGrid::from_fn(GridDomain::Image, 5, 5, 2, |a, b, c| {
            if c == 0 {
                a + 2.0 * b
            } else {
                7.0
            }
        });
        // node query: exact node values (0.25 increments are exact in f64)
        let (vals, clamped) = grid.sample(0.5, 0.25);
        assert!(!clamped);
        assert_relative_eq!(vals[0], 1.0, epsilon = 1e-15);
        assert_eq!(vals[1], 7.0);
        // constant channel stays constant anywhere
        let (vals, _) = grid.sample(0.123, 0.987);
        assert_relative_eq!(vals[1], 7.0, epsilon = 1e-15);
    }

    #[test]
    fn grid_sample_reproduces_bilinear_field() {
        // f(a, b) = 3a + 2b - ab is a fixed point of bilinear interpolation
        let f = |a: f64, b: f64| 3.0 * a + 2.0 * b - a * b;
        let grid = FeatureGrid::from_fn(GridDomain::Ground, 9, 13, 1, |a, b, _| f(a, b));
        for i in 0..50 {
            let a = (i as f64 * 0.019) % 1.0;
            let b = (i as f64 * 0.037) % 1.0;
            let (vals, clamped) = grid.sample(a, b);
            assert!(!clamped);
            assert!((vals[0] - f(a, b)).abs() < 1e-9, "at ({a},{b})");
        }
    }

    #[test]
    fn grid_sample_clamps_and_flags() {
        let grid = FeatureGrid::from_fn(GridDomain::Ground, 4, 4, 1, |a, _, _| a);
        let (vals, clamped) = grid.sample(-0.25, 0.5);
        assert!(clamped);
        assert_relative_eq!(vals[0], 0.0, epsilon = 1e-15);
        let (vals, clamped) = grid.sample(1.75, 0.5);
        assert!(clamped);
        assert_relative_eq!(vals[0], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn yaw_pitch_extraction_from_rotation_vector() {
        // pure rotation about the camera Y axis (panning)
        let a = 0.2f64;
        let (s, c) = a.sin_cos();
        let ry = Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c);
        let t = RigidTransform::new(ry, Vector3::zeros()).unwrap();
        let (r_z, r_x) = t.yaw_pitch_magnitudes();
        assert_relative_eq!(r_z, 0.2, epsilon = 1e-12);
        assert_relative_eq!(r_x, 0.0, epsilon = 1e-12);

        // pure rotation about the camera X axis (tilting), negative angle
        let (s, c) = (-0.15f64).sin_cos();
        let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c);
        let t = RigidTransform::new(rx, Vector3::zeros()).unwrap();
        let (r_z, r_x) = t.yaw_pitch_magnitudes();
        assert_relative_eq!(r_z, 0.0, epsilon = 1e-12);
        assert_relative_eq!(r_x, 0.15, epsilon = 1e-12);
    }

    #[test]
    fn camera_rejects_bad_rotation() {
        let mut t = make_extrinsics(1.5, 0.0);
        t.rotation[(0, 0)] = 2.0;
        assert!(matches!(
            CameraModel::new(100.0, 100.0, 1.0, 1.0, 10, 10, t),
            Err(GeometryError::InvalidRotation)
        ));
    }
}
