//! C ABI over the lanekit core: opaque camera handles for projection
//! geometry, array-based focal self-calibration, lane matching cost and the
//! file-level evaluation driver. The header is generated into
//! `include/lanekit.h` at build time.
//!
//! Conventions: every fallible function returns [`LkStatus`] and writes its
//! results through out-pointers; absent metrics are reported as NaN; handles
//! are created and destroyed exactly once.

// C entry points take flat argument lists; NaN-rejecting `!(x > 0.0)` guards
// are intentional.
#![allow(clippy::too_many_arguments, clippy::neg_cmp_op_on_partial_ord)]

use lanekit::anchor::{Lane3D, LaneAnchor};
use lanekit::camera::{make_extrinsics_full, CameraModel};
use lanekit::intrinsics::{default_search_interval, fit_focal, FitError, FrameObservation};
use lanekit::io::{evaluate_files, parse_eval_config, EvalConfigFile, EvalFilesError};
use lanekit::training::matching_cost;
use libc::c_char;
use nalgebra::Vector3;
use std::ffi::CStr;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

/// Status code returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LkStatus {
    /// Success.
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// An argument was out of its documented domain.
    InvalidArgument = 2,
    /// An input file or string failed to parse.
    ParseError = 3,
    /// A file could not be read.
    IoError = 4,
    /// The point is behind the camera and has no projection.
    BehindCamera = 5,
    /// The lane has no visible points; the matching cost is undefined.
    Unmatchable = 6,
    /// Every observation was filtered out; the segment cannot be fitted.
    UninformativeSegment = 7,
    /// No prediction frame id matches any ground-truth frame id.
    EmptyOverlap = 8,
    /// An unexpected internal failure.
    InternalError = 9,
}

/// Opaque pinhole camera handle.
pub struct LkCamera(CameraModel);

/// Result of a per-segment focal fit.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LkFitResult {
    /// Fitted focal length, pixels.
    pub f_fit: f64,
    /// Hinge objective value at the fitted focal.
    pub objective_value: f64,
    /// Observations that survived the rotation filter.
    pub used_count: usize,
    /// Observations dropped by the rotation filter.
    pub filtered_count: usize,
    /// Search interval actually used.
    pub search_lo: f64,
    pub search_hi: f64,
}

/// Aggregated evaluation report. Metrics that are undefined without true
/// positives (category accuracy, x/z errors) are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LkEvalReport {
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub category_accuracy: f64,
    pub x_near: f64,
    pub x_far: f64,
    pub z_near: f64,
    pub z_far: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub frames: usize,
}

/// Library version as a static C string.
#[no_mangle]
pub extern "C" fn lk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Create a camera: pinhole intrinsics, image size and extrinsics built from
/// the camera height above the ground and its pitch/roll/yaw (radians,
/// positive pitch tilts toward the ground). The handle must be released with
/// `lk_camera_destroy`.
///
/// # Safety
/// `out_camera` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lk_camera_create(
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: u32,
    height: u32,
    camera_height: f64,
    pitch: f64,
    roll: f64,
    yaw: f64,
    out_camera: *mut *mut LkCamera,
) -> LkStatus {
    if out_camera.is_null() {
        return LkStatus::NullArgument;
    }
    if !(camera_height > 0.0) || !(pitch.abs() < std::f64::consts::FRAC_PI_2) {
        return LkStatus::InvalidArgument;
    }
    let extrinsics = make_extrinsics_full(camera_height, pitch, roll, yaw);
    match CameraModel::new(fx, fy, cx, cy, width as usize, height as usize, extrinsics) {
        Ok(cam) => {
            *out_camera = Box::into_raw(Box::new(LkCamera(cam)));
            LkStatus::Ok
        }
        Err(_) => LkStatus::InvalidArgument,
    }
}

/// Release a camera handle. Null is a no-op.
///
/// # Safety
/// `camera` must have come from `lk_camera_create` and not been freed.
#[no_mangle]
pub unsafe extern "C" fn lk_camera_destroy(camera: *mut LkCamera) {
    if !camera.is_null() {
        drop(Box::from_raw(camera));
    }
}

/// Project an ego-frame point (meters, length-3 array) to normalized image
/// coordinates plus camera depth, written as `[u, v, depth]`.
///
/// # Safety
/// `camera`, `point_ego` (3 doubles) and `out_uvd` (3 doubles) must be valid.
#[no_mangle]
pub unsafe extern "C" fn lk_camera_project(
    camera: *const LkCamera,
    point_ego: *const f64,
    out_uvd: *mut f64,
) -> LkStatus {
    if camera.is_null() || point_ego.is_null() || out_uvd.is_null() {
        return LkStatus::NullArgument;
    }
    let p = std::slice::from_raw_parts(point_ego, 3);
    match (*camera).0.project_to_image(&Vector3::new(p[0], p[1], p[2])) {
        Some(proj) => {
            let out = std::slice::from_raw_parts_mut(out_uvd, 3);
            out[0] = proj.u;
            out[1] = proj.v;
            out[2] = proj.depth;
            LkStatus::Ok
        }
        None => LkStatus::BehindCamera,
    }
}

/// Back-project pixel coordinates and a camera-frame depth (meters) into the
/// ego frame, written as `[x, y, z]`.
///
/// # Safety
/// `camera` and `out_ego` (3 doubles) must be valid.
#[no_mangle]
pub unsafe extern "C" fn lk_camera_backproject(
    camera: *const LkCamera,
    u: f64,
    v: f64,
    depth: f64,
    out_ego: *mut f64,
) -> LkStatus {
    if camera.is_null() || out_ego.is_null() {
        return LkStatus::NullArgument;
    }
    match (*camera).0.backproject_pixel(u, v, depth) {
        Ok(p) => {
            let out = std::slice::from_raw_parts_mut(out_ego, 3);
            out[0] = p.x;
            out[1] = p.y;
            out[2] = p.z;
            LkStatus::Ok
        }
        Err(_) => LkStatus::InvalidArgument,
    }
}

/// Theoretical envelope `2 f^2 / (W^2 r_z)` on the deviation of a learned
/// focal length. Returns infinity for zero rotation and NaN for invalid
/// arguments.
#[no_mangle]
pub extern "C" fn lk_focal_bound(f: f64, width: u32, r_z: f64) -> f64 {
    if !(f > 0.0) || width == 0 || !(r_z >= 0.0) {
        return f64::NAN;
    }
    lanekit::intrinsics::focal_bound(f, width as usize, r_z)
}

fn observations_from_raw(
    r_z: *const f64,
    f_hat: *const f64,
    len: usize,
) -> Option<Vec<FrameObservation>> {
    if r_z.is_null() || f_hat.is_null() {
        return None;
    }
    let r_z = unsafe { std::slice::from_raw_parts(r_z, len) };
    let f_hat = unsafe { std::slice::from_raw_parts(f_hat, len) };
    Some(
        r_z.iter()
            .zip(f_hat)
            .map(|(&r_z, &f_hat)| FrameObservation { r_z, f_hat })
            .collect(),
    )
}

/// Hinge objective `sum_i relu(|f - f_hat_i| - 2 f^2/(W^2 r_z_i))` over
/// per-frame observation arrays of length `len`.
///
/// # Safety
/// `r_z` and `f_hat` must point to `len` doubles; `out_objective` must be
/// valid.
#[no_mangle]
pub unsafe extern "C" fn lk_hinge_objective(
    f: f64,
    r_z: *const f64,
    f_hat: *const f64,
    len: usize,
    width: u32,
    out_objective: *mut f64,
) -> LkStatus {
    if out_objective.is_null() {
        return LkStatus::NullArgument;
    }
    let frames = match observations_from_raw(r_z, f_hat, len) {
        Some(f) => f,
        None => return LkStatus::NullArgument,
    };
    if len == 0 || width == 0 || !(f > 0.0) {
        return LkStatus::InvalidArgument;
    }
    if !frames.iter().all(|o| o.f_hat > 0.0 && o.r_z >= 0.0 && o.r_z.is_finite() && o.f_hat.is_finite()) {
        return LkStatus::InvalidArgument;
    }
    let obs = match lanekit::intrinsics::SegmentObservations::new(width as usize, frames) {
        Ok(obs) => obs,
        Err(_) => return LkStatus::InvalidArgument,
    };
    match lanekit::intrinsics::hinge_objective(f, &obs) {
        Ok(v) => {
            *out_objective = v;
            LkStatus::Ok
        }
        Err(_) => LkStatus::InvalidArgument,
    }
}

/// Fit a segment's focal length: drop frames with rotation below `rz_min`,
/// then return the smallest focal in the search interval minimizing the
/// hinge objective. Pass `search_lo <= 0` or `search_hi <= 0` to use the
/// default interval `[0.5 median f_hat, 2 median f_hat]`.
///
/// # Safety
/// `r_z` and `f_hat` must point to `len` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn lk_fit_segment_focal(
    r_z: *const f64,
    f_hat: *const f64,
    len: usize,
    width: u32,
    rz_min: f64,
    search_lo: f64,
    search_hi: f64,
    out: *mut LkFitResult,
) -> LkStatus {
    if out.is_null() {
        return LkStatus::NullArgument;
    }
    let frames = match observations_from_raw(r_z, f_hat, len) {
        Some(f) => f,
        None => return LkStatus::NullArgument,
    };
    if len == 0 || width == 0 {
        return LkStatus::InvalidArgument;
    }
    if !frames
        .iter()
        .all(|o| o.f_hat > 0.0 && o.f_hat.is_finite() && o.r_z >= 0.0 && o.r_z.is_finite())
    {
        return LkStatus::InvalidArgument;
    }
    let search = if search_lo > 0.0 && search_hi > 0.0 {
        (search_lo, search_hi)
    } else {
        match default_search_interval(&frames) {
            Some(s) => s,
            None => return LkStatus::InvalidArgument,
        }
    };
    let result = catch_unwind(AssertUnwindSafe(|| fit_focal(&frames, width as usize, rz_min, search)));
    match result {
        Ok(Ok(fit)) => {
            *out = LkFitResult {
                f_fit: fit.f_fit,
                objective_value: fit.objective_value,
                used_count: fit.used_count,
                filtered_count: fit.filtered_count,
                search_lo: fit.search.0,
                search_hi: fit.search.1,
            };
            LkStatus::Ok
        }
        Ok(Err(FitError::Uninformative)) => LkStatus::UninformativeSegment,
        Ok(Err(_)) => LkStatus::InvalidArgument,
        Err(_) => LkStatus::InternalError,
    }
}

/// Visibility-weighted mean point distance between a ground-truth lane and
/// an anchor, both sampled at the same `len` forward steps. Writes infinity
/// and returns `Unmatchable` when the lane has zero total visibility.
///
/// # Safety
/// All arrays must point to `len` doubles; `out_cost` must be valid.
#[no_mangle]
pub unsafe extern "C" fn lk_matching_cost(
    len: usize,
    gt_x: *const f64,
    gt_z: *const f64,
    gt_visibility: *const f64,
    anchor_x: *const f64,
    anchor_z: *const f64,
    out_cost: *mut f64,
) -> LkStatus {
    if gt_x.is_null()
        || gt_z.is_null()
        || gt_visibility.is_null()
        || anchor_x.is_null()
        || anchor_z.is_null()
        || out_cost.is_null()
    {
        return LkStatus::NullArgument;
    }
    if len == 0 {
        return LkStatus::InvalidArgument;
    }
    let gx = std::slice::from_raw_parts(gt_x, len).to_vec();
    let gz = std::slice::from_raw_parts(gt_z, len).to_vec();
    let gv = std::slice::from_raw_parts(gt_visibility, len).to_vec();
    let ax = std::slice::from_raw_parts(anchor_x, len).to_vec();
    let az = std::slice::from_raw_parts(anchor_z, len).to_vec();
    let gt = match Lane3D::new(0, gx, gz, gv) {
        Ok(gt) => gt,
        Err(_) => return LkStatus::InvalidArgument,
    };
    let anchor = LaneAnchor { x: ax, z: az, origin_x: 0.0, pitch: 0.0, yaw: 0.0 };
    match matching_cost(&gt, &anchor) {
        Some(cost) => {
            *out_cost = cost;
            LkStatus::Ok
        }
        None => {
            *out_cost = f64::INFINITY;
            LkStatus::Unmatchable
        }
    }
}

unsafe fn cstr_to_path<'a>(ptr: *const c_char) -> Result<&'a Path, LkStatus> {
    if ptr.is_null() {
        return Err(LkStatus::NullArgument);
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map(Path::new)
        .map_err(|_| LkStatus::InvalidArgument)
}

/// Evaluate a predictions file (JSON Lines) against a directory of
/// annotation JSONs and fill the report. `config_json` may be null for the
/// protocol defaults, or hold the same JSON the `--config` flag of the CLI
/// accepts.
///
/// # Safety
/// `gt_dir` and `pred_file` must be valid C strings; `out_report` must be a
/// valid pointer; `config_json` may be null.
#[no_mangle]
pub unsafe extern "C" fn lk_evaluate_files(
    gt_dir: *const c_char,
    pred_file: *const c_char,
    config_json: *const c_char,
    out_report: *mut LkEvalReport,
) -> LkStatus {
    if out_report.is_null() {
        return LkStatus::NullArgument;
    }
    let gt_dir = match cstr_to_path(gt_dir) {
        Ok(p) => p,
        Err(s) => return s,
    };
    let pred_file = match cstr_to_path(pred_file) {
        Ok(p) => p,
        Err(s) => return s,
    };
    let cfg: EvalConfigFile = if config_json.is_null() {
        EvalConfigFile::default()
    } else {
        let text = match CStr::from_ptr(config_json).to_str() {
            Ok(t) => t,
            Err(_) => return LkStatus::InvalidArgument,
        };
        match parse_eval_config(text.as_bytes()) {
            Ok(cfg) => cfg,
            Err(_) => return LkStatus::ParseError,
        }
    };
    let result = catch_unwind(AssertUnwindSafe(|| evaluate_files(gt_dir, pred_file, &cfg)));
    match result {
        Ok(Ok(report)) => {
            *out_report = LkEvalReport {
                f1: report.f1,
                precision: report.precision,
                recall: report.recall,
                category_accuracy: report.category_accuracy.unwrap_or(f64::NAN),
                x_near: report.x_near.unwrap_or(f64::NAN),
                x_far: report.x_far.unwrap_or(f64::NAN),
                z_near: report.z_near.unwrap_or(f64::NAN),
                z_far: report.z_far.unwrap_or(f64::NAN),
                true_positives: report.tp,
                false_positives: report.fp,
                false_negatives: report.fn_,
                frames: report.frames,
            };
            LkStatus::Ok
        }
        Ok(Err(EvalFilesError::EmptyOverlap)) => LkStatus::EmptyOverlap,
        Ok(Err(EvalFilesError::Io(_))) => LkStatus::IoError,
        Ok(Err(EvalFilesError::Parse(_))) => LkStatus::ParseError,
        Err(_) => LkStatus::InternalError,
    }
}
