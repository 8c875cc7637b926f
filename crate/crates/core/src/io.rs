//! File formats: frame annotations (JSON), predictions (JSONL), intrinsics
//! observations (JSONL), fit results, evaluation reports, anchor dumps and
//! the tool configuration files.
//!
//! Annotation and prediction parsing is strict with path-qualified errors;
//! unknown fields are ignored. Numbers serialize with shortest round-trip
//! formatting so emit/parse cycles are lossless.

use crate::anchor::{Lane3D, LaneAnchor, Proposal, RoiConfig, YSteps};
use crate::camera::{make_extrinsics, CameraModel, RigidTransform};
use crate::eval::{aggregate_report, evaluate_frame, EvalConfig, EvalReport};
use crate::intrinsics::FitResult;
use crate::synth::{CameraSpec, LaneSpec, SceneSpec, TrajectoryPose};
use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;
use std::path::Path;

/// Default number of lane categories (ids 1..=L; 0 is background).
pub const DEFAULT_NUM_CLASSES: usize = 14;

#[derive(Debug, thiserror::Error)]
pub enum ParseError {
    #[error("invalid JSON: {0}")]
    Json(String),
    #[error("{path}: missing required field")]
    Missing { path: String },
    #[error("{path} ragged")]
    Ragged { path: String },
    #[error("{path}: non-finite number")]
    NonFinite { path: String },
    #[error("{path}: {detail}")]
    Invalid { path: String, detail: String },
}

fn missing(path: impl Into<String>) -> ParseError {
    ParseError::Missing { path: path.into() }
}

fn invalid(path: impl Into<String>, detail: impl Into<String>) -> ParseError {
    ParseError::Invalid { path: path.into(), detail: detail.into() }
}

fn as_object<'a>(v: &'a Value, path: &str) -> Result<&'a serde_json::Map<String, Value>, ParseError> {
    v.as_object().ok_or_else(|| invalid(path, "expected an object"))
}

fn get<'a>(obj: &'a serde_json::Map<String, Value>, path: &str, key: &str) -> Result<&'a Value, ParseError> {
    obj.get(key).ok_or_else(|| missing(join(path, key)))
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn parse_f64(v: &Value, path: &str) -> Result<f64, ParseError> {
    let x = v.as_f64().ok_or_else(|| invalid(path, "expected a number"))?;
    if !x.is_finite() {
        return Err(ParseError::NonFinite { path: path.to_string() });
    }
    Ok(x)
}

fn parse_f64_array(v: &Value, path: &str) -> Result<Vec<f64>, ParseError> {
    let arr = v.as_array().ok_or_else(|| invalid(path, "expected an array"))?;
    arr.iter()
        .enumerate()
        .map(|(i, x)| parse_f64(x, &format!("{path}[{i}]")))
        .collect()
}

fn parse_string(v: &Value, path: &str) -> Result<String, ParseError> {
    Ok(v.as_str().ok_or_else(|| invalid(path, "expected a string"))?.to_string())
}

fn parse_u32(v: &Value, path: &str) -> Result<u32, ParseError> {
    v.as_u64()
        .and_then(|x| u32::try_from(x).ok())
        .ok_or_else(|| invalid(path, "expected a non-negative integer"))
}

// ---------------------------------------------------------------------------
// Frame annotations
// ---------------------------------------------------------------------------

/// One lane in an annotation file: ego-frame polyline plus visibility.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnotationLane {
    pub category: u32,
    /// Row-major 3xN: x, y and z coordinate arrays.
    pub xyz: [Vec<f64>; 3],
    pub visibility: Vec<f64>,
}

/// Per-frame ground-truth annotation with camera parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameAnnotation {
    pub frame_id: String,
    /// Row-major 3x3 intrinsic matrix.
    pub intrinsic: [[f64; 3]; 3],
    /// Row-major 4x4 ego-to-camera transform.
    pub extrinsic: [[f64; 4]; 4],
    pub lane_lines: Vec<AnnotationLane>,
}

fn parse_matrix<const R: usize, const C: usize>(v: &Value, path: &str) -> Result<[[f64; C]; R], ParseError> {
    let rows = v.as_array().ok_or_else(|| invalid(path, "expected an array"))?;
    if rows.len() != R {
        return Err(invalid(path, format!("expected {R} rows, got {}", rows.len())));
    }
    let mut out = [[0.0; C]; R];
    for (i, row) in rows.iter().enumerate() {
        let vals = parse_f64_array(row, &format!("{path}[{i}]"))?;
        if vals.len() != C {
            return Err(invalid(format!("{path}[{i}]"), format!("expected {C} columns, got {}", vals.len())));
        }
        out[i].copy_from_slice(&vals);
    }
    Ok(out)
}

fn parse_lane_geometry(
    obj: &serde_json::Map<String, Value>,
    path: &str,
) -> Result<([Vec<f64>; 3], Vec<f64>), ParseError> {
    let xyz_path = join(path, "xyz");
    let xyz_val = get(obj, path, "xyz")?;
    let rows = xyz_val.as_array().ok_or_else(|| invalid(&xyz_path, "expected an array"))?;
    if rows.len() != 3 {
        return Err(invalid(&xyz_path, format!("expected 3 coordinate arrays, got {}", rows.len())));
    }
    let x = parse_f64_array(&rows[0], &format!("{xyz_path}[0]"))?;
    let y = parse_f64_array(&rows[1], &format!("{xyz_path}[1]"))?;
    let z = parse_f64_array(&rows[2], &format!("{xyz_path}[2]"))?;
    if x.len() != y.len() || x.len() != z.len() {
        return Err(ParseError::Ragged { path: xyz_path });
    }
    if x.is_empty() {
        return Err(invalid(&xyz_path, "empty lane"));
    }
    let vis_path = join(path, "visibility");
    let visibility = parse_f64_array(get(obj, path, "visibility")?, &vis_path)?;
    if visibility.len() != x.len() {
        return Err(ParseError::Ragged { path: vis_path });
    }
    if !visibility.iter().all(|v| (0.0..=1.0).contains(v)) {
        return Err(invalid(&vis_path, "visibility outside [0, 1]"));
    }
    Ok(([x, y, z], visibility))
}

/// Parse a frame annotation document. Unknown fields are ignored; missing
/// fields, ragged arrays and non-finite numbers are errors naming the path.
pub fn parse_annotation(bytes: &[u8]) -> Result<FrameAnnotation, ParseError> {
    let value: Value = serde_json::from_slice(bytes).map_err(|e| ParseError::Json(e.to_string()))?;
    let obj = as_object(&value, "")?;
    let frame_id = parse_string(get(obj, "", "frame_id")?, "frame_id")?;
    let intrinsic = parse_matrix::<3, 3>(get(obj, "", "intrinsic")?, "intrinsic")?;
    let extrinsic = parse_matrix::<4, 4>(get(obj, "", "extrinsic")?, "extrinsic")?;
    let lanes_val = get(obj, "", "lane_lines")?;
    let lanes_arr = lanes_val.as_array().ok_or_else(|| invalid("lane_lines", "expected an array"))?;
    let mut lane_lines = Vec::with_capacity(lanes_arr.len());
    for (i, lane) in lanes_arr.iter().enumerate() {
        let path = format!("lane_lines[{i}]");
        let lane_obj = as_object(lane, &path)?;
        let category = parse_u32(get(lane_obj, &path, "category")?, &join(&path, "category"))?;
        let (xyz, visibility) = parse_lane_geometry(lane_obj, &path)?;
        lane_lines.push(AnnotationLane { category, xyz, visibility });
    }
    Ok(FrameAnnotation { frame_id, intrinsic, extrinsic, lane_lines })
}

/// Serialize an annotation (stable field order, shortest float round trip).
pub fn write_annotation(annotation: &FrameAnnotation) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(annotation).expect("annotation serializes");
    out.push(b'\n');
    out
}

/// Linear-in-y resampling of a polyline onto target y steps. Visibility is
/// carried from the nearest source point; steps outside the source y range
/// are invisible with clamped geometry.
pub(crate) fn resample_polyline(
    x: &[f64],
    y: &[f64],
    z: &[f64],
    visibility: &[f64],
    ysteps: &YSteps,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&a, &b| y[a].total_cmp(&y[b]));
    let ys: Vec<f64> = order.iter().map(|&i| y[i]).collect();
    let xs: Vec<f64> = order.iter().map(|&i| x[i]).collect();
    let zs: Vec<f64> = order.iter().map(|&i| z[i]).collect();
    let vs: Vec<f64> = order.iter().map(|&i| visibility[i]).collect();

    let n = ysteps.len();
    let mut out_x = Vec::with_capacity(n);
    let mut out_z = Vec::with_capacity(n);
    let mut out_v = Vec::with_capacity(n);
    for &target in ysteps.values() {
        if target < ys[0] || target > ys[ys.len() - 1] {
            let k = if target < ys[0] { 0 } else { ys.len() - 1 };
            out_x.push(xs[k]);
            out_z.push(zs[k]);
            out_v.push(0.0);
            continue;
        }
        let hi = ys.partition_point(|&v| v < target).min(ys.len() - 1);
        let lo = hi.saturating_sub(1);
        if ys[hi] == target || lo == hi || ys[hi] == ys[lo] {
            let k = if ys[hi] == target { hi } else { lo };
            out_x.push(xs[k]);
            out_z.push(zs[k]);
            out_v.push(vs[k]);
        } else {
            let t = (target - ys[lo]) / (ys[hi] - ys[lo]);
            out_x.push(xs[lo] + t * (xs[hi] - xs[lo]));
            out_z.push(zs[lo] + t * (zs[hi] - zs[lo]));
            out_v.push(if t < 0.5 { vs[lo] } else { vs[hi] });
        }
    }
    (out_x, out_z, out_v)
}

impl FrameAnnotation {
    /// Ground-truth lanes resampled onto the evaluation y steps.
    pub fn lanes_at(&self, ysteps: &YSteps) -> Vec<Lane3D> {
        self.lane_lines
            .iter()
            .map(|lane| {
                let (x, z, v) =
                    resample_polyline(&lane.xyz[0], &lane.xyz[1], &lane.xyz[2], &lane.visibility, ysteps);
                Lane3D::new(lane.category, x, z, v).expect("resampled lane is valid")
            })
            .collect()
    }

    /// Build an annotation from rendered ground truth.
    pub fn from_lanes(frame_id: &str, cam: &CameraModel, lanes: &[Lane3D], ysteps: &YSteps) -> Self {
        let k = cam.intrinsic_matrix();
        let mut intrinsic = [[0.0; 3]; 3];
        for r in 0..3 {
            for c in 0..3 {
                intrinsic[r][c] = k[(r, c)];
            }
        }
        let mut extrinsic = [[0.0; 4]; 4];
        for r in 0..3 {
            for c in 0..3 {
                extrinsic[r][c] = cam.t_g2c.rotation[(r, c)];
            }
            extrinsic[r][3] = cam.t_g2c.translation[r];
        }
        extrinsic[3][3] = 1.0;
        let lane_lines = lanes
            .iter()
            .map(|lane| AnnotationLane {
                category: lane.category,
                xyz: [lane.x.clone(), ysteps.values().to_vec(), lane.z.clone()],
                visibility: lane.visibility.clone(),
            })
            .collect();
        Self { frame_id: frame_id.to_string(), intrinsic, extrinsic, lane_lines }
    }
}

// ---------------------------------------------------------------------------
// Predictions (JSON Lines)
// ---------------------------------------------------------------------------

/// Predictions of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionFrame {
    pub frame_id: String,
    pub lanes: Vec<PredictionLane>,
}

/// One predicted lane before resampling.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionLane {
    pub class_probs: Vec<f64>,
    pub xyz: [Vec<f64>; 3],
    pub visibility: Vec<f64>,
}

impl PredictionLane {
    /// Resample onto the evaluation y steps.
    pub fn to_proposal(&self, ysteps: &YSteps) -> Proposal {
        let (x, z, v) =
            resample_polyline(&self.xyz[0], &self.xyz[1], &self.xyz[2], &self.visibility, ysteps);
        Proposal::new(self.class_probs.clone(), x, z, v).expect("resampled proposal is valid")
    }
}

/// Parse a predictions JSONL document. Each line holds one frame. Lanes may
/// carry either a full `category_probs` simplex or `category` + `score`
/// (expanded to score on the category, remainder on background).
pub fn parse_predictions(bytes: &[u8], num_classes: usize) -> Result<Vec<PredictionFrame>, ParseError> {
    let text = std::str::from_utf8(bytes).map_err(|e| ParseError::Json(e.to_string()))?;
    let mut frames = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let prefix = format!("line {}", lineno + 1);
        let value: Value = serde_json::from_str(line)
            .map_err(|e| ParseError::Json(format!("{prefix}: {e}")))?;
        let obj = as_object(&value, &prefix)?;
        let frame_id = parse_string(get(obj, &prefix, "frame_id")?, &join(&prefix, "frame_id"))?;
        let lanes_val = get(obj, &prefix, "lanes")?;
        let lanes_arr = lanes_val
            .as_array()
            .ok_or_else(|| invalid(join(&prefix, "lanes"), "expected an array"))?;
        let mut lanes = Vec::with_capacity(lanes_arr.len());
        for (i, lane) in lanes_arr.iter().enumerate() {
            let path = format!("{prefix}: lanes[{i}]");
            let lane_obj = as_object(lane, &path)?;
            let (xyz, visibility) = parse_lane_geometry(lane_obj, &path)?;
            let class_probs = if let Some(probs_val) = lane_obj.get("category_probs") {
                let probs = parse_f64_array(probs_val, &join(&path, "category_probs"))?;
                let sum: f64 = probs.iter().sum();
                if (sum - 1.0).abs() > 1e-3 || probs.iter().any(|p| *p < 0.0) {
                    return Err(invalid(
                        join(&path, "category_probs"),
                        format!("not a probability simplex (sum {sum})"),
                    ));
                }
                // renormalize so downstream simplex invariants hold exactly
                probs.iter().map(|p| p / sum).collect()
            } else {
                let category = parse_u32(get(lane_obj, &path, "category")?, &join(&path, "category"))?;
                let score = parse_f64(get(lane_obj, &path, "score")?, &join(&path, "score"))?;
                if !(0.0..=1.0).contains(&score) {
                    return Err(invalid(join(&path, "score"), "score outside [0, 1]"));
                }
                if category as usize > num_classes {
                    return Err(invalid(
                        join(&path, "category"),
                        format!("category {category} exceeds {num_classes} classes"),
                    ));
                }
                let mut probs = vec![0.0; num_classes + 1];
                probs[category as usize] = score;
                probs[0] += 1.0 - score;
                probs
            };
            lanes.push(PredictionLane { class_probs, xyz, visibility });
        }
        frames.push(PredictionFrame { frame_id, lanes });
    }
    Ok(frames)
}

/// Emit lanes as a predictions JSONL line (category + score encoding).
pub fn prediction_line(frame_id: &str, lanes: &[Lane3D], ysteps: &YSteps, score: f64) -> String {
    let lanes_json: Vec<Value> = lanes
        .iter()
        .map(|lane| {
            serde_json::json!({
                "category": lane.category,
                "score": score,
                "xyz": [lane.x, ysteps.values(), lane.z],
                "visibility": lane.visibility,
            })
        })
        .collect();
    serde_json::json!({ "frame_id": frame_id, "lanes": lanes_json }).to_string()
}

// ---------------------------------------------------------------------------
// Intrinsics observations and fit results
// ---------------------------------------------------------------------------

/// One observation record: per-frame learned intrinsics and rotations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationRecord {
    pub segment_id: String,
    pub r_z: f64,
    pub f_x: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_x: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_y: Option<f64>,
}

/// Parse observation JSONL records.
pub fn parse_observations(bytes: &[u8]) -> Result<Vec<ObservationRecord>, ParseError> {
    let text = std::str::from_utf8(bytes).map_err(|e| ParseError::Json(e.to_string()))?;
    let mut records = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let prefix = format!("line {}", lineno + 1);
        let record: ObservationRecord = serde_json::from_str(line)
            .map_err(|e| ParseError::Json(format!("{prefix}: {e}")))?;
        if !record.r_z.is_finite() || !record.f_x.is_finite() || record.f_x <= 0.0 || record.r_z < 0.0 {
            return Err(invalid(join(&prefix, "r_z/f_x"), "need r_z >= 0 and f_x > 0"));
        }
        records.push(record);
    }
    Ok(records)
}

/// Observation JSONL writer.
pub fn write_observations(records: &[ObservationRecord]) -> Vec<u8> {
    let mut out = Vec::new();
    for r in records {
        out.extend_from_slice(serde_json::to_string(r).expect("record serializes").as_bytes());
        out.push(b'\n');
    }
    out
}

/// Serializable view of a fit result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResultOut {
    pub f_fit: f64,
    pub objective_value: f64,
    pub used_count: usize,
    pub filtered_count: usize,
    pub search: [f64; 2],
    /// Vertical-axis fit, present when (r_x, f_y) observations were supplied.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_fit_y: Option<f64>,
}

impl From<&FitResult> for FitResultOut {
    fn from(fit: &FitResult) -> Self {
        Self {
            f_fit: fit.f_fit,
            objective_value: fit.objective_value,
            used_count: fit.used_count,
            filtered_count: fit.filtered_count,
            search: [fit.search.0, fit.search.1],
            f_fit_y: None,
        }
    }
}

/// Fit output: JSON map from segment id to fit fields (sorted keys).
pub fn write_fit_results(results: &BTreeMap<String, FitResultOut>) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(results).expect("fit results serialize");
    out.push(b'\n');
    out
}

// ---------------------------------------------------------------------------
// Anchor dumps
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnchorDumpEntry {
    origin_x: f64,
    pitch_deg: f64,
    yaw_deg: f64,
    x: Vec<f64>,
    z: Vec<f64>,
}

/// Anchor dump: JSON list of origin, casting angles (degrees) and geometry.
pub fn write_anchor_dump(anchors: &[LaneAnchor]) -> Vec<u8> {
    let entries: Vec<AnchorDumpEntry> = anchors
        .iter()
        .map(|a| AnchorDumpEntry {
            origin_x: a.origin_x,
            pitch_deg: a.pitch.to_degrees(),
            yaw_deg: a.yaw.to_degrees(),
            x: a.x.clone(),
            z: a.z.clone(),
        })
        .collect();
    let mut out = serde_json::to_vec_pretty(&entries).expect("anchor dump serializes");
    out.push(b'\n');
    out
}

/// Parse an anchor dump back into anchors (angles converted to radians).
pub fn parse_anchor_dump(bytes: &[u8]) -> Result<Vec<LaneAnchor>, ParseError> {
    let entries: Vec<AnchorDumpEntry> =
        serde_json::from_slice(bytes).map_err(|e| ParseError::Json(e.to_string()))?;
    entries
        .into_iter()
        .enumerate()
        .map(|(i, e)| {
            if e.x.len() != e.z.len() {
                return Err(ParseError::Ragged { path: format!("[{i}].x") });
            }
            Ok(LaneAnchor {
                x: e.x,
                z: e.z,
                origin_x: e.origin_x,
                pitch: e.pitch_deg.to_radians(),
                yaw: e.yaw_deg.to_radians(),
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Configuration files
// ---------------------------------------------------------------------------

/// Uniform y-step specification used by the config files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct YStepsSpec {
    pub count: usize,
    pub y_min: f64,
    pub y_max: f64,
}

impl Default for YStepsSpec {
    fn default() -> Self {
        Self { count: 20, y_min: 0.1, y_max: 80.0 }
    }
}

impl YStepsSpec {
    pub fn to_ysteps(&self) -> Result<YSteps, ParseError> {
        YSteps::uniform(self.count, self.y_min, self.y_max)
            .map_err(|e| invalid("ysteps", e.to_string()))
    }
}

fn from_json_with_path<T: serde::de::DeserializeOwned>(bytes: &[u8], what: &str) -> Result<T, ParseError> {
    let mut de = serde_json::Deserializer::from_slice(bytes);
    serde_path_to_error::deserialize(&mut de)
        .map_err(|e| invalid(format!("{what}:{}", e.path()), e.inner().to_string()))
}

/// Evaluation configuration file: protocol parameters plus y steps.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfigFile {
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub ysteps: YStepsSpec,
}

pub fn parse_eval_config(bytes: &[u8]) -> Result<EvalConfigFile, ParseError> {
    from_json_with_path(bytes, "eval config")
}

/// Anchor generation configuration file. Angles are given in degrees and
/// converted to radians at parse time. Defaults: 45 starts, pitch
/// {0, ±1, ±2}°, yaw {0, ±1, ±3, ±5, ±7, ±10, ±15, ±20}°.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnchorConfigFile {
    #[serde(default = "default_lateral_starts")]
    pub lateral_starts: usize,
    #[serde(default = "default_pitches_deg")]
    pub pitches_deg: Vec<f64>,
    #[serde(default = "default_yaws_deg")]
    pub yaws_deg: Vec<f64>,
    #[serde(default)]
    pub roi: RoiConfig,
    #[serde(default)]
    pub ysteps: YStepsSpec,
}

fn default_lateral_starts() -> usize {
    45
}

fn default_pitches_deg() -> Vec<f64> {
    vec![0.0, 1.0, -1.0, 2.0, -2.0]
}

fn default_yaws_deg() -> Vec<f64> {
    let mut yaws = vec![0.0];
    for m in [1.0, 3.0, 5.0, 7.0, 10.0, 15.0, 20.0] {
        yaws.push(m);
        yaws.push(-m);
    }
    yaws
}

impl Default for AnchorConfigFile {
    fn default() -> Self {
        Self {
            lateral_starts: default_lateral_starts(),
            pitches_deg: default_pitches_deg(),
            yaws_deg: default_yaws_deg(),
            roi: RoiConfig::default(),
            ysteps: YStepsSpec::default(),
        }
    }
}

pub fn parse_anchor_config(bytes: &[u8]) -> Result<AnchorConfigFile, ParseError> {
    from_json_with_path(bytes, "anchor config")
}

/// Scene specification file for the synthetic world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpecFile {
    #[serde(default)]
    pub seed: u64,
    pub lanes: Vec<LaneSpecFile>,
    #[serde(default)]
    pub terrain: [f64; 3],
    pub camera: CameraSpecFile,
    pub trajectory: Vec<TrajectoryPoseFile>,
    #[serde(default)]
    pub roi: RoiConfig,
    #[serde(default)]
    pub ysteps: YStepsSpec,
    #[serde(default = "default_lane_half_width")]
    pub lane_half_width: f64,
    #[serde(default = "default_d_min")]
    pub d_min: f64,
    #[serde(default = "default_d_max")]
    pub d_max: f64,
}

fn default_lane_half_width() -> f64 {
    0.25
}

fn default_d_min() -> f64 {
    0.1
}

fn default_d_max() -> f64 {
    80.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaneSpecFile {
    pub category: u32,
    pub offset_x: f64,
    #[serde(default)]
    pub curvature: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraSpecFile {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    #[serde(default = "default_camera_height")]
    pub camera_height: f64,
    #[serde(default)]
    pub pitch: f64,
}

fn default_camera_height() -> f64 {
    1.5
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryPoseFile {
    pub y: f64,
    #[serde(default)]
    pub yaw: f64,
}

impl SceneSpecFile {
    pub fn to_spec(&self) -> Result<SceneSpec, ParseError> {
        let spec = SceneSpec {
            seed: self.seed,
            lanes: self
                .lanes
                .iter()
                .map(|l| LaneSpec {
                    category: l.category,
                    offset_x: l.offset_x,
                    curvature: l.curvature.clone(),
                })
                .collect(),
            terrain: self.terrain,
            camera: CameraSpec {
                fx: self.camera.fx,
                fy: self.camera.fy,
                cx: self.camera.cx,
                cy: self.camera.cy,
                width: self.camera.width,
                height: self.camera.height,
                camera_height: self.camera.camera_height,
                pitch: self.camera.pitch,
            },
            trajectory: self
                .trajectory
                .iter()
                .map(|p| TrajectoryPose { y: p.y, yaw: p.yaw })
                .collect(),
            roi: self.roi,
            ysteps: self.ysteps.to_ysteps()?,
            lane_half_width: self.lane_half_width,
            d_min: self.d_min,
            d_max: self.d_max,
        };
        spec.validate().map_err(|e| invalid("scene spec", e.to_string()))?;
        Ok(spec)
    }
}

pub fn parse_scene_spec(bytes: &[u8]) -> Result<SceneSpec, ParseError> {
    from_json_with_path::<SceneSpecFile>(bytes, "scene spec")?.to_spec()
}

/// Rigid pose file: rotation matrix plus translation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseFile {
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
}

impl PoseFile {
    pub fn to_transform(&self) -> Result<RigidTransform, ParseError> {
        let r = Matrix3::from_fn(|i, j| self.rotation[i][j]);
        let t = Vector3::from_column_slice(&self.translation);
        RigidTransform::new(r, t).map_err(|e| invalid("pose", e.to_string()))
    }

    pub fn from_transform(t: &RigidTransform) -> Self {
        let mut rotation = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                rotation[i][j] = t.rotation[(i, j)];
            }
        }
        Self { rotation, translation: [t.translation.x, t.translation.y, t.translation.z] }
    }
}

pub fn parse_pose(bytes: &[u8]) -> Result<RigidTransform, ParseError> {
    from_json_with_path::<PoseFile>(bytes, "pose")?.to_transform()
}

/// Camera intrinsics file used by the warp tool. Extrinsics default to a
/// level camera at 1.5 m; they do not affect warping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntrinsicsFile {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    #[serde(default = "default_camera_height")]
    pub camera_height: f64,
    #[serde(default)]
    pub pitch: f64,
    #[serde(default = "default_d_min")]
    pub d_min: f64,
    #[serde(default = "default_d_max")]
    pub d_max: f64,
}

impl IntrinsicsFile {
    pub fn to_camera(&self) -> Result<CameraModel, ParseError> {
        CameraModel::new(
            self.fx,
            self.fy,
            self.cx,
            self.cy,
            self.width,
            self.height,
            make_extrinsics(self.camera_height, self.pitch),
        )
        .map_err(|e| invalid("intrinsics", e.to_string()))
    }
}

pub fn parse_intrinsics(bytes: &[u8]) -> Result<IntrinsicsFile, ParseError> {
    from_json_with_path(bytes, "intrinsics")
}

// ---------------------------------------------------------------------------
// File-level evaluation driver
// ---------------------------------------------------------------------------

#[derive(Debug, thiserror::Error)]
pub enum EvalFilesError {
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Parse(String),
    #[error("no prediction frame id matches any ground-truth frame id")]
    EmptyOverlap,
}

/// Evaluate a predictions file against a directory of annotation JSONs.
/// Frames are keyed by `frame_id`; ground-truth frames without predictions
/// count their lanes as false negatives, predictions on unknown frames are
/// ignored. Per-frame work runs in parallel; the aggregate is folded in
/// frame-id order so the report is identical for any worker count.
pub fn evaluate_files(
    gt_dir: &Path,
    pred_path: &Path,
    cfg_file: &EvalConfigFile,
) -> Result<EvalReport, EvalFilesError> {
    let ysteps = cfg_file.ysteps.to_ysteps().map_err(|e| EvalFilesError::Parse(e.to_string()))?;
    let cfg = cfg_file.eval;

    let mut entries: Vec<std::path::PathBuf> = std::fs::read_dir(gt_dir)
        .map_err(|e| EvalFilesError::Io(format!("{}: {e}", gt_dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
        .collect();
    entries.sort();
    let mut annotations = Vec::with_capacity(entries.len());
    for path in &entries {
        let bytes = std::fs::read(path).map_err(|e| EvalFilesError::Io(format!("{}: {e}", path.display())))?;
        let ann = parse_annotation(&bytes)
            .map_err(|e| EvalFilesError::Parse(format!("{}: {e}", path.display())))?;
        annotations.push(ann);
    }
    annotations.sort_by(|a, b| a.frame_id.cmp(&b.frame_id));

    let pred_bytes = std::fs::read(pred_path)
        .map_err(|e| EvalFilesError::Io(format!("{}: {e}", pred_path.display())))?;
    let pred_frames = parse_predictions(&pred_bytes, DEFAULT_NUM_CLASSES)
        .map_err(|e| EvalFilesError::Parse(format!("{}: {e}", pred_path.display())))?;
    let mut predictions: BTreeMap<String, Vec<PredictionLane>> = BTreeMap::new();
    for frame in pred_frames {
        predictions.entry(frame.frame_id).or_default().extend(frame.lanes);
    }

    if !annotations.iter().any(|a| predictions.contains_key(&a.frame_id)) {
        return Err(EvalFilesError::EmptyOverlap);
    }

    let stats: Vec<_> = annotations
        .par_iter()
        .map(|ann| {
            let gts = ann.lanes_at(&ysteps);
            let preds: Vec<Proposal> = predictions
                .get(&ann.frame_id)
                .map(|lanes| lanes.iter().map(|l| l.to_proposal(&ysteps)).collect())
                .unwrap_or_default();
            evaluate_frame(&gts, &preds, &ysteps, &cfg)
        })
        .collect();
    Ok(aggregate_report(stats, annotations.len()))
}
