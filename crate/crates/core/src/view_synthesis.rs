//! Novel-view reconstruction through depth and relative pose, plus the loss
//! functions used to supervise self-supervised depth estimation: photometric
//! error (SSIM + L1 blend), edge-aware smoothness and the GPS-to-scale term.
//!
//! Everything here is a plain evaluatable function; there is no autodiff.

use crate::camera::{CameraModel, DepthMap, RigidTransform};
use crate::image::ImageRgb;

/// SSIM stabilization constants, 3x3 window.
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;
/// Default SSIM/L1 blend weight.
pub const DEFAULT_PHOTOMETRIC_ALPHA: f64 = 0.85;

#[derive(Debug, thiserror::Error)]
pub enum SynthesisError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("alpha {0} outside [0, 1]")]
    InvalidAlpha(f64),
    #[error("validity mask has no valid pixels")]
    EmptyMask,
}

/// A reconstructed view plus the per-pixel validity of the warp.
///
/// Pixels whose source sample fell outside the source image (or whose depth
/// was invalid, or which landed behind the camera) are masked out and carry
/// the fill value 0.
#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    pub image: ImageRgb,
    mask: Vec<bool>,
}

impl ReconstructionResult {
    pub fn mask_at(&self, u: usize, v: usize) -> bool {
        self.mask[v * self.image.width() + u]
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// Reconstruct the target view from `source`: lift every target pixel by its
/// depth, move it through `pose` (target-to-source) and bilinearly sample the
/// source image at its projection.
///
/// An exactly-identity pose short-circuits to a copy so the identity warp is
/// bit-exact rather than accurate to interpolation rounding.
pub fn synthesize_view(
    source: &ImageRgb,
    target_depth: &DepthMap,
    pose: &RigidTransform,
    cam: &CameraModel,
) -> Result<ReconstructionResult, SynthesisError> {
    let (w, h) = (source.width(), source.height());
    if target_depth.width() != w || target_depth.height() != h {
        return Err(SynthesisError::DimensionMismatch(format!(
            "source {}x{} vs depth {}x{}",
            w,
            h,
            target_depth.width(),
            target_depth.height()
        )));
    }
    if cam.width != w || cam.height != h {
        return Err(SynthesisError::DimensionMismatch(format!(
            "source {}x{} vs camera {}x{}",
            w, h, cam.width, cam.height
        )));
    }

    let mut image = ImageRgb::filled(w, h, [0.0; 3]);
    let mut mask = vec![false; w * h];

    if pose.is_identity() {
        for v in 0..h {
            for u in 0..w {
                if target_depth.is_valid(u, v) {
                    image.set_pixel(u, v, source.pixel(u, v));
                    mask[v * w + u] = true;
                }
            }
        }
        return Ok(ReconstructionResult { image, mask });
    }

    let max_u = (w - 1) as f64;
    let max_v = (h - 1) as f64;
    for v in 0..h {
        for u in 0..w {
            if !target_depth.is_valid(u, v) {
                continue;
            }
            let d = target_depth.get(u, v);
            let ray = nalgebra::Vector3::new(
                (u as f64 - cam.cx) / cam.fx,
                (v as f64 - cam.cy) / cam.fy,
                1.0,
            );
            let ps = pose.apply(&(ray * d));
            if ps.z <= 0.0 {
                continue;
            }
            let us = cam.fx * ps.x / ps.z + cam.cx;
            let vs = cam.fy * ps.y / ps.z + cam.cy;
            if us < 0.0 || us > max_u || vs < 0.0 || vs > max_v {
                continue;
            }
            image.set_pixel(u, v, source.sample_bilinear(us, vs));
            mask[v * w + u] = true;
        }
    }
    Ok(ReconstructionResult { image, mask })
}

/// Blend of DSSIM and L1, averaged over the valid mask:
/// `alpha * (1 - SSIM)/2 + (1 - alpha) * L1`.
///
/// SSIM uses a 3x3 window whose statistics are taken over the window cells
/// that are inside the image and mask-valid, per channel, then averaged over
/// channels. Returns an error when the mask has no valid pixel.
pub fn photometric_error(
    target: &ImageRgb,
    recon: &ReconstructionResult,
    alpha: f64,
) -> Result<f64, SynthesisError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(SynthesisError::InvalidAlpha(alpha));
    }
    let (w, h) = (target.width(), target.height());
    if recon.image.width() != w || recon.image.height() != h {
        return Err(SynthesisError::DimensionMismatch(format!(
            "target {}x{} vs reconstruction {}x{}",
            w,
            h,
            recon.image.width(),
            recon.image.height()
        )));
    }

    let mut total = 0.0;
    let mut count = 0usize;
    for v in 0..h {
        for u in 0..w {
            if !recon.mask_at(u, v) {
                continue;
            }
            let pt = target.pixel(u, v);
            let pr = recon.image.pixel(u, v);
            let l1 = (0..3).map(|c| (pt[c] - pr[c]).abs()).sum::<f64>() / 3.0;
            let dssim = if alpha > 0.0 {
                dssim_at(target, recon, u, v)
            } else {
                0.0
            };
            total += alpha * dssim + (1.0 - alpha) * l1;
            count += 1;
        }
    }
    if count == 0 {
        return Err(SynthesisError::EmptyMask);
    }
    Ok(total / count as f64)
}

/// `(1 - SSIM)/2` at one pixel, window statistics over valid in-image cells.
fn dssim_at(target: &ImageRgb, recon: &ReconstructionResult, u: usize, v: usize) -> f64 {
    let (w, h) = (target.width(), target.height());
    let mut dssim_sum = 0.0;
    for c in 0..3 {
        let mut n = 0.0;
        let (mut st, mut sr, mut stt, mut srr, mut str_) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for dv in -1i64..=1 {
            for du in -1i64..=1 {
                let uu = u as i64 + du;
                let vv = v as i64 + dv;
                if uu < 0 || vv < 0 || uu >= w as i64 || vv >= h as i64 {
                    continue;
                }
                let (uu, vv) = (uu as usize, vv as usize);
                if !recon.mask_at(uu, vv) {
                    continue;
                }
                let t = target.pixel(uu, vv)[c];
                let r = recon.image.pixel(uu, vv)[c];
                n += 1.0;
                st += t;
                sr += r;
                stt += t * t;
                srr += r * r;
                str_ += t * r;
            }
        }
        // the center pixel is always valid, so n >= 1
        let mu_t = st / n;
        let mu_r = sr / n;
        let var_t = (stt / n - mu_t * mu_t).max(0.0);
        let var_r = (srr / n - mu_r * mu_r).max(0.0);
        let cov = str_ / n - mu_t * mu_r;
        let ssim = ((2.0 * mu_t * mu_r + SSIM_C1) * (2.0 * cov + SSIM_C2))
            / ((mu_t * mu_t + mu_r * mu_r + SSIM_C1) * (var_t + var_r + SSIM_C2));
        dssim_sum += ((1.0 - ssim) / 2.0).clamp(0.0, 1.0);
    }
    dssim_sum / 3.0
}

/// Edge-aware first-order smoothness of the mean-normalized disparity
/// (inverse depth). Image gradients damp the penalty through `exp(-|dI|)`.
/// Gradients are taken over pixel pairs whose depths are both valid.
pub fn smoothness_loss(depth: &DepthMap, image: &ImageRgb) -> Result<f64, SynthesisError> {
    let (w, h) = (depth.width(), depth.height());
    if image.width() != w || image.height() != h {
        return Err(SynthesisError::DimensionMismatch(format!(
            "depth {}x{} vs image {}x{}",
            w,
            h,
            image.width(),
            image.height()
        )));
    }

    let mut disp_sum = 0.0;
    let mut disp_count = 0usize;
    for v in 0..h {
        for u in 0..w {
            if depth.is_valid(u, v) {
                disp_sum += 1.0 / depth.get(u, v);
                disp_count += 1;
            }
        }
    }
    if disp_count == 0 {
        return Ok(0.0);
    }
    let mean_disp = disp_sum / disp_count as f64;

    let norm_disp = |u: usize, v: usize| 1.0 / depth.get(u, v) / mean_disp;
    let channel_grad = |a: [f64; 3], b: [f64; 3]| -> f64 {
        (0..3).map(|c| (a[c] - b[c]).abs()).sum::<f64>() / 3.0
    };

    let mut sum_x = 0.0;
    let mut count_x = 0usize;
    let mut sum_y = 0.0;
    let mut count_y = 0usize;
    for v in 0..h {
        for u in 0..w {
            if !depth.is_valid(u, v) {
                continue;
            }
            if u + 1 < w && depth.is_valid(u + 1, v) {
                let g = (norm_disp(u + 1, v) - norm_disp(u, v)).abs();
                let ig = channel_grad(image.pixel(u + 1, v), image.pixel(u, v));
                sum_x += g * (-ig).exp();
                count_x += 1;
            }
            if v + 1 < h && depth.is_valid(u, v + 1) {
                let g = (norm_disp(u, v + 1) - norm_disp(u, v)).abs();
                let ig = channel_grad(image.pixel(u, v + 1), image.pixel(u, v));
                sum_y += g * (-ig).exp();
                count_y += 1;
            }
        }
    }
    let mx = if count_x > 0 { sum_x / count_x as f64 } else { 0.0 };
    let my = if count_y > 0 { sum_y / count_y as f64 } else { 0.0 };
    Ok(mx + my)
}

/// Absolute difference between the pose's translation norm and the measured
/// GPS displacement: `| ||t|| - gps |`.
pub fn gps_scale_loss(pose: &RigidTransform, gps_displacement: f64) -> f64 {
    assert!(gps_displacement >= 0.0, "gps displacement must be non-negative");
    (pose.translation.norm() - gps_displacement).abs()
}
