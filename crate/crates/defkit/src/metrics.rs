//! Endpoint-error and smoothness metrics with near-fault / non-fault and
//! displacement-range reporting.
//!
//! Smoothness is the mean squared gradient magnitude of the field under
//! forward differences, `(dx u)^2 + (dy u)^2 + (dx v)^2 + (dy v)^2`, averaged
//! over masked pixels whose forward neighbors stay inside the raster. The
//! squared components are summed before averaging. Reported near the fault
//! it measures preserved sharpness (higher is better there); away from the
//! fault it measures residual noise (lower is better).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::types::{classify_range, DisplacementField, RangeBucket, RegionMask};

/// One evaluation of an estimate against ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub estimator_name: String,
    pub regularizer_name: String,
    /// Mean endpoint error over the full image, pixels.
    pub epe: f64,
    pub smoothness_near_fault: f64,
    pub smoothness_non_fault: f64,
    /// Displacement-range bucket of the ground truth.
    pub bucket: RangeBucket,
    pub near_fault_pixels: usize,
    pub non_fault_pixels: usize,
}

/// Mean endpoint error `sqrt((u_e - u_g)^2 + (v_e - v_g)^2)` over the masked
/// pixels, or the full image when no mask is given.
pub fn epe<T: Real>(
    est: &DisplacementField<T>,
    gt: &DisplacementField<T>,
    mask: Option<&RegionMask>,
) -> Result<T> {
    est.same_dims(gt)?;
    let (h, w) = (est.height(), est.width());
    if let Some(m) = mask {
        if m.height() != h || m.width() != w {
            return Err(Error::DimensionMismatch {
                expected_height: h,
                expected_width: w,
                height: m.height(),
                width: m.width(),
            });
        }
    }
    let mut sum = T::zero();
    let mut count = 0usize;
    for r in 0..h {
        for c in 0..w {
            if let Some(m) = mask {
                if !m.at(r, c) {
                    continue;
                }
            }
            let (ue, ve) = est.at(r, c);
            let (ug, vg) = gt.at(r, c);
            let du = ue - ug;
            let dv = ve - vg;
            sum = sum + (du * du + dv * dv).sqrt();
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(sum / T::of_usize(count))
}

/// Mean squared gradient magnitude over masked interior pixels (both forward
/// neighbors in bounds).
pub fn smoothness<T: Real>(df: &DisplacementField<T>, mask: &RegionMask) -> Result<T> {
    if mask.height() != df.height() || mask.width() != df.width() {
        return Err(Error::DimensionMismatch {
            expected_height: df.height(),
            expected_width: df.width(),
            height: mask.height(),
            width: mask.width(),
        });
    }
    let (h, w) = (df.height(), df.width());
    let mut sum = T::zero();
    let mut count = 0usize;
    for r in 0..h.saturating_sub(1) {
        for c in 0..w.saturating_sub(1) {
            if !mask.at(r, c) {
                continue;
            }
            let (u, v) = df.at(r, c);
            let (u_right, v_right) = df.at(r, c + 1);
            let (u_down, v_down) = df.at(r + 1, c);
            let dx_u = u_right - u;
            let dy_u = u_down - u;
            let dx_v = v_right - v;
            let dy_v = v_down - v;
            sum = sum + dx_u * dx_u + dy_u * dy_u + dx_v * dx_v + dy_v * dy_v;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(sum / T::of_usize(count))
}

/// Assemble the full report: full-image EPE, smoothness of the estimate on
/// the near-fault mask and its complement, and the range bucket of the
/// ground truth.
pub fn evaluate_run<T: Real>(
    est: &DisplacementField<T>,
    gt: &DisplacementField<T>,
    near_fault: &RegionMask,
    estimator_name: &str,
    regularizer_name: &str,
) -> Result<MetricsReport> {
    let non_fault = near_fault.complement();
    let epe_full = epe(est, gt, None)?;
    let near = smoothness(est, near_fault)?;
    let non = smoothness(est, &non_fault)?;
    let bucket = classify_range(gt)?;
    Ok(MetricsReport {
        estimator_name: estimator_name.to_string(),
        regularizer_name: regularizer_name.to_string(),
        epe: epe_full.to_f64().unwrap_or(f64::NAN),
        smoothness_near_fault: near.to_f64().unwrap_or(f64::NAN),
        smoothness_non_fault: non.to_f64().unwrap_or(f64::NAN),
        bucket,
        near_fault_pixels: near_fault.count(),
        non_fault_pixels: non_fault.count(),
    })
}
