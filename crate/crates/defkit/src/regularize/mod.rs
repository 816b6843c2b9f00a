//! A-posteriori denoising of displacement fields.
//!
//! Three gradient penalties are supported, each balanced against the
//! `||u - y||^2` data term by `lambda`:
//!
//! * `L2Grad` — quadratic gradient penalty; smooth but blurs sharp jumps.
//! * `Tv` — total variation; piecewise-constant solutions, edge-preserving.
//! * `Ltv` — log total variation `log(|grad u| + epsilon)`; concave, so it is
//!   minimized by reweighted-L1: each pass solves a weighted-TV problem whose
//!   edge weights are `lambda / (|grad u_prev| + epsilon)`, keeping the data
//!   term anchored to the original noisy field. Large jumps get small weights
//!   and survive; small oscillations get large weights and are flattened.
//!
//! The `u` and `v` components are denoised independently. 2D problems are
//! split into row and column 1D problems via Dykstra alternating projections.

mod dykstra;
mod taut_string;

pub use dykstra::{denoise_2d, Denoise2dOutcome, DykstraControls, EdgeWeights};
pub use taut_string::{tv1d_prox, weighted_tv1d_prox};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::types::DisplacementField;

/// Gradient penalty selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PenaltyKind {
    #[serde(rename = "l2grad")]
    L2Grad,
    #[serde(rename = "tv")]
    Tv,
    #[serde(rename = "ltv")]
    Ltv,
}

/// Penalty function `psi` plus the LTV linearization floor `epsilon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PenaltySpec {
    pub kind: PenaltyKind,
    /// Floor inside the LTV weight `lambda / (|grad| + epsilon)`, in pixels
    /// per edge. Ignored by the other penalties.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_epsilon() -> f64 {
    1e-2
}

impl PenaltySpec {
    pub fn ltv() -> Self {
        Self {
            kind: PenaltyKind::Ltv,
            epsilon: default_epsilon(),
        }
    }

    pub fn tv() -> Self {
        Self {
            kind: PenaltyKind::Tv,
            epsilon: default_epsilon(),
        }
    }

    pub fn l2grad() -> Self {
        Self {
            kind: PenaltyKind::L2Grad,
            epsilon: default_epsilon(),
        }
    }
}

/// Full regularizer configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularizerConfig {
    pub penalty: PenaltySpec,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Reweighting passes `k` for the LTV penalty.
    #[serde(default = "default_reweight_iters")]
    pub reweight_iters: usize,
    #[serde(default = "default_dykstra_iters")]
    pub dykstra_iters: usize,
    #[serde(default = "default_dykstra_tol")]
    pub dykstra_tol: f64,
}

fn default_lambda() -> f64 {
    0.001
}
fn default_reweight_iters() -> usize {
    3
}
fn default_dykstra_iters() -> usize {
    50
}
fn default_dykstra_tol() -> f64 {
    1e-6
}

impl Default for RegularizerConfig {
    fn default() -> Self {
        Self {
            penalty: PenaltySpec::ltv(),
            lambda: default_lambda(),
            reweight_iters: default_reweight_iters(),
            dykstra_iters: default_dykstra_iters(),
            dykstra_tol: default_dykstra_tol(),
        }
    }
}

impl RegularizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::ConfigInvalid("lambda must be >= 0".into()));
        }
        if self.dykstra_iters < 1 {
            return Err(Error::ConfigInvalid("dykstra_iters must be >= 1".into()));
        }
        if !(self.dykstra_tol.is_finite() && self.dykstra_tol > 0.0) {
            return Err(Error::ConfigInvalid("dykstra_tol must be > 0".into()));
        }
        if self.penalty.kind == PenaltyKind::Ltv
            && !(self.penalty.epsilon.is_finite() && self.penalty.epsilon > 0.0)
        {
            return Err(Error::ConfigInvalid(
                "epsilon must be > 0 for the LTV penalty".into(),
            ));
        }
        Ok(())
    }

    fn controls(&self) -> DykstraControls {
        DykstraControls {
            max_sweeps: self.dykstra_iters,
            tol: self.dykstra_tol,
        }
    }
}

/// A denoised field plus solver diagnostics for the run report.
#[derive(Debug, Clone)]
pub struct RegularizeOutcome<T> {
    pub field: DisplacementField<T>,
    /// False if any inner Dykstra loop hit its sweep budget before the
    /// tolerance; the field is still the best iterate.
    pub converged: bool,
    /// Total Dykstra sweeps across components and reweighting passes.
    pub sweeps: usize,
}

/// Forward differences `u[i+1] - u[i]` (length `n - 1`).
pub fn grad1d<T: Real>(u: &[T]) -> Result<Vec<T>> {
    if u.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: u.len(),
        });
    }
    Ok(u.windows(2).map(|w| w[1] - w[0]).collect())
}

/// Exact minimizer of `||u - y||^2 + lambda * ||grad u||^2` in 1D, via a
/// tridiagonal solve of `(I + lambda L) u = y`.
pub fn l2grad_denoise_1d<T: Real>(y: &[T], lambda: T) -> Result<Vec<T>> {
    if y.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: y.len(),
        });
    }
    debug_assert!(lambda >= T::zero(), "negative smoothing weight");
    let lambda = lambda.max(T::zero());
    let mut out = vec![T::zero(); y.len()];
    let mut scratch = Vec::new();
    dykstra::tridiag_smooth(lambda, y, &mut out, &mut scratch);
    Ok(out)
}

/// LTV edge weights `lambda / (|grad| + epsilon)` for a plane, per axis.
fn ltv_weights<T: Real>(
    plane: &[T],
    height: usize,
    width: usize,
    lambda: T,
    epsilon: T,
) -> (Vec<T>, Vec<T>) {
    let mut horizontal = Vec::with_capacity(height * (width - 1));
    for r in 0..height {
        for c in 0..width - 1 {
            let g = (plane[r * width + c + 1] - plane[r * width + c]).abs();
            horizontal.push(lambda / (g + epsilon));
        }
    }
    let mut vertical = Vec::with_capacity((height - 1) * width);
    for r in 0..height - 1 {
        for c in 0..width {
            let g = (plane[(r + 1) * width + c] - plane[r * width + c]).abs();
            vertical.push(lambda / (g + epsilon));
        }
    }
    (horizontal, vertical)
}

fn ltv_component<T: Real>(
    plane: &[T],
    height: usize,
    width: usize,
    cfg: &RegularizerConfig,
) -> Result<(Vec<T>, bool, usize)> {
    let lambda = T::of(cfg.lambda);
    let epsilon = T::of(cfg.penalty.epsilon);
    let ctrl = cfg.controls();

    let mut current = plane.to_vec();
    let mut converged = true;
    let mut sweeps = 0;
    for _ in 0..cfg.reweight_iters {
        let (horizontal, vertical) = ltv_weights(&current, height, width, lambda, epsilon);
        // Data term stays anchored to the original noisy plane.
        let out = denoise_2d(
            height,
            width,
            plane,
            EdgeWeights::PerEdge {
                horizontal: &horizontal,
                vertical: &vertical,
            },
            &ctrl,
        )?;
        converged &= out.converged;
        sweeps += out.sweeps;
        current = out.grid;
    }
    Ok((current, converged, sweeps))
}

/// Reweighted-L1 minimization of the log-TV objective
/// `||u - y||^2 + lambda * sum log(|grad u| + epsilon)`, per component.
///
/// With `lambda = 0` or zero reweighting passes the field is returned
/// unchanged.
pub fn ltv_denoise<T: Real>(
    field: &DisplacementField<T>,
    cfg: &RegularizerConfig,
) -> Result<RegularizeOutcome<T>> {
    cfg.validate()?;
    if cfg.penalty.kind != PenaltyKind::Ltv {
        return Err(Error::ConfigInvalid(
            "ltv_denoise requires the LTV penalty".into(),
        ));
    }
    if cfg.lambda == 0.0 || cfg.reweight_iters == 0 {
        return Ok(RegularizeOutcome {
            field: field.clone(),
            converged: true,
            sweeps: 0,
        });
    }
    let (h, w) = (field.height(), field.width());
    let (ru, rv) = rayon::join(
        || ltv_component(field.u(), h, w, cfg),
        || ltv_component(field.v(), h, w, cfg),
    );
    let (u, cu, su) = ru?;
    let (v, cv, sv) = rv?;
    Ok(RegularizeOutcome {
        field: DisplacementField::from_planes(h, w, u, v)?,
        converged: cu && cv,
        sweeps: su + sv,
    })
}

/// Denoise a displacement field with the configured penalty.
pub fn regularize_field<T: Real>(
    field: &DisplacementField<T>,
    cfg: &RegularizerConfig,
) -> Result<RegularizeOutcome<T>> {
    cfg.validate()?;
    if cfg.lambda == 0.0 {
        return Ok(RegularizeOutcome {
            field: field.clone(),
            converged: true,
            sweeps: 0,
        });
    }
    let (h, w) = (field.height(), field.width());
    let ctrl = cfg.controls();
    let lambda = T::of(cfg.lambda);
    match cfg.penalty.kind {
        PenaltyKind::Ltv => ltv_denoise(field, cfg),
        PenaltyKind::Tv => {
            let (ru, rv) = rayon::join(
                || denoise_2d(h, w, field.u(), EdgeWeights::Uniform(lambda), &ctrl),
                || denoise_2d(h, w, field.v(), EdgeWeights::Uniform(lambda), &ctrl),
            );
            let ru = ru?;
            let rv = rv?;
            Ok(RegularizeOutcome {
                field: DisplacementField::from_planes(h, w, ru.grid, rv.grid)?,
                converged: ru.converged && rv.converged,
                sweeps: ru.sweeps + rv.sweeps,
            })
        }
        PenaltyKind::L2Grad => {
            let (ru, rv) = rayon::join(
                || dykstra::quadratic_denoise_2d(h, w, field.u(), lambda, &ctrl),
                || dykstra::quadratic_denoise_2d(h, w, field.v(), lambda, &ctrl),
            );
            let ru = ru?;
            let rv = rv?;
            Ok(RegularizeOutcome {
                field: DisplacementField::from_planes(h, w, ru.grid, rv.grid)?,
                converged: ru.converged && rv.converged,
                sweeps: ru.sweeps + rv.sweeps,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn noisy_field(h: usize, w: usize) -> DisplacementField<f64> {
        DisplacementField::from_fn(h, w, |r, c| {
            let t = (r * w + c) as f64;
            (0.2 * (t * 0.7).sin(), 0.1 * (t * 1.3).cos())
        })
    }

    #[test]
    fn grad1d_examples() {
        assert_eq!(grad1d(&[1.0f64, 1.0, 1.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(grad1d(&[0.0f64, 1.0, 3.0]).unwrap(), vec![1.0, 2.0]);
        assert!(matches!(
            grad1d(&[1.0f64]),
            Err(Error::TooShort { .. })
        ));
        // Random length-6 sequence against elementwise subtraction.
        let y = [0.3f64, -0.8, 1.1, 0.4, 0.4, -2.0];
        let g = grad1d(&y).unwrap();
        for i in 0..5 {
            assert_eq!(g[i], y[i + 1] - y[i]);
        }
    }

    #[test]
    fn l2grad_fixed_points() {
        // The Laplacian annihilates constants, so a constant is a fixed point
        // for any lambda (up to solver rounding).
        let constant = vec![0.42f64; 7];
        for x in l2grad_denoise_1d(&constant, 3.0).unwrap() {
            assert_abs_diff_eq!(x, 0.42, epsilon = 1e-13);
        }
        // lambda = 0 short-circuits and is bit-exact.
        let y = vec![0.3f64, -1.0, 0.7, 0.2];
        assert_eq!(l2grad_denoise_1d(&y, 0.0).unwrap(), y);
    }

    #[test]
    fn l2grad_two_point_closed_form() {
        let u = l2grad_denoise_1d(&[0.0f64, 1.0], 0.25).unwrap();
        assert_abs_diff_eq!(u[0], 1.0 / 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(u[1], 5.0 / 6.0, epsilon = 1e-12);
    }

    #[test]
    fn ltv_identities() {
        let field = noisy_field(6, 5);
        let mut cfg = RegularizerConfig {
            lambda: 0.0,
            ..RegularizerConfig::default()
        };
        let out = ltv_denoise(&field, &cfg).unwrap();
        assert_eq!(out.field, field);

        cfg.lambda = 0.01;
        cfg.reweight_iters = 0;
        let out = ltv_denoise(&field, &cfg).unwrap();
        assert_eq!(out.field, field);
    }

    #[test]
    fn ltv_rejects_other_penalties() {
        let field = noisy_field(4, 4);
        let cfg = RegularizerConfig {
            penalty: PenaltySpec::tv(),
            ..RegularizerConfig::default()
        };
        assert!(matches!(
            ltv_denoise(&field, &cfg),
            Err(Error::ConfigInvalid(_))
        ));
    }

    #[test]
    fn dispatch_tv_equals_per_component_denoise() {
        let field = noisy_field(6, 7);
        let cfg = RegularizerConfig {
            penalty: PenaltySpec::tv(),
            lambda: 0.01,
            ..RegularizerConfig::default()
        };
        let out = regularize_field(&field, &cfg).unwrap();
        let ctrl = DykstraControls::default();
        let u = denoise_2d(6, 7, field.u(), EdgeWeights::Uniform(0.01), &ctrl).unwrap();
        let v = denoise_2d(6, 7, field.v(), EdgeWeights::Uniform(0.01), &ctrl).unwrap();
        assert_eq!(out.field.u(), &u.grid[..]);
        assert_eq!(out.field.v(), &v.grid[..]);
    }

    #[test]
    fn zero_lambda_dispatch_is_identity_for_all_kinds() {
        let field = noisy_field(5, 5);
        for penalty in [PenaltySpec::l2grad(), PenaltySpec::tv(), PenaltySpec::ltv()] {
            let cfg = RegularizerConfig {
                penalty,
                lambda: 0.0,
                ..RegularizerConfig::default()
            };
            let out = regularize_field(&field, &cfg).unwrap();
            assert_eq!(out.field, field);
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = RegularizerConfig::default();
        cfg.lambda = -1.0;
        assert!(cfg.validate().is_err());
        cfg = RegularizerConfig::default();
        cfg.dykstra_iters = 0;
        assert!(cfg.validate().is_err());
        cfg = RegularizerConfig::default();
        cfg.penalty.epsilon = 0.0;
        assert!(cfg.validate().is_err());
    }
}
