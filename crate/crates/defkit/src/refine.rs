//! Iterative refinement with explicit warping around any flow estimator.
//!
//! Starting from a zero field, each pass aligns the second image with the
//! current estimate and re-estimates the residual:
//!
//! ```text
//! df_0 = 0
//! for i in 1..=n:
//!     a_i   = i2 resampled at (x - u_{i-1}, y - v_{i-1})
//!     delta = estimator(i1, a_i)
//!     df_i  = df_{i-1} + delta
//! ```
//!
//! The field maps second-image pixels into the first image (warping `i1` by
//! `+df` produces `i2`), so aligning `i2` back onto `i1` resamples at `-df`;
//! the estimator then sees only what the current estimate has not yet
//! explained, which is what lets a small per-pass search range accumulate
//! into a large total displacement.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::types::{DisplacementField, Raster};
use crate::warp::warp_image;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefinementConfig {
    /// Number of refinement passes `n`.
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    /// Attenuation factor of the intermediate loss, weighting pass `i` by
    /// `gamma^(n - i)` so later passes dominate.
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

fn default_iterations() -> usize {
    3
}
fn default_gamma() -> f64 {
    0.8
}

impl Default for RefinementConfig {
    fn default() -> Self {
        Self {
            iterations: default_iterations(),
            gamma: default_gamma(),
        }
    }
}

impl RefinementConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=8).contains(&self.iterations) {
            return Err(Error::ConfigInvalid(
                "refinement iterations must lie in 1..=8".into(),
            ));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::ConfigInvalid("gamma must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// The full refinement history: `fields[i]` is `df_{i+1}`, `deltas[i]` its
/// update, with `fields[i] = fields[i-1] + deltas[i]` elementwise.
#[derive(Debug, Clone)]
pub struct RefinementTrace<T> {
    pub fields: Vec<DisplacementField<T>>,
    pub deltas: Vec<DisplacementField<T>>,
}

impl<T: Real> RefinementTrace<T> {
    /// Final field `df_n`.
    pub fn last(&self) -> &DisplacementField<T> {
        self.fields.last().expect("trace holds at least one field")
    }
}

/// Run `cfg.iterations` refinement passes of `estimator` with explicit
/// warping. Estimator failures abort with the failing pass index attached.
pub fn iterative_refine<T, F>(
    i1: &Raster<T>,
    i2: &Raster<T>,
    mut estimator: F,
    cfg: &RefinementConfig,
) -> Result<RefinementTrace<T>>
where
    T: Real,
    F: FnMut(&Raster<T>, &Raster<T>) -> Result<DisplacementField<T>>,
{
    cfg.validate()?;
    i1.same_dims(i2)?;
    let (h, w) = (i1.height(), i1.width());

    let mut fields = Vec::with_capacity(cfg.iterations);
    let mut deltas = Vec::with_capacity(cfg.iterations);
    let mut current = DisplacementField::<T>::zero(h, w);

    for iteration in 1..=cfg.iterations {
        let aligned = if iteration == 1 {
            i2.clone()
        } else {
            warp_image(i2, &current.scaled(-T::one()))?.warped
        };
        let delta = estimator(i1, &aligned).map_err(|e| Error::EstimatorFailure {
            iteration,
            source: Box::new(e),
        })?;
        if delta.height() != h || delta.width() != w {
            return Err(Error::EstimatorFailure {
                iteration,
                source: Box::new(Error::DimensionMismatch {
                    expected_height: h,
                    expected_width: w,
                    height: delta.height(),
                    width: delta.width(),
                }),
            });
        }
        current = current.add(&delta)?;
        fields.push(current.clone());
        deltas.push(delta);
    }

    Ok(RefinementTrace { fields, deltas })
}

/// Attenuated intermediate loss of a refinement trace against ground truth.
///
/// `per_iteration[i]` is the mean absolute error of `df_{i+1}` over all
/// pixels and both components; the total weights pass `i` by
/// `gamma^(n - i)`, favoring later passes.
pub fn intermediate_loss<T: Real>(
    trace: &RefinementTrace<T>,
    gt: &DisplacementField<T>,
    gamma: T,
) -> Result<(T, Vec<T>)> {
    let n = trace.fields.len();
    let denom = T::of_usize(2 * gt.height() * gt.width());
    let mut per_iteration = Vec::with_capacity(n);
    for field in &trace.fields {
        gt.same_dims(field)?;
        let mut sum = T::zero();
        for (&a, &b) in field.u().iter().zip(gt.u()) {
            sum = sum + (b - a).abs();
        }
        for (&a, &b) in field.v().iter().zip(gt.v()) {
            sum = sum + (b - a).abs();
        }
        per_iteration.push(sum / denom);
    }
    let mut total = T::zero();
    for (i, &term) in per_iteration.iter().enumerate() {
        let exponent = (n - 1 - i) as i32;
        total = total + gamma.powi(exponent) * term;
    }
    Ok((total, per_iteration))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn checker(h: usize, w: usize) -> Raster<f64> {
        Raster::from_fn(h, w, |r, c| {
            0.3 + 0.4 * (((r / 3) + (c / 3)) % 2) as f64 + 0.01 * ((r * 7 + c * 13) % 5) as f64
        })
    }

    #[test]
    fn zero_estimator_is_a_fixed_point() {
        let img = checker(24, 24);
        let cfg = RefinementConfig::default();
        let trace = iterative_refine(
            &img,
            &img,
            |_, _| Ok(DisplacementField::zero(24, 24)),
            &cfg,
        )
        .unwrap();
        assert_eq!(trace.fields.len(), 3);
        for f in &trace.fields {
            assert_eq!(f, &DisplacementField::zero(24, 24));
        }
    }

    #[test]
    fn single_iteration_equals_plain_estimation() {
        let i1 = checker(20, 20);
        let i2 = checker(20, 20);
        let cfg = RefinementConfig {
            iterations: 1,
            gamma: 0.8,
        };
        let expect = DisplacementField::constant(20, 20, 0.25, -0.5);
        let got = iterative_refine(&i1, &i2, |_, _| Ok(expect.clone()), &cfg).unwrap();
        assert_eq!(got.fields[0], expect);
        assert_eq!(got.deltas[0], expect);
    }

    #[test]
    fn trace_reconstructs_from_deltas() {
        let i1 = checker(16, 16);
        let mut k = 0.0;
        let cfg = RefinementConfig {
            iterations: 4,
            gamma: 1.0,
        };
        let trace = iterative_refine(
            &i1,
            &i1,
            move |_, _| {
                k += 0.125;
                Ok(DisplacementField::constant(16, 16, k, -k))
            },
            &cfg,
        )
        .unwrap();
        let mut acc = DisplacementField::<f64>::zero(16, 16);
        for (field, delta) in trace.fields.iter().zip(&trace.deltas) {
            acc = acc.add(delta).unwrap();
            for (a, b) in acc.u().iter().zip(field.u()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn estimator_failures_carry_the_iteration_index() {
        let img = checker(16, 16);
        let cfg = RefinementConfig::default();
        let mut calls = 0;
        let err = iterative_refine(
            &img,
            &img,
            move |_, _| {
                calls += 1;
                if calls == 2 {
                    Err(Error::EmptyMask)
                } else {
                    Ok(DisplacementField::zero(16, 16))
                }
            },
            &cfg,
        )
        .unwrap_err();
        match err {
            Error::EstimatorFailure { iteration, .. } => assert_eq!(iteration, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn intermediate_loss_hand_case() {
        // gt = 0; fields are constant (1,1), (0.5,0.5), (0,0); gamma = 0.5:
        // per = [1, 0.5, 0], total = 0.25*1 + 0.5*0.5 + 1*0 = 0.5.
        let gt = DisplacementField::<f64>::zero(4, 4);
        let trace = RefinementTrace {
            fields: vec![
                DisplacementField::constant(4, 4, 1.0, 1.0),
                DisplacementField::constant(4, 4, 0.5, 0.5),
                DisplacementField::constant(4, 4, 0.0, 0.0),
            ],
            deltas: vec![],
        };
        let (total, per) = intermediate_loss(&trace, &gt, 0.5).unwrap();
        assert_abs_diff_eq!(per[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(per[1], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(per[2], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(total, 0.5, epsilon = 1e-12);

        // gamma = 1 collapses to the plain sum.
        let (total, per) = intermediate_loss(&trace, &gt, 1.0).unwrap();
        assert_abs_diff_eq!(total, per.iter().sum::<f64>(), epsilon = 1e-12);
    }

    #[test]
    fn loss_is_monotone_in_gamma() {
        let gt = DisplacementField::<f64>::zero(4, 4);
        let trace = RefinementTrace {
            fields: vec![
                DisplacementField::constant(4, 4, 0.8, 0.0),
                DisplacementField::constant(4, 4, 0.2, 0.1),
            ],
            deltas: vec![],
        };
        let mut prev = 0.0;
        for gamma in [0.1, 0.3, 0.5, 0.7, 0.9, 1.0] {
            let (total, _) = intermediate_loss(&trace, &gt, gamma).unwrap();
            assert!(total >= prev);
            prev = total;
        }
    }

    #[test]
    fn config_bounds_are_enforced() {
        assert!(RefinementConfig {
            iterations: 0,
            gamma: 0.8
        }
        .validate()
        .is_err());
        assert!(RefinementConfig {
            iterations: 9,
            gamma: 0.8
        }
        .validate()
        .is_err());
        assert!(RefinementConfig {
            iterations: 3,
            gamma: 0.0
        }
        .validate()
        .is_err());
        assert!(RefinementConfig {
            iterations: 3,
            gamma: 1.2
        }
        .validate()
        .is_err());
    }
}
