//! Exact 1D total-variation proximal operators via the taut-string algorithm.
//!
//! `tv1d_prox` minimizes `||u - y||^2 + lambda * sum |u[i+1] - u[i]|` and
//! `weighted_tv1d_prox` the per-edge weighted variant. The objective carries
//! no 1/2 on the data term, so the taut-string tube runs at half the edge
//! weight: `||u - y||^2 + sum w_e |grad u|_e = 2 * (||u - y||^2 / 2 +
//! sum (w_e / 2) |grad u|_e)`.
//!
//! The string is the shortest path through a tube around the cumulative sums
//! of `y`, pinned at both ends; the output is its sequence of slopes. Each
//! segment is found by walking a running feasible-slope interval and bending
//! at the last tube contact when the interval empties. A bend at the tube
//! ceiling is an upward jump of `u` (the edge's dual variable sits at `+w_e`),
//! a floor bend a downward jump.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Per-edge tube half-widths.
pub(crate) enum HalfWidths<'a, T> {
    Uniform(T),
    PerEdge(&'a [T]),
}

impl<T: Real> HalfWidths<'_, T> {
    #[inline]
    fn at(&self, edge: usize) -> T {
        match self {
            HalfWidths::Uniform(h) => *h,
            HalfWidths::PerEdge(hs) => hs[edge],
        }
    }
}

/// Taut string through the tube `cumsum(y)[j] +- h[j-1]` (interior points),
/// pinned at `(0, 0)` and `(n, cumsum(y)[n])`. Writes the slopes into `out`.
///
/// `cumsum` is caller-provided scratch so hot loops can reuse the allocation.
pub(crate) fn taut_string_into<T: Real>(
    y: &[T],
    half_widths: &HalfWidths<T>,
    cumsum: &mut Vec<T>,
    out: &mut [T],
) {
    let n = y.len();
    debug_assert_eq!(out.len(), n);
    if n == 0 {
        return;
    }
    let zero_tube = match half_widths {
        HalfWidths::Uniform(h) => *h == T::zero(),
        HalfWidths::PerEdge(hs) => hs.iter().all(|&h| h == T::zero()),
    };
    if n == 1 || zero_tube {
        // Zero-width tube: the string follows the cumulative sums, so the
        // output is the input, bit-exactly.
        out.copy_from_slice(y);
        return;
    }

    cumsum.clear();
    cumsum.reserve(n + 1);
    cumsum.push(T::zero());
    let mut acc = T::zero();
    for &v in y {
        acc = acc + v;
        cumsum.push(acc);
    }
    let f = &cumsum[..];

    let mut anchor = 0usize; // string point the solution is fixed through
    let mut va = T::zero(); // string value at the anchor
    while anchor < n {
        let mut slope_max = T::infinity();
        let mut slope_min = T::neg_infinity();
        let mut touch_up = anchor; // last ceiling contact achieving slope_max
        let mut touch_lo = anchor; // last floor contact achieving slope_min
        let mut j = anchor + 1;
        loop {
            let (lo, up) = if j == n {
                (f[n], f[n])
            } else {
                let h = half_widths.at(j - 1);
                (f[j] - h, f[j] + h)
            };
            let dj = T::of_usize(j - anchor);
            let cl = (lo - va) / dj;
            let cu = (up - va) / dj;

            if cl > slope_max {
                // Cannot clear this floor under the binding ceiling: the
                // string drapes under the ceiling at touch_up and jumps up.
                for e in anchor..touch_up {
                    out[e] = slope_max;
                }
                va = f[touch_up] + half_widths.at(touch_up - 1);
                anchor = touch_up;
                break;
            }
            if cu < slope_min {
                // Cannot duck under this ceiling over the binding floor:
                // bend at the floor contact and jump down.
                for e in anchor..touch_lo {
                    out[e] = slope_min;
                }
                va = f[touch_lo] - half_widths.at(touch_lo - 1);
                anchor = touch_lo;
                break;
            }
            if cu <= slope_max {
                slope_max = cu;
                touch_up = j;
            }
            if cl >= slope_min {
                slope_min = cl;
                touch_lo = j;
            }
            if j == n {
                // Feasible straight run to the pinned endpoint.
                let m = (f[n] - va) / T::of_usize(n - anchor);
                for e in anchor..n {
                    out[e] = m;
                }
                anchor = n;
                break;
            }
            j += 1;
        }
    }
}

/// Exact minimizer of `||u - y||^2 + lambda * sum_i |u[i+1] - u[i]|`.
///
/// `lambda = 0` and constant inputs return `y` unchanged. Negative `lambda`
/// is treated as zero.
pub fn tv1d_prox<T: Real>(y: &[T], lambda: T) -> Vec<T> {
    debug_assert!(lambda >= T::zero(), "negative TV weight");
    let lambda = lambda.max(T::zero());
    let mut out = vec![T::zero(); y.len()];
    let mut scratch = Vec::new();
    taut_string_into(
        y,
        &HalfWidths::Uniform(lambda * T::of(0.5)),
        &mut scratch,
        &mut out,
    );
    out
}

/// Exact minimizer of `||u - y||^2 + sum_i w[i] * |u[i+1] - u[i]|` with one
/// non-negative weight per edge (`w.len() == y.len() - 1`).
pub fn weighted_tv1d_prox<T: Real>(y: &[T], w: &[T]) -> Result<Vec<T>> {
    let expected = y.len().saturating_sub(1);
    if w.len() != expected {
        return Err(Error::LengthMismatch {
            expected,
            got: w.len(),
        });
    }
    if !w.iter().all(|x| x.is_finite() && *x >= T::zero()) {
        return Err(Error::ConfigInvalid(
            "edge weights must be finite and non-negative".into(),
        ));
    }
    let half: Vec<T> = w.iter().map(|&x| x * T::of(0.5)).collect();
    let mut out = vec![T::zero(); y.len()];
    let mut scratch = Vec::new();
    taut_string_into(y, &HalfWidths::PerEdge(&half), &mut scratch, &mut out);
    Ok(out)
}
