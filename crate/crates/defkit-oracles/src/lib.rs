//! Independent reference solvers and optimality certificates for the defkit
//! test suites.
//!
//! Everything here is deliberately written from the optimization problems
//! themselves (dual box-constrained quadratics, first-order iterations,
//! direct objective evaluation) and shares no code with the algorithms under
//! test. Solvers are f64-only and favor transparency over speed.

/// Weighted 1D TV objective `||u - y||^2 + sum_e w[e] |u[e+1] - u[e]|`.
pub fn tv1d_objective(y: &[f64], w: &[f64], u: &[f64]) -> f64 {
    assert_eq!(u.len(), y.len());
    assert_eq!(w.len(), y.len().saturating_sub(1));
    let data: f64 = u.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    let tv: f64 = w
        .iter()
        .enumerate()
        .map(|(e, &we)| we * (u[e + 1] - u[e]).abs())
        .sum();
    data + tv
}

/// Reference minimizer of the weighted 1D TV objective, by projected
/// subgradient iterations with diminishing steps on the dual problem.
///
/// Writing the TV term as `max_{|z_e| <= w_e} z . (Du)` gives the dual
/// `min_z (1/4)||D^T z||^2 - z . Dy` over the box, with the primal recovered
/// as `u = y - D^T z / 2`. The dual is smooth, so the projected subgradient
/// is a projected gradient; with steps `a_t = a_0 / sqrt(t)` it contracts to
/// machine precision long before the iteration budgets used in the tests.
pub fn tv1d_prox_dual_projected_subgradient(y: &[f64], w: &[f64], iters: usize) -> Vec<f64> {
    let n = y.len();
    assert_eq!(w.len(), n.saturating_sub(1));
    if n <= 1 {
        return y.to_vec();
    }
    let m = n - 1;
    let mut z = vec![0.0f64; m];
    // d_y[e] = (Dy)_e
    let dy: Vec<f64> = (0..m).map(|e| y[e + 1] - y[e]).collect();
    let a0 = 0.45; // below 1/L, L = lambda_max(D D^T)/2 <= 2

    let mut dtz = vec![0.0f64; n];
    for t in 1..=iters.max(1) {
        // D^T z: (D^T z)_j = z[j-1] - z[j] with out-of-range entries zero.
        for j in 0..n {
            let a = if j > 0 { z[j - 1] } else { 0.0 };
            let b = if j < m { z[j] } else { 0.0 };
            dtz[j] = a - b;
        }
        // grad q = (1/2) D D^T z - D y, evaluated edge-wise.
        let step = a0 / (t as f64).sqrt();
        for e in 0..m {
            let g = 0.5 * (dtz[e + 1] - dtz[e]) - dy[e];
            z[e] = (z[e] - step * g).clamp(-w[e], w[e]);
        }
    }
    (0..n)
        .map(|j| {
            let a = if j > 0 { z[j - 1] } else { 0.0 };
            let b = if j < m { z[j] } else { 0.0 };
            y[j] - 0.5 * (a - b)
        })
        .collect()
}

/// KKT certificate for a claimed minimizer of the weighted 1D TV objective.
///
/// The unique dual candidate is reconstructed from stationarity,
/// `z_j = 2 * sum_{i<=j} (u_i - y_i)`; the claim is certified when
///
/// * `|z_e| <= w_e` on every edge,
/// * the boundary value `z_{n-1}` is zero (the prox preserves the sum), and
/// * `z_e = +-w_e` with the sign of `u[e+1] - u[e]` on every active edge.
///
/// Returns the largest violation across all three groups; a true minimizer
/// scores at (floating-point) zero.
pub fn tv1d_kkt_violation(y: &[f64], w: &[f64], u: &[f64], active_tol: f64) -> f64 {
    let n = y.len();
    assert_eq!(u.len(), n);
    assert_eq!(w.len(), n.saturating_sub(1));
    if n <= 1 {
        return (n == 1) as u8 as f64 * (u[0] - y[0]).abs();
    }
    let mut worst = 0.0f64;
    let mut cum = 0.0f64;
    for j in 0..n {
        cum += u[j] - y[j];
        let z = 2.0 * cum;
        if j + 1 == n {
            worst = worst.max(z.abs());
        } else {
            worst = worst.max(z.abs() - w[j]).max(0.0);
            let jump = u[j + 1] - u[j];
            if jump.abs() > active_tol {
                worst = worst.max((z - w[j] * jump.signum()).abs());
            }
        }
    }
    worst
}

/// 2D anisotropic TV objective with uniform weight:
/// `||u - y||_F^2 + lambda * (sum row edges |grad| + sum col edges |grad|)`.
pub fn tv2d_objective(height: usize, width: usize, y: &[f64], lambda: f64, u: &[f64]) -> f64 {
    assert_eq!(y.len(), height * width);
    assert_eq!(u.len(), height * width);
    let mut total: f64 = u.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    for r in 0..height {
        for c in 0..width - 1 {
            total += lambda * (u[r * width + c + 1] - u[r * width + c]).abs();
        }
    }
    for r in 0..height - 1 {
        for c in 0..width {
            total += lambda * (u[(r + 1) * width + c] - u[r * width + c]).abs();
        }
    }
    total
}

/// Long-run first-order reference for the 2D problem: proximal gradient on
/// the dual of the identical objective (projection onto the weight box is
/// the prox of its indicator), diminishing steps.
pub fn tv2d_prox_dual_projected_gradient(
    height: usize,
    width: usize,
    y: &[f64],
    lambda: f64,
    iters: usize,
) -> Vec<f64> {
    assert_eq!(y.len(), height * width);
    let n = height * width;
    let m_h = height * (width - 1);
    let m_v = (height - 1) * width;
    let m = m_h + m_v;

    // Edge list of the 4-neighbor grid: (from, to) with gradient to - from.
    let mut edges = Vec::with_capacity(m);
    for r in 0..height {
        for c in 0..width - 1 {
            edges.push((r * width + c, r * width + c + 1));
        }
    }
    for r in 0..height - 1 {
        for c in 0..width {
            edges.push((r * width + c, (r + 1) * width + c));
        }
    }

    let dy: Vec<f64> = edges.iter().map(|&(a, b)| y[b] - y[a]).collect();
    let mut z = vec![0.0f64; m];
    let mut dtz = vec![0.0f64; n];
    let a0 = 0.2; // below 1/L, L = lambda_max(D D^T)/2 <= 4

    for t in 1..=iters.max(1) {
        for v in dtz.iter_mut() {
            *v = 0.0;
        }
        for (e, &(a, b)) in edges.iter().enumerate() {
            dtz[a] -= z[e];
            dtz[b] += z[e];
        }
        let step = a0 / (t as f64).sqrt();
        for (e, &(a, b)) in edges.iter().enumerate() {
            let g = 0.5 * (dtz[b] - dtz[a]) - dy[e];
            z[e] = (z[e] - step * g).clamp(-lambda, lambda);
        }
    }

    for v in dtz.iter_mut() {
        *v = 0.0;
    }
    for (e, &(a, b)) in edges.iter().enumerate() {
        dtz[a] -= z[e];
        dtz[b] += z[e];
    }
    (0..n).map(|j| y[j] - 0.5 * dtz[j]).collect()
}

/// Log-TV objective used by the reweighted-L1 scheme, per plane:
/// `||u - y||_F^2 + lambda * sum_edges log(|grad u| + epsilon)` over both
/// horizontal and vertical edges.
pub fn ltv2d_objective(
    height: usize,
    width: usize,
    y: &[f64],
    lambda: f64,
    epsilon: f64,
    u: &[f64],
) -> f64 {
    assert_eq!(y.len(), height * width);
    assert_eq!(u.len(), height * width);
    let mut total: f64 = u.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    for r in 0..height {
        for c in 0..width - 1 {
            total += lambda * ((u[r * width + c + 1] - u[r * width + c]).abs() + epsilon).ln();
        }
    }
    for r in 0..height - 1 {
        for c in 0..width {
            total += lambda * ((u[(r + 1) * width + c] - u[r * width + c]).abs() + epsilon).ln();
        }
    }
    total
}

/// Deterministic xorshift-free splitmix64 stream, handy for reproducible
/// random test instances without pulling a dependency into the oracle crate.
pub struct SplitMix64(pub u64);

impl SplitMix64 {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform in [lo, hi).
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    /// Uniform integer in [lo, hi].
    pub fn int(&mut self, lo: usize, hi: usize) -> usize {
        lo + (self.next_u64() % (hi - lo + 1) as u64) as usize
    }
}
