//! Classical dense sub-pixel displacement estimation.
//!
//! Each pixel of the second image is matched to a window of the first image
//! by exhaustive zero-normalized cross-correlation over integer offsets, with
//! an optional separable parabola fit through the correlation peak for
//! sub-pixel precision. A coarse-to-fine pyramid extends the reach beyond the
//! per-level search radius: the field estimated at a coarser level pre-shifts
//! the match centers at the next one. Matching runs on a sparse node grid and
//! the dense field is completed by bilinear interpolation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::types::{DisplacementField, Raster};
use crate::warp::bilinear_plane;

/// Sub-pixel refinement of the correlation peak.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Subpixel {
    /// Separable 1D parabola fits through the peak and its 4-neighborhood.
    #[serde(rename = "quadratic_fit_3x3")]
    QuadraticFit3x3,
    /// Integer offsets only.
    #[serde(rename = "none")]
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    /// Half-window of the match template, pixels.
    #[serde(default = "default_patch_radius")]
    pub patch_radius: usize,
    /// Integer search range per pyramid level, pixels.
    #[serde(default = "default_search_radius")]
    pub search_radius: usize,
    /// Node spacing of the sparse match grid, pixels.
    #[serde(default = "default_grid_step")]
    pub grid_step: usize,
    #[serde(default = "default_pyramid_levels")]
    pub pyramid_levels: usize,
    /// Matches whose peak ZNCC falls below this are rejected.
    #[serde(default = "default_min_correlation")]
    pub min_correlation: f64,
    #[serde(default = "default_subpixel")]
    pub subpixel: Subpixel,
}

fn default_patch_radius() -> usize {
    8
}
fn default_search_radius() -> usize {
    4
}
fn default_grid_step() -> usize {
    4
}
fn default_pyramid_levels() -> usize {
    3
}
fn default_min_correlation() -> f64 {
    0.5
}
fn default_subpixel() -> Subpixel {
    Subpixel::QuadraticFit3x3
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            patch_radius: default_patch_radius(),
            search_radius: default_search_radius(),
            grid_step: default_grid_step(),
            pyramid_levels: default_pyramid_levels(),
            min_correlation: default_min_correlation(),
            subpixel: default_subpixel(),
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patch_radius < 2 {
            return Err(Error::ConfigInvalid("patch_radius must be >= 2".into()));
        }
        if self.search_radius < 1 {
            return Err(Error::ConfigInvalid("search_radius must be >= 1".into()));
        }
        if self.grid_step < 1 {
            return Err(Error::ConfigInvalid("grid_step must be >= 1".into()));
        }
        if self.pyramid_levels < 1 {
            return Err(Error::ConfigInvalid("pyramid_levels must be >= 1".into()));
        }
        if !(-1.0..=1.0).contains(&self.min_correlation) {
            return Err(Error::ConfigInvalid(
                "min_correlation must lie in [-1, 1]".into(),
            ));
        }
        Ok(())
    }

    /// Pixels on each side that a match window needs.
    fn margin(&self) -> usize {
        self.patch_radius + self.search_radius
    }

    /// Smallest image side the matcher can work with.
    fn min_side(&self) -> usize {
        (4 * self.patch_radius).max(2 * self.margin() + 2)
    }
}

/// ZNCC scores over the `(2 * search_radius + 1)^2` integer offsets.
#[derive(Debug, Clone)]
pub struct CorrelationSurface<T> {
    side: usize,
    scores: Vec<T>,
}

impl<T: Real> CorrelationSurface<T> {
    pub fn side(&self) -> usize {
        self.side
    }

    pub fn scores(&self) -> &[T] {
        &self.scores
    }

    /// Score at offset `(dx, dy)`, each in `[-search_radius, search_radius]`.
    pub fn at(&self, dx: isize, dy: isize) -> T {
        let r = (self.side / 2) as isize;
        debug_assert!(dx.abs() <= r && dy.abs() <= r);
        self.scores[((dy + r) * self.side as isize + (dx + r)) as usize]
    }
}

/// One patch-match result. `offset` is `(u, v)` = (column, row) displacement
/// of the template's best match, including any prior shift and sub-pixel
/// refinement.
#[derive(Debug, Clone, Copy)]
pub struct PatchMatch<T> {
    pub offset: [T; 2],
    pub peak_score: T,
    /// Interior peak at or above the correlation floor; the offset carries
    /// sub-pixel refinement.
    pub valid: bool,
    /// The peak sat on the search border: the true displacement likely lies
    /// beyond the range and `offset` is a clipped integer measurement. Not
    /// `valid`, but a well-correlated clipped match still seeds the next
    /// coarse-to-fine or refinement pass.
    pub clipped: bool,
}

/// Zero-normalized cross-correlation of two equal-size patches.
///
/// Returns 0 when either patch is flat (standard deviation below 1e-12).
pub fn zncc<T: Real>(a: &[T], b: &[T]) -> T {
    assert_eq!(a.len(), b.len(), "patches must have equal size");
    assert!(a.len() >= 4, "patches need at least 4 pixels");
    let n = T::of_usize(a.len());
    let mean_a = a.iter().copied().sum::<T>() / n;
    let mean_b = b.iter().copied().sum::<T>() / n;
    let mut cov = T::zero();
    let mut var_a = T::zero();
    let mut var_b = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        let da = x - mean_a;
        let db = y - mean_b;
        cov = cov + da * db;
        var_a = var_a + da * da;
        var_b = var_b + db * db;
    }
    let sd_a = (var_a / n).sqrt();
    let sd_b = (var_b / n).sqrt();
    let floor = T::of(1e-12);
    if sd_a < floor || sd_b < floor {
        return T::zero();
    }
    cov / (var_a.sqrt() * var_b.sqrt())
}

/// Correlation surface of the template of `i2` centered at `(x, y)` against
/// `i1` windows around `(x + prior)`, over all integer offsets within the
/// search radius.
pub fn correlation_surface<T: Real>(
    i1: &Raster<T>,
    i2: &Raster<T>,
    center: (usize, usize),
    prior: (isize, isize),
    cfg: &EstimatorConfig,
) -> Result<CorrelationSurface<T>> {
    let r = cfg.patch_radius as isize;
    let rs = cfg.search_radius as isize;
    let (cx, cy) = (center.0 as isize, center.1 as isize);
    let (h, w) = (i2.height() as isize, i2.width() as isize);

    let fits = |x: isize, y: isize, reach: isize, hh: isize, ww: isize| {
        x - reach >= 0 && x + reach < ww && y - reach >= 0 && y + reach < hh
    };
    if !fits(cx, cy, r, h, w)
        || !fits(
            cx + prior.0,
            cy + prior.1,
            r + rs,
            i1.height() as isize,
            i1.width() as isize,
        )
    {
        return Err(Error::OutOfBounds {
            x: center.0,
            y: center.1,
        });
    }

    // Pre-centered template makes each candidate a single fused pass:
    // cov = sum(t' * b) since sum(t') = 0.
    let side_patch = (2 * r + 1) as usize;
    let mut template = Vec::with_capacity(side_patch * side_patch);
    for dy in -r..=r {
        for dx in -r..=r {
            template.push(i2.at((cy + dy) as usize, (cx + dx) as usize));
        }
    }
    let n = T::of_usize(template.len());
    let mean_t = template.iter().copied().sum::<T>() / n;
    for t in template.iter_mut() {
        *t = *t - mean_t;
    }
    let var_t = template.iter().map(|&t| t * t).sum::<T>();
    let sd_t = (var_t / n).sqrt();
    let norm_t = var_t.sqrt();
    let flat_t = sd_t < T::of(1e-12);

    let side = (2 * rs + 1) as usize;
    let mut scores = vec![T::zero(); side * side];
    let data1 = i1.data();
    let w1 = i1.width();
    for sy in -rs..=rs {
        for sx in -rs..=rs {
            let idx = ((sy + rs) * side as isize + (sx + rs)) as usize;
            if flat_t {
                continue;
            }
            let bx = cx + prior.0 + sx;
            let by = cy + prior.1 + sy;
            let mut sum_b = T::zero();
            let mut sum_bb = T::zero();
            let mut cov = T::zero();
            let mut ti = 0usize;
            for dy in -r..=r {
                let row = ((by + dy) as usize) * w1;
                for dx in -r..=r {
                    let b = data1[row + (bx + dx) as usize];
                    sum_b = sum_b + b;
                    sum_bb = sum_bb + b * b;
                    cov = cov + template[ti] * b;
                    ti += 1;
                }
            }
            let var_b = (sum_bb - sum_b * sum_b / n).max(T::zero());
            let sd_b = (var_b / n).sqrt();
            if sd_b < T::of(1e-12) {
                continue;
            }
            scores[idx] = cov / (norm_t * var_b.sqrt());
        }
    }
    Ok(CorrelationSurface { side, scores })
}

/// Peak offset of a 1D parabola through `(s_minus, s_0, s_plus)`, clamped to
/// `[-0.5, 0.5]`. Degenerate (flat or non-concave) triples refine by zero.
fn parabola_offset<T: Real>(s_minus: T, s_0: T, s_plus: T) -> T {
    let denom = (s_minus - s_0 - s_0 + s_plus) * T::of(2.0);
    if denom >= T::zero() || denom.abs() < T::of(1e-15) {
        return T::zero();
    }
    ((s_minus - s_plus) / denom).max(T::of(-0.5)).min(T::of(0.5))
}

fn match_with_prior<T: Real>(
    i1: &Raster<T>,
    i2: &Raster<T>,
    center: (usize, usize),
    prior: (isize, isize),
    cfg: &EstimatorConfig,
) -> Result<PatchMatch<T>> {
    let surface = correlation_surface(i1, i2, center, prior, cfg)?;
    let rs = cfg.search_radius as isize;

    // Argmax; ties break toward the smallest offset magnitude, then row-major.
    let mut best = (T::neg_infinity(), isize::MAX, 0isize, 0isize);
    for dy in -rs..=rs {
        for dx in -rs..=rs {
            let s = surface.at(dx, dy);
            let mag = dx * dx + dy * dy;
            if s > best.0 || (s == best.0 && mag < best.1) {
                best = (s, mag, dx, dy);
            }
        }
    }
    let (peak, _, dx, dy) = best;
    let on_border = dx.abs() == rs || dy.abs() == rs;
    let valid = peak >= T::of(cfg.min_correlation) && !on_border;

    // A peak at the ZNCC cap means exact alignment; the parabola model
    // assumes a smooth interior maximum and would bias off the true offset.
    // The slack absorbs accumulation error of the patch sums, which can
    // reach a few hundred ulps.
    let cap_slack = T::of(1e-11).max(T::epsilon() * T::of(1e4));
    let capped = peak >= T::one() - cap_slack;
    let (sub_x, sub_y) = if valid && !capped && cfg.subpixel == Subpixel::QuadraticFit3x3 {
        (
            parabola_offset(surface.at(dx - 1, dy), peak, surface.at(dx + 1, dy)),
            parabola_offset(surface.at(dx, dy - 1), peak, surface.at(dx, dy + 1)),
        )
    } else {
        (T::zero(), T::zero())
    };

    Ok(PatchMatch {
        offset: [
            T::of((prior.0 + dx) as f64) + sub_x,
            T::of((prior.1 + dy) as f64) + sub_y,
        ],
        peak_score: peak,
        valid,
        clipped: on_border,
    })
}

/// Match the template of `i2` centered at `(x, y)` against `i1`.
pub fn match_patch<T: Real>(
    i1: &Raster<T>,
    i2: &Raster<T>,
    center: (usize, usize),
    cfg: &EstimatorConfig,
) -> Result<PatchMatch<T>> {
    cfg.validate()?;
    match_with_prior(i1, i2, center, (0, 0), cfg)
}

fn downsample2<T: Real>(img: &Raster<T>) -> Raster<T> {
    let h2 = img.height() / 2;
    let w2 = img.width() / 2;
    let quarter = T::of(0.25);
    Raster::from_fn(h2, w2, |r, c| {
        (img.at(2 * r, 2 * c)
            + img.at(2 * r, 2 * c + 1)
            + img.at(2 * r + 1, 2 * c)
            + img.at(2 * r + 1, 2 * c + 1))
            * quarter
    })
}

fn grid_coords(size: usize, margin: usize, step: usize) -> Vec<usize> {
    let lo = margin;
    let hi = size - 1 - margin;
    let mut xs: Vec<usize> = (lo..=hi).step_by(step).collect();
    if *xs.last().unwrap() != hi {
        xs.push(hi);
    }
    xs
}

fn median<T: Real>(values: &mut Vec<T>) -> T {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) * T::of(0.5)
    }
}

/// Fill invalid grid nodes by the median of their valid 8-neighbors,
/// iterating until no fillable node remains; anything still unset falls back
/// to zero.
fn fill_holes<T: Real>(nodes: &mut [Option<(T, T)>], nx: usize, ny: usize) {
    loop {
        let mut fills: Vec<(usize, (T, T))> = Vec::new();
        for gy in 0..ny {
            for gx in 0..nx {
                let idx = gy * nx + gx;
                if nodes[idx].is_some() {
                    continue;
                }
                let mut us = Vec::new();
                let mut vs = Vec::new();
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        if dx == 0 && dy == 0 {
                            continue;
                        }
                        let (qx, qy) = (gx as i64 + dx, gy as i64 + dy);
                        if qx < 0 || qy < 0 || qx >= nx as i64 || qy >= ny as i64 {
                            continue;
                        }
                        if let Some((u, v)) = nodes[qy as usize * nx + qx as usize] {
                            us.push(u);
                            vs.push(v);
                        }
                    }
                }
                if !us.is_empty() {
                    fills.push((idx, (median(&mut us), median(&mut vs))));
                }
            }
        }
        if fills.is_empty() {
            break;
        }
        for (idx, value) in fills {
            nodes[idx] = Some(value);
        }
    }
    for node in nodes.iter_mut() {
        if node.is_none() {
            *node = Some((T::zero(), T::zero()));
        }
    }
}

/// Bilinear interpolation of grid-node values to a dense plane; pixels
/// outside the node hull clamp to the border nodes.
fn densify<T: Real>(
    nodes: &[(T, T)],
    xs: &[usize],
    ys: &[usize],
    height: usize,
    width: usize,
) -> (Vec<T>, Vec<T>) {
    let nx = xs.len();
    let seg = |coords: &[usize], p: usize| -> (usize, T) {
        if p <= coords[0] {
            return (0, T::zero());
        }
        if p >= *coords.last().unwrap() {
            return (coords.len().saturating_sub(2), T::one());
        }
        let i = match coords.binary_search(&p) {
            Ok(i) => i.min(coords.len() - 2),
            Err(i) => i - 1,
        };
        let t = T::of_usize(p - coords[i]) / T::of_usize(coords[i + 1] - coords[i]);
        (i, t)
    };
    if xs.len() == 1 || ys.len() == 1 {
        // Degenerate lattice: nearest node along the collapsed axis.
        let mut u = vec![T::zero(); height * width];
        let mut v = vec![T::zero(); height * width];
        for r in 0..height {
            for c in 0..width {
                let gx = xs.iter().position(|&x| x >= c).unwrap_or(nx - 1).min(nx - 1);
                let gy = ys
                    .iter()
                    .position(|&y| y >= r)
                    .unwrap_or(ys.len() - 1)
                    .min(ys.len() - 1);
                let (nu, nv) = nodes[gy * nx + gx];
                u[r * width + c] = nu;
                v[r * width + c] = nv;
            }
        }
        return (u, v);
    }
    let mut u = vec![T::zero(); height * width];
    let mut v = vec![T::zero(); height * width];
    u.chunks_mut(width)
        .zip(v.chunks_mut(width))
        .enumerate()
        .for_each(|(r, (row_u, row_v))| {
            let (gy, ty) = seg(ys, r);
            for c in 0..width {
                let (gx, tx) = seg(xs, c);
                let one = T::one();
                let (u00, v00) = nodes[gy * nx + gx];
                let (u01, v01) = nodes[gy * nx + gx + 1];
                let (u10, v10) = nodes[(gy + 1) * nx + gx];
                let (u11, v11) = nodes[(gy + 1) * nx + gx + 1];
                row_u[c] = (u00 * (one - tx) + u01 * tx) * (one - ty)
                    + (u10 * (one - tx) + u11 * tx) * ty;
                row_v[c] = (v00 * (one - tx) + v01 * tx) * (one - ty)
                    + (v10 * (one - tx) + v11 * tx) * ty;
            }
        });
    (u, v)
}

/// Dense coarse-to-fine displacement estimation from `i1` to `i2` under the
/// field convention `i2(x, y) ~ i1(x + u, y + v)`.
pub fn estimate_flow<T: Real>(
    i1: &Raster<T>,
    i2: &Raster<T>,
    cfg: &EstimatorConfig,
) -> Result<DisplacementField<T>> {
    cfg.validate()?;
    i1.same_dims(i2)?;
    let min_side = cfg.min_side();
    if i1.height() < min_side || i1.width() < min_side {
        return Err(Error::ImageTooSmall {
            height: i1.height(),
            width: i1.width(),
            min_side,
        });
    }

    // Keep the coarsest level usable; deeper levels are silently dropped.
    let mut levels = cfg.pyramid_levels;
    while levels > 1 && (i1.height().min(i1.width()) >> (levels - 1)) < min_side {
        levels -= 1;
    }

    let mut pyr1 = vec![i1.clone()];
    let mut pyr2 = vec![i2.clone()];
    for _ in 1..levels {
        pyr1.push(downsample2(pyr1.last().unwrap()));
        pyr2.push(downsample2(pyr2.last().unwrap()));
    }

    let mut prev: Option<(Vec<T>, Vec<T>, usize, usize)> = None;
    for level in (0..levels).rev() {
        let (im1, im2) = (&pyr1[level], &pyr2[level]);
        let (h, w) = (im1.height(), im1.width());

        // Prior field: the coarser level's dense estimate, upsampled and
        // doubled; zero at the coarsest level.
        let (prior_u, prior_v): (Vec<T>, Vec<T>) = match &prev {
            None => (vec![T::zero(); h * w], vec![T::zero(); h * w]),
            Some((pu, pv, ph, pw)) => {
                let half = T::of(0.5);
                let two = T::of(2.0);
                let mut up = vec![T::zero(); h * w];
                let mut vp = vec![T::zero(); h * w];
                for r in 0..h {
                    for c in 0..w {
                        let x = T::of_usize(c) * half;
                        let y = T::of_usize(r) * half;
                        up[r * w + c] = two * bilinear_plane(pu, *ph, *pw, x, y).0;
                        vp[r * w + c] = two * bilinear_plane(pv, *ph, *pw, x, y).0;
                    }
                }
                (up, vp)
            }
        };

        let xs = grid_coords(w, cfg.margin(), cfg.grid_step);
        let ys = grid_coords(h, cfg.margin(), cfg.grid_step);
        let (nx, ny) = (xs.len(), ys.len());

        let coords: Vec<(usize, usize)> = ys
            .iter()
            .flat_map(|&y| xs.iter().map(move |&x| (x, y)))
            .collect();
        let min_corr = T::of(cfg.min_correlation);
        let mut nodes: Vec<Option<(T, T)>> = coords
            .par_iter()
            .map(|&(x, y)| {
                let idx = y * w + x;
                let prior = (
                    prior_u[idx].round().to_isize().unwrap_or(0),
                    prior_v[idx].round().to_isize().unwrap_or(0),
                );
                match match_with_prior(im1, im2, (x, y), prior, cfg) {
                    Ok(m) if m.valid => Some((m.offset[0], m.offset[1])),
                    // A well-correlated border peak is a clipped measurement
                    // of a displacement beyond the search range; keeping it
                    // as a seed lets the next pass finish the job. Without
                    // this, a uniform out-of-range shift leaves no valid
                    // node at all and iterative refinement cannot start.
                    Ok(m) if m.clipped && m.peak_score >= min_corr => {
                        Some((m.offset[0], m.offset[1]))
                    }
                    _ => None,
                }
            })
            .collect();

        fill_holes(&mut nodes, nx, ny);
        let nodes: Vec<(T, T)> = nodes.into_iter().map(|n| n.unwrap()).collect();
        let (u, v) = densify(&nodes, &xs, &ys, h, w);
        prev = Some((u, v, h, w));
    }

    let (u, v, h, w) = prev.expect("at least one pyramid level");
    DisplacementField::from_planes(h, w, u, v)
}
