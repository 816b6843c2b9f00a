//! Backward bilinear warping of rasters by displacement fields.

use rayon::prelude::*;

use crate::error::Result;
use crate::scalar::Real;
use crate::types::{DisplacementField, Raster, RegionMask};

/// A warped raster plus the per-pixel validity of its samples.
#[derive(Debug, Clone)]
pub struct WarpResult<T> {
    pub warped: Raster<T>,
    /// True where the sampling point stayed inside `[0, W-1] x [0, H-1]`,
    /// i.e. clamping did not move it.
    pub validity: RegionMask,
}

/// Bilinear interpolation of `img` at real-valued coordinates `(x, y)`
/// (x along columns, y along rows).
///
/// Coordinates outside `[0, W-1] x [0, H-1]` are clamped to the edge and the
/// sample is reported as out of bounds. Sampling exactly at an integer
/// lattice point returns the stored value.
pub fn bilinear_sample<T: Real>(img: &Raster<T>, x: T, y: T) -> (T, bool) {
    let (v, in_bounds) = bilinear_plane(img.data(), img.height(), img.width(), x, y);
    (v, in_bounds)
}

/// Same as [`bilinear_sample`] but on a bare row-major plane.
pub(crate) fn bilinear_plane<T: Real>(
    data: &[T],
    height: usize,
    width: usize,
    x: T,
    y: T,
) -> (T, bool) {
    let max_x = T::of_usize(width - 1);
    let max_y = T::of_usize(height - 1);
    let in_bounds = x >= T::zero() && x <= max_x && y >= T::zero() && y <= max_y;
    let cx = x.max(T::zero()).min(max_x);
    let cy = y.max(T::zero()).min(max_y);

    let x0 = cx.floor();
    let y0 = cy.floor();
    let fx = cx - x0;
    let fy = cy - y0;
    let c0 = x0.to_usize().unwrap_or(0).min(width - 1);
    let r0 = y0.to_usize().unwrap_or(0).min(height - 1);
    let c1 = (c0 + 1).min(width - 1);
    let r1 = (r0 + 1).min(height - 1);

    let one = T::one();
    let top = data[r0 * width + c0] * (one - fx) + data[r0 * width + c1] * fx;
    let bottom = data[r1 * width + c0] * (one - fx) + data[r1 * width + c1] * fx;
    (top * (one - fy) + bottom * fy, in_bounds)
}

/// Resample `img` by the displacement field: `out(x, y) = img(x + u, y + v)`.
///
/// This realizes the field convention directly: warping the first image of a
/// pair by the field that maps second-image pixels into it produces the
/// second image.
pub fn warp_image<T: Real>(img: &Raster<T>, df: &DisplacementField<T>) -> Result<WarpResult<T>> {
    if img.height() != df.height() || img.width() != df.width() {
        return Err(crate::error::Error::DimensionMismatch {
            expected_height: img.height(),
            expected_width: img.width(),
            height: df.height(),
            width: df.width(),
        });
    }
    let (h, w) = (img.height(), img.width());
    let mut out = vec![T::zero(); h * w];
    let mut valid = vec![false; h * w];

    out.par_chunks_mut(w)
        .zip(valid.par_chunks_mut(w))
        .enumerate()
        .for_each(|(r, (row_out, row_valid))| {
            let y = T::of_usize(r);
            for c in 0..w {
                let (u, v) = df.at(r, c);
                let (val, ok) =
                    bilinear_plane(img.data(), h, w, T::of_usize(c) + u, y + v);
                row_out[c] = val;
                row_valid[c] = ok;
            }
        });

    Ok(WarpResult {
        warped: Raster::from_vec(h, w, out)?,
        validity: RegionMask::from_bits(h, w, valid)?,
    })
}
