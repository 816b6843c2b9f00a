//! Foundational value types: rasters, displacement fields, region masks.
//!
//! Conventions fixed here and obeyed by every module:
//!
//! * Row-major indexing: element `(row r, col c)` lives at index `r * width + c`.
//! * `x` is the column axis, `y` the row axis.
//! * A displacement field maps pixel `(x, y)` of the second image to
//!   `(x + u(x, y), y + v(x, y))` in the first image, in pixel units.
//!
//! All types are immutable value objects after construction and safe to share
//! read-only across threads.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

fn ensure_finite<T: Real>(data: &[T], what: &'static str) -> Result<()> {
    if data.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { what })
    }
}

fn ensure_len<T>(data: &[T], height: usize, width: usize) -> Result<()> {
    if height == 0 || width == 0 {
        return Err(Error::ImageTooSmall {
            height,
            width,
            min_side: 1,
        });
    }
    let expected = height
        .checked_mul(width)
        .ok_or(Error::DimensionOverflow { side: width as u64 })?;
    if data.len() == expected {
        Ok(())
    } else {
        Err(Error::DataLength {
            height,
            width,
            got: data.len(),
        })
    }
}

/// H×W grayscale intensity grid. Values are dimensionless, nominally in
/// `[0, 1]`, but not clamped: warping and perturbation may legitimately
/// exceed that range transiently. Only non-finite values are rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster<T> {
    height: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Real> Raster<T> {
    pub fn from_vec(height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        ensure_len(&data, height, width)?;
        ensure_finite(&data, "raster intensities")?;
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self {
            height,
            width,
            data,
        }
    }

    pub fn constant(height: usize, width: usize, value: T) -> Self {
        Self {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    /// Value at (row, col). Panics on out-of-range indices.
    #[inline]
    pub fn at(&self, row: usize, col: usize) -> T {
        debug_assert!(row < self.height && col < self.width);
        self.data[row * self.width + col]
    }

    pub fn same_dims<U: Real>(&self, other: &Raster<U>) -> Result<()> {
        if self.height == other.height && self.width == other.width {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected_height: self.height,
                expected_width: self.width,
                height: other.height,
                width: other.width,
            })
        }
    }
}

/// Dense per-pixel displacement `(u, v)` in pixel units, stored as two
/// row-major planes. `u` is the east–west (column) component, `v` the
/// north–south (row) component.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementField<T> {
    height: usize,
    width: usize,
    u: Vec<T>,
    v: Vec<T>,
}

impl<T: Real> DisplacementField<T> {
    pub fn from_planes(height: usize, width: usize, u: Vec<T>, v: Vec<T>) -> Result<Self> {
        ensure_len(&u, height, width)?;
        ensure_len(&v, height, width)?;
        ensure_finite(&u, "displacement u component")?;
        ensure_finite(&v, "displacement v component")?;
        Ok(Self {
            height,
            width,
            u,
            v,
        })
    }

    pub fn zero(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            u: vec![T::zero(); height * width],
            v: vec![T::zero(); height * width],
        }
    }

    pub fn constant(height: usize, width: usize, u: T, v: T) -> Self {
        Self {
            height,
            width,
            u: vec![u; height * width],
            v: vec![v; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> (T, T)) -> Self {
        let mut u = Vec::with_capacity(height * width);
        let mut v = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                let (du, dv) = f(r, c);
                u.push(du);
                v.push(dv);
            }
        }
        Self {
            height,
            width,
            u,
            v,
        }
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn u(&self) -> &[T] {
        &self.u
    }

    #[inline]
    pub fn v(&self) -> &[T] {
        &self.v
    }

    /// `(u, v)` at (row, col).
    #[inline]
    pub fn at(&self, row: usize, col: usize) -> (T, T) {
        let i = row * self.width + col;
        (self.u[i], self.v[i])
    }

    pub fn same_dims(&self, other: &DisplacementField<T>) -> Result<()> {
        if self.height == other.height && self.width == other.width {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected_height: self.height,
                expected_width: self.width,
                height: other.height,
                width: other.width,
            })
        }
    }

    /// Elementwise sum; dimensions must match.
    pub fn add(&self, other: &DisplacementField<T>) -> Result<DisplacementField<T>> {
        self.same_dims(other)?;
        let u = self.u.iter().zip(&other.u).map(|(&a, &b)| a + b).collect();
        let v = self.v.iter().zip(&other.v).map(|(&a, &b)| a + b).collect();
        Ok(DisplacementField {
            height: self.height,
            width: self.width,
            u,
            v,
        })
    }

    /// Elementwise scaling (e.g. by -1 to reverse the mapping direction).
    pub fn scaled(&self, factor: T) -> DisplacementField<T> {
        DisplacementField {
            height: self.height,
            width: self.width,
            u: self.u.iter().map(|&a| a * factor).collect(),
            v: self.v.iter().map(|&a| a * factor).collect(),
        }
    }

}

/// Boolean H×W mask, e.g. distinguishing near-fault from non-fault pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionMask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl RegionMask {
    pub fn from_bits(height: usize, width: usize, bits: Vec<bool>) -> Result<Self> {
        ensure_len(&bits, height, width)?;
        Ok(Self {
            height,
            width,
            bits,
        })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                bits.push(f(r, c));
            }
        }
        Self {
            height,
            width,
            bits,
        }
    }

    pub fn filled(height: usize, width: usize, value: bool) -> Self {
        Self {
            height,
            width,
            bits: vec![value; height * width],
        }
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn complement(&self) -> RegionMask {
        RegionMask {
            height: self.height,
            width: self.width,
            bits: self.bits.iter().map(|&b| !b).collect(),
        }
    }
}

/// Displacement-range bucket of an image pair, classified by the maximum
/// per-pixel displacement magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RangeBucket {
    /// max |df| < 1 px
    VerySmall,
    /// 1 <= max |df| <= 5 px
    Small,
    /// 5 < max |df| <= 15 px
    Medium,
}

impl std::fmt::Display for RangeBucket {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RangeBucket::VerySmall => write!(f, "very_small"),
            RangeBucket::Small => write!(f, "small"),
            RangeBucket::Medium => write!(f, "medium"),
        }
    }
}

/// Maximum over pixels of `sqrt(u^2 + v^2)`, in pixels.
pub fn field_magnitude_max<T: Real>(df: &DisplacementField<T>) -> T {
    df.u()
        .iter()
        .zip(df.v())
        .map(|(&u, &v)| (u * u + v * v).sqrt())
        .fold(T::zero(), T::max)
}

/// Classify an image pair's displacement range by its maximum magnitude.
///
/// Bucket boundaries are left-closed: 1.0 px is `Small`, 5.0 px is `Small`.
/// Magnitudes above 15 px are out of the supported range.
pub fn classify_range<T: Real>(df: &DisplacementField<T>) -> Result<RangeBucket> {
    let m = field_magnitude_max(df);
    if m < T::one() {
        Ok(RangeBucket::VerySmall)
    } else if m <= T::of(5.0) {
        Ok(RangeBucket::Small)
    } else if m <= T::of(15.0) {
        Ok(RangeBucket::Medium)
    } else {
        Err(Error::OutOfRange {
            magnitude: m.to_f64().unwrap_or(f64::INFINITY),
        })
    }
}
