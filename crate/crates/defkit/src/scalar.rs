//! Scalar abstraction over the floating-point element type.
//!
//! Every grid, field and solver in this crate is generic over [`Real`], so the
//! whole pipeline can run in `f32` or `f64`. Concrete aliases for the common
//! instantiations live at the crate root.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float + FromPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Cast an `f64` constant (tolerance, config value) into `Self`.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("constant not representable by scalar type")
    }

    /// Cast a `usize` (pixel count, index) into `Self`.
    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("count not representable by scalar type")
    }

    /// Exact widening cast from an `f32` container value.
    #[inline]
    fn of_f32(x: f32) -> Self {
        Self::from_f32(x).expect("f32 value not representable by scalar type")
    }
}

impl Real for f32 {}
impl Real for f64 {}
