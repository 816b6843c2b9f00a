//! defkit: dense ground-displacement estimation from grayscale image pairs.
//!
//! The pipeline mirrors how optical geodesy treats co-seismic deformation:
//!
//! 1. [`simulate`] — desk-scale synthetic fault scenes: strike-slip
//!    displacement fields with sharp traces, value-noise textures, image-pair
//!    synthesis by backward warping, and temporal-change perturbations.
//! 2. [`estimate`] — classical dense sub-pixel estimation by ZNCC patch
//!    matching over a coarse-to-fine pyramid.
//! 3. [`refine`] — iterative refinement with explicit warping around any
//!    estimator, plus the attenuated intermediate loss.
//! 4. [`regularize`] — a-posteriori denoising: L2-gradient, TV and log-TV
//!    penalties, exact 1D proximal operators, reweighted-L1, and Dykstra
//!    row/column splitting in 2D.
//! 5. [`metrics`] — endpoint error and gradient-energy smoothness, reported
//!    separately on near-fault and non-fault regions.
//! 6. [`io`] — bit-exact binary containers, PGM, JSON configs and reports,
//!    displacement profiles.
//!
//! All numeric code is generic over the scalar type via [`Real`]; the aliases
//! below fix the common instantiations.

pub mod error;
pub mod estimate;
pub mod io;
pub mod metrics;
pub mod refine;
pub mod regularize;
pub mod scalar;
pub mod simulate;
pub mod types;
pub mod warp;

pub use error::{Error, Result};
pub use scalar::Real;
pub use types::{
    classify_range, field_magnitude_max, DisplacementField, RangeBucket, Raster, RegionMask,
};

/// Single-precision raster.
pub type Raster32 = Raster<f32>;
/// Double-precision raster.
pub type Raster64 = Raster<f64>;
/// Single-precision displacement field.
pub type Field32 = DisplacementField<f32>;
/// Double-precision displacement field.
pub type Field64 = DisplacementField<f64>;
