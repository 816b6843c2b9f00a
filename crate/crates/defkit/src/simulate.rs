//! Desk-scale synthetic fault scenes.
//!
//! Ground truth uses the elastic screw-dislocation surface profile: the
//! displacement is parallel to the fault trace with magnitude
//! `(slip / pi) * atan(dist / locking_depth)` in the signed perpendicular
//! distance, which gives the two properties the evaluation relies on — a
//! sharp across-fault discontinuity and a smooth far-field decay. Image
//! pairs are synthesized by backward-warping a value-noise texture with the
//! ground-truth field, then perturbing the second image to model the
//! weeks-to-months of surface change between acquisitions.
//!
//! Every output is a pure function of the spec: all randomness comes from
//! counter-based hashing of `(seed, stream, indices)`, so generation is
//! deterministic and safe to parallelize per pixel.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::types::{DisplacementField, Raster, RegionMask};
use crate::warp::warp_image;

/// Slip sense of a strike-slip fault.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    LeftLateral,
    RightLateral,
}

/// Geometry and kinematics of one strike-slip fault trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultSpec {
    /// A point (x, y) on the trace, in pixels.
    pub point: [f64; 2],
    /// Trace direction, radians counter-clockwise from the +x axis.
    pub angle: f64,
    /// Total across-fault offset, pixels. Far fields move by +-slip/2.
    pub slip: f64,
    /// Decay length of the arctangent profile, pixels.
    pub locking_depth: f64,
    pub sense: Sense,
}

impl FaultSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.locking_depth.is_finite() && self.locking_depth > 0.0) {
            return Err(Error::ConfigInvalid("locking_depth must be > 0".into()));
        }
        if !(self.slip.is_finite() && self.slip.abs() <= 30.0) {
            return Err(Error::ConfigInvalid(
                "fault slip must satisfy |slip| <= 30 px".into(),
            ));
        }
        if !(self.point[0].is_finite() && self.point[1].is_finite() && self.angle.is_finite()) {
            return Err(Error::ConfigInvalid("fault geometry must be finite".into()));
        }
        Ok(())
    }

    /// Signed perpendicular distance from pixel (x, y) to the trace line;
    /// positive on the left of the trace direction.
    #[inline]
    pub fn signed_distance(&self, x: f64, y: f64) -> f64 {
        let (sin, cos) = self.angle.sin_cos();
        -(x - self.point[0]) * sin + (y - self.point[1]) * cos
    }
}

/// Texture generation parameters. `seed` is the master seed for everything
/// random in a simulation (texture, noise, patches, blotches).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TextureSpec {
    pub octaves: usize,
    /// Lattice spacing of the coarsest octave, pixels.
    pub base_scale: f64,
    pub seed: u64,
}

/// Count and size (pixels) of one perturbation family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct CountSize {
    #[serde(default)]
    pub count: usize,
    #[serde(default)]
    pub size: usize,
}

/// Temporal-change perturbations applied to the post-event image only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    /// Standard deviation of additive Gaussian intensity noise.
    #[serde(default)]
    pub gaussian_sigma: f64,
    /// Maximum intensity delta of a linear illumination ramp.
    #[serde(default)]
    pub brightness_gradient: f64,
    /// Rectangles refilled with fresh texture (anthropogenic change).
    #[serde(default)]
    pub patch_changes: CountSize,
    /// Gaussian-smoothed additive blobs (vegetation change).
    #[serde(default)]
    pub vegetation_blotches: CountSize,
}

/// Full description of one synthetic scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    pub height: usize,
    pub width: usize,
    /// One to three fault traces; their fields superpose.
    pub faults: Vec<FaultSpec>,
    pub texture: TextureSpec,
    #[serde(default)]
    pub perturbations: PerturbationSpec,
    /// Pixels within this distance of any trace form the near-fault mask.
    #[serde(default = "default_halfwidth")]
    pub near_fault_halfwidth: f64,
}

fn default_halfwidth() -> f64 {
    10.0
}

impl SimulationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.height < 2 || self.width < 2 {
            return Err(Error::ConfigInvalid(
                "simulation needs height and width >= 2".into(),
            ));
        }
        if self.faults.is_empty() || self.faults.len() > 3 {
            return Err(Error::ConfigInvalid("need 1 to 3 faults".into()));
        }
        for f in &self.faults {
            f.validate()?;
        }
        if self.texture.octaves < 1 {
            return Err(Error::ConfigInvalid("texture needs octaves >= 1".into()));
        }
        if !(self.texture.base_scale.is_finite() && self.texture.base_scale >= 1.0) {
            return Err(Error::ConfigInvalid("texture base_scale must be >= 1".into()));
        }
        if self.near_fault_halfwidth < 1.0 {
            return Err(Error::ConfigInvalid(
                "near_fault_halfwidth must be >= 1".into(),
            ));
        }
        let p = &self.perturbations;
        if !(p.gaussian_sigma.is_finite() && p.gaussian_sigma >= 0.0)
            || !(p.brightness_gradient.is_finite() && p.brightness_gradient >= 0.0)
        {
            return Err(Error::ConfigInvalid(
                "perturbation magnitudes must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Everything `synthesize_pair` produces.
#[derive(Debug, Clone)]
pub struct SynthesizedPair<T> {
    pub i1: Raster<T>,
    pub i2: Raster<T>,
    pub df_gt: DisplacementField<T>,
    pub near_fault: RegionMask,
}

// Counter-based hashing: streams keep the independent random fields apart.
const STREAM_TEXTURE: u64 = 0x01;
const STREAM_NOISE: u64 = 0x02;
const STREAM_PATCH: u64 = 0x03;
const STREAM_BLOTCH: u64 = 0x04;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

fn hash4(seed: u64, stream: u64, a: u64, b: u64) -> u64 {
    let mut h = splitmix(seed ^ 0xD1B54A32D192ED03);
    h = splitmix(h ^ stream);
    h = splitmix(h ^ a);
    h = splitmix(h ^ b);
    h
}

/// Uniform in [0, 1).
fn unit(h: u64) -> f64 {
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Standard normal from two hashes (Box-Muller).
fn gaussian(h1: u64, h2: u64) -> f64 {
    let u1 = ((h1 >> 11) as f64 + 0.5) / (1u64 << 53) as f64;
    let u2 = unit(h2);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Trace-parallel displacement of one fault at every pixel.
pub fn screw_dislocation_field<T: Real>(
    spec: &FaultSpec,
    height: usize,
    width: usize,
) -> DisplacementField<T> {
    let (sin, cos) = spec.angle.sin_cos();
    let sign = match spec.sense {
        Sense::RightLateral => 1.0,
        Sense::LeftLateral => -1.0,
    };
    let amp = sign * spec.slip / std::f64::consts::PI;
    DisplacementField::from_fn(height, width, |r, c| {
        let delta = spec.signed_distance(c as f64, r as f64);
        let m = amp * (delta / spec.locking_depth).atan();
        (T::of(m * cos), T::of(m * sin))
    })
}

/// Superposed ground-truth field plus the near-fault mask (pixels within
/// `near_fault_halfwidth` of any trace).
pub fn make_ground_truth<T: Real>(
    spec: &SimulationSpec,
) -> Result<(DisplacementField<T>, RegionMask)> {
    spec.validate()?;
    let (h, w) = (spec.height, spec.width);
    let mut df = DisplacementField::<T>::zero(h, w);
    for fault in &spec.faults {
        df = df.add(&screw_dislocation_field(fault, h, w))?;
    }
    let near = RegionMask::from_fn(h, w, |r, c| {
        spec.faults
            .iter()
            .any(|f| f.signed_distance(c as f64, r as f64).abs() <= spec.near_fault_halfwidth)
    });
    Ok((df, near))
}

fn texture_value(seed: u64, octaves: usize, base_scale: f64, x: f64, y: f64) -> f64 {
    let mut value = 0.0;
    let mut amplitude = 1.0;
    let mut scale = base_scale;
    for o in 0..octaves {
        let gx = x / scale;
        let gy = y / scale;
        let ix = gx.floor();
        let iy = gy.floor();
        let fx = gx - ix;
        let fy = gy - iy;
        let (ix, iy) = (ix as i64 as u64, iy as i64 as u64);
        let stream = STREAM_TEXTURE + ((o as u64) << 8);
        let v00 = unit(hash4(seed, stream, ix, iy));
        let v01 = unit(hash4(seed, stream, ix.wrapping_add(1), iy));
        let v10 = unit(hash4(seed, stream, ix, iy.wrapping_add(1)));
        let v11 = unit(hash4(seed, stream, ix.wrapping_add(1), iy.wrapping_add(1)));
        let top = v00 * (1.0 - fx) + v01 * fx;
        let bottom = v10 * (1.0 - fx) + v11 * fx;
        value += amplitude * (top * (1.0 - fy) + bottom * fy);
        amplitude *= 0.5;
        scale = (scale * 0.5).max(1.0);
    }
    value
}

/// Multi-octave value noise normalized to [0, 1]. Deterministic in the seed.
pub fn make_texture<T: Real>(
    height: usize,
    width: usize,
    octaves: usize,
    base_scale: f64,
    seed: u64,
) -> Raster<T> {
    assert!(octaves >= 1, "octaves must be >= 1");
    assert!(base_scale >= 1.0, "base_scale must be >= 1");
    let mut raw = vec![0.0f64; height * width];
    raw.par_chunks_mut(width).enumerate().for_each(|(r, row)| {
        for (c, out) in row.iter_mut().enumerate() {
            *out = texture_value(seed, octaves, base_scale, c as f64, r as f64);
        }
    });
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let data = if span > 1e-12 {
        raw.iter().map(|&v| T::of((v - lo) / span)).collect()
    } else {
        vec![T::of(0.5); height * width]
    };
    Raster::from_vec(height, width, data).expect("texture values are finite by construction")
}

fn apply_perturbations<T: Real>(img: &mut [T], spec: &SimulationSpec) {
    let (h, w) = (spec.height, spec.width);
    let p = &spec.perturbations;
    let seed = spec.texture.seed;

    // Anthropogenic change: rectangles refilled with fresh texture.
    let ps = p.patch_changes.size;
    if ps > 0 && ps <= w && ps <= h {
        for k in 0..p.patch_changes.count {
            let k64 = k as u64;
            let x0 = (hash4(seed, STREAM_PATCH, k64, 0) % (w - ps + 1) as u64) as usize;
            let y0 = (hash4(seed, STREAM_PATCH, k64, 1) % (h - ps + 1) as u64) as usize;
            let fresh_seed = splitmix(seed ^ (0xF00D_0000 + k64));
            let fresh = make_texture::<T>(
                ps,
                ps,
                spec.texture.octaves,
                (spec.texture.base_scale / 2.0).max(1.0),
                fresh_seed,
            );
            for r in 0..ps {
                for c in 0..ps {
                    img[(y0 + r) * w + x0 + c] = fresh.at(r, c);
                }
            }
        }
    }

    // Vegetation change: smooth additive blobs with hashed sign/amplitude.
    let bs = p.vegetation_blotches.size;
    if bs > 0 {
        for k in 0..p.vegetation_blotches.count {
            let k64 = k as u64;
            let cx = (hash4(seed, STREAM_BLOTCH, k64, 0) % w as u64) as f64;
            let cy = (hash4(seed, STREAM_BLOTCH, k64, 1) % h as u64) as f64;
            let mag = 0.1 + 0.15 * unit(hash4(seed, STREAM_BLOTCH, k64, 2));
            let amp = if hash4(seed, STREAM_BLOTCH, k64, 3) & 1 == 0 {
                mag
            } else {
                -mag
            };
            let sigma = bs as f64 / 4.0;
            let reach = (3.0 * sigma).ceil() as i64;
            let inv = 1.0 / (2.0 * sigma * sigma);
            for dr in -reach..=reach {
                let r = cy as i64 + dr;
                if r < 0 || r >= h as i64 {
                    continue;
                }
                for dc in -reach..=reach {
                    let c = cx as i64 + dc;
                    if c < 0 || c >= w as i64 {
                        continue;
                    }
                    let d2 = (dr * dr + dc * dc) as f64;
                    let delta = amp * (-d2 * inv).exp();
                    let idx = r as usize * w + c as usize;
                    img[idx] = img[idx] + T::of(delta);
                }
            }
        }
    }

    // Linear illumination ramp, extreme deltas at opposite corners.
    if p.brightness_gradient > 0.0 {
        let g = p.brightness_gradient;
        for r in 0..h {
            for c in 0..w {
                let ramp = (c as f64 / (w - 1) as f64 - 0.5) + (r as f64 / (h - 1) as f64 - 0.5);
                let idx = r * w + c;
                img[idx] = img[idx] + T::of(g * ramp);
            }
        }
    }

    // Additive Gaussian sensor/temporal noise.
    if p.gaussian_sigma > 0.0 {
        let sigma = p.gaussian_sigma;
        img.par_chunks_mut(w).enumerate().for_each(|(r, row)| {
            for (c, v) in row.iter_mut().enumerate() {
                let h1 = hash4(seed, STREAM_NOISE, r as u64, c as u64);
                let h2 = hash4(seed, STREAM_NOISE + 0x100, r as u64, c as u64);
                *v = *v + T::of(sigma * gaussian(h1, h2));
            }
        });
    }
}

/// Generate a pre/post image pair: `i1` is clean texture, `i2` samples `i1`
/// at `(x + u, y + v)` (the displacement-field convention) and then receives
/// the configured perturbations.
pub fn synthesize_pair<T: Real>(spec: &SimulationSpec) -> Result<SynthesizedPair<T>> {
    spec.validate()?;
    let i1 = make_texture::<T>(
        spec.height,
        spec.width,
        spec.texture.octaves,
        spec.texture.base_scale,
        spec.texture.seed,
    );
    let (df_gt, near_fault) = make_ground_truth::<T>(spec)?;
    let warped = warp_image(&i1, &df_gt)?;
    let mut data = warped.warped.data().to_vec();
    apply_perturbations(&mut data, spec);
    let i2 = Raster::from_vec(spec.height, spec.width, data)?;
    Ok(SynthesizedPair {
        i1,
        i2,
        df_gt,
        near_fault,
    })
}

/// Debug-mode pair for estimator checks: a constant-shift field applied to a
/// plain texture, no fault and no perturbation.
pub fn synthesize_shifted_pair<T: Real>(
    height: usize,
    width: usize,
    texture: &TextureSpec,
    shift: (f64, f64),
) -> Result<(Raster<T>, Raster<T>, DisplacementField<T>)> {
    let i1 = make_texture::<T>(
        height,
        width,
        texture.octaves,
        texture.base_scale,
        texture.seed,
    );
    let df = DisplacementField::constant(height, width, T::of(shift.0), T::of(shift.1));
    let i2 = warp_image(&i1, &df)?.warped;
    Ok((i1, i2, df))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::field_magnitude_max;
    use approx::assert_abs_diff_eq;

    fn fault() -> FaultSpec {
        FaultSpec {
            point: [20.0, 15.0],
            angle: 0.4,
            slip: 2.0,
            locking_depth: 3.0,
            sense: Sense::RightLateral,
        }
    }

    #[test]
    fn zero_slip_gives_zero_field() {
        let f = FaultSpec {
            slip: 0.0,
            ..fault()
        };
        let df = screw_dislocation_field::<f64>(&f, 16, 16);
        assert_eq!(field_magnitude_max(&df), 0.0);
    }

    #[test]
    fn far_field_approaches_half_slip() {
        let f = FaultSpec {
            point: [0.0, 0.0],
            angle: 0.0,
            slip: 2.0,
            locking_depth: 0.01,
            sense: Sense::RightLateral,
        };
        // Row 2 sits at delta = 2 >= 100 * locking_depth.
        let df = screw_dislocation_field::<f64>(&f, 4, 4);
        let (u, v) = df.at(2, 1);
        let mag = (u * u + v * v).sqrt();
        assert!((0.49 * 2.0..=0.5 * 2.0).contains(&mag), "mag = {mag}");
    }

    #[test]
    fn profile_is_antisymmetric_across_the_trace() {
        let f = FaultSpec {
            point: [0.0, 8.0],
            angle: 0.0,
            slip: 3.0,
            locking_depth: 2.0,
            sense: Sense::LeftLateral,
        };
        let df = screw_dislocation_field::<f64>(&f, 17, 5);
        for d in 1..=8 {
            let (u_plus, v_plus) = df.at(8 + d, 2);
            let (u_minus, v_minus) = df.at(8 - d, 2);
            assert_abs_diff_eq!(u_plus, -u_minus, epsilon = 1e-12);
            assert_abs_diff_eq!(v_plus, -v_minus, epsilon = 1e-12);
        }
    }

    fn base_spec() -> SimulationSpec {
        SimulationSpec {
            height: 48,
            width: 40,
            faults: vec![fault()],
            texture: TextureSpec {
                octaves: 3,
                base_scale: 16.0,
                seed: 11,
            },
            perturbations: PerturbationSpec::default(),
            near_fault_halfwidth: 6.0,
        }
    }

    #[test]
    fn single_fault_ground_truth_matches_screw_field() {
        let spec = base_spec();
        let (df, _) = make_ground_truth::<f64>(&spec).unwrap();
        let direct = screw_dislocation_field::<f64>(&spec.faults[0], 48, 40);
        assert_eq!(df, direct);
    }

    #[test]
    fn mirror_symmetric_parallel_faults_cancel_on_the_midline() {
        // Two parallel traces with equal slip: between them each trace pulls
        // the block the opposite way, so the superposed motion vanishes on
        // the equidistant line (the signed distances negate there).
        let mut spec = base_spec();
        spec.height = 41;
        spec.faults = vec![
            FaultSpec {
                point: [0.0, 10.0],
                angle: 0.0,
                slip: 4.0,
                locking_depth: 2.0,
                sense: Sense::RightLateral,
            },
            FaultSpec {
                point: [0.0, 30.0],
                angle: 0.0,
                slip: 4.0,
                locking_depth: 2.0,
                sense: Sense::RightLateral,
            },
        ];
        let (df, _) = make_ground_truth::<f64>(&spec).unwrap();
        for c in 0..spec.width {
            let (u, v) = df.at(20, c);
            assert!(u.abs() < 1e-9 && v.abs() < 1e-9);
        }
    }

    #[test]
    fn near_fault_mask_matches_brute_force_distance_scan() {
        let spec = base_spec();
        let (_, mask) = make_ground_truth::<f64>(&spec).unwrap();
        let mut count = 0usize;
        for r in 0..spec.height {
            for c in 0..spec.width {
                let d = spec.faults[0].signed_distance(c as f64, r as f64).abs();
                let inside = d <= spec.near_fault_halfwidth;
                assert_eq!(mask.at(r, c), inside, "pixel ({r}, {c})");
                count += inside as usize;
            }
        }
        assert_eq!(mask.count(), count);
    }

    #[test]
    fn texture_is_deterministic_and_normalized() {
        let a = make_texture::<f64>(64, 64, 4, 24.0, 77);
        let b = make_texture::<f64>(64, 64, 4, 24.0, 77);
        assert_eq!(a, b);
        let lo = a.data().iter().copied().fold(f64::INFINITY, f64::min);
        let hi = a.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(lo >= 0.0 && hi <= 1.0);
        assert!(hi - lo >= 0.5);
    }

    #[test]
    fn normalization_holds_across_many_seeds() {
        for seed in 0..100 {
            let t = make_texture::<f64>(64, 64, 3, 16.0, seed);
            let lo = t.data().iter().copied().fold(f64::INFINITY, f64::min);
            let hi = t.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
            assert!(lo >= 0.0 && hi <= 1.0 && hi - lo >= 0.5, "seed {seed}");
        }
    }

    #[test]
    fn single_octave_full_scale_is_a_bilinear_surface() {
        // One lattice cell covers the whole raster, so second differences of
        // the surface along any axis vanish and the mixed structure is
        // rank-one: check the bilinear identity on arbitrary 2x2 sub-blocks
        // scaled by their spans.
        let w = 32;
        let h = 32;
        let t = make_texture::<f64>(h, w, 1, w as f64, 5);
        for r in 1..h - 1 {
            for c in 1..w - 1 {
                let along_x = t.at(r, c + 1) + t.at(r, c - 1) - 2.0 * t.at(r, c);
                let along_y = t.at(r + 1, c) + t.at(r - 1, c) - 2.0 * t.at(r, c);
                assert_abs_diff_eq!(along_x, 0.0, epsilon = 1e-9);
                assert_abs_diff_eq!(along_y, 0.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn zero_slip_zero_perturbation_pair_is_identical() {
        let mut spec = base_spec();
        spec.faults[0].slip = 0.0;
        let pair = synthesize_pair::<f64>(&spec).unwrap();
        assert_eq!(pair.i1, pair.i2);
    }

    #[test]
    fn synthesis_is_deterministic() {
        let mut spec = base_spec();
        spec.perturbations = PerturbationSpec {
            gaussian_sigma: 0.02,
            brightness_gradient: 0.05,
            patch_changes: CountSize { count: 2, size: 8 },
            vegetation_blotches: CountSize { count: 2, size: 6 },
        };
        let a = synthesize_pair::<f64>(&spec).unwrap();
        let b = synthesize_pair::<f64>(&spec).unwrap();
        assert_eq!(a.i1, b.i1);
        assert_eq!(a.i2, b.i2);
        assert_eq!(a.df_gt, b.df_gt);
        assert_eq!(a.near_fault, b.near_fault);
    }

    #[test]
    fn validation_rejects_bad_specs() {
        let mut spec = base_spec();
        spec.faults.clear();
        assert!(spec.validate().is_err());
        let mut spec = base_spec();
        spec.faults[0].locking_depth = 0.0;
        assert!(spec.validate().is_err());
        let mut spec = base_spec();
        spec.faults[0].slip = 40.0;
        assert!(spec.validate().is_err());
        let mut spec = base_spec();
        spec.near_fault_halfwidth = 0.5;
        assert!(spec.validate().is_err());
    }
}
