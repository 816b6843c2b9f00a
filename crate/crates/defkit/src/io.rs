//! Bit-exact file formats: the interchange contract for the CLI and for any
//! alternate-language implementation.
//!
//! # Float-binary container
//!
//! ```text
//! bytes 0..8   magic "DEFKFLD1"
//! bytes 8..12  height, u32 little-endian (1..=65535)
//! bytes 12..16 width,  u32 little-endian (1..=65535)
//! byte  16     component count: 2 for displacement fields, 1 for scalar
//!              grids and masks
//! bytes 17..   payload: one row-major plane of f32 little-endian values per
//!              component; fields store the u plane then the v plane; masks
//!              store 0.0 / 1.0
//! ```
//!
//! Payload precision is f32 regardless of the in-memory scalar type; reading
//! back into `f32` or `f64` is exact, so read -> write round-trips are
//! bit-identical and write -> read round-trips are bit-identical whenever the
//! values are f32-representable.
//!
//! PGM (P5, 8- or 16-bit, maxval mapped linearly onto [0, 1]) is kept for
//! visual inspection of rasters only. Configs and reports are JSON with
//! unknown keys rejected.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::MetricsReport;
use crate::scalar::Real;
use crate::types::{DisplacementField, Raster, RegionMask};
use crate::warp::bilinear_sample;

const MAGIC: &[u8; 8] = b"DEFKFLD1";
const HEADER_LEN: usize = 17;
const MAX_SIDE: usize = 65535;

fn check_side(side: usize) -> Result<u32> {
    if side == 0 || side > MAX_SIDE {
        return Err(Error::DimensionOverflow { side: side as u64 });
    }
    Ok(side as u32)
}

fn to_f32<T: Real>(v: T, what: &'static str) -> Result<f32> {
    let x = v.to_f32().unwrap_or(f32::NAN);
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::NonFinite { what })
    }
}

fn write_container<T: Real>(
    path: &Path,
    height: usize,
    width: usize,
    planes: &[&[T]],
) -> Result<()> {
    let h = check_side(height)?;
    let w = check_side(width)?;
    let mut bytes =
        Vec::with_capacity(HEADER_LEN + planes.len() * height * width * 4);
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&h.to_le_bytes());
    bytes.extend_from_slice(&w.to_le_bytes());
    bytes.push(planes.len() as u8);
    for plane in planes {
        debug_assert_eq!(plane.len(), height * width);
        for &v in plane.iter() {
            bytes.extend_from_slice(&to_f32(v, "container payload")?.to_le_bytes());
        }
    }
    fs::write(path, bytes)?;
    Ok(())
}

fn read_container(path: &Path, expected_components: u8) -> Result<(usize, usize, Vec<Vec<f32>>)> {
    let bytes = fs::read(path)?;
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated);
    }
    if &bytes[0..8] != MAGIC {
        return Err(Error::BadMagic);
    }
    let height = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let width = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    check_side(height)?;
    check_side(width)?;
    let components = bytes[16];
    if components != expected_components {
        return Err(Error::ComponentMismatch {
            expected: expected_components,
            got: components,
        });
    }
    let plane_len = height * width;
    let expected_len = HEADER_LEN + components as usize * plane_len * 4;
    if bytes.len() != expected_len {
        return Err(Error::Truncated);
    }
    let mut planes = Vec::with_capacity(components as usize);
    let mut offset = HEADER_LEN;
    for _ in 0..components {
        let mut plane = Vec::with_capacity(plane_len);
        for _ in 0..plane_len {
            plane.push(f32::from_le_bytes(
                bytes[offset..offset + 4].try_into().unwrap(),
            ));
            offset += 4;
        }
        planes.push(plane);
    }
    Ok((height, width, planes))
}

pub fn write_raster<T: Real>(path: impl AsRef<Path>, raster: &Raster<T>) -> Result<()> {
    write_container(
        path.as_ref(),
        raster.height(),
        raster.width(),
        &[raster.data()],
    )
}

pub fn read_raster<T: Real>(path: impl AsRef<Path>) -> Result<Raster<T>> {
    let (h, w, mut planes) = read_container(path.as_ref(), 1)?;
    let data = planes.pop().unwrap().into_iter().map(T::of_f32).collect();
    Raster::from_vec(h, w, data)
}

pub fn write_field<T: Real>(path: impl AsRef<Path>, field: &DisplacementField<T>) -> Result<()> {
    write_container(
        path.as_ref(),
        field.height(),
        field.width(),
        &[field.u(), field.v()],
    )
}

pub fn read_field<T: Real>(path: impl AsRef<Path>) -> Result<DisplacementField<T>> {
    let (h, w, mut planes) = read_container(path.as_ref(), 2)?;
    let v = planes.pop().unwrap().into_iter().map(T::of_f32).collect();
    let u = planes.pop().unwrap().into_iter().map(T::of_f32).collect();
    DisplacementField::from_planes(h, w, u, v)
}

pub fn write_mask(path: impl AsRef<Path>, mask: &RegionMask) -> Result<()> {
    let plane: Vec<f64> = mask
        .bits()
        .iter()
        .map(|&b| if b { 1.0 } else { 0.0 })
        .collect();
    write_container(path.as_ref(), mask.height(), mask.width(), &[&plane])
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<RegionMask> {
    let (h, w, planes) = read_container(path.as_ref(), 1)?;
    let bits = planes[0].iter().map(|&v| v > 0.5).collect();
    RegionMask::from_bits(h, w, bits)
}

/// Write a raster as binary PGM (P5). Values are clamped to [0, 1] and
/// mapped linearly onto `0..=maxval`; 16-bit samples are big-endian per the
/// format. Quantization error on read-back is at most `1 / (2 * maxval)`.
pub fn write_raster_pgm<T: Real>(
    path: impl AsRef<Path>,
    raster: &Raster<T>,
    maxval: u16,
) -> Result<()> {
    if maxval == 0 {
        return Err(Error::ConfigInvalid("PGM maxval must be >= 1".into()));
    }
    let mut out = Vec::new();
    write!(
        out,
        "P5\n{} {}\n{}\n",
        raster.width(),
        raster.height(),
        maxval
    )?;
    let scale = maxval as f64;
    for &v in raster.data() {
        let v = v.to_f64().unwrap_or(0.0).clamp(0.0, 1.0);
        let q = (v * scale).round() as u16;
        if maxval < 256 {
            out.push(q as u8);
        } else {
            out.extend_from_slice(&q.to_be_bytes());
        }
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_raster_pgm<T: Real>(path: impl AsRef<Path>) -> Result<Raster<T>> {
    let bytes = fs::read(path)?;
    let mut pos = 0usize;

    let mut token = |bytes: &[u8]| -> Result<String> {
        // Skip whitespace and '#' comments.
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Truncated);
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };

    if token(&bytes)? != "P5" {
        return Err(Error::BadPgm("expected P5 magic".into()));
    }
    let parse = |s: String| -> Result<usize> {
        s.parse::<usize>()
            .map_err(|_| Error::BadPgm(format!("bad header token {s:?}")))
    };
    let width = parse(token(&bytes)?)?;
    let height = parse(token(&bytes)?)?;
    let maxval = parse(token(&bytes)?)?;
    if !(1..=65535).contains(&maxval) {
        return Err(Error::BadPgm(format!("maxval {maxval} out of range")));
    }
    check_side(width)?;
    check_side(height)?;
    // Exactly one whitespace byte separates the header from the samples.
    pos += 1;
    let bytes_per = if maxval < 256 { 1 } else { 2 };
    let need = height * width * bytes_per;
    if bytes.len() < pos || bytes.len() - pos != need {
        return Err(Error::Truncated);
    }
    let scale = T::of(maxval as f64);
    let mut data = Vec::with_capacity(height * width);
    for i in 0..height * width {
        let q = if bytes_per == 1 {
            bytes[pos + i] as u16
        } else {
            u16::from_be_bytes([bytes[pos + 2 * i], bytes[pos + 2 * i + 1]])
        };
        data.push(T::of(q as f64) / scale);
    }
    Raster::from_vec(height, width, data)
}

/// A straight sampling line: start point, direction, length (pixels).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileLine {
    pub x0: f64,
    pub y0: f64,
    /// Radians counter-clockwise from the +x axis.
    pub angle: f64,
    pub length: f64,
}

/// One profile row: arc length along the line plus the interpolated field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileSample<T> {
    pub arc_length: T,
    pub u: T,
    pub v: T,
}

/// Bilinearly sample `(u, v)` at `samples` evenly spaced points along the
/// line. Every sample point must land inside the field bounds.
pub fn extract_profile<T: Real>(
    df: &DisplacementField<T>,
    line: &ProfileLine,
    samples: usize,
) -> Result<Vec<ProfileSample<T>>> {
    if samples < 2 {
        return Err(Error::ConfigInvalid("profile needs at least 2 samples".into()));
    }
    if !(line.length.is_finite() && line.length > 0.0) {
        return Err(Error::ConfigInvalid("profile length must be > 0".into()));
    }
    let (h, w) = (df.height(), df.width());
    let (sin, cos) = line.angle.sin_cos();
    // Planes as rasters for interpolation; construction cannot fail on a
    // valid field.
    let u_plane = Raster::from_vec(h, w, df.u().to_vec())?;
    let v_plane = Raster::from_vec(h, w, df.v().to_vec())?;

    let mut rows = Vec::with_capacity(samples);
    for i in 0..samples {
        let s = line.length * i as f64 / (samples - 1) as f64;
        let x = line.x0 + s * cos;
        let y = line.y0 + s * sin;
        if x < 0.0 || y < 0.0 || x > (w - 1) as f64 || y > (h - 1) as f64 {
            return Err(Error::LineOutOfBounds);
        }
        let (u, ok_u) = bilinear_sample(&u_plane, T::of(x), T::of(y));
        let (v, ok_v) = bilinear_sample(&v_plane, T::of(x), T::of(y));
        debug_assert!(ok_u && ok_v);
        rows.push(ProfileSample {
            arc_length: T::of(s),
            u,
            v,
        });
    }
    Ok(rows)
}

/// Nine significant digits, scientific notation.
fn sig9(v: f64) -> String {
    format!("{v:.8e}")
}

/// Write a profile as CSV with columns `s,u,v`.
pub fn write_profile_csv<T: Real>(
    path: impl AsRef<Path>,
    rows: &[ProfileSample<T>],
) -> Result<()> {
    let mut out = String::from("s,u,v\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{}\n",
            sig9(row.arc_length.to_f64().unwrap_or(f64::NAN)),
            sig9(row.u.to_f64().unwrap_or(f64::NAN)),
            sig9(row.v.to_f64().unwrap_or(f64::NAN)),
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Write metric reports as CSV, one row per report.
pub fn write_reports_csv(path: impl AsRef<Path>, reports: &[MetricsReport]) -> Result<()> {
    let mut out = String::from(
        "estimator,regularizer,bucket,epe,smoothness_near_fault,smoothness_non_fault,\
         near_fault_pixels,non_fault_pixels\n",
    );
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.estimator_name,
            r.regularizer_name,
            r.bucket,
            sig9(r.epe),
            sig9(r.smoothness_near_fault),
            sig9(r.smoothness_non_fault),
            r.near_fault_pixels,
            r.non_fault_pixels,
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Pretty JSON with a trailing newline; field order is declaration order, so
/// output bytes are deterministic.
pub fn write_json<V: Serialize>(path: impl AsRef<Path>, value: &V) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json<V: DeserializeOwned>(path: impl AsRef<Path>) -> Result<V> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}
