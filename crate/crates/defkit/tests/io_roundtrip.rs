//! Serialization round-trip properties for the binary containers.

use defkit::io::{
    read_field, read_mask, read_raster, write_field, write_mask, write_raster,
};
use defkit::{DisplacementField, Raster, RegionMask};
use proptest::prelude::*;

/// f32-representable doubles, the container payload domain.
fn payload_value() -> impl Strategy<Value = f64> {
    (-1.0e3f32..1.0e3f32).prop_map(|v| v as f64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn raster_write_read_is_bit_identical(
        h in 1usize..12,
        w in 1usize..12,
        seed in any::<u64>(),
    ) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.ras");
        let mut state = seed;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            f32::from_bits(0x3f000000 | ((state >> 40) as u32 & 0x3fffff)) as f64
        };
        let raster = Raster::from_fn(h, w, |_, _| next());
        write_raster(&path, &raster).unwrap();
        let back: Raster<f64> = read_raster(&path).unwrap();
        prop_assert_eq!(back, raster);
    }

    #[test]
    fn field_write_read_is_bit_identical(
        h in 1usize..10,
        w in 1usize..10,
        values in prop::collection::vec(payload_value(), 200),
    ) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.fld");
        let n = h * w;
        let u: Vec<f64> = values[..n].to_vec();
        let v: Vec<f64> = values[n..2 * n].to_vec();
        let field = DisplacementField::from_planes(h, w, u, v).unwrap();
        write_field(&path, &field).unwrap();
        let back: DisplacementField<f64> = read_field(&path).unwrap();
        prop_assert_eq!(back, field);
    }

    #[test]
    fn mask_write_read_is_exact(
        h in 1usize..12,
        w in 1usize..12,
        bits in prop::collection::vec(any::<bool>(), 144),
    ) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.msk");
        let mask = RegionMask::from_bits(h, w, bits[..h * w].to_vec()).unwrap();
        write_mask(&path, &mask).unwrap();
        prop_assert_eq!(read_mask(&path).unwrap(), mask);
    }

    #[test]
    fn f32_fields_round_trip_through_the_container(
        h in 2usize..8,
        w in 2usize..8,
        seed in any::<u32>(),
    ) {
        // Native single-precision instantiation: payload precision equals
        // the scalar, so round trips are always exact.
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x32.fld");
        let mut s = seed as u64;
        let mut next = move || {
            s = s.wrapping_mul(2862933555777941757).wrapping_add(3037000493);
            ((s >> 33) as f32 / (1u32 << 31) as f32) * 4.0 - 2.0
        };
        let field = DisplacementField::<f32>::from_fn(h, w, |_, _| (next(), next()));
        write_field(&path, &field).unwrap();
        let back: DisplacementField<f32> = read_field(&path).unwrap();
        prop_assert_eq!(back, field);
    }
}
