//! Scene-generation properties that tie the simulator to the metrics and
//! profile machinery.

use defkit::io::{extract_profile, ProfileLine};
use defkit::metrics::{epe, smoothness};
use defkit::simulate::{
    make_ground_truth, synthesize_pair, CountSize, FaultSpec, PerturbationSpec, Sense,
    SimulationSpec, TextureSpec,
};
use defkit::estimate::{estimate_flow, EstimatorConfig};
use defkit::RegionMask;

fn scene(seed: u64, perturbed: bool) -> SimulationSpec {
    SimulationSpec {
        height: 128,
        width: 128,
        faults: vec![FaultSpec {
            point: [64.0, 64.0],
            angle: 1.1,
            slip: 1.6,
            locking_depth: 3.0,
            sense: Sense::RightLateral,
        }],
        texture: TextureSpec {
            octaves: 4,
            base_scale: 32.0,
            seed,
        },
        perturbations: if perturbed {
            PerturbationSpec {
                gaussian_sigma: 0.03,
                brightness_gradient: 0.05,
                patch_changes: CountSize { count: 2, size: 16 },
                vegetation_blotches: CountSize { count: 3, size: 12 },
            }
        } else {
            PerturbationSpec::default()
        },
        near_fault_halfwidth: 10.0,
    }
}

#[test]
fn ground_truth_smoothness_concentrates_near_the_fault() {
    // The arctangent profile's gradient energy concentrates within the mask:
    // near-fault mean squared gradient at least 10x the non-fault one.
    let spec = scene(42, false);
    let (gt, near) = make_ground_truth::<f64>(&spec).unwrap();
    let near_s = smoothness(&gt, &near).unwrap();
    let non_s = smoothness(&gt, &near.complement()).unwrap();
    assert!(
        near_s >= 10.0 * non_s,
        "near {near_s} vs non {non_s}: ratio {}",
        near_s / non_s
    );
}

#[test]
fn profile_across_the_fault_shows_the_dislocation_jump() {
    // Sample perpendicular to the trace, centered on it; the u span over
    // the profile follows the closed-form arctangent difference projected
    // onto the trace direction.
    let spec = scene(7, false);
    let fault = spec.faults[0];
    let (gt, _) = make_ground_truth::<f64>(&spec).unwrap();
    let half_len = 40.0;
    let perp = fault.angle + std::f64::consts::FRAC_PI_2;
    let line = ProfileLine {
        x0: fault.point[0] - half_len * perp.cos(),
        y0: fault.point[1] - half_len * perp.sin(),
        angle: perp,
        length: 2.0 * half_len,
    };
    let rows = extract_profile(&gt, &line, 81).unwrap();
    let u_first = rows.first().unwrap().u;
    let u_last = rows.last().unwrap().u;
    let expect_span = fault.slip * (2.0 / std::f64::consts::PI)
        * (half_len / fault.locking_depth).atan()
        * fault.angle.cos();
    let span = u_last - u_first;
    assert!(
        (span - expect_span).abs() <= 0.05 * expect_span.abs(),
        "span {span} vs closed form {expect_span}"
    );
}

#[test]
fn constant_shift_debug_pair_closes_the_loop_with_the_estimator() {
    let texture = TextureSpec {
        octaves: 4,
        base_scale: 32.0,
        seed: 3,
    };
    let (i1, i2, gt) =
        defkit::simulate::synthesize_shifted_pair::<f64>(128, 128, &texture, (2.0, 1.0)).unwrap();
    let cfg = EstimatorConfig::default();
    let df = estimate_flow(&i1, &i2, &cfg).unwrap();
    let border = 16;
    let mask = RegionMask::from_fn(128, 128, |r, c| {
        r >= border && c >= border && r < 128 - border && c < 128 - border
    });
    let e = epe(&df, &gt, Some(&mask)).unwrap();
    assert!(e < 0.05, "interior EPE {e} for integer debug shift");
}

#[test]
fn perturbations_degrade_the_raw_estimate() {
    // Controlled A/B with a shared seed: same ground truth, same texture,
    // perturbations only on the second image of one pair.
    let clean = scene(1234, false);
    let perturbed = scene(1234, true);
    let a = synthesize_pair::<f64>(&clean).unwrap();
    let b = synthesize_pair::<f64>(&perturbed).unwrap();
    assert_eq!(a.df_gt, b.df_gt);
    assert_eq!(a.i1, b.i1);

    let cfg = EstimatorConfig {
        pyramid_levels: 1,
        ..EstimatorConfig::default()
    };
    let df_clean = estimate_flow(&a.i1, &a.i2, &cfg).unwrap();
    let df_pert = estimate_flow(&b.i1, &b.i2, &cfg).unwrap();
    let border = 16;
    let mask = RegionMask::from_fn(128, 128, |r, c| {
        r >= border && c >= border && r < 128 - border && c < 128 - border
    });
    let epe_clean = epe(&df_clean, &a.df_gt, Some(&mask)).unwrap();
    let epe_pert = epe(&df_pert, &b.df_gt, Some(&mask)).unwrap();
    println!("clean EPE {epe_clean:.4}, perturbed EPE {epe_pert:.4}");
    assert!(
        epe_pert > epe_clean,
        "perturbations did not degrade the estimate: {epe_pert} <= {epe_clean}"
    );
}
