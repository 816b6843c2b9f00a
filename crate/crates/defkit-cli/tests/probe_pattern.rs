//! Temporary probe: scan preset parameters for the regularization pattern.

use defkit::estimate::{estimate_flow, EstimatorConfig, Subpixel};
use defkit::metrics::{epe, smoothness};
use defkit::regularize::{regularize_field, PenaltyKind, PenaltySpec, RegularizerConfig};
use defkit::simulate::{
    synthesize_pair, CountSize, FaultSpec, PerturbationSpec, Sense, SimulationSpec, TextureSpec,
};

#[allow(clippy::too_many_arguments)]
fn scene(
    sigma: f64,
    patches: usize,
    blotches: usize,
    d: f64,
    octaves: usize,
    base: f64,
    seed: u64,
) -> SimulationSpec {
    SimulationSpec {
        height: 256,
        width: 256,
        faults: vec![FaultSpec {
            point: [120.0, 140.0],
            angle: 1.05,
            slip: 1.6,
            locking_depth: d,
            sense: Sense::RightLateral,
        }],
        texture: TextureSpec {
            octaves,
            base_scale: base,
            seed,
        },
        perturbations: PerturbationSpec {
            gaussian_sigma: sigma,
            brightness_gradient: 0.05,
            patch_changes: CountSize {
                count: patches,
                size: 10,
            },
            vegetation_blotches: CountSize {
                count: blotches,
                size: 14,
            },
        },
        near_fault_halfwidth: 10.0,
    }
}

#[test]
fn probe() {
    println!("sig    ptch oct base r  step eps   | epe_raw near_raw non_raw  | nonl-4–3–2 dr%  | near-3 dr%");
    for &(sigma, patches, octaves, base, r, step, eps) in &[
        (0.008f64, 0usize, 4usize, 48.0f64, 6usize, 2usize, 1e-3f64),
        (0.008, 0, 4, 48.0, 8, 2, 1e-3),
        (0.012, 0, 4, 48.0, 6, 2, 1e-3),
        (0.012, 2, 4, 48.0, 6, 2, 1e-3),
        (0.02, 0, 4, 48.0, 6, 2, 1e-3),
        (0.012, 0, 4, 48.0, 6, 2, 1e-2),
        (0.012, 0, 4, 48.0, 6, 3, 1e-3),
        (0.02, 0, 4, 48.0, 8, 2, 1e-2),
    ] {
        let spec = scene(sigma, patches, 4, 3.0, octaves, base, 102);
        let pair = synthesize_pair::<f64>(&spec).unwrap();
        let est_cfg = EstimatorConfig {
            patch_radius: r,
            grid_step: step,
            pyramid_levels: 1,
            subpixel: Subpixel::QuadraticFit3x3,
            ..EstimatorConfig::default()
        };
        let raw = estimate_flow(&pair.i1, &pair.i2, &est_cfg).unwrap();
        let near = &pair.near_fault;
        let non = near.complement();
        let e_raw = epe(&raw, &pair.df_gt, None).unwrap();
        let s_near_raw = smoothness(&raw, near).unwrap();
        let s_non_raw = smoothness(&raw, &non).unwrap();

        let mut non_drops = Vec::new();
        let mut near_drop_mid = 0.0;
        for lam in [1e-4, 1e-3, 1e-2] {
            let cfg = RegularizerConfig {
                penalty: PenaltySpec {
                    kind: PenaltyKind::Ltv,
                    epsilon: eps,
                },
                lambda: lam,
                ..RegularizerConfig::default()
            };
            let den = regularize_field(&raw, &cfg).unwrap().field;
            non_drops.push(100.0 * (1.0 - smoothness(&den, &non).unwrap() / s_non_raw));
            if lam == 1e-3 {
                near_drop_mid = 100.0 * (1.0 - smoothness(&den, near).unwrap() / s_near_raw);
            }
        }
        println!(
            "{sigma:<6} {patches:<4} {octaves:<3} {base:<4} {r:<2} {step:<4} {eps:<5} | {e_raw:<7.3} {s_near_raw:<8.4} {s_non_raw:<8.5} | {:>5.1} {:>5.1} {:>5.1} | {near_drop_mid:>6.1}",
            non_drops[0], non_drops[1], non_drops[2]
        );
    }
}
