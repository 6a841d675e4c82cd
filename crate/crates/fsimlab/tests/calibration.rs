use std::sync::OnceLock;

use fsimlab::calibration::*;
use fsimlab::device::{DeviceModel, Realism};
use fsimlab::experiments::{detuning_offsets, measure_fsim, ramsey_phi, Mode, Simulator};

fn phi_grid() -> Vec<f64> {
    (-179..=180).map(f64::from).collect()
}

fn settled() -> Simulator {
    Simulator::realistic(DeviceModel::default(), 3).with_mode(Mode::Expectation)
}

struct Families {
    cphase: CphaseCurve,
    iswap: IswapCurve,
}

fn families(sim: &Simulator, design: &GateDesign) -> Families {
    Families {
        cphase: calibrate_cphase_family(sim, design, &CphaseSweep::default(), &phi_grid()).unwrap(),
        iswap: calibrate_iswap_family(sim, design, 21).unwrap(),
    }
}

fn settled_stages() -> &'static (Families, CompositeStages) {
    static CELL: OnceLock<(Families, CompositeStages)> = OnceLock::new();
    CELL.get_or_init(|| {
        let sim = settled();
        let f = families(&sim, &GateDesign::default());
        let s = composite_stages(&sim, &f.cphase, &f.iswap, &CompositeConfig::default()).unwrap();
        (f, s)
    })
}

fn noiseless_families() -> &'static Families {
    static CELL: OnceLock<Families> = OnceLock::new();
    CELL.get_or_init(|| families(&Simulator::ideal(DeviceModel::noiseless()), &GateDesign::default()))
}

fn subset() -> Vec<(f64, f64)> {
    fsim_grid_525().into_iter().step_by(13).collect()
}

#[test]
fn cphase_family_covers_every_degree() {
    let model = DeviceModel::noiseless();
    let f = noiseless_families();
    for p in phi_grid() {
        f.cphase.controls(&model, p).unwrap();
    }
}

#[test]
fn cphase_residual_swap_is_small() {
    let f = &settled_stages().0;
    assert!(f.cphase.max_residual_theta_deg() <= 5.0, "{}", f.cphase.max_residual_theta_deg());
    for e in &settled_stages().1.cphase {
        assert!(e.measured.theta_deg() <= 5.0, "{:?}", e.controls);
    }
}

#[test]
fn on_resonance_full_swap_gives_pi_plus_dispersive_shift() {
    let sim = Simulator::ideal(DeviceModel::noiseless());
    let m = &sim.model;
    let design = GateDesign::default();
    let c = full_swap_amplitude(&sim, &design, m.eta_mhz).unwrap();
    let [a0, a1] = detuning_offsets(m, m.eta_mhz).unwrap();
    let p = design.cphase_program([a0, a1, c], m.sample_rate).unwrap();
    let phi = ramsey_phi(&sim, &p).unwrap().to_degrees();
    // Two-level π. |11⟩ ↔ |20⟩ at coupling √2·g and detuning Δ + η pushes
    // |11⟩ up by δ, and a full detuned cycle keeps δ·T/2 of it.
    let off = m.coupler.off_bias();
    let shift: f64 = p
        .coupler_bias
        .iter()
        .map(|&b| 2.0 * m.coupler_g(off + b).unwrap().powi(2) / (2.0 * m.eta_mhz) * p.dt() * 1e-3)
        .sum();
    let excess = phi.rem_euclid(360.0) - 180.0;
    let first_order = 360.0 * shift / 2.0;
    assert!(excess > 0.0 && excess < first_order + 0.5, "{phi} vs 180 + {first_order}");
    assert!((excess - first_order).abs() < 0.25 * first_order, "{excess} vs {first_order}");
}

#[test]
fn direct_knots_stay_inside_single_cycle_span() {
    let f = noiseless_families();
    let model = DeviceModel::noiseless();
    let total_ns = f.cphase.design.cphase_ns + 2.0 * f.cphase.design.cphase_pad_ns;
    for k in f.cphase.knots.iter().filter(|k| !k.extrapolated) {
        assert!((k.delta_mhz - model.eta_mhz).abs() * total_ns * 1e-3 < 1.0, "{k:?}");
        assert!(k.leakage < 1e-3, "{k:?}");
    }
    let (lo, hi) = f.cphase.direct_range_deg();
    assert!(hi - lo > 180.0, "{lo} {hi}");
}

#[test]
fn cphase_grid_outside_range_is_rejected() {
    let sim = Simulator::ideal(DeviceModel::noiseless());
    let r = calibrate_cphase_family(&sim, &GateDesign::default(), &CphaseSweep::default(), &[-180.0]);
    assert!(matches!(r, Err(CalibrationError::InvalidInput(_))));
}

#[test]
fn noiseless_iswap_transfers_fully() {
    let f = noiseless_families();
    assert!(f.iswap.swap_population >= 0.999, "{}", f.iswap.swap_population);
    assert!(!f.iswap.flagged);
    assert!((f.iswap.knots.last().unwrap().theta_deg - 90.0).abs() < 0.5);
}

#[test]
fn iswap_phase_is_quadratic_in_theta() {
    let q = noiseless_families().iswap.quadratic;
    assert!(q.r_squared > 0.98, "{q:?}");
    assert!(q.c_per_deg2 > 0.0);
}

#[test]
fn iswap_at_off_bias_does_not_swap() {
    let sim = Simulator::ideal(DeviceModel::noiseless());
    let f = noiseless_families();
    let p = f.iswap.design.iswap_program(f.iswap.amplitudes(0.0), sim.model.sample_rate).unwrap();
    assert!(measure_fsim(&sim, &p).unwrap().theta_deg() < 1e-6);
}

#[test]
fn quadratic_fit_recovers_exact_parabola() {
    let t: Vec<f64> = (0..10).map(|k| 10.0 * k as f64).collect();
    let p: Vec<f64> = t.iter().map(|x| 0.004 * x * x).collect();
    let q = quadratic_fit(&t, &p);
    assert!((q.c_per_deg2 - 0.004).abs() < 1e-15);
    assert!((q.r_squared - 1.0).abs() < 1e-12);
}

#[test]
fn identity_target_converges_untouched() {
    let (_, stages) = settled_stages();
    let e = calibrate_target(&settled(), stages, 0.0, 0.0, &CompositeConfig::default());
    assert!(e.converged, "{e:?}");
    assert!(e.measured.theta_deg().abs() <= 1.0 && e.residual_deg[1].abs() <= 1.0);
}

#[test]
fn converged_entries_are_within_tolerance_and_replay() {
    let sim = settled();
    let (_, stages) = settled_stages();
    let reg = calibrate_targets(&sim, stages, &subset(), &CompositeConfig::default());
    assert!(reg.all_converged());
    for e in &reg.entries {
        assert!(e.residual_deg[0].abs() <= 1.0 && e.residual_deg[1].abs() <= 1.0, "{e:?}");
        let m = measure_fsim(&sim, &e.program(&reg.design, &sim.model).unwrap()).unwrap();
        assert!((m.theta - e.measured.theta).abs() < 1e-12 && (m.phi - e.measured.phi).abs() < 1e-12);
    }
}

#[test]
fn shot_noise_replay_agrees_within_noise() {
    let sim = settled();
    let (_, stages) = settled_stages();
    let reg = calibrate_targets(&sim, stages, &[(45.0, 90.0), (90.0, 180.0)], &CompositeConfig::default());
    let noisy = sim.clone().with_mode(Mode::Shots(20_000));
    for e in &reg.entries {
        let m = measure_fsim(&noisy, &e.program(&reg.design, &sim.model).unwrap()).unwrap();
        assert!((m.theta_deg() - e.measured.theta_deg()).abs() < 1.5, "{m:?} {e:?}");
        let dphi = fsimlab::fsim::angle_diff(m.phi, e.measured.phi).to_degrees();
        assert!(dphi.abs() < 3.0, "{dphi}");
    }
}

#[test]
fn calibration_is_deterministic() {
    let sim = settled();
    let (f, stages) = settled_stages();
    let cfg = CompositeConfig::default();
    let again = composite_stages(&sim, &f.cphase, &f.iswap, &cfg).unwrap();
    assert_eq!(&again, stages);
    let a = calibrate_targets(&sim, stages, &subset(), &cfg);
    let b = calibrate_targets(&sim, &again, &subset(), &cfg);
    assert_eq!(a.to_json_string(), b.to_json_string());
}

#[test]
fn reversed_order_leaks_more_under_settling() {
    let sim = settled();
    let targets = subset();
    let cfg = CompositeConfig::default();
    let mean_leak = |order: GateOrder| -> f64 {
        let design = GateDesign { order, ..GateDesign::default() };
        let f = families(&sim, &design);
        let (reg, _) = calibrate_composite_fsim(&sim, &f.cphase, &f.iswap, &targets, &cfg).unwrap();
        let total: f64 = reg
            .entries
            .iter()
            .map(|e| leakage_from_11(&sim, &e.program(&design, &sim.model).unwrap()).unwrap())
            .sum();
        total / reg.entries.len() as f64
    };
    let forward = mean_leak(GateOrder::CphaseFirst);
    let reverse = mean_leak(GateOrder::IswapFirst);
    assert!(reverse > forward, "forward {forward:e} reverse {reverse:e}");
}

#[test]
fn registry_file_round_trip_is_exact() {
    let sim = settled();
    let (_, stages) = settled_stages();
    let reg = calibrate_targets(&sim, stages, &subset()[..5], &CompositeConfig::default());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("registry.json");
    reg.save(&path).unwrap();
    assert_eq!(GateRegistry::load(&path).unwrap(), reg);
    let hit = registry_lookup(&reg, reg.entries[2].target_theta_deg, reg.entries[2].target_phi_deg).unwrap();
    assert!(!hit.off_grid);
}

#[test]
fn stage_config_is_validated() {
    let (f, _) = settled_stages();
    let cfg = CompositeConfig { stride: 0, ..CompositeConfig::default() };
    assert!(matches!(
        composite_stages(&settled(), &f.cphase, &f.iswap, &cfg),
        Err(CalibrationError::InvalidInput(_))
    ));
}

#[test]
fn strided_endpoints_interpolate_between_anchors() {
    let (f, full) = settled_stages();
    let cfg = CompositeConfig { stride: 10, ..CompositeConfig::default() };
    let coarse = composite_stages(&settled(), &f.cphase, &f.iswap, &cfg).unwrap();
    for i in (0..CPHASE_ENTRIES).step_by(10) {
        assert_eq!(coarse.endpoints[i], full.endpoints[i]);
    }
    let d = (0..CPHASE_ENTRIES)
        .map(|i| (coarse.endpoints[i].coupler_90 - full.endpoints[i].coupler_90).abs())
        .fold(0.0, f64::max);
    assert!(d < 2e-3, "{d}");
}

#[test]
fn cap_marks_unreachable_targets_unconverged() {
    let (_, stages) = settled_stages();
    let cfg = CompositeConfig { tolerance_deg: 1e-6, max_iterations: 2, ..CompositeConfig::default() };
    let e = calibrate_target(&settled(), stages, 30.0, 90.0, &cfg);
    assert!(!e.converged);
    assert_eq!(e.iterations, 2);
}

#[test]
fn quantized_without_settling_converges_in_one_adjustment() {
    let sim = settled().with_realism(Realism { settling: false, quantization: true });
    let f = families(&sim, &GateDesign::default());
    let (reg, _) = calibrate_composite_fsim(&sim, &f.cphase, &f.iswap, &subset(), &CompositeConfig::default()).unwrap();
    assert!(reg.all_converged() && reg.max_iterations() <= 1, "{}", reg.max_iterations());
}
