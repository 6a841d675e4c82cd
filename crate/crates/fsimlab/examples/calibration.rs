//! Calibrates the CPHASE and iSWAP families on the default device, then a
//! slice of the composite fSim grid, saves the registry and looks up an
//! off-grid gate.
//!
//! cargo run --release --example calibration [registry.json]

use fsimlab::calibration::{
    calibrate_composite_fsim, calibrate_cphase_family, calibrate_iswap_family, fsim_grid_525, registry_lookup, CompositeConfig, CphaseSweep,
    GateDesign, GateRegistry,
};
use fsimlab::device::DeviceModel;
use fsimlab::experiments::{measure_fsim, Mode, Simulator};
use std::path::PathBuf;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "registry.json".into()));
    let sim = Simulator::realistic(DeviceModel::default(), 3).with_mode(Mode::Expectation);
    let design = GateDesign::default();
    let phi_grid: Vec<f64> = (-179..=180).map(f64::from).collect();

    let cphase = calibrate_cphase_family(&sim, &design, &CphaseSweep::default(), &phi_grid)?;
    println!("cphase family: {} knots, worst residual theta {:.3} deg", cphase.knots.len(), cphase.max_residual_theta_deg());
    let iswap = calibrate_iswap_family(&sim, &design, 21)?;
    println!("iswap family: resonance at delta {:.2} MHz, full swap at coupler {:.4}", iswap.resonance_delta_mhz, iswap.coupler_90);

    let targets: Vec<(f64, f64)> = fsim_grid_525().into_iter().filter(|&(_, phi)| phi == 90.0).collect();
    let (reg, _) = calibrate_composite_fsim(&sim, &cphase, &iswap, &targets, &CompositeConfig::default())?;
    println!("{:>7} {:>7} {:>9} {:>9} {:>5}", "theta", "phi", "d_theta", "d_phi", "iter");
    for e in &reg.entries {
        println!(
            "{:7.2} {:7.1} {:+9.3} {:+9.3} {:5}",
            e.target_theta_deg, e.target_phi_deg, e.residual_deg[0], e.residual_deg[1], e.iterations
        );
    }
    reg.save(&path)?;
    let reloaded = GateRegistry::load(&path)?;
    let hit = registry_lookup(&reloaded, 40.0, 95.0)?;
    let program = hit.entry.program(&reloaded.design, &sim.model)?;
    let m = measure_fsim(&sim, &program)?;
    println!(
        "lookup (40, 95) -> entry ({:.2}, {:.1}), off grid {}; remeasured ({:.2}, {:.2}) deg",
        hit.entry.target_theta_deg,
        hit.entry.target_phi_deg,
        hit.off_grid,
        m.theta_deg(),
        m.phi_deg()
    );
    Ok(())
}
