//! Leakage, conditional-phase and swap-angle landscapes for 15 ns
//! rectangular pulses, followed by the low-leakage CPHASE contour.
//!
//! cargo run --release --example landscape [out_dir]

use fsimlab::device::DeviceModel;
use fsimlab::experiments::{cphase_contour, landscape_scan, LandscapeConfig, ScanMode, Simulator, LEAKAGE_THRESHOLD};
use fsimlab::output::Provenance;
use std::path::PathBuf;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "landscape_out".into()));
    std::fs::create_dir_all(&out)?;

    let model = DeviceModel::noiseless();
    let sim = Simulator::ideal(model.clone());
    let off = model.coupler.off_bias();
    let deltas: Vec<f64> = (0..=100).map(|k| 4.0 * k as f64).collect();
    let coupler: Vec<f64> = (0..=100)
        .map(|k| model.coupler.bias_for_g(-0.5 * k as f64).map(|b| b - off))
        .collect::<Result<_, _>>()?;
    let cfg = LandscapeConfig::rectangular(15.0);

    let prov = Provenance::new(sim.seed, "example");
    let mut scans = Vec::new();
    for mode in [ScanMode::Leakage, ScanMode::Phi, ScanMode::Theta] {
        let s = landscape_scan(&sim, mode, &deltas, &coupler, &cfg)?;
        s.write_csv(std::fs::File::create(out.join(format!("{mode}.csv")))?, &prov)?;
        scans.push(s);
    }
    let (leak, phi, theta) = (&scans[0], &scans[1], &scans[2]);

    let on_resonance = theta.column(0);
    println!(
        "theta along delta = 0: {:.2} .. {:.2} deg",
        on_resonance.iter().cloned().fold(f64::INFINITY, f64::min),
        on_resonance.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    );

    println!("{:>9} {:>8} {:>10} {:>9}", "delta", "g", "P02", "phi");
    for p in cphase_contour(leak, model.eta_mhz, cfg.duration_ns, LEAKAGE_THRESHOLD) {
        println!(
            "{:9.1} {:8.2} {:10.2e} {:9.2}",
            leak.x[p.ix],
            leak.y_coupling_mhz.as_ref().expect("coupler axis")[p.iy],
            leak.value(p.ix, p.iy),
            phi.value(p.ix, p.iy)
        );
    }
    Ok(())
}
