//! How the low-leakage CPHASE band depends on pulse length and coupler
//! pulse shape.
//!
//! cargo run --release --example pulse_length_and_shape

use fsimlab::device::{DeviceModel, PulseShape};
use fsimlab::experiments::{
    band_cell_count, cphase_contour, landscape_scan, lobe_grid, rebase_contour, LandscapeConfig, LeakageReadout, ScanMode,
    Simulator, LEAKAGE_THRESHOLD,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = DeviceModel::noiseless();
    let sim = Simulator::ideal(model.clone());

    println!("pulse length, rectangular pulses");
    for t in [10.0, 15.0, 20.0] {
        let (deltas, coupler) = lobe_grid(&model, t, 101, 101)?;
        let cfg = LandscapeConfig::rectangular(t);
        let p02 = landscape_scan(&sim, ScanMode::Leakage, &deltas, &coupler, &cfg)?;
        let total = landscape_scan(&sim, ScanMode::Leakage, &deltas, &coupler, &cfg.with_readout(LeakageReadout::Total))?;
        let located = cphase_contour(&p02, model.eta_mhz, t, LEAKAGE_THRESHOLD);
        let kept = rebase_contour(&located, &total, LEAKAGE_THRESHOLD);
        println!(
            "  {t:4} ns: {:3} of {:3} contour cells below 1% total leakage, {:4} band cells",
            kept.len(),
            located.len(),
            band_cell_count(&kept)
        );
    }

    let off = model.coupler.off_bias();
    let deltas: Vec<f64> = (0..=100).map(|k| 4.0 * k as f64).collect();
    let coupler: Vec<f64> = (0..=100)
        .map(|k| model.coupler.bias_for_g(-0.5 * k as f64).map(|b| b - off))
        .collect::<Result<_, _>>()?;
    let on_resonance = LandscapeConfig::rectangular(10.0).with_readout(LeakageReadout::Total);
    let theta = landscape_scan(&sim, ScanMode::Theta, &[0.0], &coupler, &on_resonance)?;
    let leak = landscape_scan(&sim, ScanMode::Leakage, &[0.0], &coupler, &on_resonance)?;
    if let Some(j) = theta.values.iter().position(|v| *v > 89.0) {
        println!("  10 ns on resonance: leakage {:.3} where theta first reaches 90 deg", leak.values[j]);
    }

    println!("coupler shape, 20 ns");
    for (name, shape, pad) in [
        ("rectangular", PulseShape::Rectangular, 0.0),
        ("smoothed 3 ns", PulseShape::Smoothed { rise_ns: 3.0 }, 5.0),
        ("cosine", PulseShape::Cosine, 0.0),
    ] {
        let cfg = LandscapeConfig::shaped(20.0, pad, shape).with_readout(LeakageReadout::Total);
        let leak = landscape_scan(&sim, ScanMode::Leakage, &deltas, &coupler, &cfg)?;
        println!("  {name:14} {} pixels below 1% leakage", leak.count_below(LEAKAGE_THRESHOLD));
    }
    Ok(())
}
