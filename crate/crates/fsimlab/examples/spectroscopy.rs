//! Swap spectroscopy: the coupling g extracted from the swap oscillation at
//! each coupler bias, compared to the device model.
//!
//! cargo run --release --example spectroscopy

use fsimlab::device::DeviceModel;
use fsimlab::experiments::{swap_spectroscopy, Mode, Simulator};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = DeviceModel::default();
    let sim = Simulator::realistic(model.clone(), 1).with_mode(Mode::Expectation);
    let biases: Vec<f64> = (0..48).map(|k| k as f64 * 0.01).collect();
    let durations: Vec<f64> = (0..200).map(f64::from).collect();
    let r = swap_spectroscopy(&sim, &biases, &durations)?;
    println!("FFT bin {:.2} MHz", r.bin_mhz);
    println!("{:>6} {:>9} {:>9} {}", "bias", "g_model", "|g|_fft", "");
    for (k, b) in biases.iter().enumerate().step_by(3) {
        let flag = if r.flagged[k] { "below noise floor" } else { "" };
        println!("{b:6.2} {:+9.2} {:9.2} {flag}", model.coupler_g(*b)?, r.g_mhz[k]);
    }
    Ok(())
}
