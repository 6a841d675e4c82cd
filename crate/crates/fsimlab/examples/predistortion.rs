//! Settling-tail predistortion: a step through the line response with and
//! without predistortion, before and after 14-bit quantization, and a fit
//! of the settling model to a measured step.
//!
//! cargo run --release --example predistortion

use fsimlab::pulse::{apply_settling, fit_settling, lsb, predistort, quantize, SettlingModel, Waveform};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for (name, m) in [("q2", SettlingModel::device_q2()), ("q3", SettlingModel::device_q3()), ("coupler", SettlingModel::device_coupler())] {
        let mut step = Waveform::step(3000, 50, 1.0);
        step.samples.iter_mut().for_each(|s| *s *= 0.5);
        let raw = apply_settling(&step, &m).max_abs_diff(&step);
        let pre = predistort(&step, &m)?;
        let fixed = apply_settling(&pre, &m).max_abs_diff(&step);
        let q = quantize(&pre, 14)?;
        let fixed_q = apply_settling(&q.waveform, &m).max_abs_diff(&step);
        println!(
            "{name:<8} tail sum {:+.4}; step error raw {raw:.2e}, predistorted {fixed:.1e}, quantized {:.2} LSB",
            m.alpha_sum(),
            fixed_q / lsb(14)
        );
    }

    let truth = SettlingModel::device_q2();
    let times: Vec<f64> = (0..400).map(|k| 1.0 + 2.5 * k as f64).collect();
    let response: Vec<f64> = times.iter().map(|&t| truth.step_response(t)).collect();
    let fit = fit_settling(&times, &response, &SettlingModel::device_q3())?;
    println!("fit of the q2 step response: rms {:.1e} after {} evaluations", fit.rms_residual, fit.evaluations);
    Ok(())
}
