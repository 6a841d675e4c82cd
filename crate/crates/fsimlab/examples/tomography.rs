//! Unitary tomography of pulse-level gates: an on-resonance swap, a
//! conditional-phase pulse read out by the Ramsey protocol, and the
//! density-matrix path applied to an ideal channel.
//!
//! cargo run --release --example tomography

use std::f64::consts::SQRT_2;

use fsimlab::benchmarking::fsim_channel;
use fsimlab::device::{make_pulse, DeviceModel, PulseShape, Realism};
use fsimlab::experiments::{channel_tomography, detuning_offsets, measure_fsim, ramsey_phi, unitary_tomography, Mode, Simulator};
use fsimlab::fsim::{extract_fsim_params, FsimParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = DeviceModel::default();
    let sim = Simulator::ideal(model.clone()).with_realism(Realism { settling: false, quantization: false });
    let off = model.coupler.off_bias();
    let pulse = |delta: f64, g: f64, t: f64, pad: f64, shape| -> Result<_, Box<dyn std::error::Error>> {
        let [a0, a1] = detuning_offsets(&model, delta)?;
        let c = model.coupler.bias_for_g(g)? - off;
        Ok(make_pulse(t, pad, [a0, a1, c], shape, model.sample_rate)?)
    };

    let swap = pulse(0.0, -20.0, 12.5, 4.0, PulseShape::Smoothed { rise_ns: 2.0 })?;
    let el = unitary_tomography(&sim, &swap)?;
    let p = extract_fsim_params(&el)?;
    println!("swap pulse: |<01|U|01>| {:.4} |<10|U|01>| {:.4}", el.u11.norm(), el.u21.norm());
    println!("  theta {:.2} deg, phi {:.2} deg", p.theta_deg(), p.phi_deg());

    // One full |11⟩ ↔ |02⟩ cycle: 2π·√2·g·t = π.
    let cphase = pulse(model.eta_mhz, -1e3 / (2.0 * SQRT_2 * 20.0), 20.0, 0.0, PulseShape::Rectangular)?;
    let m = measure_fsim(&sim, &cphase)?;
    let phi = ramsey_phi(&sim, &cphase)?;
    println!("cphase pulse: theta {:.2} deg, phi {:.2} deg (Ramsey {:.2} deg)", m.theta_deg(), m.phi_deg(), phi.to_degrees());

    let shots = sim.clone().with_mode(Mode::Shots(20_000)).with_seed(4);
    let noisy = measure_fsim(&shots, &swap)?;
    println!("swap pulse from 20000 shots: theta {:.2} deg, phi {:.2} deg", noisy.theta_deg(), noisy.phi_deg());

    let target = FsimParams::with_phases(0.7, 1.1, 0.25, -0.4, 0.3);
    let back = extract_fsim_params(&channel_tomography(&Simulator::ideal(DeviceModel::noiseless()), &fsim_channel(&target))?)?;
    println!("ideal channel round trip: {:?}", back.normalize().as_array().map(|x| (x * 1e6).round() / 1e6));
    println!("                expected: {:?}", target.normalize().as_array().map(|x| (x * 1e6).round() / 1e6));
    Ok(())
}
