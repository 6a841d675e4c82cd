//! Single-qubit randomized benchmarking on both qubits of the default
//! device, with and without an interleaved X/2.
//!
//! cargo run --release --example rb

use fsimlab::benchmarking::{interleaved_gate_error, single_qubit_rb, RB_DEPTHS};
use fsimlab::device::{DeviceModel, Qubit, SingleQubitGate};
use fsimlab::experiments::{Mode, Simulator};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sim = Simulator::realistic(DeviceModel::default(), 2).with_mode(Mode::Expectation);
    println!("single-qubit error of the model {:.2e}", sim.single_qubit_error());
    for q in [Qubit::Q0, Qubit::Q1] {
        let r = single_qubit_rb(&sim, q, &RB_DEPTHS, 30, None)?;
        let i = single_qubit_rb(&sim, q, &RB_DEPTHS, 30, Some(SingleQubitGate::X2))?;
        println!(
            "{q:?}: error per Clifford {:.3e}, interleaved X/2 {:.3e}",
            r.e_p,
            interleaved_gate_error(&r.fit, &i.fit, 1)?
        );
    }
    Ok(())
}
