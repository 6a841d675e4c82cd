//! Speckle purity benchmarking separates incoherent from coherent error:
//! depolarizing noise shows up in both purity and XEB, a coherent
//! over-rotation only in XEB.
//!
//! cargo run --release --example purity

use fsimlab::benchmarking::{default_depths, error_budget, fsim_channel, generate_xeb_circuits, purity_benchmark, run_xeb, with_depolarizing};
use fsimlab::device::DeviceModel;
use fsimlab::experiments::Simulator;
use fsimlab::fsim::FsimParams;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let gate = FsimParams::from_degrees(60.0, 40.0);
    let circuits = generate_xeb_circuits(&default_depths(), 10, 1)?;
    let sim = Simulator::ideal(DeviceModel::noiseless());
    let rotated = FsimParams { theta: gate.theta + 2f64.to_radians(), ..gate };
    println!("{:<28} {:>10} {:>10} {:>10}", "gate", "xeb", "purity", "coherent");
    for (label, ch) in [
        ("depolarizing 3e-3", with_depolarizing(&fsim_channel(&gate), 3e-3)?),
        ("2 deg over-rotation", fsim_channel(&rotated)),
        ("both", with_depolarizing(&fsim_channel(&rotated), 3e-3)?),
    ] {
        let x = run_xeb(&sim, &ch, &gate, &circuits)?.e_p_cycle;
        let p = purity_benchmark(&sim, &ch, &circuits)?.e_p_cycle;
        let b = error_budget(x, p, 0.0, [0.0; 2]);
        println!("{label:<28} {x:10.3e} {p:10.3e} {:10.3e}", b.coherent);
    }
    Ok(())
}
