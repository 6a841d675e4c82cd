//! Cross-entropy benchmarking of an idealized fSim gate with injected
//! depolarizing noise, and of a gate with a coherent swap-angle error.
//!
//! cargo run --release --example xeb

use fsimlab::benchmarking::{
    default_depths, ex_situ_optimize, fsim_channel, generate_xeb_circuits, measure_circuits, purity_benchmark, run_xeb,
    with_depolarizing, analyze_xeb, PHASES,
};
use fsimlab::device::DeviceModel;
use fsimlab::experiments::{Mode, Simulator};
use fsimlab::fsim::{build_fsim, unitary_overlap_error, FsimParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let gate = FsimParams::from_degrees(60.0, 40.0);
    let circuits = generate_xeb_circuits(&default_depths(), 20, 1)?;
    let sim = Simulator::ideal(DeviceModel::noiseless()).with_mode(Mode::Shots(2000)).with_seed(3);

    println!("injected   recovered  (Pauli error per cycle)");
    for e in [1e-3, 2e-3, 5e-3, 1e-2] {
        let ch = with_depolarizing(&fsim_channel(&gate), e)?;
        let r = run_xeb(&sim, &ch, &gate, &circuits)?;
        println!("{e:9.1e}  {:9.3e}", r.e_p_cycle);
    }

    let exact = Simulator::ideal(DeviceModel::noiseless());
    let actual = FsimParams { theta: gate.theta + 3f64.to_radians(), ..gate };
    let ch = fsim_channel(&actual);
    let r = run_xeb(&exact, &ch, &gate, &circuits)?;
    let p = purity_benchmark(&exact, &ch, &circuits)?;
    let overlap = unitary_overlap_error(&build_fsim(&gate), &build_fsim(&actual))?;
    println!("3 deg swap-angle error: XEB {:.3e}, overlap {:.3e}, purity {:.1e}", r.e_p_cycle, overlap, p.e_p_cycle);

    let true_model = FsimParams::with_phases(gate.theta, gate.phi, 0.3, -0.2, 0.1);
    let short = generate_xeb_circuits(&[5, 10, 20, 40, 80], 20, 2)?;
    let measured = measure_circuits(&exact, &fsim_channel(&true_model), &short);
    let opt = ex_situ_optimize(&gate, &PHASES, &short, &measured)?;
    println!(
        "ex-situ phases: ({:.3}, {:.3}, {:.3}) rad after {} evaluations, fidelity {:.4} -> {:.4}",
        opt.params.delta_plus, opt.params.delta_minus, opt.params.delta_minus_off, opt.evaluations, opt.fidelity_before, opt.fidelity_after
    );
    let after = analyze_xeb(&short, &measured, &opt.params)?;
    println!("error per cycle after optimization {:.2e}", after.e_p_cycle);
    Ok(())
}
