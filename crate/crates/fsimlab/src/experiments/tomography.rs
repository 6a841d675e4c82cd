use crate::device::{idle_phase, Channel, PulseProgram, Qubit, QutritDensityMatrix, SingleQubitGate};
use crate::fsim::{extract_fsim_params, wrap_angle, FsimParams, TomographyElements, C64};

use super::{ExperimentError, Simulator};

/// Default magnitude slack allowed for shot noise and SPAM.
pub const TOMOGRAPHY_TOLERANCE: f64 = 0.05;

const I: C64 = C64::new(0.0, 1.0);

/// The six tomography circuits. An X/2 prepares the "x" qubit (with the
/// other qubit optionally excited first), the gate is played, and the
/// coherence ⟨σx⟩ + i⟨σy⟩ of the readout qubit is measured.
pub fn unitary_tomography(sim: &Simulator, program: &PulseProgram) -> Result<TomographyElements, ExperimentError> {
    tomography_protocol(sim, |rho| Ok(sim.play(rho, program)?), idle_phase(program, &sim.model))
}

/// The same six circuits around a gate given as a channel in the idle
/// frame, so no idle phase is read out.
pub fn channel_tomography(sim: &Simulator, gate: &Channel) -> Result<TomographyElements, ExperimentError> {
    tomography_protocol(sim, |rho| Ok(gate.apply(rho)), 0.0)
}

fn tomography_protocol<F>(sim: &Simulator, gate: F, psi10: f64) -> Result<TomographyElements, ExperimentError>
where
    F: Fn(&QutritDensityMatrix) -> Result<QutritDensityMatrix, ExperimentError>,
{
    let x2 = SingleQubitGate::X2;
    let run = |prep: &[(Qubit, SingleQubitGate)], stream: u64| -> Result<[C64; 2], ExperimentError> {
        let rho = gate(&sim.prepare(prep))?;
        // X/2 contributes a factor −i to every coherence.
        Ok([
            I * sim.measure_coherence(&rho, Qubit::Q1, 2 * stream),
            I * sim.measure_coherence(&rho, Qubit::Q0, 2 * stream + 1),
        ])
    };
    let [u11, u21] = run(&[(Qubit::Q1, x2)], 0)?;
    let [u12, u22] = run(&[(Qubit::Q0, x2)], 1)?;
    let [u12_excited, u22_excited] = run(&[(Qubit::Q1, SingleQubitGate::X), (Qubit::Q0, x2)], 2)?;
    let el = TomographyElements {
        u11,
        u12,
        u21,
        u22,
        u12_excited,
        u22_excited,
        psi10,
    };
    if !el.magnitudes_ok(TOMOGRAPHY_TOLERANCE) {
        return Err(ExperimentError::Inconsistent(Box::new(el)));
    }
    Ok(el)
}

/// Tomography followed by parameter extraction.
pub fn measure_fsim(sim: &Simulator, program: &PulseProgram) -> Result<FsimParams, ExperimentError> {
    Ok(extract_fsim_params(&unitary_tomography(sim, program)?)?)
}

/// Conditional phase (radians) from Ramsey fringes on qubit 1 with qubit 0
/// in |0⟩ and in |1⟩.
pub fn ramsey_phi(sim: &Simulator, program: &PulseProgram) -> Result<f64, ExperimentError> {
    let x2 = (Qubit::Q1, SingleQubitGate::X2);
    let c0 = sim.measure_coherence(&sim.play(&sim.prepare(&[x2]), program)?, Qubit::Q1, 10);
    let c1 = sim.measure_coherence(
        &sim.play(&sim.prepare(&[(Qubit::Q0, SingleQubitGate::X), x2]), program)?,
        Qubit::Q1,
        11,
    );
    Ok(wrap_angle(c1.arg() - c0.arg()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{make_pulse, DeviceModel, PulseShape};
    use crate::experiments::detuning_offsets;

    #[test]
    fn identity_program_has_trivial_elements() {
        let m = DeviceModel::noiseless();
        let sim = Simulator::ideal(m.clone());
        let p = PulseProgram::idle(12, 1.0);
        let el = unitary_tomography(&sim, &p).unwrap();
        let lag = C64::from_polar(1.0, -el.psi10);
        assert!((el.u11 - 1.0).norm() < 1e-12);
        assert!((el.u22 - lag).norm() < 1e-12);
        assert!(el.u12.norm() < 1e-12 && el.u21.norm() < 1e-12);
        let f = extract_fsim_params(&el).unwrap();
        assert!(f.theta.abs() < 1e-9 && f.phi.abs() < 1e-9);
    }

    #[test]
    fn resonant_swap_is_measured() {
        let m = DeviceModel::noiseless();
        let sim = Simulator::ideal(m.clone());
        let [_, o1] = detuning_offsets(&m, 0.0).unwrap();
        let bias = m.coupler.bias_for_g(-10.0).unwrap() - m.coupler.off_bias();
        // 2π·10 MHz·12.5 ns = π/4.
        let p = make_pulse(12.5, 0.0, [0.0, o1, bias], PulseShape::Rectangular, 2.0).unwrap();
        let f = measure_fsim(&sim, &p).unwrap();
        assert!((f.theta_deg() - 45.0).abs() < 1.0, "{f:?}");
    }
}
