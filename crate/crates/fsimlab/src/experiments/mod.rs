//! Protocols executed against the simulated device.

mod landscape;
mod leakage;
mod scan;
mod spectroscopy;
mod tomography;

pub use landscape::*;
pub use leakage::*;
pub use scan::*;
pub use spectroscopy::*;
pub use tomography::*;

use crate::device::{
    apply_single_qubit_gate, derive_seed, evolve_density, outcome_probabilities, realize, sample_counts, Channel,
    DeviceError, DeviceModel, PulseProgram, Qubit, QutritDensityMatrix, Realism, SingleQubitGate,
};
use crate::fsim::{FsimError, C64};
use nalgebra::Matrix3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Fsim(#[from] FsimError),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("fit failed: {0}")]
    Fit(String),
    #[error("tomography elements inconsistent with a photon-conserving gate: {0:?}")]
    Inconsistent(Box<crate::fsim::TomographyElements>),
}

/// How measurement results are estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Exact outcome probabilities (the infinite-shot limit).
    Expectation,
    /// Finite repetitions per circuit.
    Shots(u64),
}

/// A device together with the choices that decide how faithfully it is
/// simulated.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulator {
    pub model: DeviceModel,
    pub realism: Realism,
    pub noise: bool,
    pub mode: Mode,
    pub seed: u64,
    /// Undo the 2×2 assignment error of each qubit when estimating ⟨σ⟩.
    pub readout_correction: bool,
}

impl Simulator {
    /// Ideal control chain, no decoherence, exact expectation values.
    pub fn ideal(model: DeviceModel) -> Self {
        Self {
            model,
            realism: Realism::IDEAL,
            noise: false,
            mode: Mode::Expectation,
            seed: 0,
            readout_correction: true,
        }
    }

    /// Full control chain and decoherence, 2000 shots per circuit.
    pub fn realistic(model: DeviceModel, seed: u64) -> Self {
        Self {
            model,
            realism: Realism::FULL,
            noise: true,
            mode: Mode::Shots(2000),
            seed,
            readout_correction: true,
        }
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_realism(mut self, realism: Realism) -> Self {
        self.realism = realism;
        self
    }

    pub fn with_noise(mut self, noise: bool) -> Self {
        self.noise = noise;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Pauli error of each single-qubit gate.
    pub fn single_qubit_error(&self) -> f64 {
        if self.noise {
            self.model.single_qubit_error
        } else {
            0.0
        }
    }

    /// |00⟩ followed by the listed single-qubit gates.
    pub fn prepare(&self, ops: &[(Qubit, SingleQubitGate)]) -> QutritDensityMatrix {
        ops.iter().fold(QutritDensityMatrix::ground(), |rho, (q, g)| self.gate(&rho, *q, *g))
    }

    pub fn gate(&self, rho: &QutritDensityMatrix, q: Qubit, g: SingleQubitGate) -> QutritDensityMatrix {
        apply_single_qubit_gate(rho, q, g, self.single_qubit_error())
    }

    /// The waveform the device actually sees.
    pub fn realize(&self, program: &PulseProgram) -> Result<PulseProgram, DeviceError> {
        realize(program, &self.model, self.realism)
    }

    /// Plays a program in the simulation frame.
    pub fn play(&self, rho: &QutritDensityMatrix, program: &PulseProgram) -> Result<QutritDensityMatrix, DeviceError> {
        evolve_density(rho, &self.realize(program)?, &self.model, self.noise)
    }

    /// The program as a channel in the idle frame.
    pub fn channel(&self, program: &PulseProgram) -> Result<Channel, DeviceError> {
        Channel::from_program(&self.realize(program)?, &self.model, self.noise)
    }

    pub(crate) fn estimate<const N: usize>(&self, probs: [f64; N], stream: u64) -> [f64; N] {
        match self.mode {
            Mode::Expectation => probs,
            Mode::Shots(n) => {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, stream));
                let counts = sample_counts(&probs, n, &mut rng);
                counts.map(|c| c as f64 / n as f64)
            }
        }
    }

    /// Estimated populations `p[3a + b]` with |2⟩ discriminated.
    pub fn measure_populations(&self, rho: &QutritDensityMatrix, stream: u64) -> [f64; 9] {
        self.estimate(outcome_probabilities(rho, true, &self.model), stream)
    }

    /// As [`measure_populations`](Self::measure_populations) with both
    /// qubits' 3×3 assignment matrices inverted when `readout_correction`
    /// is set. Entries may go slightly negative under shot noise.
    pub fn measure_populations_corrected(&self, rho: &QutritDensityMatrix, stream: u64) -> [f64; 9] {
        let p = self.measure_populations(rho, stream);
        if !self.readout_correction {
            return p;
        }
        let inv = self.model.readout.map(|c| {
            let m = Matrix3::from_fn(|r, k| c.0[r][k]);
            m.try_inverse().unwrap_or_else(Matrix3::identity)
        });
        let mut out = [0.0; 9];
        for a in 0..3 {
            for b in 0..3 {
                for x in 0..3 {
                    for y in 0..3 {
                        out[3 * a + b] += p[3 * x + y] * inv[0][(x, a)] * inv[1][(y, b)];
                    }
                }
            }
        }
        out
    }

    /// Estimated ⟨σz⟩ of one qubit, reading |2⟩ as |1⟩.
    fn measure_z(&self, rho: &QutritDensityMatrix, q: Qubit, stream: u64) -> f64 {
        let p = self.estimate(outcome_probabilities(rho, false, &self.model), stream);
        let p1 = match q {
            Qubit::Q0 => p[3] + p[4],
            Qubit::Q1 => p[1] + p[4],
        };
        let s = 1.0 - 2.0 * p1;
        if !self.readout_correction {
            return s;
        }
        let c = &self.model.readout[q.index()].0;
        let e01 = c[0][1] + c[0][2];
        let e10 = c[1][0];
        (s - (e10 - e01)) / (1.0 - e01 - e10)
    }

    /// ⟨σx⟩ + i⟨σy⟩ of qubit `q`, from two rotated readouts.
    pub fn measure_coherence(&self, rho: &QutritDensityMatrix, q: Qubit, stream: u64) -> C64 {
        let x = self.measure_z(&self.gate(rho, q, SingleQubitGate::MinusY2), q, 2 * stream);
        let y = self.measure_z(&self.gate(rho, q, SingleQubitGate::X2), q, 2 * stream + 1);
        C64::new(x, y)
    }
}

/// Qubit offsets that place qubit 1 at `delta_mhz` above qubit 0's idle
/// frequency while qubit 0 stays at idle.
pub fn detuning_offsets(model: &DeviceModel, delta_mhz: f64) -> Result<[f64; 2], DeviceError> {
    let f = model.idle_freq(Qubit::Q0) + delta_mhz * 1e-3;
    Ok([0.0, model.bias_offset_for(f, Qubit::Q1)?])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coherence_of_plus_state() {
        let sim = Simulator::ideal(DeviceModel::noiseless());
        let rho = sim.prepare(&[(Qubit::Q1, SingleQubitGate::MinusY2)]);
        // Ry(−π/2)|0⟩ = |−⟩
        let c = sim.measure_coherence(&rho, Qubit::Q1, 0);
        assert!((c - C64::new(-1.0, 0.0)).norm() < 1e-12, "{c}");
        let c = sim.measure_coherence(&sim.prepare(&[(Qubit::Q0, SingleQubitGate::X2)]), Qubit::Q0, 0);
        assert!((c - C64::new(0.0, -1.0)).norm() < 1e-12, "{c}");
    }

    #[test]
    fn readout_correction_removes_assignment_bias() {
        let sim = Simulator::ideal(DeviceModel::default());
        let rho = sim.prepare(&[(Qubit::Q0, SingleQubitGate::X)]);
        assert!((sim.measure_z(&rho, Qubit::Q0, 0) + 1.0).abs() < 0.02);
        let mut raw = sim.clone();
        raw.readout_correction = false;
        assert!((raw.measure_z(&rho, Qubit::Q0, 0) + 1.0).abs() > 0.05);
    }

    #[test]
    fn corrected_populations_undo_assignment_error() {
        let sim = Simulator::ideal(DeviceModel::default());
        let rho = sim.prepare(&[(Qubit::Q0, SingleQubitGate::X)]);
        let p = sim.measure_populations_corrected(&rho, 0);
        assert!((p[3] - 1.0).abs() < 1e-12, "{p:?}");
        assert!(sim.measure_populations(&rho, 0)[3] < 0.96);
    }

    #[test]
    fn shots_are_reproducible() {
        let sim = Simulator::ideal(DeviceModel::default()).with_mode(Mode::Shots(1000)).with_seed(4);
        let rho = sim.prepare(&[(Qubit::Q0, SingleQubitGate::X2)]);
        assert_eq!(sim.measure_coherence(&rho, Qubit::Q0, 3), sim.measure_coherence(&rho, Qubit::Q0, 3));
    }

    #[test]
    fn detuning_offsets_hit_target() {
        let m = DeviceModel::default();
        let [_, o] = detuning_offsets(&m, 240.0).unwrap();
        let f = m.qubit_freq(m.idle_bias(Qubit::Q1) + o, Qubit::Q1).unwrap();
        assert!(((f - m.idle_freq(Qubit::Q0)) * 1e3 - 240.0).abs() < 1e-9);
    }
}
