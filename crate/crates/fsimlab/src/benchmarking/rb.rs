use nalgebra::Matrix2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::device::{clifford_group, derive_seed, outcome_probabilities, Qubit, QutritDensityMatrix, SingleQubitGate};
use crate::experiments::Simulator;
use crate::fsim::{pauli_from_decay, C64};

use super::{fit_decay, BenchmarkError, DecayFit, DepthPoint};

/// Default sequence lengths for single-qubit RB.
pub const RB_DEPTHS: [usize; 9] = [1, 10, 25, 50, 100, 200, 400, 700, 1000];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbResult {
    pub qubit: Qubit,
    pub points: Vec<DepthPoint>,
    pub fit: DecayFit,
    /// Pauli error per Clifford (per Clifford plus interleaved gate when
    /// interleaving).
    pub e_p: f64,
}

/// Random Clifford sequences on one qubit, each closed by its exact
/// inverse, with an optional gate interleaved after every Clifford. The
/// other qubit idles in |0⟩.
pub fn single_qubit_rb(
    sim: &Simulator,
    qubit: Qubit,
    depths: &[usize],
    n_sequences: usize,
    interleaved: Option<SingleQubitGate>,
) -> Result<RbResult, BenchmarkError> {
    if depths.len() < 4 || n_sequences == 0 {
        return Err(BenchmarkError::InvalidInput("need at least 4 depths and one sequence".into()));
    }
    let group = clifford_group();
    let jobs: Vec<(usize, usize)> = depths.iter().enumerate().flat_map(|(i, _)| (0..n_sequences).map(move |s| (i, s))).collect();
    let survival: Vec<f64> = jobs
        .par_iter()
        .map(|&(i, s)| {
            let stream = ((i as u64) << 32) | s as u64;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(sim.seed ^ 0x5242, stream));
            let mut rho = QutritDensityMatrix::ground();
            let mut total = Matrix2::<C64>::identity();
            for _ in 0..depths[i] {
                let c = group[rng.random_range(0..group.len())];
                rho = sim.gate(&rho, qubit, SingleQubitGate::from_matrix(&c));
                total = c * total;
                if let Some(g) = interleaved {
                    rho = sim.gate(&rho, qubit, g);
                    total = g.matrix() * total;
                }
            }
            rho = sim.gate(&rho, qubit, SingleQubitGate::from_matrix(&total.adjoint()));
            let p = sim.estimate(outcome_probabilities(&rho, false, &sim.model), stream);
            match qubit {
                Qubit::Q0 => p[0] + p[1] + p[2],
                Qubit::Q1 => p[0] + p[3] + p[6],
            }
        })
        .collect();
    let points: Vec<DepthPoint> = depths
        .iter()
        .enumerate()
        .map(|(i, &depth)| {
            let v = &survival[i * n_sequences..(i + 1) * n_sequences];
            let n = v.len();
            let mean = v.iter().sum::<f64>() / n as f64;
            let stderr = if n > 1 {
                (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / ((n - 1) * n) as f64).sqrt()
            } else {
                f64::NAN
            };
            DepthPoint { depth, fidelity: mean, stderr, n }
        })
        .collect();
    let f: Vec<f64> = points.iter().map(|p| p.fidelity).collect();
    let fit = fit_decay(depths, &f)?;
    let e_p = fit.pauli_error(1)?;
    Ok(RbResult { qubit, points, fit, e_p })
}

/// Pauli error of an interleaved gate from reference and interleaved decays.
pub fn interleaved_gate_error(reference: &DecayFit, interleaved: &DecayFit, n_qubits: u32) -> Result<f64, BenchmarkError> {
    let d = (1u64 << n_qubits) as f64;
    let ratio = (interleaved.p / reference.p).min(1.0);
    Ok(pauli_from_decay(((1.0 - 1.0 / d) * (1.0 - ratio)).clamp(0.0, 1.0), n_qubits)?)
}
