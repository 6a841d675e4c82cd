use nalgebra::{Matrix2, Matrix4};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::device::{apply_gate_layer, qubit_probabilities, Channel, Qubit, QutritDensityMatrix, SingleQubitGate};
use crate::experiments::Simulator;

use super::{final_state, fit_decay, BenchmarkError, DecayFit, DepthPoint, XebCircuit};

/// Reconstructed purities above 1 + this are rejected.
pub const PURITY_TOLERANCE: f64 = 0.05;

/// Pre-rotation that maps basis `b` (0 = X, 1 = Y, 2 = Z) onto Z.
fn basis_rotation(b: usize) -> SingleQubitGate {
    match b {
        0 => SingleQubitGate::MinusY2,
        1 => SingleQubitGate::X2,
        _ => SingleQubitGate::I,
    }
}

fn assignment_inverse(sim: &Simulator) -> Option<Matrix4<f64>> {
    if !sim.readout_correction {
        return None;
    }
    let per_qubit = |q: Qubit| {
        let c = &sim.model.readout[q.index()].0;
        let e01 = c[0][1] + c[0][2];
        let e10 = c[1][0];
        // Columns are true states, rows reported outcomes.
        Matrix2::new(1.0 - e01, e10, e01, 1.0 - e10)
    };
    let (a, b) = (per_qubit(Qubit::Q0), per_qubit(Qubit::Q1));
    Matrix4::from_fn(|r, c| a[(r / 2, c / 2)] * b[(r % 2, c % 2)]).try_inverse()
}

/// Pauli expectations ⟨σᵢ ⊗ σⱼ⟩ (0 = I, 1 = X, 2 = Y, 3 = Z) of the
/// computational part of `rho`, estimated from nine readout settings.
pub fn pauli_expectations(sim: &Simulator, rho: &QutritDensityMatrix, stream: u64) -> [[f64; 4]; 4] {
    let inv = assignment_inverse(sim);
    let mut sum = [[0.0; 4]; 4];
    let mut count = [[0usize; 4]; 4];
    let err = sim.single_qubit_error();
    for ba in 0..3 {
        for bb in 0..3 {
            let rotated = apply_gate_layer(rho, [basis_rotation(ba), basis_rotation(bb)], err);
            let mut p = sim.estimate(qubit_probabilities(&rotated, &sim.model), stream * 9 + (3 * ba + bb) as u64);
            if let Some(inv) = &inv {
                let v = inv * nalgebra::Vector4::from(p);
                p = [v[0], v[1], v[2], v[3]];
            }
            let sign = |bit: usize| if bit == 0 { 1.0 } else { -1.0 };
            for (i, pi) in [0usize, ba + 1].into_iter().enumerate() {
                for (j, pj) in [0usize, bb + 1].into_iter().enumerate() {
                    let e: f64 = (0..4)
                        .map(|k| {
                            let sa = if i == 1 { sign(k / 2) } else { 1.0 };
                            let sb = if j == 1 { sign(k % 2) } else { 1.0 };
                            sa * sb * p[k]
                        })
                        .sum();
                    sum[pi][pj] += e;
                    count[pi][pj] += 1;
                }
            }
        }
    }
    std::array::from_fn(|i| std::array::from_fn(|j| sum[i][j] / count[i][j] as f64))
}

/// Tr ρ² of the reconstructed two-qubit state.
pub fn reconstructed_purity(expectations: &[[f64; 4]; 4]) -> f64 {
    expectations.iter().flatten().map(|e| e * e).sum::<f64>() / 4.0
}

/// √[(D·Tr ρ² − 1)/(D − 1)] with D = 4, clamped at zero.
pub fn normalized_purity(purity: f64) -> f64 {
    ((4.0 * purity - 1.0) / 3.0).max(0.0).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PurityResult {
    pub points: Vec<DepthPoint>,
    pub fit: DecayFit,
    /// Incoherent Pauli error per cycle.
    pub e_p_cycle: f64,
}

/// Purity benchmarking on the same random circuits used for XEB. The
/// estimate uses no gate model, so coherent errors leave it unchanged.
pub fn purity_benchmark(sim: &Simulator, gate: &Channel, circuits: &[XebCircuit]) -> Result<PurityResult, BenchmarkError> {
    let values = circuits
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let rho = final_state(sim, gate, c);
            let purity = reconstructed_purity(&pauli_expectations(sim, &rho, i as u64));
            if purity > 1.0 + PURITY_TOLERANCE {
                return Err(BenchmarkError::UnphysicalPurity { circuit: i, purity });
            }
            Ok(normalized_purity(purity))
        })
        .collect::<Result<Vec<f64>, _>>()?;
    let mut depths: Vec<usize> = circuits.iter().map(|c| c.depth).collect();
    depths.sort_unstable();
    depths.dedup();
    let points: Vec<DepthPoint> = depths
        .iter()
        .map(|&depth| {
            let v: Vec<f64> = circuits.iter().zip(&values).filter(|(c, _)| c.depth == depth).map(|(_, v)| *v).collect();
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
    let fit = fit_decay(&depths, &f)?;
    let e_p_cycle = fit.pauli_error(2)?;
    Ok(PurityResult { points, fit, e_p_cycle })
}
