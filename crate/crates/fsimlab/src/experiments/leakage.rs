use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::device::{apply_gate_layer, derive_seed, PulseProgram, QutritDensityMatrix, XEB_GATES};
use crate::optimize::golden_section;

use super::{ExperimentError, Simulator};

/// Saturating growth P₂(m) = B + A(1 − λᵐ) of the |2⟩ population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageFit {
    /// Leakage per cycle, A(1 − λ).
    pub rate: f64,
    pub amplitude: f64,
    pub offset: f64,
    pub lambda: f64,
    pub depths: Vec<usize>,
    pub populations: Vec<f64>,
    pub rms_residual: f64,
}

/// Fits B + A(1 − λᵐ) by golden search over λ with A, B solved linearly.
pub fn fit_leakage(depths: &[usize], populations: &[f64]) -> Result<LeakageFit, ExperimentError> {
    if depths.len() < 3 || depths.len() != populations.len() {
        return Err(ExperimentError::Fit("need at least 3 matching depth points".into()));
    }
    let solve = |lambda: f64| -> (f64, f64, f64) {
        // Basis 1 and (1 − λᵐ).
        let (mut s11, mut s1u, mut suu, mut s1y, mut suy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&m, &y) in depths.iter().zip(populations) {
            let u = 1.0 - lambda.powi(m as i32);
            s11 += 1.0;
            s1u += u;
            suu += u * u;
            s1y += y;
            suy += u * y;
        }
        let det = s11 * suu - s1u * s1u;
        if det.abs() < 1e-300 {
            return (0.0, s1y / s11, f64::INFINITY);
        }
        let b = (suu * s1y - s1u * suy) / det;
        let a = (s11 * suy - s1u * s1y) / det;
        let sse: f64 = depths
            .iter()
            .zip(populations)
            .map(|(&m, &y)| (y - b - a * (1.0 - lambda.powi(m as i32))).powi(2))
            .sum();
        (a, b, sse)
    };
    let (lambda, _) = golden_section(|l| solve(l).2, 0.0, 1.0 - 1e-9, 1e-12);
    let (a, b, sse) = solve(lambda);
    let scale = populations.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    if a < -1e-3 * scale {
        return Err(ExperimentError::Fit("|2⟩ population decreases with depth".into()));
    }
    let a = a.max(0.0);
    Ok(LeakageFit {
        rate: a * (1.0 - lambda),
        amplitude: a,
        offset: b,
        lambda,
        depths: depths.to_vec(),
        populations: populations.to_vec(),
        rms_residual: (sse / depths.len() as f64).sqrt(),
    })
}

/// Interleaves random single-qubit layers with `gate` and fits the growth
/// of the |2⟩ population with depth.
pub fn leakage_per_cycle(
    sim: &Simulator,
    gate: &PulseProgram,
    depths: &[usize],
    n_sequences: usize,
) -> Result<LeakageFit, ExperimentError> {
    let mut depths = depths.to_vec();
    depths.sort_unstable();
    depths.dedup();
    if n_sequences == 0 || depths.is_empty() {
        return Err(ExperimentError::InvalidGrid("no sequences or depths".into()));
    }
    let channel = sim.channel(gate)?;
    let max_depth = *depths.last().expect("non-empty");
    let err = sim.single_qubit_error();
    let per_seq: Vec<Vec<f64>> = (0..n_sequences)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(sim.seed, s as u64));
            let mut rho = QutritDensityMatrix::ground();
            let mut out = Vec::with_capacity(depths.len());
            let mut next = 0;
            for m in 1..=max_depth {
                let layer = [XEB_GATES[rng.random_range(0..6)], XEB_GATES[rng.random_range(0..6)]];
                rho = channel.apply(&apply_gate_layer(&rho, layer, err));
                while next < depths.len() && depths[next] == m {
                    let p = sim.measure_populations(&rho, ((s as u64) << 20) + m as u64);
                    out.push(p[2] + p[5] + p[6] + p[7] + p[8]);
                    next += 1;
                }
            }
            if depths[0] == 0 {
                out.insert(0, sim.measure_populations(&QutritDensityMatrix::ground(), 0)[2]);
            }
            out
        })
        .collect();
    let mean: Vec<f64> = (0..depths.len())
        .map(|i| per_seq.iter().map(|v| v[i]).sum::<f64>() / n_sequences as f64)
        .collect();
    fit_leakage(&depths, &mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::DeviceModel;

    #[test]
    fn synthetic_growth_is_recovered() {
        let depths: Vec<usize> = vec![0, 5, 10, 20, 40, 80, 160, 320];
        let pops: Vec<f64> = depths.iter().map(|&m| 0.002 + 0.01 * (1.0 - 0.95f64.powi(m as i32))).collect();
        let f = fit_leakage(&depths, &pops).unwrap();
        assert!((f.lambda - 0.95).abs() < 1e-6);
        assert!((f.rate - 5e-4).abs() < 1e-8);
    }

    #[test]
    fn idle_gate_does_not_leak() {
        let sim = Simulator::ideal(DeviceModel::noiseless());
        let f = leakage_per_cycle(&sim, &PulseProgram::idle(10, 1.0), &[1, 5, 10, 20], 3).unwrap();
        assert!(f.rate.abs() < 1e-12);
    }

    #[test]
    fn decreasing_data_is_rejected() {
        let depths = [1, 2, 4, 8, 16];
        let pops = [0.05, 0.04, 0.03, 0.02, 0.01];
        assert!(fit_leakage(&depths, &pops).is_err());
    }
}
