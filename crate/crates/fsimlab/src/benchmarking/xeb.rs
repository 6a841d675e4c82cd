use nalgebra::{Matrix4, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::device::{apply_gate_layer, derive_seed, qubit_probabilities, Channel, Matrix9c, QutritDensityMatrix, SingleQubitGate, XEB_GATES};
use crate::experiments::Simulator;
use crate::fsim::{build_fsim, FsimParams, TwoQubitUnitary, C64};
use crate::output::Table;

use super::{fit_decay_with_offset, BenchmarkError, DecayFit};

/// Floor applied to expected probabilities before taking logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

/// A random circuit of `depth` cycles. Each cycle is one gate from the
/// six-element set on each qubit followed by the two-qubit gate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XebCircuit {
    pub depth: usize,
    /// Indices into [`XEB_GATES`] for (qubit 0, qubit 1), one pair per cycle.
    pub layers: Vec<[u8; 2]>,
    /// Name of the interleaved two-qubit gate.
    pub gate: String,
}

impl XebCircuit {
    pub fn is_valid(&self) -> bool {
        self.depth >= 1 && self.layers.len() == self.depth && self.layers.iter().flatten().all(|&g| (g as usize) < XEB_GATES.len())
    }

    pub fn layer_gates(&self, cycle: usize) -> [SingleQubitGate; 2] {
        let [a, b] = self.layers[cycle];
        [XEB_GATES[a as usize], XEB_GATES[b as usize]]
    }
}

/// Twelve roughly log-spaced depths from 5 to 700.
pub fn default_depths() -> Vec<usize> {
    let (lo, hi) = (5f64.ln(), 700f64.ln());
    let mut d: Vec<usize> = (0..12).map(|k| (lo + (hi - lo) * k as f64 / 11.0).exp().round() as usize).collect();
    d.dedup();
    d
}

/// `n_per_depth` independent random circuits for every depth, ordered by
/// depth then index.
pub fn generate_xeb_circuits(depths: &[usize], n_per_depth: usize, seed: u64) -> Result<Vec<XebCircuit>, BenchmarkError> {
    if depths.is_empty() || depths.contains(&0) {
        return Err(BenchmarkError::InvalidInput("depths must be nonempty and positive".into()));
    }
    let mut out = Vec::with_capacity(depths.len() * n_per_depth);
    for (i, &depth) in depths.iter().enumerate() {
        for k in 0..n_per_depth {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, ((i as u64) << 32) | k as u64));
            let layers = (0..depth)
                .map(|_| [rng.random_range(0..6u8), rng.random_range(0..6u8)])
                .collect();
            out.push(XebCircuit {
                depth,
                layers,
                gate: "fsim".into(),
            });
        }
    }
    Ok(out)
}

fn kron(a: &nalgebra::Matrix2<C64>, b: &nalgebra::Matrix2<C64>) -> Matrix4<C64> {
    Matrix4::from_fn(|r, c| a[(r / 2, c / 2)] * b[(r % 2, c % 2)])
}

/// The 36 possible cycle unitaries, gate after layer, indexed 6a + b.
pub fn cycle_unitaries(gate: &TwoQubitUnitary) -> Vec<Matrix4<C64>> {
    let mats: Vec<_> = XEB_GATES.iter().map(|g| g.matrix()).collect();
    let mut out = Vec::with_capacity(36);
    for a in &mats {
        for b in &mats {
            out.push(gate.0 * kron(a, b));
        }
    }
    out
}

fn probs_with(circuit: &XebCircuit, cycles: &[Matrix4<C64>]) -> [f64; 4] {
    let mut psi = Vector4::new(C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0));
    for &[a, b] in &circuit.layers {
        psi = cycles[6 * a as usize + b as usize] * psi;
    }
    std::array::from_fn(|i| psi[i].norm_sqr())
}

/// Ideal outcome distribution of a circuit with perfect single-qubit gates
/// and the given fSim model, indexed 2a + b.
pub fn expected_probs(circuit: &XebCircuit, gate_model: &FsimParams) -> [f64; 4] {
    probs_with(circuit, &cycle_unitaries(&build_fsim(gate_model)))
}

/// Numerator and denominator of the cross-entropy fidelity of one circuit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XebTerms {
    pub numerator: f64,
    pub denominator: f64,
}

/// S(P_inc, P_exp) − S(P_meas, P_exp) and S(P_inc, P_exp) − S(P_exp, P_exp)
/// with S(P, Q) = −Σ pᵢ ln qᵢ and P_inc uniform.
pub fn xeb_terms(p_measured: &[f64; 4], p_expected: &[f64; 4]) -> XebTerms {
    let mut t = XebTerms {
        numerator: 0.0,
        denominator: 0.0,
    };
    for i in 0..4 {
        let l = p_expected[i].max(PROB_FLOOR).ln();
        t.numerator += (p_measured[i] - 0.25) * l;
        t.denominator += (p_expected[i] - 0.25) * l;
    }
    t
}

/// Cross-entropy fidelity of one measured distribution.
pub fn xeb_fidelity(p_measured: &[f64; 4], p_expected: &[f64; 4]) -> Result<f64, BenchmarkError> {
    let t = xeb_terms(p_measured, p_expected);
    if t.denominator <= 1e-12 {
        return Err(BenchmarkError::DegenerateDistribution);
    }
    Ok(t.numerator / t.denominator)
}

/// Mean fidelity at one depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthPoint {
    pub depth: usize,
    pub fidelity: f64,
    pub stderr: f64,
    pub n: usize,
}

/// Depth-wise fidelity as the ratio of summed numerators and denominators,
/// with a delta-method standard error.
pub fn xeb_curve(
    circuits: &[XebCircuit],
    measured: &[[f64; 4]],
    expected: &[[f64; 4]],
) -> Result<Vec<DepthPoint>, BenchmarkError> {
    if circuits.len() != measured.len() || circuits.len() != expected.len() {
        return Err(BenchmarkError::InvalidInput("one measured and expected distribution per circuit".into()));
    }
    let terms: Vec<XebTerms> = measured.iter().zip(expected).map(|(m, e)| xeb_terms(m, e)).collect();
    let mut depths: Vec<usize> = circuits.iter().map(|c| c.depth).collect();
    depths.sort_unstable();
    depths.dedup();
    depths
        .into_iter()
        .map(|depth| {
            let group: Vec<&XebTerms> = circuits.iter().zip(&terms).filter(|(c, _)| c.depth == depth).map(|(_, t)| t).collect();
            let num: f64 = group.iter().map(|t| t.numerator).sum();
            let den: f64 = group.iter().map(|t| t.denominator).sum();
            if den <= 1e-12 {
                return Err(BenchmarkError::DegenerateDistribution);
            }
            let f = num / den;
            let n = group.len();
            let var: f64 = group.iter().map(|t| (t.numerator - f * t.denominator).powi(2)).sum::<f64>() / (den * den);
            let stderr = if n > 1 { (var * n as f64 / (n - 1) as f64).sqrt() } else { f64::NAN };
            Ok(DepthPoint { depth, fidelity: f, stderr, n })
        })
        .collect()
}

/// Embeds a two-qubit unitary in the two-qutrit space, identity elsewhere.
pub fn embed_two_qubit(u: &TwoQubitUnitary) -> Matrix9c {
    let map = [0usize, 1, 3, 4];
    let mut m = Matrix9c::identity();
    for r in 0..4 {
        for c in 0..4 {
            m[(map[r], map[c])] = u.0[(r, c)];
        }
    }
    m
}

/// An ideal fSim gate as a channel.
pub fn fsim_channel(params: &FsimParams) -> Channel {
    Channel::unitary(&embed_two_qubit(&build_fsim(params)))
}

/// `channel` followed by two-qubit depolarizing noise of Pauli error `e_p`.
pub fn with_depolarizing(channel: &Channel, e_p: f64) -> Result<Channel, BenchmarkError> {
    let noise = Channel::from_linear_map(|e| Ok(crate::device::depolarize_two_qubit(&QutritDensityMatrix(*e), e_p).0))?;
    Ok(channel.then(&noise))
}

/// Final density matrix of a circuit played on the simulator, with noisy
/// single-qubit layers and `gate` as the per-cycle channel.
pub fn final_state(sim: &Simulator, gate: &Channel, circuit: &XebCircuit) -> QutritDensityMatrix {
    let err = sim.single_qubit_error();
    (0..circuit.depth).fold(QutritDensityMatrix::ground(), |rho, m| gate.apply(&apply_gate_layer(&rho, circuit.layer_gates(m), err)))
}

/// Measured outcome distributions of every circuit (|2⟩ read as |1⟩).
pub fn measure_circuits(sim: &Simulator, gate: &Channel, circuits: &[XebCircuit]) -> Vec<[f64; 4]> {
    circuits
        .par_iter()
        .enumerate()
        .map(|(i, c)| sim.estimate(qubit_probabilities(&final_state(sim, gate, c), &sim.model), i as u64))
        .collect()
}

/// XEB analysis of one gate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XebResult {
    pub points: Vec<DepthPoint>,
    pub fit: DecayFit,
    /// Pauli error per cycle.
    pub e_p_cycle: f64,
}

impl XebResult {
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["depth", "fidelity", "stderr", "n_circuits"]);
        for p in &self.points {
            t.push(vec![p.depth.to_string(), crate::output::fmt_f64(p.fidelity), crate::output::fmt_f64(p.stderr), p.n.to_string()]);
        }
        t
    }
}

/// Fits the depth curve of measured data against a gate model.
pub fn analyze_xeb(circuits: &[XebCircuit], measured: &[[f64; 4]], gate_model: &FsimParams) -> Result<XebResult, BenchmarkError> {
    let cycles = cycle_unitaries(&build_fsim(gate_model));
    let expected: Vec<[f64; 4]> = circuits.iter().map(|c| probs_with(c, &cycles)).collect();
    let points = xeb_curve(circuits, measured, &expected)?;
    let depths: Vec<usize> = points.iter().map(|p| p.depth).collect();
    let f: Vec<f64> = points.iter().map(|p| p.fidelity).collect();
    // The estimator vanishes identically for a fully depolarized state.
    let fit = fit_decay_with_offset(&depths, &f, 0.0)?;
    let e_p_cycle = fit.pauli_error(2)?;
    Ok(XebResult { points, fit, e_p_cycle })
}

/// Measures and analyzes in one go.
pub fn run_xeb(sim: &Simulator, gate: &Channel, gate_model: &FsimParams, circuits: &[XebCircuit]) -> Result<XebResult, BenchmarkError> {
    analyze_xeb(circuits, &measure_circuits(sim, gate, circuits), gate_model)
}

/// Mean per-depth fidelity of measured data under a model, the ex-situ
/// optimization objective.
pub(crate) fn mean_fidelity(circuits: &[XebCircuit], measured: &[[f64; 4]], gate_model: &FsimParams) -> f64 {
    let cycles = cycle_unitaries(&build_fsim(gate_model));
    let expected: Vec<[f64; 4]> = circuits.iter().map(|c| probs_with(c, &cycles)).collect();
    match xeb_curve(circuits, measured, &expected) {
        Ok(points) if !points.is_empty() => points.iter().map(|p| p.fidelity).sum::<f64>() / points.len() as f64,
        _ => f64::NAN,
    }
}
