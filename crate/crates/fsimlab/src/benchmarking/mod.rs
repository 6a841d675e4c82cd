//! Cross-entropy, purity and randomized benchmarking, decay fits,
//! ex-situ model optimization and error budgets.

mod budget;
mod exsitu;
mod fit;
mod purity;
mod rb;
mod xeb;

pub use budget::*;
pub use exsitu::*;
pub use fit::*;
pub use purity::*;
pub use rb::*;
pub use xeb::*;

use crate::device::{Channel, DeviceError, Matrix9c, QutritDensityMatrix};
use crate::fsim::{FsimError, TwoQubitUnitary};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum BenchmarkError {
    #[error("fit failed: {0}")]
    Fit(String),
    #[error("fitted decay grows with depth (1 − p = {0:.3e})")]
    NegativeDecay(f64),
    #[error("expected distribution is uniform; cross-entropy fidelity undefined")]
    DegenerateDistribution,
    #[error("reconstructed purity {purity:.4} of circuit {circuit} exceeds 1")]
    UnphysicalPurity { circuit: usize, purity: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Fsim(#[from] FsimError),
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Experiment(#[from] crate::experiments::ExperimentError),
}

/// Process fidelity of a channel against a target two-qubit unitary,
/// counting only amplitude that stays in the computational subspace.
pub fn process_fidelity(channel: &Channel, target: &TwoQubitUnitary) -> f64 {
    let map = [0usize, 1, 3, 4];
    let ud = embed_two_qubit(target).adjoint();
    let mut acc = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            let mut e = Matrix9c::zeros();
            e[(map[i], map[j])] = crate::fsim::C64::new(1.0, 0.0);
            let out = ud * channel.apply(&QutritDensityMatrix(e)).0 * ud.adjoint();
            acc += out[(map[i], map[j])].re;
        }
    }
    acc / 16.0
}

/// Pauli error of a gate channel, 1 − process fidelity.
pub fn gate_pauli_error(channel: &Channel, target: &TwoQubitUnitary) -> f64 {
    (1.0 - process_fidelity(channel, target)).max(0.0)
}

/// Everything measured for one gate, as written to the JSON summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSummary {
    pub gate: String,
    pub xeb: Option<XebResult>,
    pub purity: Option<PurityResult>,
    pub budget: Option<ErrorBudget>,
    pub single_qubit: [f64; 2],
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fsim::{build_fsim, FsimParams};

    #[test]
    fn ideal_channel_has_unit_process_fidelity() {
        let p = FsimParams::with_phases(0.4, 2.0, 0.1, 0.2, -0.3);
        let f = process_fidelity(&fsim_channel(&p), &build_fsim(&p));
        assert!((f - 1.0).abs() < 1e-12);
    }

    #[test]
    fn depolarizing_channel_error_matches_injection() {
        let p = FsimParams::new(0.9, 0.3);
        let ch = with_depolarizing(&fsim_channel(&p), 4e-3).unwrap();
        assert!((gate_pauli_error(&ch, &build_fsim(&p)) - 4e-3).abs() < 1e-12);
    }
}
