use serde::{Deserialize, Serialize};

/// Two-qubit gate error split into incoherent and coherent parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBudget {
    /// Two-qubit Pauli error from XEB.
    pub total: f64,
    /// Two-qubit Pauli error from purity benchmarking.
    pub incoherent: f64,
    pub coherent: f64,
    pub leakage: f64,
}

/// Removes the single-qubit Pauli errors from both cycle errors and takes
/// the difference as the coherent part.
pub fn error_budget(xeb_cycle_error: f64, purity_cycle_error: f64, leakage_rate: f64, single_qubit: [f64; 2]) -> ErrorBudget {
    let sq = single_qubit[0] + single_qubit[1];
    let total = xeb_cycle_error - sq;
    let incoherent = purity_cycle_error - sq;
    ErrorBudget {
        total,
        incoherent,
        coherent: total - incoherent,
        leakage: leakage_rate,
    }
}
