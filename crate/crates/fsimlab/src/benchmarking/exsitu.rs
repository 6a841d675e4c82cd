use serde::{Deserialize, Serialize};

use crate::fsim::FsimParams;
use crate::optimize::{nelder_mead, NelderMeadOptions};

use super::{mean_fidelity, BenchmarkError, XebCircuit};

/// A parameter of the fSim model that ex-situ optimization may vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FsimParam {
    Theta,
    Phi,
    DeltaPlus,
    DeltaMinus,
    DeltaMinusOff,
}

impl FsimParam {
    fn index(self) -> usize {
        match self {
            FsimParam::Theta => 0,
            FsimParam::Phi => 1,
            FsimParam::DeltaPlus => 2,
            FsimParam::DeltaMinus => 3,
            FsimParam::DeltaMinusOff => 4,
        }
    }
}

/// The three single-qubit phases; θ and φ stay on their grid values.
pub const PHASES: [FsimParam; 3] = [FsimParam::DeltaPlus, FsimParam::DeltaMinus, FsimParam::DeltaMinusOff];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExSituResult {
    pub params: FsimParams,
    pub fidelity_before: f64,
    pub fidelity_after: f64,
    pub evaluations: usize,
    /// False when no model better than the initial one was found; `params`
    /// is then the initial model.
    pub improved: bool,
}

/// Maximizes the mean depth-wise XEB fidelity of fixed measured data over
/// the selected model parameters with a Nelder–Mead simplex.
pub fn ex_situ_optimize(
    initial: &FsimParams,
    free: &[FsimParam],
    circuits: &[XebCircuit],
    measured: &[[f64; 4]],
) -> Result<ExSituResult, BenchmarkError> {
    if circuits.len() != measured.len() || circuits.is_empty() {
        return Err(BenchmarkError::InvalidInput("one measured distribution per circuit".into()));
    }
    let f0 = mean_fidelity(circuits, measured, initial);
    if !f0.is_finite() {
        return Err(BenchmarkError::DegenerateDistribution);
    }
    let unchanged = ExSituResult {
        params: *initial,
        fidelity_before: f0,
        fidelity_after: f0,
        evaluations: 1,
        improved: false,
    };
    if free.is_empty() {
        return Ok(unchanged);
    }
    let base = initial.as_array();
    let model = |x: &[f64]| {
        let mut a = base;
        for (p, v) in free.iter().zip(x) {
            a[p.index()] = *v;
        }
        FsimParams::from_array(a)
    };
    let x0: Vec<f64> = free.iter().map(|p| base[p.index()]).collect();
    let steps = vec![0.05; free.len()];
    let res = nelder_mead(
        |x| {
            let f = mean_fidelity(circuits, measured, &model(x));
            if f.is_finite() {
                1.0 - f
            } else {
                f64::INFINITY
            }
        },
        &x0,
        &steps,
        &NelderMeadOptions::default(),
    );
    let f1 = 1.0 - res.f;
    if !(f1 > f0) {
        return Ok(ExSituResult {
            evaluations: res.evaluations,
            ..unchanged
        });
    }
    Ok(ExSituResult {
        params: model(&res.x),
        fidelity_before: f0,
        fidelity_after: f1,
        evaluations: res.evaluations,
        improved: true,
    })
}
