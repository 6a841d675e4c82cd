//! Closed-loop calibration of the CPHASE and iSWAP-like gate families and
//! of composite fSim gates, with the persisted gate registry.

mod composite;
mod cphase;
mod iswap;
mod registry;

pub use composite::*;
pub use cphase::*;
pub use iswap::*;
pub use registry::*;

use serde::{Deserialize, Serialize};

use crate::device::{idx9, DeviceError, PulseProgram, PulseShape, PulseSpec, Qubit, QubitSpan, SingleQubitGate};
use crate::experiments::{ExperimentError, Simulator};
use crate::interp::InterpError;
use crate::optimize::parabolic_vertex;
use crate::pulse::lsb;

#[derive(Debug, thiserror::Error)]
pub enum CalibrationError {
    #[error("no full-swap amplitude found in the coupler sweep at delta = {delta_mhz} MHz")]
    NoFullSwap { delta_mhz: f64 },
    #[error("calibrated family does not cover phi = {0} deg")]
    Coverage(f64),
    #[error("registry is empty")]
    EmptyRegistry,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("registry schema version {found}, expected {expected}")]
    Schema { found: u32, expected: u32 },
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Interp(#[from] InterpError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Order of the two component pulses inside a composite gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateOrder {
    #[default]
    CphaseFirst,
    IswapFirst,
}

/// Lengths and coupler shape of the component gate pulses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateDesign {
    pub cphase_ns: f64,
    pub cphase_pad_ns: f64,
    pub iswap_ns: f64,
    pub iswap_pad_ns: f64,
    /// 10–90 % rise of the Gaussian-smoothed coupler pulse.
    pub rise_ns: f64,
    /// Idle time between the two component pulses.
    pub gap_ns: f64,
    pub order: GateOrder,
}

impl Default for GateDesign {
    fn default() -> Self {
        Self {
            cphase_ns: 13.0,
            cphase_pad_ns: 1.0,
            iswap_ns: 11.0,
            iswap_pad_ns: 1.0,
            rise_ns: 4.0,
            gap_ns: 0.0,
            order: GateOrder::CphaseFirst,
        }
    }
}

impl GateDesign {
    fn shape(&self) -> PulseShape {
        PulseShape::Smoothed { rise_ns: self.rise_ns }
    }

    /// CPHASE-family pulse with offsets for (q0, q1, coupler).
    pub fn cphase_program(&self, amplitudes: [f64; 3], sample_rate: f64) -> Result<PulseProgram, DeviceError> {
        PulseSpec {
            duration_ns: self.cphase_ns,
            pad_ns: self.cphase_pad_ns,
            amplitudes,
            shape: self.shape(),
            qubit_span: QubitSpan::Padded,
        }
        .build(sample_rate)
    }

    pub fn iswap_program(&self, amplitudes: [f64; 3], sample_rate: f64) -> Result<PulseProgram, DeviceError> {
        PulseSpec {
            duration_ns: self.iswap_ns,
            pad_ns: self.iswap_pad_ns,
            amplitudes,
            shape: self.shape(),
            qubit_span: QubitSpan::Padded,
        }
        .build(sample_rate)
    }

    /// Both component pulses in the configured order.
    pub fn composite_program(&self, cphase: [f64; 3], iswap: [f64; 3], sample_rate: f64) -> Result<PulseProgram, DeviceError> {
        let c = self.cphase_program(cphase, sample_rate)?;
        let i = self.iswap_program(iswap, sample_rate)?;
        let gap = (self.gap_ns * sample_rate).round() as usize;
        Ok(match self.order {
            GateOrder::CphaseFirst => c.with_trailing_idle(gap).then(&i),
            GateOrder::IswapFirst => i.with_trailing_idle(gap).then(&c),
        })
    }

    pub fn composite_ns(&self) -> f64 {
        self.cphase_ns + 2.0 * self.cphase_pad_ns + self.iswap_ns + 2.0 * self.iswap_pad_ns + self.gap_ns
    }
}

/// Population left outside |11⟩ after playing `program` on |11⟩.
fn loss_11(sim: &Simulator, program: &PulseProgram) -> Result<f64, CalibrationError> {
    let prep = [(Qubit::Q0, SingleQubitGate::X), (Qubit::Q1, SingleQubitGate::X)];
    let p = sim.measure_populations_corrected(&sim.play(&sim.prepare(&prep), program)?, 0);
    Ok(1.0 - p[idx9(1, 1)])
}

/// Population moved from |01⟩ to |10⟩ by `program`.
fn swapped(sim: &Simulator, program: &PulseProgram) -> Result<f64, CalibrationError> {
    let p = sim.measure_populations_corrected(&sim.play(&sim.prepare(&[(Qubit::Q1, SingleQubitGate::X)]), program)?, 0);
    Ok(p[idx9(1, 0)])
}

/// Population outside the computational subspace after `program` on |11⟩.
pub fn leakage_from_11(sim: &Simulator, program: &PulseProgram) -> Result<f64, CalibrationError> {
    let prep = [(Qubit::Q0, SingleQubitGate::X), (Qubit::Q1, SingleQubitGate::X)];
    let p = sim.measure_populations_corrected(&sim.play(&sim.prepare(&prep), program)?, 0);
    Ok(1.0 - crate::device::COMPUTATIONAL_9.iter().map(|&i| p[i]).sum::<f64>())
}

/// Fine sweep with a two-LSB step around `center` and parabolic refinement
/// of the extremum. `sign` = 1 minimizes, −1 maximizes.
fn refine_extremum<F>(f: &F, center: f64, half_width: f64, dac_bits: u32, sign: f64) -> Result<f64, CalibrationError>
where
    F: Fn(f64) -> Result<f64, CalibrationError>,
{
    let step = 2.0 * lsb(dac_bits);
    let n = (half_width / step).ceil().max(1.0) as i64;
    let xs: Vec<f64> = (-n..=n).map(|k| center + k as f64 * step).collect();
    let ys = xs.iter().map(|&x| f(x).map(|v| sign * v)).collect::<Result<Vec<_>, _>>()?;
    let k = (0..ys.len()).min_by(|&a, &b| ys[a].total_cmp(&ys[b])).expect("sweep is non-empty");
    if k == 0 || k == ys.len() - 1 {
        return Ok(xs[k]);
    }
    Ok(xs[k] + step * parabolic_vertex(ys[k - 1], ys[k], ys[k + 1]))
}

/// Uniform sweep values from `lo` to `hi` inclusive.
fn sweep(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}
