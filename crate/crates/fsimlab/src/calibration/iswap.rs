use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::device::{DeviceModel, PulseProgram};
use crate::experiments::{detuning_offsets, measure_fsim, Simulator};
use crate::interp::MonotoneSpline;
use crate::optimize::parabolic_vertex;
use crate::output::{fmt_f64, Table};
use crate::pulse::lsb;

use super::{refine_extremum, swapped, sweep, CalibrationError, GateDesign};

/// Swapped population below which the θ = 90° point is flagged.
pub const SWAP_FLAG_THRESHOLD: f64 = 0.99;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IswapKnot {
    /// Coupler amplitude as a fraction of the θ = 90° offset from OFF.
    pub fraction: f64,
    pub theta_deg: f64,
    pub phi_deg: f64,
}

/// φ = c·θ² fitted through the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticFit {
    pub c_per_deg2: f64,
    pub r_squared: f64,
}

/// θ → coupler fraction and θ → φ for the iSWAP-like family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IswapCurve {
    pub design: GateDesign,
    /// Qubit-1 offset that places the qubits on resonance.
    pub q1_offset: f64,
    pub resonance_delta_mhz: f64,
    /// Coupler offset from OFF for θ = 90°.
    pub coupler_90: f64,
    pub swap_population: f64,
    /// Set when the swapped population stayed below [`SWAP_FLAG_THRESHOLD`].
    pub flagged: bool,
    pub knots: Vec<IswapKnot>,
    pub quadratic: QuadraticFit,
    fraction: MonotoneSpline,
    phi: MonotoneSpline,
}

impl IswapCurve {
    pub fn amplitudes(&self, fraction: f64) -> [f64; 3] {
        [0.0, self.q1_offset, fraction * self.coupler_90]
    }

    pub fn fraction_for(&self, theta_deg: f64) -> f64 {
        self.fraction.eval(theta_deg)
    }

    pub fn phi_for(&self, theta_deg: f64) -> f64 {
        self.phi.eval(theta_deg)
    }

    pub fn program(&self, model: &DeviceModel, theta_deg: f64) -> Result<PulseProgram, CalibrationError> {
        Ok(self.design.iswap_program(self.amplitudes(self.fraction_for(theta_deg)), model.sample_rate)?)
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["fraction", "theta_deg", "phi_deg"]);
        for k in &self.knots {
            t.push(vec![fmt_f64(k.fraction), fmt_f64(k.theta_deg), fmt_f64(k.phi_deg)]);
        }
        t
    }
}

pub fn quadratic_fit(theta_deg: &[f64], phi_deg: &[f64]) -> QuadraticFit {
    let s4: f64 = theta_deg.iter().map(|t| t.powi(4)).sum();
    let s2y: f64 = theta_deg.iter().zip(phi_deg).map(|(t, y)| t * t * y).sum();
    let c = if s4 > 0.0 { s2y / s4 } else { 0.0 };
    let mean = phi_deg.iter().sum::<f64>() / phi_deg.len().max(1) as f64;
    let ss_res: f64 = theta_deg.iter().zip(phi_deg).map(|(t, y)| (y - c * t * t).powi(2)).sum();
    let ss_tot: f64 = phi_deg.iter().map(|y| (y - mean).powi(2)).sum();
    QuadraticFit {
        c_per_deg2: c,
        r_squared: if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 },
    }
}

/// First swap maximum of the coupler sweep at fixed qubit offsets.
fn swap_peak(sim: &Simulator, design: &GateDesign, q1_offset: f64) -> Result<f64, CalibrationError> {
    let model = &sim.model;
    let f = |c: f64| swapped(sim, &design.iswap_program([0.0, q1_offset, c], model.sample_rate)?);
    let step = 16.0 * lsb(model.dac_bits);
    let c_max = (model.coupler.max_bias() - model.coupler.off_bias()).min(0.25);
    let n = (c_max / step).floor() as usize;
    let ys = (0..=n).map(|k| f(k as f64 * step)).collect::<Result<Vec<_>, _>>()?;
    let k = (1..n)
        .find(|&k| ys[k] >= 0.5 && ys[k] >= ys[k - 1] && ys[k] >= ys[k + 1])
        .ok_or(CalibrationError::NoFullSwap { delta_mhz: 0.0 })?;
    refine_extremum(&f, k as f64 * step, step, model.dac_bits, -1.0)
}

/// Calibrates the iSWAP-like family: coupler sweep for a full swap at
/// nominal resonance, qubit-bias sweep onto resonance, coupler re-sweep,
/// then θ and φ measured along the interpolation from OFF to the θ = 90°
/// amplitude at `n_fractions` points.
pub fn calibrate_iswap_family(sim: &Simulator, design: &GateDesign, n_fractions: usize) -> Result<IswapCurve, CalibrationError> {
    if n_fractions < 3 {
        return Err(CalibrationError::InvalidInput("need at least 3 interpolation points".into()));
    }
    let model = &sim.model;
    let [_, nominal] = detuning_offsets(model, 0.0)?;
    let c1 = swap_peak(sim, design, nominal)?;

    let swap_at = |delta: f64| -> Result<f64, CalibrationError> {
        let [_, o] = detuning_offsets(model, delta)?;
        swapped(sim, &design.iswap_program([0.0, o, c1], model.sample_rate)?)
    };
    let deltas = sweep(-10.0, 10.0, 41);
    let ys = deltas.iter().map(|&d| swap_at(d)).collect::<Result<Vec<_>, _>>()?;
    let k = (0..ys.len()).max_by(|&a, &b| ys[a].total_cmp(&ys[b])).expect("sweep is non-empty");
    let mut resonance = deltas[k];
    if k > 0 && k + 1 < ys.len() {
        resonance += (deltas[1] - deltas[0]) * parabolic_vertex(-ys[k - 1], -ys[k], -ys[k + 1]);
    }
    let [_, q1_offset] = detuning_offsets(model, resonance)?;

    let f = |c: f64| swapped(sim, &design.iswap_program([0.0, q1_offset, c], model.sample_rate)?);
    let coupler_90 = refine_extremum(&f, c1, 16.0 * lsb(model.dac_bits), model.dac_bits, -1.0)?;
    let swap_population = f(coupler_90)?;

    let fractions = sweep(0.0, 1.0, n_fractions);
    let knots = fractions
        .par_iter()
        .map(|&fr| -> Result<IswapKnot, CalibrationError> {
            let p = design.iswap_program([0.0, q1_offset, fr * coupler_90], model.sample_rate)?;
            let m = measure_fsim(sim, &p)?;
            Ok(IswapKnot {
                fraction: fr,
                theta_deg: m.theta_deg(),
                phi_deg: m.phi_deg(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut mono: Vec<&IswapKnot> = Vec::with_capacity(knots.len());
    for k in &knots {
        if mono.last().is_none_or(|l| k.theta_deg > l.theta_deg + 1e-9) {
            mono.push(k);
        }
    }
    let ts: Vec<f64> = mono.iter().map(|k| k.theta_deg).collect();
    let fraction = MonotoneSpline::new(ts.clone(), mono.iter().map(|k| k.fraction).collect())?;
    let phi = MonotoneSpline::new(ts, mono.iter().map(|k| k.phi_deg).collect())?;
    let quadratic = quadratic_fit(
        &knots.iter().map(|k| k.theta_deg).collect::<Vec<_>>(),
        &knots.iter().map(|k| k.phi_deg).collect::<Vec<_>>(),
    );
    Ok(IswapCurve {
        design: *design,
        q1_offset,
        resonance_delta_mhz: resonance,
        coupler_90,
        swap_population,
        flagged: swap_population < SWAP_FLAG_THRESHOLD,
        knots,
        quadratic,
        fraction,
        phi,
    })
}
