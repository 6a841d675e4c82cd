use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::device::{DeviceModel, PulseProgram};
use crate::experiments::{detuning_offsets, measure_fsim, ramsey_phi, Simulator};
use crate::fsim::angle_diff;
use crate::interp::MonotoneSpline;
use crate::output::{fmt_f64, Table};
use crate::optimize::parabolic_vertex;
use crate::pulse::lsb;

use super::{leakage_from_11, loss_11, refine_extremum, sweep, CalibrationError, GateDesign};

/// Rise in |11⟩ loss over the zero-coupling value that marks the first
/// swap lobe.
const PEAK_RISE: f64 = 0.05;

/// Detuning sweep around the nonlinearity and the extrapolation density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CphaseSweep {
    /// Sweep covers η ± `span_mhz`.
    pub span_mhz: f64,
    pub step_mhz: f64,
    /// Points on each branch continuation from the sweep edge to zero
    /// coupling.
    pub extrapolation_points: usize,
}

impl Default for CphaseSweep {
    fn default() -> Self {
        Self {
            span_mhz: 75.0,
            step_mhz: 5.0,
            extrapolation_points: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CphaseKnot {
    /// Conditional phase unwrapped along the calibration path.
    pub phi_deg: f64,
    pub delta_mhz: f64,
    /// Coupler offset from OFF.
    pub coupler: f64,
    pub theta_deg: f64,
    pub leakage: f64,
    /// On the branch continuation past the detuning sweep rather than at
    /// a swept detuning.
    pub extrapolated: bool,
}

/// Controls for one CPHASE-family gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CphaseControls {
    pub phi_deg: f64,
    pub delta_mhz: f64,
    /// Offsets for (q0, q1, coupler).
    pub amplitudes: [f64; 3],
}

/// φ → (Δ, coupler amplitude) for the CPHASE family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CphaseCurve {
    pub design: GateDesign,
    pub sweep: CphaseSweep,
    pub knots: Vec<CphaseKnot>,
    delta: MonotoneSpline,
    coupler: MonotoneSpline,
}

impl CphaseCurve {
    fn path_coordinate(&self, phi_deg: f64) -> Result<f64, CalibrationError> {
        let (lo, hi) = self.delta.domain();
        let x = lo + (phi_deg - lo).rem_euclid(360.0);
        if x <= hi {
            return Ok(x);
        }
        // Within half a degree of either end of the path.
        if x - hi <= 0.5 {
            Ok(hi)
        } else if lo + 360.0 - x <= 0.5 {
            Ok(lo)
        } else {
            Err(CalibrationError::Coverage(phi_deg))
        }
    }

    pub fn controls(&self, model: &DeviceModel, phi_deg: f64) -> Result<CphaseControls, CalibrationError> {
        let x = self.path_coordinate(phi_deg)?;
        let delta_mhz = self.delta.eval(x);
        let [a0, a1] = detuning_offsets(model, delta_mhz)?;
        Ok(CphaseControls {
            phi_deg,
            delta_mhz,
            amplitudes: [a0, a1, self.coupler.eval(x)],
        })
    }

    pub fn program(&self, model: &DeviceModel, phi_deg: f64) -> Result<PulseProgram, CalibrationError> {
        let c = self.controls(model, phi_deg)?;
        Ok(self.design.cphase_program(c.amplitudes, model.sample_rate)?)
    }

    /// Largest residual swap angle over the full-swap knots.
    pub fn max_residual_theta_deg(&self) -> f64 {
        self.knots.iter().filter(|k| !k.extrapolated).map(|k| k.theta_deg).fold(0.0, f64::max)
    }

    /// Phase range reached by full-swap points alone.
    pub fn direct_range_deg(&self) -> (f64, f64) {
        let direct = self.knots.iter().filter(|k| !k.extrapolated).map(|k| k.phi_deg);
        direct.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["phi_deg", "delta_mhz", "coupler", "theta_deg", "leakage", "extrapolated"]);
        for k in &self.knots {
            t.push(vec![
                fmt_f64(k.phi_deg),
                fmt_f64(k.delta_mhz),
                fmt_f64(k.coupler),
                fmt_f64(k.theta_deg),
                fmt_f64(k.leakage),
                k.extrapolated.to_string(),
            ]);
        }
        t
    }
}

/// Coupler offset completing one |11⟩ → |02⟩ → |11⟩ cycle at detuning Δ:
/// the first minimum of |11⟩ loss after the first strong maximum.
pub fn full_swap_amplitude(sim: &Simulator, design: &GateDesign, delta_mhz: f64) -> Result<f64, CalibrationError> {
    let model = &sim.model;
    let [a0, a1] = detuning_offsets(model, delta_mhz)?;
    let loss = |c: f64| -> Result<f64, CalibrationError> {
        loss_11(sim, &design.cphase_program([a0, a1, c], model.sample_rate)?)
    };
    let step = 16.0 * lsb(model.dac_bits);
    let c_max = (model.coupler.max_bias() - model.coupler.off_bias()).min(0.25);
    let n = (c_max / step).floor() as usize;
    let xs: Vec<f64> = (0..=n).map(|k| k as f64 * step).collect();
    let ys = xs.iter().map(|&c| loss(c)).collect::<Result<Vec<_>, _>>()?;
    let no_swap = CalibrationError::NoFullSwap { delta_mhz };
    let peak = (1..n)
        .find(|&k| ys[k] - ys[0] >= PEAK_RISE && ys[k] >= ys[k - 1] && ys[k] >= ys[k + 1])
        .ok_or_else(|| CalibrationError::NoFullSwap { delta_mhz })?;
    let k = (peak + 1..n).find(|&k| ys[k] <= ys[k - 1] && ys[k] <= ys[k + 1]).ok_or(no_swap)?;
    refine_extremum(&loss, xs[k], step, model.dac_bits, 1.0)
}

/// Relative jump in full-swap amplitude between neighbouring detunings
/// taken as a switch to a later swap cycle.
const CYCLE_JUMP: f64 = 0.05;

/// The contiguous run of detunings around the sweep centre whose full-swap
/// amplitudes belong to the single-cycle branch. Far from the nonlinearity
/// the bare detuning alone completes a cycle within the pulse and the
/// branch ends.
fn single_cycle_span(deltas: &[f64], found: &[Option<f64>]) -> Result<(Vec<f64>, Vec<f64>), CalibrationError> {
    let mid = deltas.len() / 2;
    let centre = found[mid].ok_or(CalibrationError::NoFullSwap { delta_mhz: deltas[mid] })?;
    let walk = |range: &mut dyn Iterator<Item = usize>| -> usize {
        let mut prev = centre;
        let mut last = mid;
        for i in range {
            match found[i] {
                Some(c) if c <= prev * (1.0 + CYCLE_JUMP) => {
                    prev = c;
                    last = i;
                }
                _ => break,
            }
        }
        last
    };
    let lo = walk(&mut (0..mid).rev());
    let hi = walk(&mut (mid + 1..deltas.len()));
    if hi - lo < 2 {
        return Err(CalibrationError::NoFullSwap { delta_mhz: deltas[mid] });
    }
    let swaps = found[lo..=hi].iter().map(|c| c.expect("walk stops at gaps")).collect();
    Ok((deltas[lo..=hi].to_vec(), swaps))
}

/// Continues the full-cycle branch past the sweep edge toward zero
/// coupling: for each coupler offset `edge_coupler`·k/n, k = n−1 … 0, the
/// detuning that minimizes |11⟩ loss, searched outward from the previous
/// point by `step_mhz` (signed).
fn extrapolate_branch(
    sim: &Simulator,
    design: &GateDesign,
    edge_delta: f64,
    edge_coupler: f64,
    step_mhz: f64,
    n: usize,
) -> Result<Vec<(f64, f64)>, CalibrationError> {
    let model = &sim.model;
    let loss = |d: f64, c: f64| -> Result<f64, CalibrationError> {
        let [a0, a1] = detuning_offsets(model, d)?;
        loss_11(sim, &design.cphase_program([a0, a1, c], model.sample_rate)?)
    };
    let fine = step_mhz / 10.0;
    let mut out = Vec::with_capacity(n);
    let mut d = edge_delta;
    for k in (1..n).rev() {
        let c = edge_coupler * k as f64 / n as f64;
        let xs: Vec<f64> = (0..=40).map(|j| d + j as f64 * fine).collect();
        let ys = xs.iter().map(|&x| loss(x, c)).collect::<Result<Vec<_>, _>>()?;
        let j = (0..ys.len()).min_by(|&a, &b| ys[a].total_cmp(&ys[b])).expect("sweep is non-empty");
        d = xs[j];
        if j > 0 && j + 1 < ys.len() {
            d += fine * parabolic_vertex(ys[j - 1], ys[j], ys[j + 1]);
        }
        out.push((d, c));
    }
    out.push((d, 0.0));
    Ok(out)
}

struct RawKnot {
    phi: f64,
    delta_mhz: f64,
    coupler: f64,
    extrapolated: bool,
}

/// Calibrates the CPHASE family: full-swap amplitudes across the detuning
/// sweep, conditional phase by Ramsey at each, and the full-cycle branch
/// followed toward zero coupling past both sweep edges for the phases the
/// swept points do not reach. The returned curve covers every angle in `phi_grid_deg`.
pub fn calibrate_cphase_family(
    sim: &Simulator,
    design: &GateDesign,
    sweep_cfg: &CphaseSweep,
    phi_grid_deg: &[f64],
) -> Result<CphaseCurve, CalibrationError> {
    if let Some(p) = phi_grid_deg.iter().find(|p| !(**p > -180.0 && **p <= 180.0)) {
        return Err(CalibrationError::InvalidInput(format!("phi {p} deg outside (-180, 180]")));
    }
    if !(sweep_cfg.span_mhz > 0.0 && sweep_cfg.step_mhz > 0.0) || sweep_cfg.extrapolation_points == 0 {
        return Err(CalibrationError::InvalidInput("empty CPHASE sweep".into()));
    }
    let model = &sim.model;
    let n_delta = (2.0 * sweep_cfg.span_mhz / sweep_cfg.step_mhz).round() as usize + 1;
    let deltas = sweep(model.eta_mhz - sweep_cfg.span_mhz, model.eta_mhz + sweep_cfg.span_mhz, n_delta);
    let found: Vec<Option<f64>> = deltas.par_iter().map(|&d| full_swap_amplitude(sim, design, d).ok()).collect();
    let (deltas, swaps) = single_cycle_span(&deltas, &found)?;
    let n_delta = deltas.len();

    let n_ex = sweep_cfg.extrapolation_points;
    let low = extrapolate_branch(sim, design, deltas[0], swaps[0], -sweep_cfg.step_mhz, n_ex)?;
    let high = extrapolate_branch(sim, design, deltas[n_delta - 1], swaps[n_delta - 1], sweep_cfg.step_mhz, n_ex)?;
    let mut path: Vec<(f64, f64, bool)> = low.into_iter().rev().map(|(d, c)| (d, c, true)).collect();
    path.extend(deltas.iter().zip(&swaps).map(|(&d, &c)| (d, c, false)));
    path.extend(high.into_iter().map(|(d, c)| (d, c, true)));

    let program = |d: f64, c: f64| -> Result<PulseProgram, CalibrationError> {
        let [a0, a1] = detuning_offsets(model, d)?;
        Ok(design.cphase_program([a0, a1, c], model.sample_rate)?)
    };
    let measured = path
        .par_iter()
        .map(|&(d, c, extrapolated)| -> Result<(RawKnot, f64, f64), CalibrationError> {
            let p = program(d, c)?;
            let phi = ramsey_phi(sim, &p)?.to_degrees();
            let theta = measure_fsim(sim, &p)?.theta_deg();
            let leak = leakage_from_11(sim, &p)?;
            Ok((
                RawKnot {
                    phi,
                    delta_mhz: d,
                    coupler: c,
                    extrapolated,
                },
                theta,
                leak,
            ))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut knots = Vec::with_capacity(measured.len());
    let mut prev: Option<f64> = None;
    for (raw, theta_deg, leakage) in measured {
        let phi_deg = match prev {
            None => raw.phi,
            Some(p) => p + angle_diff(raw.phi.to_radians(), p.to_radians()).to_degrees(),
        };
        prev = Some(phi_deg);
        knots.push(CphaseKnot {
            phi_deg,
            delta_mhz: raw.delta_mhz,
            coupler: raw.coupler,
            theta_deg,
            leakage,
            extrapolated: raw.extrapolated,
        });
    }
    let mut sorted = knots.clone();
    sorted.sort_by(|a, b| a.phi_deg.total_cmp(&b.phi_deg));
    sorted.dedup_by(|b, a| b.phi_deg - a.phi_deg < 1e-9);
    let xs: Vec<f64> = sorted.iter().map(|k| k.phi_deg).collect();
    let delta = MonotoneSpline::new(xs.clone(), sorted.iter().map(|k| k.delta_mhz).collect())?;
    let coupler = MonotoneSpline::new(xs, sorted.iter().map(|k| k.coupler).collect())?;
    let curve = CphaseCurve {
        design: *design,
        sweep: *sweep_cfg,
        knots,
        delta,
        coupler,
    };
    for &p in phi_grid_deg {
        curve.path_coordinate(p)?;
    }
    Ok(curve)
}
