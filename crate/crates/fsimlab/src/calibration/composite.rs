use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::device::PulseProgram;
use crate::experiments::{measure_fsim, Simulator};
use crate::fsim::{angle_diff, FsimParams};
use crate::interp::{lerp_table, MonotoneSpline};

use super::{
    refine_extremum, swapped, sweep, CalibrationError, CphaseControls, CphaseCurve, GateDesign, GateRegistry, IswapCurve,
    IswapKnot, RegistryEntry, REGISTRY_SCHEMA_VERSION,
};

/// Entries in the 1°-granularity CPHASE registry.
pub const CPHASE_ENTRIES: usize = 360;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompositeConfig {
    pub tolerance_deg: f64,
    /// Adjustment cap; entries still off after this many are unconverged.
    pub max_iterations: usize,
    /// Re-find the iSWAP-like endpoints after every `stride`-th CPHASE
    /// entry and interpolate in between.
    pub stride: usize,
    /// Points in the stage-3 θ interpolation.
    pub n_fractions: usize,
    /// Unix time stamped on every entry.
    pub calibrated_at: u64,
}

impl Default for CompositeConfig {
    fn default() -> Self {
        Self {
            tolerance_deg: 1.0,
            max_iterations: 15,
            stride: 1,
            n_fractions: 21,
            calibrated_at: 0,
        }
    }
}

/// One CPHASE-family gate of the 1° registry, measured on its own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CphaseEntry {
    pub controls: CphaseControls,
    pub measured: FsimParams,
}

/// iSWAP-like coupler offsets for θ = 0° and θ = 90° with a given CPHASE
/// gate played first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IswapEndpoints {
    pub coupler_0: f64,
    pub coupler_90: f64,
}

/// Everything the per-target loop looks controls up in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeStages {
    pub design: GateDesign,
    pub cphase: Vec<CphaseEntry>,
    pub endpoints: Vec<IswapEndpoints>,
    /// Composite θ and φ_iSWAP along the stage-3 interpolation.
    pub knots: Vec<IswapKnot>,
    pub iswap_q1_offset: f64,
    fraction: MonotoneSpline,
    phi: MonotoneSpline,
}

impl CompositeStages {
    pub fn fraction_for(&self, theta_deg: f64) -> f64 {
        self.fraction.eval(theta_deg)
    }

    pub fn phi_iswap(&self, theta_deg: f64) -> f64 {
        self.phi.eval(theta_deg)
    }

    /// Nearest CPHASE registry index for a conditional phase.
    pub fn cphase_index(phi_deg: f64) -> usize {
        (phi_deg.rem_euclid(360.0).round() as usize) % CPHASE_ENTRIES
    }

    pub fn iswap_amplitudes(&self, index: usize, theta_command_deg: f64) -> [f64; 3] {
        let e = &self.endpoints[index];
        let f = self.fraction_for(theta_command_deg);
        [0.0, self.iswap_q1_offset, e.coupler_0 + f * (e.coupler_90 - e.coupler_0)]
    }

    pub fn program(&self, index: usize, theta_command_deg: f64, sample_rate: f64) -> Result<PulseProgram, CalibrationError> {
        Ok(self.design.composite_program(
            self.cphase[index].controls.amplitudes,
            self.iswap_amplitudes(index, theta_command_deg),
            sample_rate,
        )?)
    }
}

fn endpoints_for(
    sim: &Simulator,
    design: &GateDesign,
    cphase: [f64; 3],
    iswap: &IswapCurve,
) -> Result<IswapEndpoints, CalibrationError> {
    let model = &sim.model;
    let base = iswap.amplitudes(0.0);
    let f = |c: f64| swapped(sim, &design.composite_program(cphase, [base[0], base[1], c], model.sample_rate)?);
    let c90 = iswap.coupler_90;
    // Local extremum nearest `reference`; the wider window can hold the
    // next swap lobe.
    let search = |reference: f64, half_width: f64, sign: f64| -> Result<f64, CalibrationError> {
        let xs = sweep(reference - half_width, reference + half_width, 21);
        let ys = xs.iter().map(|&x| f(x).map(|v| sign * v)).collect::<Result<Vec<_>, _>>()?;
        let n = ys.len();
        let k = (0..n)
            .filter(|&k| (k == 0 || ys[k] <= ys[k - 1]) && (k + 1 == n || ys[k] <= ys[k + 1]))
            .min_by(|&a, &b| (xs[a] - reference).abs().total_cmp(&(xs[b] - reference).abs()))
            .expect("a sweep has at least one local extremum");
        refine_extremum(&f, xs[k], xs[1] - xs[0], model.dac_bits, sign)
    };
    Ok(IswapEndpoints {
        coupler_0: search(0.0, 0.2 * c90, 1.0)?,
        coupler_90: search(c90, 0.2 * c90, -1.0)?,
    })
}

/// Stages 1–3: the 1° CPHASE registry, the iSWAP-like endpoints re-found
/// with each CPHASE gate played first, and the θ interpolation measured
/// behind the φ = 180° CPHASE gate.
pub fn composite_stages(
    sim: &Simulator,
    cphase: &CphaseCurve,
    iswap: &IswapCurve,
    cfg: &CompositeConfig,
) -> Result<CompositeStages, CalibrationError> {
    if cfg.stride == 0 || cfg.n_fractions < 3 {
        return Err(CalibrationError::InvalidInput("stride must be positive and n_fractions at least 3".into()));
    }
    let model = &sim.model;
    let design = cphase.design;
    let entries = (0..CPHASE_ENTRIES)
        .into_par_iter()
        .map(|i| -> Result<CphaseEntry, CalibrationError> {
            let controls = cphase.controls(model, i as f64)?;
            let measured = measure_fsim(sim, &design.cphase_program(controls.amplitudes, model.sample_rate)?)?;
            Ok(CphaseEntry { controls, measured })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let anchors: Vec<usize> = (0..CPHASE_ENTRIES).step_by(cfg.stride).collect();
    let found = anchors
        .par_iter()
        .map(|&i| endpoints_for(sim, &design, entries[i].controls.amplitudes, iswap))
        .collect::<Result<Vec<_>, _>>()?;
    let endpoints = if cfg.stride == 1 {
        found
    } else {
        // Circular linear interpolation between re-measured entries.
        let mut xs: Vec<f64> = anchors.iter().map(|&i| i as f64).collect();
        let mut e0: Vec<f64> = found.iter().map(|e| e.coupler_0).collect();
        let mut e90: Vec<f64> = found.iter().map(|e| e.coupler_90).collect();
        xs.push(CPHASE_ENTRIES as f64);
        e0.push(e0[0]);
        e90.push(e90[0]);
        (0..CPHASE_ENTRIES)
            .map(|i| IswapEndpoints {
                coupler_0: lerp_table(&xs, &e0, i as f64),
                coupler_90: lerp_table(&xs, &e90, i as f64),
            })
            .collect()
    };

    let i180 = CompositeStages::cphase_index(180.0);
    let e = endpoints[i180];
    let base = iswap.amplitudes(0.0);
    let phi_c = entries[i180].measured.phi;
    let knots = sweep(0.0, 1.0, cfg.n_fractions)
        .par_iter()
        .map(|&fr| -> Result<IswapKnot, CalibrationError> {
            let c = e.coupler_0 + fr * (e.coupler_90 - e.coupler_0);
            let p = design.composite_program(entries[i180].controls.amplitudes, [base[0], base[1], c], model.sample_rate)?;
            let m = measure_fsim(sim, &p)?;
            Ok(IswapKnot {
                fraction: fr,
                theta_deg: m.theta_deg(),
                phi_deg: angle_diff(m.phi, phi_c).to_degrees(),
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
    Ok(CompositeStages {
        design,
        cphase: entries,
        endpoints,
        knots,
        iswap_q1_offset: base[1],
        fraction,
        phi,
    })
}

/// Closed loop for one target: look up controls, measure by unitary
/// tomography, and while either angle is off by more than the tolerance
/// step the corresponding control by one degree.
pub fn calibrate_target(
    sim: &Simulator,
    stages: &CompositeStages,
    theta_deg: f64,
    phi_deg: f64,
    cfg: &CompositeConfig,
) -> RegistryEntry {
    let rate = sim.model.sample_rate;
    let mut index = CompositeStages::cphase_index(phi_deg - stages.phi_iswap(theta_deg));
    let mut theta_cmd = theta_deg;
    let mut adjustments = 0;
    let mut entry = RegistryEntry {
        target_theta_deg: theta_deg,
        target_phi_deg: phi_deg,
        cphase_index: index,
        theta_command_deg: theta_cmd,
        cphase: stages.cphase[index].controls.amplitudes,
        iswap: stages.iswap_amplitudes(index, theta_cmd),
        measured: FsimParams::default(),
        residual_deg: [0.0; 2],
        iterations: 0,
        converged: false,
        failure: None,
        timestamp: cfg.calibrated_at,
    };
    loop {
        entry.cphase_index = index;
        entry.theta_command_deg = theta_cmd;
        entry.cphase = stages.cphase[index].controls.amplitudes;
        entry.iswap = stages.iswap_amplitudes(index, theta_cmd);
        entry.iterations = adjustments;
        let measured = stages.program(index, theta_cmd, rate).and_then(|p| Ok(measure_fsim(sim, &p)?));
        let m = match measured {
            Ok(m) => m,
            Err(e) => {
                entry.failure = Some(e.to_string());
                return entry;
            }
        };
        let e_theta = m.theta_deg() - theta_deg;
        let e_phi = angle_diff(m.phi, phi_deg.to_radians()).to_degrees();
        entry.measured = m;
        entry.residual_deg = [e_theta, e_phi];
        let theta_ok = e_theta.abs() <= cfg.tolerance_deg;
        let phi_ok = e_phi.abs() <= cfg.tolerance_deg;
        if theta_ok && phi_ok {
            entry.converged = true;
            return entry;
        }
        if adjustments == cfg.max_iterations {
            return entry;
        }
        if !theta_ok {
            theta_cmd -= e_theta.signum();
        }
        if !phi_ok {
            index = (index + CPHASE_ENTRIES).wrapping_add_signed(-(e_phi.signum() as isize)) % CPHASE_ENTRIES;
        }
        adjustments += 1;
    }
}

/// Stages 1–3 followed by the closed loop for every target (θ, φ) in
/// degrees. Targets are independent and run in parallel; each loop is
/// sequential.
pub fn calibrate_composite_fsim(
    sim: &Simulator,
    cphase: &CphaseCurve,
    iswap: &IswapCurve,
    targets: &[(f64, f64)],
    cfg: &CompositeConfig,
) -> Result<(GateRegistry, CompositeStages), CalibrationError> {
    let stages = composite_stages(sim, cphase, iswap, cfg)?;
    let registry = calibrate_targets(sim, &stages, targets, cfg);
    Ok((registry, stages))
}

/// The closed loop alone, on previously measured stages.
pub fn calibrate_targets(sim: &Simulator, stages: &CompositeStages, targets: &[(f64, f64)], cfg: &CompositeConfig) -> GateRegistry {
    let entries = targets
        .par_iter()
        .map(|&(t, p)| calibrate_target(sim, stages, t, p, cfg))
        .collect();
    GateRegistry {
        schema_version: REGISTRY_SCHEMA_VERSION,
        calibrated_at: cfg.calibrated_at,
        design: stages.design,
        provenance: None,
        entries,
    }
}
