use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::device::{DeviceModel, PulseProgram};
use crate::fsim::FsimParams;
use crate::output::{fmt_f64, Provenance, Table};

use super::{CalibrationError, GateDesign};

pub const REGISTRY_SCHEMA_VERSION: u32 = 1;

/// One calibrated composite fSim gate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub target_theta_deg: f64,
    pub target_phi_deg: f64,
    /// Index into the 1° CPHASE registry.
    pub cphase_index: usize,
    /// θ fed to the iSWAP-like interpolation after adjustments.
    pub theta_command_deg: f64,
    /// Offsets for (q0, q1, coupler) of each sub-gate.
    pub cphase: [f64; 3],
    pub iswap: [f64; 3],
    pub measured: FsimParams,
    /// Measured minus target (θ, φ).
    pub residual_deg: [f64; 2],
    /// Control adjustments made before the last measurement.
    pub iterations: usize,
    pub converged: bool,
    /// Set when the gate could not be measured.
    pub failure: Option<String>,
    pub timestamp: u64,
}

impl RegistryEntry {
    pub fn program(&self, design: &GateDesign, model: &DeviceModel) -> Result<PulseProgram, CalibrationError> {
        Ok(design.composite_program(self.cphase, self.iswap, model.sample_rate)?)
    }
}

/// Calibrated composite gates keyed by their target angles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateRegistry {
    pub schema_version: u32,
    pub calibrated_at: u64,
    pub design: GateDesign,
    pub entries: Vec<RegistryEntry>,
    /// Seed and configuration hash of the run that wrote the registry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl GateRegistry {
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("registry serializes")
    }

    pub fn from_json_str(s: &str) -> Result<Self, CalibrationError> {
        let r: GateRegistry = serde_json::from_str(s)?;
        if r.schema_version != REGISTRY_SCHEMA_VERSION {
            return Err(CalibrationError::Schema {
                found: r.schema_version,
                expected: REGISTRY_SCHEMA_VERSION,
            });
        }
        Ok(r)
    }

    pub fn save(&self, path: &Path) -> Result<(), CalibrationError> {
        Ok(std::fs::write(path, self.to_json_string())?)
    }

    pub fn load(path: &Path) -> Result<Self, CalibrationError> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn all_converged(&self) -> bool {
        self.entries.iter().all(|e| e.converged)
    }

    pub fn max_iterations(&self) -> usize {
        self.entries.iter().map(|e| e.iterations).max().unwrap_or(0)
    }

    /// One row per target: angles, adjustment count and residuals.
    pub fn convergence_table(&self) -> Table {
        let mut t = Table::new([
            "target_theta_deg",
            "target_phi_deg",
            "iterations",
            "converged",
            "residual_theta_deg",
            "residual_phi_deg",
            "measured_theta_deg",
            "measured_phi_deg",
            "failure",
        ]);
        for e in &self.entries {
            t.push(vec![
                fmt_f64(e.target_theta_deg),
                fmt_f64(e.target_phi_deg),
                e.iterations.to_string(),
                e.converged.to_string(),
                fmt_f64(e.residual_deg[0]),
                fmt_f64(e.residual_deg[1]),
                fmt_f64(e.measured.theta_deg()),
                fmt_f64(e.measured.phi_deg()),
                e.failure.clone().unwrap_or_default(),
            ]);
        }
        t
    }
}

/// A registry hit; `off_grid` marks a nearest-neighbor fallback.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lookup<'a> {
    pub entry: &'a RegistryEntry,
    pub off_grid: bool,
}

fn phi_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

/// Exact match on the target angles, else the nearest entry with φ
/// compared on the circle.
pub fn registry_lookup(registry: &GateRegistry, theta_deg: f64, phi_deg: f64) -> Result<Lookup<'_>, CalibrationError> {
    let dist = |e: &RegistryEntry| {
        let dt = e.target_theta_deg - theta_deg;
        let dp = phi_distance(e.target_phi_deg, phi_deg);
        (dt * dt + dp * dp).sqrt()
    };
    if let Some(entry) = registry.entries.iter().find(|e| e.target_theta_deg == theta_deg && e.target_phi_deg == phi_deg) {
        return Ok(Lookup { entry, off_grid: false });
    }
    let entry = registry
        .entries
        .iter()
        .min_by(|a, b| dist(a).total_cmp(&dist(b)))
        .ok_or(CalibrationError::EmptyRegistry)?;
    Ok(Lookup {
        entry,
        off_grid: dist(entry) > 1e-9,
    })
}

/// The 525-gate target grid: 25 θ values from 0° to 90° in 3.75° steps
/// by 21 φ values from 0° to 360° in 18° steps.
pub fn fsim_grid_525() -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(525);
    for i in 0..25 {
        for j in 0..21 {
            out.push((3.75 * i as f64, 18.0 * j as f64));
        }
    }
    out
}
