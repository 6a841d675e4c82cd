use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

use crate::calibration::{CompositeConfig, CphaseSweep, GateOrder};
use crate::device::{DeviceModel, PulseShape, Realism};
use crate::experiments::{LeakageReadout, Mode, ScanMode, Simulator};

use super::{CliError, MANIFEST_SCHEMA};

/// Environment variable that overrides the configured seed.
pub const SEED_ENV: &str = "FSIMLAB_SEED";

/// Everything one invocation needs. Every field has a default, so `{}`
/// is a valid configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Device profile JSON; the built-in default profile when absent.
    pub device: Option<PathBuf>,
    pub seed: u64,
    pub shots: u64,
    /// Exact outcome probabilities instead of `shots` samples.
    pub expectation: bool,
    pub output_dir: PathBuf,
    /// Decoherence and single-qubit gate error.
    pub noise: bool,
    pub realism: Realism,
    /// Worker threads; all cores when absent.
    pub threads: Option<usize>,
    pub scan: ScanParams,
    pub spectroscopy: SpectroscopyParams,
    pub tomography: TomographyParams,
    pub xeb: XebParams,
    pub purity: PurityParams,
    pub rb: RbParams,
    pub calibrate: CalibrateParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            device: None,
            seed: 1,
            shots: 2000,
            expectation: false,
            output_dir: PathBuf::from("fsimlab_out"),
            noise: true,
            realism: Realism::FULL,
            threads: None,
            scan: ScanParams::default(),
            spectroscopy: SpectroscopyParams::default(),
            tomography: TomographyParams::default(),
            xeb: XebParams::default(),
            purity: PurityParams::default(),
            rb: RbParams::default(),
            calibrate: CalibrateParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanParams {
    pub mode: ScanMode,
    pub duration_ns: f64,
    pub pad_ns: f64,
    pub shape: PulseShape,
    pub readout: LeakageReadout,
    /// Detuning axis (MHz): `n_delta` points from `delta_min_mhz` to `delta_max_mhz`.
    pub delta_min_mhz: f64,
    pub delta_max_mhz: f64,
    pub n_delta: usize,
    /// Coupler axis: `n_g` couplings from 0 to `g_max_mhz` in magnitude.
    pub g_max_mhz: f64,
    pub n_g: usize,
}

impl Default for ScanParams {
    fn default() -> Self {
        Self {
            mode: ScanMode::Theta,
            duration_ns: 15.0,
            pad_ns: 0.0,
            shape: PulseShape::Rectangular,
            readout: LeakageReadout::State02,
            delta_min_mhz: 0.0,
            delta_max_mhz: 400.0,
            n_delta: 101,
            g_max_mhz: 50.0,
            n_g: 101,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectroscopyParams {
    /// Absolute coupler biases (Φ₀): `n_bias` points over the range.
    pub bias_min: f64,
    pub bias_max: f64,
    pub n_bias: usize,
    /// Pulse durations 0, 1, … `n_durations` − 1 times `duration_step_ns`.
    pub duration_step_ns: f64,
    pub n_durations: usize,
}

impl Default for SpectroscopyParams {
    fn default() -> Self {
        Self {
            bias_min: 0.0,
            bias_max: 0.47,
            n_bias: 48,
            duration_step_ns: 1.0,
            n_durations: 200,
        }
    }
}

/// The two-qubit gate a benchmark or tomography command works on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GateSource {
    /// The exact fSim unitary followed by two-qubit depolarizing noise of
    /// the given Pauli error.
    Ideal {
        theta_deg: f64,
        phi_deg: f64,
        #[serde(default)]
        depolarizing: f64,
    },
    /// Calibrated composite gates played through the device, modeled by
    /// their tomography-measured angles. All entries when `targets` is
    /// absent.
    Registry {
        path: PathBuf,
        #[serde(default)]
        targets: Option<Vec<[f64; 2]>>,
    },
    /// One raw flux pulse: qubits detuned by `delta_mhz`, coupler at
    /// coupling `g_mhz` (≤ 0).
    Pulse {
        delta_mhz: f64,
        g_mhz: f64,
        duration_ns: f64,
        #[serde(default)]
        pad_ns: f64,
        #[serde(default = "rectangular")]
        shape: PulseShape,
    },
}

fn rectangular() -> PulseShape {
    PulseShape::Rectangular
}

impl Default for GateSource {
    fn default() -> Self {
        GateSource::Ideal {
            theta_deg: 90.0,
            phi_deg: 30.0,
            depolarizing: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct TomographyParams {
    pub gate: GateSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct XebParams {
    pub gate: GateSource,
    /// Cycle depths; 12 log-spaced depths from 5 to 700 when absent.
    pub depths: Option<Vec<usize>>,
    pub circuits_per_depth: usize,
    pub circuit_seed: u64,
    /// Re-fit the three single-qubit phases of the gate model on the
    /// measured data before fitting the decay.
    pub optimize_phases: bool,
}

impl Default for XebParams {
    fn default() -> Self {
        Self {
            gate: GateSource::default(),
            depths: None,
            circuits_per_depth: 20,
            circuit_seed: 1,
            optimize_phases: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PurityParams {
    pub gate: GateSource,
    pub depths: Option<Vec<usize>>,
    pub circuits_per_depth: usize,
    pub circuit_seed: u64,
}

impl Default for PurityParams {
    fn default() -> Self {
        Self {
            gate: GateSource::default(),
            depths: None,
            circuits_per_depth: 20,
            circuit_seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RbParams {
    pub depths: Vec<usize>,
    pub sequences: usize,
}

impl Default for RbParams {
    fn default() -> Self {
        Self {
            depths: crate::benchmarking::RB_DEPTHS.to_vec(),
            sequences: 30,
        }
    }
}

/// Target set of a composite calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetGrid {
    /// The 25 × 21 grid of θ ∈ [0°, 90°], φ ∈ [0°, 360°].
    Grid525,
    /// Explicit (θ, φ) pairs in degrees.
    List(Vec<[f64; 2]>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrateParams {
    pub targets: TargetGrid,
    pub sweep: CphaseSweep,
    pub composite: CompositeConfig,
    pub iswap_points: usize,
    pub order: GateOrder,
    /// Stamp registry entries with the wall-clock time instead of
    /// `composite.calibrated_at`. Breaks byte-identical reruns.
    pub stamp_time: bool,
}

impl Default for CalibrateParams {
    fn default() -> Self {
        Self {
            targets: TargetGrid::Grid525,
            sweep: CphaseSweep::default(),
            composite: CompositeConfig::default(),
            iswap_points: 21,
            order: GateOrder::CphaseFirst,
            stamp_time: false,
        }
    }
}

impl RunConfig {
    /// Reads a configuration, or the configuration echoed in a run manifest.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn from_json_str(text: &str) -> Result<Self, CliError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let value = match value.get("schema").and_then(|s| s.as_str()) {
            Some(MANIFEST_SCHEMA) => value.get("config").cloned().ok_or_else(|| CliError::Config("manifest without config".into()))?,
            _ => value,
        };
        serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Seed from the environment override, when set.
    pub fn apply_env(&mut self) -> Result<(), CliError> {
        if let Ok(s) = std::env::var(SEED_ENV) {
            self.seed = s
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("{SEED_ENV}={s:?} is not an unsigned integer")))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if let Some(p) = &self.device {
            if !p.is_file() {
                return Err(CliError::Config(format!("device profile {} does not exist", p.display())));
            }
        }
        for g in [&self.tomography.gate, &self.xeb.gate, &self.purity.gate] {
            if let GateSource::Registry { path, .. } = g {
                if !path.is_file() {
                    return Err(CliError::Config(format!("registry {} does not exist", path.display())));
                }
            }
        }
        if !self.expectation && self.shots == 0 {
            return Err(CliError::Config("shots must be positive unless expectation is set".into()));
        }
        if self.threads == Some(0) {
            return Err(CliError::Config("threads must be positive".into()));
        }
        Ok(())
    }

    /// Canonical JSON of the effective configuration.
    /// The configuration as compact JSON, without the fields that cannot
    /// change results (`output_dir`, `threads`).
    pub fn canonical_json(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        c.threads = None;
        serde_json::to_string(&c).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON followed by the device profile bytes,
    /// lowercase hex.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.canonical_json().as_bytes());
        if let Some(bytes) = self.device.as_ref().and_then(|p| std::fs::read(p).ok()) {
            h.update(&bytes);
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn device_model(&self) -> Result<DeviceModel, CliError> {
        match &self.device {
            Some(p) => Ok(DeviceModel::load(p)?),
            None => Ok(DeviceModel::default()),
        }
    }

    pub fn simulator(&self) -> Result<Simulator, CliError> {
        let mode = if self.expectation { Mode::Expectation } else { Mode::Shots(self.shots) };
        Ok(Simulator::realistic(self.device_model()?, self.seed)
            .with_mode(mode)
            .with_realism(self.realism)
            .with_noise(self.noise))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_the_default() {
        assert_eq!(RunConfig::from_json_str("{}").unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(matches!(RunConfig::from_json_str(r#"{"sed": 3}"#), Err(CliError::Config(_))));
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.output_dir = PathBuf::from("elsewhere");
        b.threads = Some(3);
        assert_eq!(a.hash(), b.hash());
        b.seed = 2;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn json_round_trip() {
        let mut c = RunConfig::default();
        c.calibrate.targets = TargetGrid::List(vec![[45.0, 90.0]]);
        c.xeb.gate = GateSource::Pulse {
            delta_mhz: 0.0,
            g_mhz: -10.0,
            duration_ns: 12.5,
            pad_ns: 0.0,
            shape: PulseShape::Rectangular,
        };
        assert_eq!(RunConfig::from_json_str(&serde_json::to_string(&c).unwrap()).unwrap(), c);
    }
}
