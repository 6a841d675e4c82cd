use crate::pulse::SettlingModel;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;

use super::DeviceError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Qubit {
    Q0,
    Q1,
}

impl Qubit {
    pub fn index(self) -> usize {
        match self {
            Qubit::Q0 => 0,
            Qubit::Q1 => 1,
        }
    }

    pub fn other(self) -> Qubit {
        match self {
            Qubit::Q0 => Qubit::Q1,
            Qubit::Q1 => Qubit::Q0,
        }
    }
}

/// Readout assignment probabilities, `p[prepared][reported]` over levels 0, 1, 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix(pub [[f64; 3]; 3]);

impl ConfusionMatrix {
    pub fn ideal() -> Self {
        Self([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn is_stochastic(&self, tol: f64) -> bool {
        self.0
            .iter()
            .all(|row| row.iter().all(|p| *p >= 0.0) && (row.iter().sum::<f64>() - 1.0).abs() <= tol)
    }
}

/// Settling models per flux channel; `None` means an ideal channel.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ChannelModels {
    pub q0: Option<SettlingModel>,
    pub q1: Option<SettlingModel>,
    pub coupler: Option<SettlingModel>,
}

/// Lorentzian T1 suppression around a two-level-system defect.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TlsDip {
    pub center_ghz: f64,
    pub width_mhz: f64,
    pub t1_dip_us: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct CouplerConfig {
    g_direct_mhz: f64,
    g_tunable_mhz: f64,
    ell: f64,
    guard: f64,
}

/// Gmon coupler transfer function g(φ) = g_d + g_t / (1 + ℓ sec δ),
/// δ + ℓ sin δ = 2πφ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CouplerConfig", into = "CouplerConfig")]
pub struct CouplerModel {
    pub g_direct_mhz: f64,
    pub g_tunable_mhz: f64,
    pub ell: f64,
    /// Biases are restricted to |φ| ≤ 0.5 − guard.
    pub guard: f64,
    off_bias: f64,
}

impl From<CouplerModel> for CouplerConfig {
    fn from(c: CouplerModel) -> Self {
        CouplerConfig {
            g_direct_mhz: c.g_direct_mhz,
            g_tunable_mhz: c.g_tunable_mhz,
            ell: c.ell,
            guard: c.guard,
        }
    }
}

impl TryFrom<CouplerConfig> for CouplerModel {
    type Error = DeviceError;
    fn try_from(c: CouplerConfig) -> Result<Self, DeviceError> {
        CouplerModel::new(c.g_direct_mhz, c.g_tunable_mhz, c.ell, c.guard)
    }
}

impl CouplerModel {
    pub fn new(g_direct_mhz: f64, g_tunable_mhz: f64, ell: f64, guard: f64) -> Result<Self, DeviceError> {
        if !(0.0..1.0).contains(&ell) {
            return Err(DeviceError::InvalidModel(format!("coupler ell must lie in [0, 1), got {ell}")));
        }
        if !(0.0..0.5).contains(&guard) {
            return Err(DeviceError::InvalidModel(format!("coupler guard must lie in [0, 0.5), got {guard}")));
        }
        let mut m = Self {
            g_direct_mhz,
            g_tunable_mhz,
            ell,
            guard,
            off_bias: f64::NAN,
        };
        m.off_bias = m.find_off_bias()?;
        Ok(m)
    }

    /// Solves for g_direct and g_tunable so that g(0) = `g_zero` and
    /// g(`bias`) = `g_at_bias`.
    pub fn from_anchors(g_zero: f64, bias: f64, g_at_bias: f64, ell: f64, guard: f64) -> Result<Self, DeviceError> {
        let c0 = Self::shape(0.0, ell);
        let c1 = Self::shape(bias, ell);
        if (c0 - c1).abs() < 1e-12 {
            return Err(DeviceError::InvalidModel("coupler anchors are degenerate".into()));
        }
        let g_t = (g_zero - g_at_bias) / (c0 - c1);
        let g_d = g_zero - g_t * c0;
        Self::new(g_d, g_t, ell, guard)
    }

    fn shape(bias: f64, ell: f64) -> f64 {
        let target = 2.0 * PI * bias;
        // δ + ℓ sin δ is strictly increasing for ℓ < 1.
        let mut d = target;
        for _ in 0..100 {
            let f = d + ell * d.sin() - target;
            let step = f / (1.0 + ell * d.cos());
            d -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        d.cos() / (d.cos() + ell)
    }

    pub fn max_bias(&self) -> f64 {
        0.5 - self.guard
    }

    pub fn g_unchecked(&self, bias: f64) -> f64 {
        self.g_direct_mhz + self.g_tunable_mhz * Self::shape(bias, self.ell)
    }

    pub fn g(&self, bias: f64) -> Result<f64, DeviceError> {
        if !bias.is_finite() || bias.abs() > self.max_bias() + 1e-12 {
            return Err(DeviceError::BiasOutOfRange {
                channel: "coupler",
                bias,
                limit: self.max_bias(),
            });
        }
        Ok(self.g_unchecked(bias))
    }

    /// Positive bias at which the coupling vanishes.
    pub fn off_bias(&self) -> f64 {
        self.off_bias
    }

    fn find_off_bias(&self) -> Result<f64, DeviceError> {
        let (mut lo, mut hi) = (0.0, self.max_bias());
        let (glo, ghi) = (self.g_unchecked(lo), self.g_unchecked(hi));
        if glo.signum() == ghi.signum() {
            return Err(DeviceError::InvalidModel("coupler g(φ) has no sign change inside the guard band".into()));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.g_unchecked(mid).signum() == glo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let root = 0.5 * (lo + hi);
        Ok(root)
    }

    /// Inverse of g on [off_bias, max_bias]: the bias giving coupling `g_mhz`
    /// (which must be ≤ 0 and reachable).
    pub fn bias_for_g(&self, g_mhz: f64) -> Result<f64, DeviceError> {
        let (mut lo, mut hi) = (self.off_bias, self.max_bias());
        if g_mhz > 0.0 || g_mhz < self.g_unchecked(hi) {
            return Err(DeviceError::Unreachable(format!("coupling {g_mhz} MHz")));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.g_unchecked(mid) > g_mhz {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Simulated two-qutrit gmon device configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceModel {
    pub eta_mhz: f64,
    pub f_max_q0_ghz: f64,
    pub f_max_q1_ghz: f64,
    pub idle_f_q0_ghz: f64,
    pub idle_f_q1_ghz: f64,
    pub coupler: CouplerModel,
    /// Energy-relaxation time; `None` disables relaxation.
    pub t1_us: Option<f64>,
    /// Pure dephasing time; `None` disables dephasing.
    pub t_phi_us: Option<f64>,
    pub readout: [ConfusionMatrix; 2],
    pub dac_bits: u32,
    /// Samples per nanosecond (GS/s).
    pub sample_rate: f64,
    /// True response of each flux line.
    pub settling: ChannelModels,
    /// Inverse filters the control electronics apply before the DAC.
    pub predistortion: ChannelModels,
    /// Pauli error of each single-qubit gate (depolarizing).
    pub single_qubit_error: f64,
    pub tls: Option<TlsDip>,
}

impl Default for DeviceModel {
    fn default() -> Self {
        let coupler = CouplerModel::from_anchors(6.0, 0.47, -55.0, 0.9, 0.015).expect("default coupler is valid");
        let readout = ConfusionMatrix([[0.985, 0.015, 0.0], [0.04, 0.95, 0.01], [0.01, 0.06, 0.93]]);
        Self {
            eta_mhz: 240.0,
            f_max_q0_ghz: 6.3,
            f_max_q1_ghz: 6.4,
            idle_f_q0_ghz: 5.9,
            idle_f_q1_ghz: 6.0,
            coupler,
            t1_us: Some(25.3),
            t_phi_us: Some(15.0),
            readout: [readout, readout],
            dac_bits: 14,
            sample_rate: 1.0,
            settling: ChannelModels {
                q0: Some(SettlingModel::device_q2()),
                q1: Some(SettlingModel::device_q3()),
                coupler: Some(SettlingModel::device_coupler()),
            },
            predistortion: ChannelModels {
                q0: Some(SettlingModel::device_q2()),
                q1: Some(SettlingModel::device_q3()),
                coupler: None,
            },
            single_qubit_error: 7.5e-4,
            tls: None,
        }
    }
}

impl DeviceModel {
    /// Default profile with every decoherence, SPAM and gate-error channel
    /// switched off.
    pub fn noiseless() -> Self {
        Self {
            t1_us: None,
            t_phi_us: None,
            readout: [ConfusionMatrix::ideal(); 2],
            single_qubit_error: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), DeviceError> {
        let bad = |m: &str| Err(DeviceError::InvalidModel(m.to_string()));
        if !(self.eta_mhz > 0.0) {
            return bad("eta must be positive");
        }
        if !(self.sample_rate > 0.0) {
            return bad("sample_rate must be positive");
        }
        if let Some(t) = self.t1_us {
            if !(t > 0.0) {
                return bad("t1 must be positive");
            }
        }
        if let Some(t) = self.t_phi_us {
            if !(t > 0.0) {
                return bad("t_phi must be positive");
            }
        }
        if self.readout.iter().any(|c| !c.is_stochastic(1e-9)) {
            return bad("confusion matrix rows must be probability vectors");
        }
        if !(0.0..=1.0).contains(&self.single_qubit_error) {
            return bad("single_qubit_error must lie in [0, 1]");
        }
        if self.dac_bits < 2 {
            return bad("dac_bits must be at least 2");
        }
        for (q, f, fmax) in [
            (Qubit::Q0, self.idle_f_q0_ghz, self.f_max_q0_ghz),
            (Qubit::Q1, self.idle_f_q1_ghz, self.f_max_q1_ghz),
        ] {
            if f > fmax {
                return Err(DeviceError::InvalidModel(format!("{q:?} idle frequency above its maximum")));
            }
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Self, DeviceError> {
        let m: Self = serde_json::from_str(s)?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("device model serializes")
    }

    pub fn load(path: &Path) -> Result<Self, DeviceError> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), DeviceError> {
        std::fs::write(path, self.to_json_string())?;
        Ok(())
    }

    fn f_max(&self, q: Qubit) -> f64 {
        match q {
            Qubit::Q0 => self.f_max_q0_ghz,
            Qubit::Q1 => self.f_max_q1_ghz,
        }
    }

    pub fn idle_freq(&self, q: Qubit) -> f64 {
        match q {
            Qubit::Q0 => self.idle_f_q0_ghz,
            Qubit::Q1 => self.idle_f_q1_ghz,
        }
    }

    /// Idle detuning f_q1 − f_q0 in MHz.
    pub fn idle_detuning_mhz(&self) -> f64 {
        (self.idle_f_q1_ghz - self.idle_f_q0_ghz) * 1e3
    }

    /// Transmon frequency (GHz) at absolute flux bias.
    pub fn qubit_freq(&self, bias: f64, q: Qubit) -> Result<f64, DeviceError> {
        if !bias.is_finite() || bias.abs() >= 0.5 {
            return Err(DeviceError::BiasOutOfRange {
                channel: "qubit",
                bias,
                limit: 0.5,
            });
        }
        let eta = self.eta_mhz / 1e3;
        Ok((self.f_max(q) + eta) * (PI * bias).cos().abs().sqrt() - eta)
    }

    /// Non-negative bias giving frequency `f_ghz`.
    pub fn freq_to_bias(&self, f_ghz: f64, q: Qubit) -> Result<f64, DeviceError> {
        let eta = self.eta_mhz / 1e3;
        let r = (f_ghz + eta) / (self.f_max(q) + eta);
        if !(0.0..=1.0).contains(&r) || !r.is_finite() {
            return Err(DeviceError::Unreachable(format!("{q:?} frequency {f_ghz} GHz")));
        }
        Ok((r * r).acos() / PI)
    }

    pub fn idle_bias(&self, q: Qubit) -> f64 {
        self.freq_to_bias(self.idle_freq(q), q).expect("validated idle frequency")
    }

    /// Bias offset from idle that moves qubit `q` to `f_ghz`.
    pub fn bias_offset_for(&self, f_ghz: f64, q: Qubit) -> Result<f64, DeviceError> {
        Ok(self.freq_to_bias(f_ghz, q)? - self.idle_bias(q))
    }

    /// Coupling (MHz) at absolute coupler bias.
    pub fn coupler_g(&self, bias: f64) -> Result<f64, DeviceError> {
        self.coupler.g(bias)
    }

    /// Energy-relaxation rate (1/ns) of a qubit sitting at `f_ghz`.
    pub fn relaxation_rate(&self, f_ghz: f64) -> f64 {
        let base = self.t1_us.map_or(0.0, |t| 1.0 / (t * 1e3));
        match self.tls {
            None => base,
            Some(dip) => {
                let x = (f_ghz - dip.center_ghz) * 1e3 / (0.5 * dip.width_mhz);
                let extra = (1.0 / (dip.t1_dip_us * 1e3) - base).max(0.0);
                base + extra / (1.0 + x * x)
            }
        }
    }

    pub fn dephasing_rate(&self) -> f64 {
        self.t_phi_us.map_or(0.0, |t| 1.0 / (t * 1e3))
    }
}
