use crate::pulse::{apply_settling, predistort, quantize, Waveform};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::{DeviceError, DeviceModel};

/// Coupler envelope shape. Qubit detuning pulses are always rectangular.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PulseShape {
    Rectangular,
    /// Rectangle convolved with a Gaussian whose 10–90 % rise time is
    /// `rise_ns`.
    Smoothed { rise_ns: f64 },
    Cosine,
}

/// Where the qubit detuning pulses sit inside a program window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QubitSpan {
    /// Same flat-top interval as the coupler pulse; idle in the pads.
    #[default]
    Nominal,
    /// Held across the whole window, pads included.
    Padded,
}

/// Three synchronous flux waveforms. Qubit samples are offsets from the
/// idle bias and coupler samples are offsets from the coupler OFF bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseProgram {
    pub q0_bias: Vec<f64>,
    pub q1_bias: Vec<f64>,
    pub coupler_bias: Vec<f64>,
    pub sample_rate: f64,
    pub duration_ns: f64,
    pub pad_ns: f64,
    pub shape: PulseShape,
}

impl PulseProgram {
    /// A zero-amplitude program of `n` samples.
    pub fn idle(n: usize, sample_rate: f64) -> Self {
        Self {
            q0_bias: vec![0.0; n],
            q1_bias: vec![0.0; n],
            coupler_bias: vec![0.0; n],
            sample_rate,
            duration_ns: n as f64 / sample_rate,
            pad_ns: 0.0,
            shape: PulseShape::Rectangular,
        }
    }

    pub fn len(&self) -> usize {
        self.q0_bias.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q0_bias.is_empty()
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }

    /// Total window length including pads.
    pub fn total_ns(&self) -> f64 {
        self.len() as f64 * self.dt()
    }

    pub fn channel(&self, i: usize) -> &[f64] {
        match i {
            0 => &self.q0_bias,
            1 => &self.q1_bias,
            _ => &self.coupler_bias,
        }
    }

    fn channel_mut(&mut self, i: usize) -> &mut Vec<f64> {
        match i {
            0 => &mut self.q0_bias,
            1 => &mut self.q1_bias,
            _ => &mut self.coupler_bias,
        }
    }

    /// Plays `self` then `next` back to back.
    pub fn then(&self, next: &PulseProgram) -> PulseProgram {
        let mut out = self.clone();
        for i in 0..3 {
            out.channel_mut(i).extend_from_slice(next.channel(i));
        }
        out.duration_ns = out.total_ns();
        out.pad_ns = 0.0;
        out
    }

    /// Appends `n` idle samples.
    pub fn with_trailing_idle(&self, n: usize) -> PulseProgram {
        self.then(&PulseProgram::idle(n, self.sample_rate))
    }

    pub fn is_within_full_scale(&self) -> bool {
        (0..3).all(|i| self.channel(i).iter().all(|v| v.abs() <= 1.0))
    }
}

/// Builder for single-segment programs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    pub duration_ns: f64,
    pub pad_ns: f64,
    /// Offsets for q0, q1 and the coupler.
    pub amplitudes: [f64; 3],
    pub shape: PulseShape,
    pub qubit_span: QubitSpan,
}

impl PulseSpec {
    pub fn build(&self, sample_rate: f64) -> Result<PulseProgram, DeviceError> {
        if !(self.duration_ns > 0.0) || !(self.pad_ns >= 0.0) {
            return Err(DeviceError::InvalidProgram(format!(
                "duration {} ns and pad {} ns",
                self.duration_ns, self.pad_ns
            )));
        }
        let total = self.duration_ns + 2.0 * self.pad_ns;
        let n = (total * sample_rate).round() as usize;
        let dt = 1.0 / sample_rate;
        let t0 = self.pad_ns;
        let t1 = self.pad_ns + self.duration_ns;
        let (q_start, q_end) = match self.qubit_span {
            QubitSpan::Nominal => (t0, t1),
            QubitSpan::Padded => (0.0, total),
        };
        let mut q = Vec::with_capacity(n);
        let mut c = Vec::with_capacity(n);
        for k in 0..n {
            let a = k as f64 * dt;
            let b = a + dt;
            q.push(rect_average(a, b, q_start, q_end));
            c.push(match self.shape {
                PulseShape::Rectangular => rect_average(a, b, t0, t1),
                PulseShape::Smoothed { rise_ns } => smoothed_average(a, b, t0, t1, rise_ns),
                PulseShape::Cosine => cosine_average(a, b, t0, self.duration_ns),
            });
        }
        let [a0, a1, ac] = self.amplitudes;
        Ok(PulseProgram {
            q0_bias: q.iter().map(|v| v * a0).collect(),
            q1_bias: q.iter().map(|v| v * a1).collect(),
            coupler_bias: c.iter().map(|v| v * ac).collect(),
            sample_rate,
            duration_ns: self.duration_ns,
            pad_ns: self.pad_ns,
            shape: self.shape,
        })
    }
}

/// Single-segment program with rectangular qubit pulses over the nominal
/// interval and a shaped coupler pulse.
pub fn make_pulse(
    duration_ns: f64,
    pad_ns: f64,
    amplitudes: [f64; 3],
    shape: PulseShape,
    sample_rate: f64,
) -> Result<PulseProgram, DeviceError> {
    PulseSpec {
        duration_ns,
        pad_ns,
        amplitudes,
        shape,
        qubit_span: QubitSpan::Nominal,
    }
    .build(sample_rate)
}

fn rect_average(a: f64, b: f64, t0: f64, t1: f64) -> f64 {
    let lo = a.max(t0);
    let hi = b.min(t1);
    ((hi - lo) / (b - a)).max(0.0)
}

/// ∫ Φ(t/σ) dt.
fn norm_cdf_integral(t: f64, sigma: f64) -> f64 {
    let x = t / sigma;
    let cdf = 0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2));
    let pdf = (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
    sigma * (x * cdf + pdf)
}

/// 10–90 % rise of a Gaussian-smoothed edge is 2·z₀.₉·σ.
const RISE_PER_SIGMA: f64 = 2.0 * 1.281_551_565_544_600_5;

fn smoothed_average(a: f64, b: f64, t0: f64, t1: f64, rise_ns: f64) -> f64 {
    if rise_ns <= 0.0 {
        return rect_average(a, b, t0, t1);
    }
    let sigma = rise_ns / RISE_PER_SIGMA;
    let edge = |t0: f64| norm_cdf_integral(b - t0, sigma) - norm_cdf_integral(a - t0, sigma);
    (edge(t0) - edge(t1)) / (b - a)
}

fn cosine_average(a: f64, b: f64, t0: f64, duration: f64) -> f64 {
    let lo = a.max(t0);
    let hi = b.min(t0 + duration);
    if hi <= lo {
        return 0.0;
    }
    let w = 2.0 * PI / duration;
    let integral = 0.5 * ((hi - lo) - ((w * (hi - t0)).sin() - (w * (lo - t0)).sin()) / w);
    integral / (b - a)
}

/// Which parts of the control chain are modeled when a program is played.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Realism {
    /// Line settling tails and the electronics' pre-distortion filters.
    pub settling: bool,
    /// DAC rounding.
    pub quantization: bool,
}

impl Realism {
    pub const IDEAL: Realism = Realism {
        settling: false,
        quantization: false,
    };
    pub const FULL: Realism = Realism {
        settling: true,
        quantization: true,
    };
}

impl Default for Realism {
    fn default() -> Self {
        Realism::FULL
    }
}

/// The flux actually seen by the device: pre-distort, quantize, then pass
/// through the line response, channel by channel.
pub fn realize(program: &PulseProgram, model: &DeviceModel, realism: Realism) -> Result<PulseProgram, DeviceError> {
    if realism == Realism::IDEAL {
        return Ok(program.clone());
    }
    let mut out = program.clone();
    let models = [
        (model.predistortion.q0, model.settling.q0),
        (model.predistortion.q1, model.settling.q1),
        (model.predistortion.coupler, model.settling.coupler),
    ];
    for (i, (pre, line)) in models.into_iter().enumerate() {
        let mut w = Waveform::new(program.channel(i).to_vec(), program.sample_rate);
        if realism.settling {
            if let Some(m) = pre {
                w = predistort(&w, &m)?;
            }
        }
        if realism.quantization {
            w = quantize(&w, model.dac_bits)?.waveform;
        }
        if realism.settling {
            if let Some(m) = line {
                w = apply_settling(&w, &m);
            }
        }
        *out.channel_mut(i) = w.samples;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rectangular_with_pads() {
        let p = make_pulse(13.0, 1.0, [0.0, 0.0, 0.1], PulseShape::Rectangular, 1.0).unwrap();
        assert_eq!(p.len(), 15);
        assert_eq!(p.coupler_bias.iter().filter(|v| **v != 0.0).count(), 13);
        assert_eq!(p.coupler_bias[0], 0.0);
        assert_eq!(p.coupler_bias[14], 0.0);
    }

    #[test]
    fn cosine_integral() {
        let p = make_pulse(20.0, 0.0, [0.0, 0.0, 0.3], PulseShape::Cosine, 1.0).unwrap();
        let integral: f64 = p.coupler_bias.iter().sum();
        assert!((integral - 0.3 * 20.0 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn smoothing_preserves_integral() {
        let rect = make_pulse(20.0, 12.0, [0.0, 0.0, 0.2], PulseShape::Rectangular, 1.0).unwrap();
        let sm = make_pulse(20.0, 12.0, [0.0, 0.0, 0.2], PulseShape::Smoothed { rise_ns: 3.0 }, 1.0).unwrap();
        let a: f64 = rect.coupler_bias.iter().sum();
        let b: f64 = sm.coupler_bias.iter().sum();
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }

    #[test]
    fn padded_span_covers_window() {
        let spec = PulseSpec {
            duration_ns: 13.0,
            pad_ns: 1.0,
            amplitudes: [0.05, 0.0, 0.1],
            shape: PulseShape::Smoothed { rise_ns: 3.0 },
            qubit_span: QubitSpan::Padded,
        };
        let p = spec.build(1.0).unwrap();
        assert!(p.q0_bias.iter().all(|v| (*v - 0.05).abs() < 1e-15));
    }

    #[test]
    fn rejects_zero_duration() {
        assert!(make_pulse(0.0, 1.0, [0.0; 3], PulseShape::Rectangular, 1.0).is_err());
    }

    #[test]
    fn concatenation() {
        let a = make_pulse(13.0, 1.0, [0.0, 0.0, 0.1], PulseShape::Rectangular, 1.0).unwrap();
        let b = make_pulse(11.0, 1.0, [0.0, 0.0, 0.05], PulseShape::Rectangular, 1.0).unwrap();
        let c = a.then(&b);
        assert_eq!(c.len(), 28);
        assert_eq!(c.total_ns(), 28.0);
        assert_eq!(c.coupler_bias[16], 0.05);
    }

    #[test]
    fn ideal_realism_is_identity() {
        let m = DeviceModel::default();
        let p = make_pulse(13.0, 1.0, [0.01, 0.0, 0.1], PulseShape::Rectangular, 1.0).unwrap();
        assert_eq!(realize(&p, &m, Realism::IDEAL).unwrap(), p);
    }

    #[test]
    fn compensated_qubit_line_is_nearly_exact() {
        let m = DeviceModel::default();
        let p = make_pulse(13.0, 1.0, [0.01, 0.02, 0.0], PulseShape::Rectangular, 1.0).unwrap();
        let r = realize(&p, &m, Realism::FULL).unwrap();
        let lsb = crate::pulse::lsb(m.dac_bits);
        for (a, b) in r.q0_bias.iter().zip(&p.q0_bias) {
            assert!((a - b).abs() < 2.0 * lsb);
        }
    }
}
