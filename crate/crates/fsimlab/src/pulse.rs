//! Control-line transfer functions: exponential settling tails, their
//! inverse (pre-distortion) and DAC quantization.

use crate::optimize::{nelder_mead, NelderMeadOptions};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PulseError {
    #[error("settling model is not invertible (1 + Σα = {0})")]
    NotInvertible(f64),
    #[error("invalid settling component: {0}")]
    InvalidComponent(String),
    #[error("quantizer needs at least 2 bits, got {0}")]
    TooFewBits(u32),
    #[error("waveform csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("waveform csv: {0}")]
    Format(String),
}

/// A uniformly sampled real waveform in flux units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    pub samples: Vec<f64>,
    /// Samples per nanosecond.
    pub sample_rate: f64,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: f64) -> Self {
        Self { samples, sample_rate }
    }

    pub fn zeros(n: usize, sample_rate: f64) -> Self {
        Self::new(vec![0.0; n], sample_rate)
    }

    /// Unit step starting at sample `start`.
    pub fn step(n: usize, start: usize, sample_rate: f64) -> Self {
        Self::new((0..n).map(|k| if k >= start { 1.0 } else { 0.0 }).collect(), sample_rate)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        let dt = self.dt();
        (0..self.len()).map(move |k| k as f64 * dt)
    }

    /// Sum of samples times dt.
    pub fn integral(&self) -> f64 {
        self.samples.iter().sum::<f64>() * self.dt()
    }

    pub fn max_abs_diff(&self, other: &Waveform) -> f64 {
        self.samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), PulseError> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["time_ns", "value"])?;
        for (t, v) in self.times().zip(&self.samples) {
            wtr.write_record([format!("{t}"), format!("{v}")])?;
        }
        wtr.flush().map_err(|e| PulseError::Format(e.to_string()))?;
        Ok(())
    }

    /// Reads a `time_ns,value` CSV; the sample rate comes from the first
    /// time step.
    pub fn read_csv<R: Read>(r: R) -> Result<Self, PulseError> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut times = Vec::new();
        let mut samples = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64, PulseError> {
                rec.get(i)
                    .ok_or_else(|| PulseError::Format("missing column".into()))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| PulseError::Format(e.to_string()))
            };
            times.push(parse(0)?);
            samples.push(parse(1)?);
        }
        let sample_rate = if times.len() >= 2 { 1.0 / (times[1] - times[0]) } else { 1.0 };
        if !sample_rate.is_finite() || sample_rate <= 0.0 {
            return Err(PulseError::Format("time column must be increasing".into()));
        }
        Ok(Self::new(samples, sample_rate))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SettlingComponent {
    /// Fractional amplitude (−0.0494 for a −4.94 % tail).
    pub alpha: f64,
    pub tau_ns: f64,
}

/// Step response s(t) = 1 + Σ αᵢ e^(−t/τᵢ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SettlingModel {
    pub components: [SettlingComponent; 3],
}

const fn comp(alpha_pct: f64, tau_ns: f64) -> SettlingComponent {
    SettlingComponent {
        alpha: alpha_pct / 100.0,
        tau_ns,
    }
}

impl SettlingModel {
    pub fn new(components: [SettlingComponent; 3]) -> Result<Self, PulseError> {
        for c in &components {
            if !(c.tau_ns > 0.0 && c.tau_ns.is_finite()) || !(c.alpha.abs() < 1.0) {
                return Err(PulseError::InvalidComponent(format!("{c:?}")));
            }
        }
        Ok(Self { components })
    }

    pub fn identity() -> Self {
        Self {
            components: [comp(0.0, 1000.0), comp(0.0, 100.0), comp(0.0, 10.0)],
        }
    }

    /// Measured flux-line response of device qubit q2.
    pub fn device_q2() -> Self {
        Self {
            components: [comp(-0.46, 858.0), comp(-1.00, 104.0), comp(-4.94, 10.0)],
        }
    }

    /// Measured flux-line response of device qubit q3.
    pub fn device_q3() -> Self {
        Self {
            components: [comp(-0.61, 996.0), comp(-0.82, 94.0), comp(-5.97, 9.0)],
        }
    }

    /// Rounded average of [`device_q2`](Self::device_q2) and
    /// [`device_q3`](Self::device_q3), as applied to the coupler line.
    pub fn device_coupler() -> Self {
        Self {
            components: [comp(-0.53, 927.0), comp(-0.91, 99.0), comp(-5.45, 10.0)],
        }
    }

    pub fn alpha_sum(&self) -> f64 {
        self.components.iter().map(|c| c.alpha).sum()
    }

    /// Closed-form step response at time `t_ns` ≥ 0.
    pub fn step_response(&self, t_ns: f64) -> f64 {
        1.0 + self.components.iter().map(|c| c.alpha * (-t_ns / c.tau_ns).exp()).sum::<f64>()
    }

    fn poles(&self, dt: f64) -> [f64; 3] {
        self.components.map(|c| (-dt / c.tau_ns).exp())
    }
}

/// Passes `w` through the line response. Each tail is a first-order
/// low-pass with exact zero-order-hold coefficients; the output sample k is
/// the line value just after the k-th input edge.
pub fn apply_settling(w: &Waveform, m: &SettlingModel) -> Waveform {
    let a = m.poles(w.dt());
    let mut lp = [0.0f64; 3];
    let out = w
        .samples
        .iter()
        .map(|&x| {
            let mut y = x;
            for i in 0..3 {
                y += m.components[i].alpha * (x - lp[i]);
                lp[i] = a[i] * lp[i] + (1.0 - a[i]) * x;
            }
            y
        })
        .collect();
    Waveform::new(out, w.sample_rate)
}

/// Exact inverse of [`apply_settling`].
pub fn predistort(w: &Waveform, m: &SettlingModel) -> Result<Waveform, PulseError> {
    let gain = 1.0 + m.alpha_sum();
    if gain.abs() < 1e-9 {
        return Err(PulseError::NotInvertible(gain));
    }
    let a = m.poles(w.dt());
    let mut lp = [0.0f64; 3];
    let out = w
        .samples
        .iter()
        .map(|&y| {
            let mut acc = y;
            for i in 0..3 {
                acc += m.components[i].alpha * lp[i];
            }
            let x = acc / gain;
            for i in 0..3 {
                lp[i] = a[i] * lp[i] + (1.0 - a[i]) * x;
            }
            x
        })
        .collect();
    Ok(Waveform::new(out, w.sample_rate))
}

/// Component-wise mean after sorting both models by time constant.
pub fn average_settling(m1: &SettlingModel, m2: &SettlingModel) -> SettlingModel {
    let sorted = |m: &SettlingModel| {
        let mut c = m.components;
        c.sort_by(|a, b| b.tau_ns.total_cmp(&a.tau_ns));
        c
    };
    let (a, b) = (sorted(m1), sorted(m2));
    let mut out = a;
    for i in 0..3 {
        out[i] = SettlingComponent {
            alpha: 0.5 * (a[i].alpha + b[i].alpha),
            tau_ns: 0.5 * (a[i].tau_ns + b[i].tau_ns),
        };
    }
    SettlingModel { components: out }
}

pub fn lsb(bits: u32) -> f64 {
    2.0 / 2f64.powi(bits as i32)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Quantized {
    pub waveform: Waveform,
    /// Set when any sample was outside [−1, 1] and got clipped.
    pub clipped: bool,
}

/// Rounds every sample to the nearest DAC code (half away from zero).
pub fn quantize(w: &Waveform, bits: u32) -> Result<Quantized, PulseError> {
    if bits < 2 {
        return Err(PulseError::TooFewBits(bits));
    }
    let step = lsb(bits);
    let mut clipped = false;
    let samples = w
        .samples
        .iter()
        .map(|&x| {
            let c = x.clamp(-1.0, 1.0);
            if c != x {
                clipped = true;
            }
            let q = (c / step).round() * step;
            q.clamp(-1.0, 1.0)
        })
        .collect();
    Ok(Quantized {
        waveform: Waveform::new(samples, w.sample_rate),
        clipped,
    })
}

#[derive(Debug, Clone)]
pub struct SettlingFit {
    pub model: SettlingModel,
    pub rms_residual: f64,
    pub evaluations: usize,
}

/// Least-squares fit of a three-tail model to a measured step response.
///
/// The amplitudes enter linearly and are solved exactly for each trial set
/// of time constants; the simplex only searches over log τ.
pub fn fit_settling(times_ns: &[f64], response: &[f64], initial: &SettlingModel) -> Result<SettlingFit, PulseError> {
    if times_ns.len() != response.len() || times_ns.len() < 6 {
        return Err(PulseError::Format("need at least six matching step-response points".into()));
    }
    let solve_alphas = |taus: &[f64; 3]| -> Option<([f64; 3], f64)> {
        let mut ata = nalgebra::Matrix3::<f64>::zeros();
        let mut atb = nalgebra::Vector3::<f64>::zeros();
        for (t, y) in times_ns.iter().zip(response) {
            let row = nalgebra::Vector3::from_fn(|i, _| (-t / taus[i]).exp());
            ata += row * row.transpose();
            atb += row * (y - 1.0);
        }
        let alpha = ata.lu().solve(&atb)?;
        let sse: f64 = times_ns
            .iter()
            .zip(response)
            .map(|(t, y)| {
                let model = 1.0 + (0..3).map(|i| alpha[i] * (-t / taus[i]).exp()).sum::<f64>();
                (model - y).powi(2)
            })
            .sum();
        Some(([alpha[0], alpha[1], alpha[2]], sse))
    };
    let x0: Vec<f64> = initial.components.iter().map(|c| c.tau_ns.ln()).collect();
    let opts = NelderMeadOptions {
        ftol: 1e-4 * 1e-8,
        xtol: 1e-4,
        max_evals: 2000,
    };
    let cost = |x: &[f64]| {
        let taus = [x[0].exp(), x[1].exp(), x[2].exp()];
        solve_alphas(&taus).map(|(_, s)| s).unwrap_or(f64::INFINITY)
    };
    let res = nelder_mead(cost, &x0, &[0.2, 0.2, 0.2], &opts);
    let taus = [res.x[0].exp(), res.x[1].exp(), res.x[2].exp()];
    let (alphas, sse) = solve_alphas(&taus).ok_or_else(|| PulseError::Format("singular fit".into()))?;
    let mut components = [SettlingComponent { alpha: 0.0, tau_ns: 1.0 }; 3];
    for i in 0..3 {
        components[i] = SettlingComponent {
            alpha: alphas[i],
            tau_ns: taus[i],
        };
    }
    components.sort_by(|a, b| b.tau_ns.total_cmp(&a.tau_ns));
    Ok(SettlingFit {
        model: SettlingModel::new(components)?,
        rms_residual: (sse / times_ns.len() as f64).sqrt(),
        evaluations: res.evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_model_is_transparent() {
        let w = Waveform::new(vec![0.0, 0.3, -0.2, 0.7, 0.7, 0.0], 1.0);
        assert_eq!(apply_settling(&w, &SettlingModel::identity()), w);
    }

    #[test]
    fn q2_step_edges() {
        let m = SettlingModel::device_q2();
        let y = apply_settling(&Waveform::step(20000, 0, 1.0), &m);
        assert!((y.samples[0] - (1.0 - 0.064)).abs() < 1e-12);
        assert!((y.samples[19999] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn step_matches_closed_form_at_sample_times() {
        for m in [SettlingModel::device_q2(), SettlingModel::device_q3(), SettlingModel::device_coupler()] {
            let y = apply_settling(&Waveform::step(3000, 0, 1.0), &m);
            for (k, v) in y.samples.iter().enumerate() {
                assert!((v - m.step_response(k as f64)).abs() < 1e-12);
            }
            assert!((y.samples[200] - m.step_response(200.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn average_of_device_lines() {
        let avg = average_settling(&SettlingModel::device_q2(), &SettlingModel::device_q3());
        let expected = [(-0.53, 927.0), (-0.91, 99.0), (-5.45, 10.0)];
        for (c, (a, t)) in avg.components.iter().zip(expected) {
            assert!((c.alpha * 100.0 - a).abs() <= 0.0051, "{c:?}");
            assert!((c.tau_ns - t).abs() <= 0.5, "{c:?}");
        }
        let m = SettlingModel::device_q2();
        assert_eq!(average_settling(&m, &m), m);
    }

    #[test]
    fn predistort_zero_is_zero() {
        let z = Waveform::zeros(50, 1.0);
        assert_eq!(predistort(&z, &SettlingModel::device_q3()).unwrap(), z);
    }

    #[test]
    fn non_invertible_model_rejected() {
        let m = SettlingModel {
            components: [comp(-50.0, 10.0), comp(-30.0, 5.0), comp(-20.0, 1.0)],
        };
        assert!(matches!(predistort(&Waveform::zeros(4, 1.0), &m), Err(PulseError::NotInvertible(_))));
    }

    #[test]
    fn quantizer_basics() {
        assert!((lsb(14) - 1.220703125e-4).abs() < 1e-16);
        let step = lsb(14);
        let w = Waveform::new(vec![3.0 * step, -7.0 * step, 0.0], 1.0);
        let q = quantize(&w, 14).unwrap();
        assert_eq!(q.waveform, w);
        assert!(!q.clipped);
        let half = Waveform::new(vec![0.5 * step, -0.5 * step], 1.0);
        assert_eq!(quantize(&half, 14).unwrap().waveform.samples, vec![step, -step]);
        let big = quantize(&Waveform::new(vec![1.5], 1.0), 14).unwrap();
        assert!(big.clipped && big.waveform.samples[0] == 1.0);
        assert!(quantize(&w, 1).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let w = Waveform::new(vec![0.0, 0.125, -0.25, 1e-7], 1.0);
        let mut buf = Vec::new();
        w.write_csv(&mut buf).unwrap();
        let back = Waveform::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, w);
    }

    #[test]
    fn fit_recovers_device_model() {
        let truth = SettlingModel::device_q3();
        let times: Vec<f64> = (0..4000).map(|k| k as f64).collect();
        let resp: Vec<f64> = times.iter().map(|t| truth.step_response(*t)).collect();
        let fit = fit_settling(&times, &resp, &SettlingModel::device_q2()).unwrap();
        assert!(fit.rms_residual < 1e-6, "{fit:?}");
        for (a, b) in fit.model.components.iter().zip(&truth.components) {
            assert!((a.alpha - b.alpha).abs() < 2e-4, "{fit:?}");
            assert!((a.tau_ns / b.tau_ns - 1.0).abs() < 0.05, "{fit:?}");
        }
    }
}
