use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::device::{idx9, make_pulse, PulseShape, Qubit, SingleQubitGate};
use crate::fsim::C64;
use crate::optimize::parabolic_vertex;

use super::{detuning_offsets, ExperimentError, ScanMode, ScanResult, Simulator};

/// Oscillation amplitudes below this are reported as no coupling.
pub const SWAP_NOISE_FLOOR: f64 = 0.02;

const ZERO_PAD: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectroscopyResult {
    /// Swapped population: x = absolute coupler bias, y = duration (ns).
    pub scan: ScanResult,
    /// Extracted |g| (MHz) per bias.
    pub g_mhz: Vec<f64>,
    /// Columns whose oscillation was below the noise floor.
    pub flagged: Vec<bool>,
    /// One unpadded FFT bin expressed in g (MHz).
    pub bin_mhz: f64,
}

/// Prepares |10⟩ with both qubits on resonance, pulses the coupler for each
/// duration and reads the swapped population; the dominant FFT frequency of
/// each bias column is twice the coupling.
pub fn swap_spectroscopy(sim: &Simulator, bias_grid: &[f64], durations_ns: &[f64]) -> Result<SpectroscopyResult, ExperimentError> {
    let n = durations_ns.len();
    if bias_grid.is_empty() || n < 4 {
        return Err(ExperimentError::InvalidGrid("need biases and at least 4 durations".into()));
    }
    let step = durations_ns[1] - durations_ns[0];
    if !(step > 0.0) || durations_ns.windows(2).any(|w| ((w[1] - w[0]) - step).abs() > 1e-9) || durations_ns[0] < 0.0 {
        return Err(ExperimentError::InvalidGrid("durations must be uniform, increasing and non-negative".into()));
    }
    let model = &sim.model;
    let [a0, a1] = detuning_offsets(model, 0.0)?;
    let off = model.coupler.off_bias();
    let values = (0..bias_grid.len() * n)
        .into_par_iter()
        .map(|k| {
            let (ib, it) = (k / n, k % n);
            let tau = durations_ns[it];
            if tau == 0.0 {
                return Ok(0.0);
            }
            let p = make_pulse(tau, 0.0, [a0, a1, bias_grid[ib] - off], PulseShape::Rectangular, model.sample_rate)?;
            let px = sim.clone().with_seed(crate::device::derive_seed(sim.seed, k as u64));
            let rho = px.play(&px.prepare(&[(Qubit::Q0, SingleQubitGate::X)]), &p)?;
            Ok(px.measure_populations(&rho, 0)[idx9(0, 1)])
        })
        .collect::<Result<Vec<f64>, ExperimentError>>()?;

    let m = n * ZERO_PAD;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(m);
    let mut g_mhz = Vec::with_capacity(bias_grid.len());
    let mut flagged = Vec::with_capacity(bias_grid.len());
    for col in values.chunks(n) {
        let mean = col.iter().sum::<f64>() / n as f64;
        let mut buf: Vec<C64> = col.iter().map(|v| C64::new(v - mean, 0.0)).collect();
        buf.resize(m, C64::new(0.0, 0.0));
        fft.process(&mut buf);
        let mag: Vec<f64> = buf[..m / 2].iter().map(|z| z.norm()).collect();
        let (k, peak) = mag.iter().enumerate().skip(1).fold((1, 0.0), |acc, (i, v)| if *v > acc.1 { (i, *v) } else { acc });
        if 2.0 * peak / (n as f64) < SWAP_NOISE_FLOOR {
            g_mhz.push(0.0);
            flagged.push(true);
            continue;
        }
        let shift = if k + 1 < mag.len() { parabolic_vertex(mag[k - 1], mag[k], mag[k + 1]) } else { 0.0 };
        let f_ghz = (k as f64 + shift) / (m as f64 * step);
        g_mhz.push(f_ghz * 1e3 / 2.0);
        flagged.push(false);
    }
    Ok(SpectroscopyResult {
        scan: ScanResult {
            mode: ScanMode::Population,
            x_label: "coupler_bias".into(),
            x: bias_grid.to_vec(),
            y_label: "duration_ns".into(),
            y: durations_ns.to_vec(),
            y_coupling_mhz: None,
            values,
        },
        g_mhz,
        flagged,
        bin_mhz: 1e3 / (2.0 * n as f64 * step),
    })
}
