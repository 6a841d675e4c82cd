use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::device::{idx9, PulseShape, PulseSpec, Qubit, QubitSpan, SingleQubitGate, COMPUTATIONAL_9};

use super::{detuning_offsets, ramsey_phi, ExperimentError, ScanMode, ScanResult, Simulator};

/// Leakage threshold used to delimit low-leakage regions.
pub const LEAKAGE_THRESHOLD: f64 = 0.01;

/// Which population a leakage scan reports after preparing |11⟩.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeakageReadout {
    /// Population of |02⟩.
    #[default]
    State02,
    /// All population outside the computational subspace.
    Total,
    /// Population of |0⟩ on the lower-frequency qubit.
    Proxy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandscapeConfig {
    pub duration_ns: f64,
    pub pad_ns: f64,
    pub shape: PulseShape,
    pub qubit_span: QubitSpan,
    pub readout: LeakageReadout,
}

impl LandscapeConfig {
    pub fn rectangular(duration_ns: f64) -> Self {
        Self {
            duration_ns,
            pad_ns: 0.0,
            shape: PulseShape::Rectangular,
            qubit_span: QubitSpan::Padded,
            readout: LeakageReadout::State02,
        }
    }

    /// Shaped coupler pulse with `pad_ns` margins, qubits held detuned over
    /// the whole window.
    pub fn shaped(duration_ns: f64, pad_ns: f64, shape: PulseShape) -> Self {
        Self {
            duration_ns,
            pad_ns,
            shape,
            qubit_span: QubitSpan::Padded,
            readout: LeakageReadout::State02,
        }
    }

    pub fn with_readout(mut self, readout: LeakageReadout) -> Self {
        self.readout = readout;
        self
    }
}

/// Sweeps the qubit detuning Δ (MHz, qubit 1 above qubit 0) against the
/// coupler bias offset from OFF. Every pixel is an independent experiment.
pub fn landscape_scan(
    sim: &Simulator,
    mode: ScanMode,
    delta_grid_mhz: &[f64],
    coupler_grid: &[f64],
    cfg: &LandscapeConfig,
) -> Result<ScanResult, ExperimentError> {
    if delta_grid_mhz.is_empty() || coupler_grid.is_empty() {
        return Err(ExperimentError::InvalidGrid("empty axis".into()));
    }
    if !(cfg.duration_ns > 0.0) || delta_grid_mhz.iter().chain(coupler_grid).any(|v| !v.is_finite()) {
        return Err(ExperimentError::InvalidGrid("non-finite axis or non-positive duration".into()));
    }
    let model = &sim.model;
    let off = model.coupler.off_bias();
    let coupling = coupler_grid
        .iter()
        .map(|b| model.coupler_g(off + b))
        .collect::<Result<Vec<_>, _>>()?;
    let ny = coupler_grid.len();
    let values = (0..delta_grid_mhz.len() * ny)
        .into_par_iter()
        .map(|k| {
            let (ix, iy) = (k / ny, k % ny);
            let [a0, a1] = detuning_offsets(model, delta_grid_mhz[ix])?;
            let program = PulseSpec {
                duration_ns: cfg.duration_ns,
                pad_ns: cfg.pad_ns,
                amplitudes: [a0, a1, coupler_grid[iy]],
                shape: cfg.shape,
                qubit_span: cfg.qubit_span,
            }
            .build(model.sample_rate)?;
            let pixel = sim.clone().with_seed(crate::device::derive_seed(sim.seed, k as u64));
            pixel_value(&pixel, mode, cfg.readout, &program)
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    Ok(ScanResult {
        mode,
        x_label: "delta_mhz".into(),
        x: delta_grid_mhz.to_vec(),
        y_label: "coupler_bias".into(),
        y: coupler_grid.to_vec(),
        y_coupling_mhz: Some(coupling),
        values,
    })
}

fn pixel_value(
    sim: &Simulator,
    mode: ScanMode,
    readout: LeakageReadout,
    program: &crate::device::PulseProgram,
) -> Result<f64, ExperimentError> {
    Ok(match mode {
        ScanMode::Leakage | ScanMode::Population => {
            let prep = [(Qubit::Q0, SingleQubitGate::X), (Qubit::Q1, SingleQubitGate::X)];
            let p = sim.measure_populations(&sim.play(&sim.prepare(&prep), program)?, 0);
            match readout {
                LeakageReadout::State02 => p[idx9(0, 2)],
                LeakageReadout::Total => 1.0 - COMPUTATIONAL_9.iter().map(|&i| p[i]).sum::<f64>(),
                LeakageReadout::Proxy => p[idx9(0, 0)] + p[idx9(0, 1)] + p[idx9(0, 2)],
            }
        }
        ScanMode::Theta => {
            let p = sim.measure_populations(&sim.play(&sim.prepare(&[(Qubit::Q1, SingleQubitGate::X)]), program)?, 0);
            p[idx9(1, 0)].clamp(0.0, 1.0).sqrt().asin().to_degrees()
        }
        ScanMode::Phi => ramsey_phi(sim, program)?.to_degrees(),
    })
}

/// Grid around the |11⟩ ↔ |02⟩ lobe in units of the pulse length: n_x
/// detunings with (Δ − η)·t ∈ [−1, 1] and n_y coupler offsets with
/// |g|·t ∈ [0, 0.5], ordered by increasing |g|. Scans of different
/// lengths on these grids cover the same pulse-area range.
pub fn lobe_grid(
    model: &crate::device::DeviceModel,
    duration_ns: f64,
    n_x: usize,
    n_y: usize,
) -> Result<(Vec<f64>, Vec<f64>), ExperimentError> {
    if n_x < 2 || n_y < 2 || !(duration_ns > 0.0) {
        return Err(ExperimentError::InvalidGrid("lobe grid needs two points per axis".into()));
    }
    let unit = 1e3 / duration_ns;
    let deltas = (0..n_x)
        .map(|i| model.eta_mhz + unit * (-1.0 + 2.0 * i as f64 / (n_x - 1) as f64))
        .collect();
    let off = model.coupler.off_bias();
    let coupler = (0..n_y)
        .map(|j| {
            let g = -0.5 * unit * j as f64 / (n_y - 1) as f64;
            Ok(model.coupler.bias_for_g(g)? - off)
        })
        .collect::<Result<_, crate::device::DeviceError>>()?;
    Ok((deltas, coupler))
}

/// A point on the low-leakage CPHASE contour together with the contiguous
/// run of sub-threshold pixels around it along the coupler axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContourPoint {
    pub ix: usize,
    pub iy: usize,
    pub band: (usize, usize),
}

impl ContourPoint {
    pub fn band_cells(&self) -> usize {
        self.band.1 - self.band.0 + 1
    }
}

/// Traces the full-swap contour of the |11⟩ ↔ |02⟩ lobe in a leakage scan
/// whose coupler axis is ordered by increasing |g|. For each column within
/// 1/t of Δ = η, the contour is the first local leakage minimum after the
/// first local maximum, kept only if it lies below `threshold`.
pub fn cphase_contour(scan: &ScanResult, eta_mhz: f64, duration_ns: f64, threshold: f64) -> Vec<ContourPoint> {
    let reach = 1e3 / duration_ns;
    let mut out = Vec::new();
    for (ix, delta) in scan.x.iter().enumerate() {
        if (delta - eta_mhz).abs() >= reach {
            continue;
        }
        let col = scan.column(ix);
        let n = col.len();
        let interior = 1..n.saturating_sub(1);
        let Some(peak) = interior.clone().find(|&j| col[j] > col[j - 1] && col[j] >= col[j + 1]) else {
            continue;
        };
        let Some(iy) = (peak + 1..n.saturating_sub(1)).find(|&j| col[j] <= col[j - 1] && col[j] < col[j + 1]) else {
            continue;
        };
        if col[iy] >= threshold {
            continue;
        }
        let mut lo = iy;
        while lo > 0 && col[lo - 1] < threshold {
            lo -= 1;
        }
        let mut hi = iy;
        while hi + 1 < n && col[hi + 1] < threshold {
            hi += 1;
        }
        out.push(ContourPoint { ix, iy, band: (lo, hi) });
    }
    out
}

/// Re-measures each contour band on another scan of the same grid (for
/// example total leakage around a contour traced on |02⟩). Points that are
/// themselves above threshold there are dropped.
pub fn rebase_contour(contour: &[ContourPoint], scan: &ScanResult, threshold: f64) -> Vec<ContourPoint> {
    contour
        .iter()
        .filter_map(|p| {
            let col = scan.column(p.ix);
            if col[p.iy] >= threshold {
                return None;
            }
            let mut lo = p.iy;
            while lo > 0 && col[lo - 1] < threshold {
                lo -= 1;
            }
            let mut hi = p.iy;
            while hi + 1 < col.len() && col[hi + 1] < threshold {
                hi += 1;
            }
            Some(ContourPoint { band: (lo, hi), ..*p })
        })
        .collect()
}

/// Total sub-threshold cells in the contour bands.
pub fn band_cell_count(contour: &[ContourPoint]) -> usize {
    contour.iter().map(ContourPoint::band_cells).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::DeviceModel;

    fn sim() -> Simulator {
        Simulator::ideal(DeviceModel::noiseless())
    }

    #[test]
    fn decoupled_scan_has_no_leakage() {
        let s = landscape_scan(&sim(), ScanMode::Leakage, &[0.0, 120.0, 240.0], &[0.0], &LandscapeConfig::rectangular(15.0)).unwrap();
        assert!(s.values.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn theta_reaches_a_full_swap_on_resonance() {
        let m = DeviceModel::noiseless();
        let off = m.coupler.off_bias();
        let grid: Vec<f64> = (0..=40).map(|k| m.coupler.bias_for_g(-0.5 * k as f64).unwrap() - off).collect();
        let s = landscape_scan(&sim(), ScanMode::Theta, &[0.0], &grid, &LandscapeConfig::rectangular(15.0)).unwrap();
        let max = s.values.iter().cloned().fold(0.0, f64::max);
        assert!(s.values[0].abs() < 1e-6 && max > 89.0);
    }

    #[test]
    fn csv_rows_match_pixels() {
        let s = landscape_scan(&sim(), ScanMode::Phi, &[200.0, 240.0], &[0.0, 0.01], &LandscapeConfig::rectangular(15.0)).unwrap();
        let t = s.to_table();
        assert_eq!(t.rows.len(), 4);
        assert_eq!(t.header, vec!["delta_mhz", "coupler_bias", "g_mhz", "phi"]);
    }
}
