use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::fsim::pauli_from_decay;
use crate::optimize::golden_section;

use super::BenchmarkError;

/// F(m) = A·pᵐ + B fitted to a sequence-fidelity curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub a: f64,
    pub b: f64,
    /// Decay per cycle p.
    pub p: f64,
    /// Depolarization per cycle, 1 − p.
    pub depolarization: f64,
    /// −ln p, the exponent of the A·e^{−m·ε} + B form.
    pub exponent: f64,
    /// One-sigma uncertainty of `depolarization` from the fit covariance.
    pub depolarization_std: f64,
    /// Covariance of (A, p, B).
    pub covariance: [[f64; 3]; 3],
    pub rms_residual: f64,
}

impl DecayFit {
    /// Average error per cycle e_r = (1 − 1/D)(1 − p) on `n_qubits`.
    pub fn average_error(&self, n_qubits: u32) -> f64 {
        let d = (1u64 << n_qubits) as f64;
        (1.0 - 1.0 / d) * self.depolarization
    }

    /// Pauli error per cycle, e_r·(1 + 1/D).
    pub fn pauli_error(&self, n_qubits: u32) -> Result<f64, BenchmarkError> {
        Ok(pauli_from_decay(self.average_error(n_qubits).clamp(0.0, 1.0), n_qubits)?)
    }
}

fn linear_solve(depths: &[f64], ys: &[f64], p: f64, offset: Option<f64>) -> (f64, f64, f64) {
    if let Some(b) = offset {
        let (mut suu, mut suy) = (0.0, 0.0);
        for (&m, &y) in depths.iter().zip(ys) {
            let u = p.powf(m);
            suu += u * u;
            suy += u * (y - b);
        }
        let a = if suu > 0.0 { suy / suu } else { 0.0 };
        let sse = depths.iter().zip(ys).map(|(&m, &y)| (y - a * p.powf(m) - b).powi(2)).sum();
        return (a, b, sse);
    }
    let (mut s11, mut s1u, mut suu, mut s1y, mut suy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&m, &y) in depths.iter().zip(ys) {
        let u = p.powf(m);
        s11 += 1.0;
        s1u += u;
        suu += u * u;
        s1y += y;
        suy += u * y;
    }
    let det = s11 * suu - s1u * s1u;
    if det.abs() <= 1e-14 * s11 * suu.max(1e-300) {
        return (0.0, s1y / s11, ys.iter().map(|y| (y - s1y / s11).powi(2)).sum());
    }
    let a = (s11 * suy - s1u * s1y) / det;
    let b = (suu * s1y - s1u * suy) / det;
    let sse = depths.iter().zip(ys).map(|(&m, &y)| (y - a * p.powf(m) - b).powi(2)).sum();
    (a, b, sse)
}

/// Least-squares fit of A·pᵐ + B. For each trial p the amplitudes are
/// solved exactly; p itself is located on a logarithmic grid in 1 − p and
/// refined by golden-section search.
pub fn fit_decay(depths: &[usize], fidelities: &[f64]) -> Result<DecayFit, BenchmarkError> {
    fit_decay_inner(depths, fidelities, None)
}

/// As [`fit_decay`] with the asymptote B held at `offset`.
pub fn fit_decay_with_offset(depths: &[usize], fidelities: &[f64], offset: f64) -> Result<DecayFit, BenchmarkError> {
    fit_decay_inner(depths, fidelities, Some(offset))
}

fn fit_decay_inner(depths: &[usize], fidelities: &[f64], offset: Option<f64>) -> Result<DecayFit, BenchmarkError> {
    if depths.len() < 4 || depths.len() != fidelities.len() {
        return Err(BenchmarkError::Fit("need at least 4 matching depth points".into()));
    }
    if fidelities.iter().any(|f| !f.is_finite()) {
        return Err(BenchmarkError::Fit("non-finite fidelity".into()));
    }
    let ms: Vec<f64> = depths.iter().map(|&m| m as f64).collect();
    let scale = fidelities.iter().fold(0.0f64, |m, f| m.max(f.abs())).max(1e-300);
    let spread = fidelities.iter().fold(f64::NEG_INFINITY, |m, f| m.max(*f))
        - fidelities.iter().fold(f64::INFINITY, |m, f| m.min(*f));
    if spread <= 1e-12 * scale {
        let mean = fidelities.iter().sum::<f64>() / fidelities.len() as f64;
        let b = offset.unwrap_or(0.0);
        return Ok(DecayFit {
            a: mean - b,
            b,
            p: 1.0,
            depolarization: 0.0,
            exponent: 0.0,
            depolarization_std: 0.0,
            covariance: [[0.0; 3]; 3],
            rms_residual: 0.0,
        });
    }

    // q = 1 − p, scanned on both sides of zero so growth can be detected.
    let sse = |q: f64| linear_solve(&ms, fidelities, 1.0 - q, offset).2;
    let grid: Vec<f64> = (0..=240).map(|k| 10f64.powf(-8.0 + 8.0 * k as f64 / 240.0)).collect();
    let mut candidates: Vec<f64> = grid.iter().map(|q| q.min(1.0)).collect();
    candidates.extend(grid.iter().filter(|q| **q <= 0.05).map(|q| -q));
    candidates.sort_by(|a, b| a.total_cmp(b));
    let (best, _) = candidates
        .iter()
        .enumerate()
        .map(|(i, &q)| (i, sse(q)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("candidate grid is non-empty");
    let lo = candidates[best.saturating_sub(1)];
    let hi = candidates[(best + 1).min(candidates.len() - 1)];
    let (q, _) = golden_section(sse, lo, hi, 1e-14);
    let p = 1.0 - q;
    let (a, b, sse_min) = linear_solve(&ms, fidelities, p, offset);

    let n = ms.len() as f64;
    let n_free = if offset.is_some() { 2.0 } else { 3.0 };
    let sigma2 = sse_min / (n - n_free).max(1.0);
    let mut jtj = Matrix3::<f64>::zeros();
    for &m in &ms {
        let j = Vector3::new(p.powf(m), a * m * p.powf(m - 1.0), if offset.is_some() { 0.0 } else { 1.0 });
        jtj += j * j.transpose();
    }
    if offset.is_some() {
        jtj[(2, 2)] = 1.0;
    }
    let mut cov = jtj.try_inverse().map(|inv| inv * sigma2).unwrap_or_else(|| Matrix3::from_element(f64::NAN));
    if offset.is_some() {
        cov.row_mut(2).fill(0.0);
        cov.column_mut(2).fill(0.0);
    }
    let covariance = std::array::from_fn(|r| std::array::from_fn(|c| cov[(r, c)]));
    let std = cov[(1, 1)].max(0.0).sqrt();
    if p > 1.0 + 1e-9 && a.abs() > 1e-6 * scale && p - 1.0 > 3.0 * std {
        return Err(BenchmarkError::NegativeDecay(1.0 - p));
    }
    let p = p.min(1.0);
    Ok(DecayFit {
        a,
        b,
        p,
        depolarization: 1.0 - p,
        exponent: 0.0 - p.ln(),
        depolarization_std: std,
        covariance,
        rms_residual: (sse_min / n).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_exponential() {
        let depths: Vec<usize> = vec![1, 5, 10, 20, 50, 100, 200, 400];
        let f: Vec<f64> = depths.iter().map(|&m| 0.99f64.powi(m as i32)).collect();
        let fit = fit_decay(&depths, &f).unwrap();
        assert!((fit.depolarization - 0.01).abs() < 1e-6, "{fit:?}");
        assert!(fit.a > 0.999 && fit.b.abs() < 1e-6);
    }

    #[test]
    fn constant_means_no_decay() {
        let fit = fit_decay(&[1, 2, 3, 4, 5], &[1.0; 5]).unwrap();
        assert_eq!(fit.depolarization, 0.0);
    }

    #[test]
    fn growth_is_rejected() {
        let depths = [1usize, 10, 50, 100, 200];
        let f: Vec<f64> = depths.iter().map(|&m| 0.5 * 1.002f64.powi(m as i32)).collect();
        assert!(matches!(fit_decay(&depths, &f), Err(BenchmarkError::NegativeDecay(_))));
    }

    #[test]
    fn pauli_conversion_is_five_quarters_of_average() {
        let depths: Vec<usize> = vec![1, 5, 10, 20, 50, 100];
        let f: Vec<f64> = depths.iter().map(|&m| 0.8 * 0.996f64.powi(m as i32) + 0.05).collect();
        let fit = fit_decay(&depths, &f).unwrap();
        assert_eq!(fit.pauli_error(2).unwrap(), fit.average_error(2) * 1.25);
        assert!((fit.pauli_error(2).unwrap() - 0.004 * 15.0 / 16.0).abs() < 1e-8);
    }
}
