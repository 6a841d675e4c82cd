//! fSim gate algebra: matrix construction, tomography-based parameter
//! extraction, overlap error and Pauli-error bookkeeping.
//!
//! Basis order is |00⟩, |01⟩, |10⟩, |11⟩ where the left label is qubit 0,
//! so the index of |ab⟩ is `2a + b`.

use nalgebra::Matrix4;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};
use thiserror::Error;

pub type C64 = Complex64;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Magnitude below which a tomography element is treated as zero.
pub const ELEMENT_FLOOR: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FsimError {
    #[error("matrix is not unitary (max deviation {0:.3e})")]
    NotUnitary(f64),
    #[error("value {value} out of range for {what}")]
    OutOfRange { what: &'static str, value: f64 },
    #[error("degenerate tomography data: |u11| and |u21| both vanish")]
    Degenerate,
}

/// Wraps an angle into (−π, π]. An input of exactly ±π maps to +π.
pub fn wrap_angle(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// Smallest signed difference `a − b` on the circle.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    wrap_angle(a - b)
}

/// The five angles of the generic excitation-preserving two-qubit gate.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FsimParams {
    pub theta: f64,
    pub phi: f64,
    pub delta_plus: f64,
    pub delta_minus: f64,
    pub delta_minus_off: f64,
}

impl FsimParams {
    pub fn new(theta: f64, phi: f64) -> Self {
        Self {
            theta,
            phi,
            ..Self::default()
        }
    }

    pub fn with_phases(theta: f64, phi: f64, delta_plus: f64, delta_minus: f64, delta_minus_off: f64) -> Self {
        Self {
            theta,
            phi,
            delta_plus,
            delta_minus,
            delta_minus_off,
        }
    }

    pub fn from_degrees(theta_deg: f64, phi_deg: f64) -> Self {
        Self::new(theta_deg.to_radians(), phi_deg.to_radians())
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|x| x.is_finite())
    }

    pub fn as_array(&self) -> [f64; 5] {
        [self.theta, self.phi, self.delta_plus, self.delta_minus, self.delta_minus_off]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self::with_phases(a[0], a[1], a[2], a[3], a[4])
    }

    /// Canonical representative of the gauge orbit: θ ∈ [0, π/2],
    /// Δ₊ ∈ (−π/2, π/2], every other angle in (−π, π].
    ///
    /// Phases that do not enter the matrix (Δ₋,off at θ = 0, Δ₋ at θ = π/2)
    /// are set to zero.
    pub fn normalize(&self) -> Self {
        let mut theta = wrap_angle(self.theta);
        let mut dm = self.delta_minus;
        let mut doff = self.delta_minus_off;
        if theta < 0.0 {
            theta = -theta;
            doff += PI;
        }
        if theta > FRAC_PI_2 {
            theta = PI - theta;
            dm += PI;
        }
        let dp = wrap_angle(2.0 * self.delta_plus) / 2.0;
        let shifts = ((self.delta_plus - dp) / PI).round() as i64;
        if shifts.rem_euclid(2) == 1 {
            dm += PI;
            doff += PI;
        }
        let mut out = Self {
            theta,
            phi: wrap_angle(self.phi),
            delta_plus: dp,
            delta_minus: wrap_angle(dm),
            delta_minus_off: wrap_angle(doff),
        };
        if theta.sin().abs() < 1e-13 {
            out.delta_minus_off = 0.0;
        }
        if theta.cos().abs() < 1e-13 {
            out.delta_minus = 0.0;
        }
        out
    }

    pub fn theta_deg(&self) -> f64 {
        self.theta.to_degrees()
    }

    pub fn phi_deg(&self) -> f64 {
        self.phi.to_degrees()
    }
}

/// A 4×4 two-qubit unitary in the |00⟩, |01⟩, |10⟩, |11⟩ basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoQubitUnitary(pub Matrix4<C64>);

impl TwoQubitUnitary {
    pub fn identity() -> Self {
        Self(Matrix4::identity())
    }

    pub fn from_fn(f: impl FnMut(usize, usize) -> C64) -> Self {
        Self(Matrix4::from_fn(f))
    }

    pub fn matrix(&self) -> &Matrix4<C64> {
        &self.0
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.0[(row, col)]
    }

    pub fn dagger(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        Self(self.0 * rhs.0)
    }

    pub fn scale(&self, z: C64) -> Self {
        Self(self.0 * z)
    }

    /// Largest elementwise deviation of U†U from the identity.
    pub fn unitarity_error(&self) -> f64 {
        let p = self.0.adjoint() * self.0;
        let mut worst = 0.0f64;
        for r in 0..4 {
            for c in 0..4 {
                let target = if r == c { 1.0 } else { 0.0 };
                worst = worst.max((p[(r, c)] - C64::new(target, 0.0)).norm());
            }
        }
        worst
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_error() <= tol
    }

    /// True when only the 1 + 2×2 + 1 block structure is populated.
    pub fn is_excitation_preserving(&self, tol: f64) -> bool {
        let sector = |i: usize| match i {
            0 => 0,
            1 | 2 => 1,
            _ => 2,
        };
        (0..4).all(|r| (0..4).all(|c| sector(r) == sector(c) || self.0[(r, c)].norm() <= tol))
    }
}

/// Builds the five-parameter fSim matrix.
pub fn build_fsim(p: &FsimParams) -> TwoQubitUnitary {
    let (s, c) = p.theta.sin_cos();
    let e = |x: f64| C64::from_polar(1.0, x);
    let mut m = Matrix4::<C64>::zeros();
    m[(0, 0)] = C64::new(1.0, 0.0);
    m[(1, 1)] = e(p.delta_plus + p.delta_minus) * c;
    m[(1, 2)] = -I * e(p.delta_plus - p.delta_minus_off) * s;
    m[(2, 1)] = -I * e(p.delta_plus + p.delta_minus_off) * s;
    m[(2, 2)] = e(p.delta_plus - p.delta_minus) * c;
    m[(3, 3)] = e(2.0 * p.delta_plus + p.phi);
    TwoQubitUnitary(m)
}

/// The phase-free gate written with an e^{−iφ} entry on |11⟩.
pub fn build_fsim_eq1(theta: f64, phi: f64) -> TwoQubitUnitary {
    build_fsim(&FsimParams::new(theta, -phi))
}

/// Pauli error from the overlap of two unitaries, 1 − |Tr(U_t† U_a)/4|².
pub fn unitary_overlap_error(target: &TwoQubitUnitary, actual: &TwoQubitUnitary) -> Result<f64, FsimError> {
    for u in [target, actual] {
        let dev = u.unitarity_error();
        if dev > 1e-9 {
            return Err(FsimError::NotUnitary(dev));
        }
    }
    let tr = (target.0.adjoint() * actual.0).trace() / 4.0;
    Ok((1.0 - tr.norm_sqr()).max(0.0))
}

/// Converts a per-cycle decay error into a Pauli error, e_r·(1 + 1/2ⁿ).
pub fn pauli_from_decay(e_r: f64, n_qubits: u32) -> Result<f64, FsimError> {
    if !(0.0..=1.0).contains(&e_r) || e_r.is_nan() {
        return Err(FsimError::OutOfRange { what: "e_r", value: e_r });
    }
    if n_qubits == 0 || n_qubits > 30 {
        return Err(FsimError::OutOfRange {
            what: "n_qubits",
            value: n_qubits as f64,
        });
    }
    let d = (1u64 << n_qubits) as f64;
    Ok(e_r * (1.0 + 1.0 / d))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoQubitError {
    pub e_p: f64,
    /// Set when the subtraction went negative and was clamped to zero.
    pub clamped: bool,
}

/// Removes the two single-qubit Pauli errors from a cycle Pauli error.
pub fn two_qubit_error_from_cycle(e_p_cycle: f64, e_p_q1: f64, e_p_q2: f64) -> Result<TwoQubitError, FsimError> {
    for (what, v) in [("e_p_cycle", e_p_cycle), ("e_p_q1", e_p_q1), ("e_p_q2", e_p_q2)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(FsimError::OutOfRange { what, value: v });
        }
    }
    let raw = e_p_cycle - (e_p_q1 + e_p_q2);
    Ok(if raw < 0.0 {
        TwoQubitError { e_p: 0.0, clamped: true }
    } else {
        TwoQubitError { e_p: raw, clamped: false }
    })
}

/// T1-limited Pauli error of a single qubit idling for `t_gate_ns`.
pub fn coherence_limit(t_gate_ns: f64, t1_us: f64) -> f64 {
    1.5 * t_gate_ns / (3.0 * t1_us * 1e3)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRates {
    pub e_r: f64,
    pub e_p: f64,
    pub n_qubits: u32,
}

impl ErrorRates {
    pub fn from_decay(e_r: f64, n_qubits: u32) -> Result<Self, FsimError> {
        Ok(Self {
            e_r,
            e_p: pauli_from_decay(e_r, n_qubits)?,
            n_qubits,
        })
    }
}

/// The six complex numbers measured by unitary tomography, in the
/// simulation frame, plus the idle phase ψ₁₀ accumulated over the gate.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TomographyElements {
    pub u11: C64,
    pub u12: C64,
    pub u21: C64,
    pub u22: C64,
    /// Spectator qubit 1 excited, coherence read on qubit 1: u21*·u33.
    pub u12_excited: C64,
    /// Spectator qubit 1 excited, coherence read on qubit 0: u11*·u33.
    pub u22_excited: C64,
    pub psi10: f64,
}

impl TomographyElements {
    /// Noiseless elements of a qubit-frame unitary `u` as they would be read
    /// out in a frame where qubit 0 lags by `psi10`.
    pub fn from_unitary(u: &TwoQubitUnitary, psi10: f64) -> Self {
        let lag = C64::from_polar(1.0, -psi10);
        let u11 = u.get(1, 1);
        let u12 = u.get(1, 2);
        let u21 = u.get(2, 1) * lag;
        let u22 = u.get(2, 2) * lag;
        let u33 = u.get(3, 3) * lag;
        Self {
            u11,
            u12,
            u21,
            u22,
            u12_excited: u21.conj() * u33,
            u22_excited: u11.conj() * u33,
            psi10,
        }
    }

    pub fn magnitudes_ok(&self, tol: f64) -> bool {
        [self.u11, self.u12, self.u21, self.u22, self.u12_excited, self.u22_excited]
            .iter()
            .all(|z| z.norm() <= 1.0 + tol)
    }

    /// Column-norm consistency check, |u11|² + |u21|² ≈ 1 and |u12|² + |u22|² ≈ 1.
    pub fn is_consistent(&self, tol: f64) -> bool {
        let c1 = self.u11.norm_sqr() + self.u21.norm_sqr();
        let c2 = self.u12.norm_sqr() + self.u22.norm_sqr();
        self.magnitudes_ok(tol) && (c1 - 1.0).abs() <= tol && (c2 - 1.0).abs() <= tol
    }
}

/// Recovers the five fSim angles from tomography elements.
pub fn extract_fsim_params(el: &TomographyElements) -> Result<FsimParams, FsimError> {
    let lead = C64::from_polar(1.0, el.psi10);
    let u11 = el.u11;
    let u12 = el.u12;
    let u21 = el.u21 * lead;
    let u22 = el.u22 * lead;
    let u12x = el.u12_excited;
    let u22x = el.u22_excited * lead;

    if u11.norm() < ELEMENT_FLOOR && u21.norm() < ELEMENT_FLOOR {
        return Err(FsimError::Degenerate);
    }
    let theta = u12.norm().atan2(u11.norm());
    let (two_dp, u33) = if u21.norm() > u11.norm() {
        ((-u12 * u21).arg(), u12x / u21.conj())
    } else {
        ((u11 * u22).arg(), u22x / u11.conj())
    };
    let delta_plus = two_dp / 2.0;
    let phi = wrap_angle(u33.arg() - two_dp);
    let delta_minus = if u11.norm() >= ELEMENT_FLOOR {
        wrap_angle(u11.arg() - delta_plus)
    } else {
        0.0
    };
    let delta_minus_off = if u12.norm() >= ELEMENT_FLOOR {
        wrap_angle(delta_plus - (I * u12).arg())
    } else {
        0.0
    };
    Ok(FsimParams {
        theta,
        phi,
        delta_plus,
        delta_minus,
        delta_minus_off,
    }
    .normalize())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &TwoQubitUnitary, b: &TwoQubitUnitary, tol: f64) -> bool {
        (0..4).all(|r| (0..4).all(|c| (a.get(r, c) - b.get(r, c)).norm() < tol))
    }

    #[test]
    fn zero_angles_give_identity() {
        assert!(close(&build_fsim(&FsimParams::default()), &TwoQubitUnitary::identity(), 1e-15));
    }

    #[test]
    fn quarter_turn_is_iswap_like() {
        let u = build_fsim(&FsimParams::new(FRAC_PI_2, 0.0));
        assert!((u.get(2, 1) - (-I)).norm() < 1e-15);
        assert!((u.get(1, 2) - (-I)).norm() < 1e-15);
        assert!(u.get(1, 1).norm() < 1e-15 && u.get(2, 2).norm() < 1e-15);
        assert_eq!(u.get(0, 0), C64::new(1.0, 0.0));
        assert!((u.get(3, 3) - C64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn conditional_pi_is_cz() {
        let u = build_fsim(&FsimParams::new(0.0, PI));
        let cz = TwoQubitUnitary::from_fn(|r, c| match (r, c) {
            (3, 3) => C64::new(-1.0, 0.0),
            (r, c) if r == c => C64::new(1.0, 0.0),
            _ => C64::new(0.0, 0.0),
        });
        assert!(close(&u, &cz, 1e-15));
        assert!(close(&build_fsim_eq1(0.0, PI), &cz, 1e-15));
    }

    #[test]
    fn eq1_constructor_negates_phi() {
        let u = build_fsim_eq1(0.3, 0.8);
        assert!((u.get(3, 3) - C64::from_polar(1.0, -0.8)).norm() < 1e-15);
    }

    #[test]
    fn wrap_ties_to_plus_pi() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(0.5 - 4.0 * PI) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn angle_diff_is_signed_and_short() {
        assert!((angle_diff(0.1, -0.1) - 0.2).abs() < 1e-15);
        assert!((angle_diff(-0.1, 0.1) + 0.2).abs() < 1e-15);
        assert!((angle_diff(PI - 0.05, -PI + 0.05) + 0.1).abs() < 1e-12);
    }

    #[test]
    fn pauli_factors() {
        assert_eq!(pauli_from_decay(0.0, 1).unwrap(), 0.0);
        assert_eq!(pauli_from_decay(0.02, 1).unwrap(), 0.02 * 1.5);
        assert_eq!(pauli_from_decay(0.02, 2).unwrap(), 0.02 * 1.25);
        assert!(pauli_from_decay(1.2, 1).is_err());
        assert!(pauli_from_decay(-0.1, 2).is_err());
        assert!(pauli_from_decay(0.1, 0).is_err());
    }

    #[test]
    fn cycle_subtraction() {
        let e = two_qubit_error_from_cycle(5.9e-3, 7.5e-4, 7.5e-4).unwrap();
        assert!((e.e_p - 4.4e-3).abs() < 1e-15 && !e.clamped);
        let e = two_qubit_error_from_cycle(1.5e-3, 7.5e-4, 7.5e-4).unwrap();
        assert!(e.e_p.abs() < 1e-18);
        let e = two_qubit_error_from_cycle(5.7e-3, 0.7e-3, 0.9e-3).unwrap();
        assert!((e.e_p - 4.1e-3).abs() < 1e-15);
        let e = two_qubit_error_from_cycle(1.0e-3, 7.5e-4, 7.5e-4).unwrap();
        assert!(e.clamped && e.e_p == 0.0);
    }

    #[test]
    fn coherence_limit_values() {
        assert!((coherence_limit(15.0, 30.0) - 2.5e-4).abs() < 1e-15);
        assert_eq!(coherence_limit(0.0, 30.0), 0.0);
        assert!((coherence_limit(28.0, 25.3) - 5.53e-4).abs() < 5e-7);
    }

    #[test]
    fn overlap_error_zero_for_identical() {
        let u = build_fsim(&FsimParams::with_phases(0.4, 1.1, 0.2, -0.3, 0.5));
        assert!(unitary_overlap_error(&u, &u).unwrap() < 1e-15);
    }

    #[test]
    fn overlap_rejects_non_unitary() {
        let u = TwoQubitUnitary(Matrix4::from_element(C64::new(0.5, 0.0)));
        assert!(matches!(
            unitary_overlap_error(&u, &TwoQubitUnitary::identity()),
            Err(FsimError::NotUnitary(_))
        ));
    }

    #[test]
    fn extraction_of_iswap() {
        let el = TomographyElements {
            u11: C64::new(0.0, 0.0),
            u12: -I,
            u21: -I,
            u22: C64::new(0.0, 0.0),
            u12_excited: (-I).conj(),
            u22_excited: C64::new(0.0, 0.0),
            psi10: 0.0,
        };
        let p = extract_fsim_params(&el).unwrap();
        assert!((p.theta - FRAC_PI_2).abs() < 1e-12);
        for x in [p.phi, p.delta_plus, p.delta_minus, p.delta_minus_off] {
            assert!(x.abs() < 1e-12, "{p:?}");
        }
    }

    #[test]
    fn extraction_of_conditional_pi() {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        let el = TomographyElements {
            u11: one,
            u12: zero,
            u21: zero,
            u22: one,
            u12_excited: zero,
            u22_excited: -one,
            psi10: 0.0,
        };
        let p = extract_fsim_params(&el).unwrap();
        assert!(p.theta.abs() < 1e-12);
        assert!((p.phi - PI).abs() < 1e-12);
    }

    #[test]
    fn extraction_rejects_degenerate() {
        let el = TomographyElements::default();
        assert_eq!(extract_fsim_params(&el), Err(FsimError::Degenerate));
    }

    #[test]
    fn normalize_is_gauge_invariant() {
        let p = FsimParams::with_phases(2.2, -3.5, 1.9, 0.4, -0.7);
        let n = p.normalize();
        assert!((0.0..=FRAC_PI_2).contains(&n.theta));
        assert!(n.delta_plus > -FRAC_PI_2 && n.delta_plus <= FRAC_PI_2);
        assert!(close(&build_fsim(&p), &build_fsim(&n), 1e-12));
    }
}
