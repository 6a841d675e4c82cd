use crate::fsim::C64;
use nalgebra::{DMatrix, DVector, Matrix4};
use serde::{Deserialize, Serialize};

use super::evolve::{idx9, sample_controls, Matrix9c, Propagator, COMPUTATIONAL_9};
use super::{DeviceError, DeviceModel, PulseProgram};

/// Two-qutrit density matrix over |ab⟩, a, b ∈ {0, 1, 2}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QutritDensityMatrix(pub Matrix9c);

impl QutritDensityMatrix {
    pub fn basis(a: usize, b: usize) -> Self {
        let mut m = Matrix9c::zeros();
        m[(idx9(a, b), idx9(a, b))] = C64::new(1.0, 0.0);
        Self(m)
    }

    pub fn ground() -> Self {
        Self::basis(0, 0)
    }

    pub fn from_pure(psi: &[C64; 9]) -> Self {
        Self(Matrix9c::from_fn(|r, c| psi[r] * psi[c].conj()))
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn population(&self, a: usize, b: usize) -> f64 {
        self.0[(idx9(a, b), idx9(a, b))].re
    }

    pub fn populations(&self) -> [f64; 9] {
        std::array::from_fn(|i| self.0[(i, i)].re)
    }

    /// Population outside the computational subspace.
    pub fn leakage(&self) -> f64 {
        1.0 - COMPUTATIONAL_9.iter().map(|&i| self.0[(i, i)].re).sum::<f64>()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        (self.0 - self.0.adjoint()).iter().all(|z| z.norm() <= tol)
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let h = (self.0 + self.0.adjoint()) * C64::new(0.5, 0.0);
        let d = DMatrix::from_fn(9, 9, |r, c| h[(r, c)]);
        d.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        self.is_hermitian(tol) && (self.trace() - C64::new(1.0, 0.0)).norm() <= tol && self.min_eigenvalue() >= -tol
    }

    /// Unnormalized block on |00⟩, |01⟩, |10⟩, |11⟩.
    pub fn computational_block(&self) -> Matrix4<C64> {
        Matrix4::from_fn(|r, c| self.0[(COMPUTATIONAL_9[r], COMPUTATIONAL_9[c])])
    }

    pub fn conjugate(&self, u: &Matrix9c) -> Self {
        Self(u * self.0 * u.adjoint())
    }
}

/// Per-qutrit lowering with |1⟩→|0⟩ at rate γ and |2⟩→|1⟩ at 2γ over `dt`.
fn amplitude_damp(rho: &mut Matrix9c, qutrit: usize, gamma: f64, dt: f64) {
    if gamma <= 0.0 {
        return;
    }
    let p1 = 1.0 - (-gamma * dt).exp();
    let p2 = 1.0 - (-2.0 * gamma * dt).exp();
    let keep = [1.0, (1.0 - p1).sqrt(), (1.0 - p2).sqrt()];
    let level = |i: usize| if qutrit == 0 { i / 3 } else { i % 3 };
    let with_level = |i: usize, l: usize| if qutrit == 0 { 3 * l + i % 3 } else { 3 * (i / 3) + l };
    let old = *rho;
    for r in 0..9 {
        for c in 0..9 {
            rho[(r, c)] = old[(r, c)] * keep[level(r)] * keep[level(c)];
        }
    }
    for r in 0..9 {
        for c in 0..9 {
            let (lr, lc) = (level(r), level(c));
            if lr == 0 && lc == 0 {
                rho[(r, c)] += old[(with_level(r, 1), with_level(c, 1))] * p1;
            } else if lr == 1 && lc == 1 {
                rho[(r, c)] += old[(with_level(r, 2), with_level(c, 2))] * p2;
            }
        }
    }
}

/// Pure dephasing generated by the number operator of each qutrit; the
/// qubit coherence decays as e^{−t/Tφ}.
fn dephase(rho: &mut Matrix9c, rate: f64, dt: f64) {
    if rate <= 0.0 {
        return;
    }
    for r in 0..9 {
        for c in 0..9 {
            let da = (r / 3) as f64 - (c / 3) as f64;
            let db = (r % 3) as f64 - (c % 3) as f64;
            let k = (da * da + db * db) * rate * dt;
            if k != 0.0 {
                rho[(r, c)] *= (-k).exp();
            }
        }
    }
}

/// Relaxation and dephasing over one sample of length `dt` with the qubits
/// at frequencies `f` (GHz).
pub fn apply_decoherence(rho: &mut Matrix9c, model: &DeviceModel, f: [f64; 2], dt: f64) {
    amplitude_damp(rho, 0, model.relaxation_rate(f[0]), dt);
    amplitude_damp(rho, 1, model.relaxation_rate(f[1]), dt);
    dephase(rho, model.dephasing_rate(), dt);
}

/// Evolves `rho` through a program in the simulation frame.
pub fn evolve_density(
    rho: &QutritDensityMatrix,
    program: &PulseProgram,
    model: &DeviceModel,
    noise: bool,
) -> Result<QutritDensityMatrix, DeviceError> {
    let dt = program.dt();
    let mut m = rho.0;
    let mut last: Option<((f64, f64), Matrix9c)> = None;
    for s in sample_controls(program, model)? {
        let key = (s.g, s.delta);
        let u = match &last {
            Some((k, u)) if *k == key => *u,
            _ => {
                let u = Propagator::step(s.g, s.delta, model.eta_mhz, dt).to_matrix9();
                last = Some((key, u));
                u
            }
        };
        m = u * m * u.adjoint();
        if noise {
            apply_decoherence(&mut m, model, [s.f_q0, s.f_q1], dt);
        }
    }
    Ok(QutritDensityMatrix(m))
}

/// Out-of-place frame rotation: conjugation by diag(e^{i a ψ}).
pub fn rotate_frame(rho: &QutritDensityMatrix, psi10: f64) -> QutritDensityMatrix {
    let ph: [C64; 9] = std::array::from_fn(|i| C64::from_polar(1.0, (i / 3) as f64 * psi10));
    QutritDensityMatrix(Matrix9c::from_fn(|r, c| ph[r] * rho.0[(r, c)] * ph[c].conj()))
}

/// A quantum channel on the two-qutrit space stored as an 81×81
/// superoperator acting on column-stacked density matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    superop: DMatrix<C64>,
}

fn vec9(m: &Matrix9c) -> DVector<C64> {
    DVector::from_iterator(81, m.iter().cloned())
}

fn unvec9(v: &DVector<C64>) -> Matrix9c {
    Matrix9c::from_iterator(v.iter().cloned())
}

impl Channel {
    pub fn identity() -> Self {
        Self {
            superop: DMatrix::identity(81, 81),
        }
    }

    /// Builds the channel by pushing every matrix unit through `f`, which
    /// must be linear.
    pub fn from_linear_map<F>(f: F) -> Result<Self, DeviceError>
    where
        F: Fn(&Matrix9c) -> Result<Matrix9c, DeviceError>,
    {
        let mut s = DMatrix::<C64>::zeros(81, 81);
        for col in 0..81 {
            let mut e = Matrix9c::zeros();
            e[col] = C64::new(1.0, 0.0);
            let out = f(&e)?;
            s.set_column(col, &vec9(&out));
        }
        Ok(Self { superop: s })
    }

    pub fn unitary(u: &Matrix9c) -> Self {
        let u = *u;
        Self::from_linear_map(|e| Ok(u * e * u.adjoint())).expect("unitary map is infallible")
    }

    /// The channel of a program, expressed in the idle frame (the
    /// accumulated idle precession ψ₁₀ is removed at the end).
    pub fn from_program(program: &PulseProgram, model: &DeviceModel, noise: bool) -> Result<Self, DeviceError> {
        let psi = super::evolve::idle_phase(program, model);
        Self::from_linear_map(|e| {
            let out = evolve_density(&QutritDensityMatrix(*e), program, model, noise)?;
            Ok(rotate_frame(&out, psi).0)
        })
    }

    pub fn apply(&self, rho: &QutritDensityMatrix) -> QutritDensityMatrix {
        QutritDensityMatrix(unvec9(&(&self.superop * vec9(&rho.0))))
    }

    /// `later ∘ self`.
    pub fn then(&self, later: &Channel) -> Channel {
        Channel {
            superop: &later.superop * &self.superop,
        }
    }

    pub fn superoperator(&self) -> &DMatrix<C64> {
        &self.superop
    }
}

/// Two-qubit depolarizing noise on the computational subspace: with
/// probability `e_p` one of the 15 non-identity Paulis (extended by the
/// identity on |2⟩) is applied.
pub fn depolarize_two_qubit(rho: &QutritDensityMatrix, e_p: f64) -> QutritDensityMatrix {
    if e_p == 0.0 {
        return *rho;
    }
    let mut acc = Matrix9c::zeros();
    for pa in 0..4 {
        for pb in 0..4 {
            if pa == 0 && pb == 0 {
                continue;
            }
            acc += super::gates::pauli_pair_conjugate(&rho.0, pa, pb);
        }
    }
    QutritDensityMatrix(rho.0 * C64::new(1.0 - e_p, 0.0) + acc * C64::new(e_p / 15.0, 0.0))
}

/// Summary of a density matrix used in reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateSummary {
    pub trace: f64,
    pub leakage: f64,
    pub purity: f64,
}

impl From<&QutritDensityMatrix> for StateSummary {
    fn from(r: &QutritDensityMatrix) -> Self {
        Self {
            trace: r.trace().re,
            leakage: r.leakage(),
            purity: (r.0 * r.0).trace().re,
        }
    }
}
