//! Piecewise-constant propagation of the two-qutrit Hamiltonian.
//!
//! Energies are in MHz and times in ns, so a sample of length dt contributes
//! exp(−i·2π·H·dt·10⁻³). The Hamiltonian conserves excitation number and
//! splits into sectors N = 0…4 of sizes 1, 2, 3, 2, 1; sectors 1 and 2 are
//! stored together as the 5×5 block in the order |01⟩, |10⟩, |11⟩, |20⟩, |02⟩.

use crate::fsim::{TwoQubitUnitary, C64};
use nalgebra::{Matrix2, Matrix5, SMatrix, SymmetricEigen};
use std::f64::consts::{PI, SQRT_2};

use super::{DeviceError, DeviceModel, PulseProgram, Qubit};

pub type Matrix9c = SMatrix<C64, 9, 9>;

/// 9-dim index of |ab⟩ (a = qubit 0 level, b = qubit 1 level).
pub const fn idx9(a: usize, b: usize) -> usize {
    3 * a + b
}

/// 9-dim indices of the 5×5 block states |01⟩, |10⟩, |11⟩, |20⟩, |02⟩.
pub const BLOCK_TO_9: [usize; 5] = [idx9(0, 1), idx9(1, 0), idx9(1, 1), idx9(2, 0), idx9(0, 2)];

/// 9-dim indices of |00⟩, |01⟩, |10⟩, |11⟩.
pub const COMPUTATIONAL_9: [usize; 4] = [idx9(0, 0), idx9(0, 1), idx9(1, 0), idx9(1, 1)];

/// The 5×5 block Hamiltonian (MHz).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamiltonianBlock {
    pub matrix: Matrix5<f64>,
    pub g: f64,
    pub delta: f64,
    pub eta: f64,
}

pub fn hamiltonian_block(g: f64, delta: f64, eta: f64) -> HamiltonianBlock {
    let s = SQRT_2 * g;
    #[rustfmt::skip]
    let matrix = Matrix5::new(
        0.0, g,     0.0,   0.0,               0.0,
        g,   delta, 0.0,   0.0,               0.0,
        0.0, 0.0,   delta, s,                 s,
        0.0, 0.0,   s,     2.0 * delta + eta, 0.0,
        0.0, 0.0,   s,     0.0,               eta,
    );
    HamiltonianBlock { matrix, g, delta, eta }
}

/// N = 3 sector, basis |12⟩, |21⟩.
fn hamiltonian_n3(g: f64, delta: f64, eta: f64) -> Matrix2<f64> {
    Matrix2::new(delta + eta, 2.0 * g, 2.0 * g, 2.0 * delta + eta)
}

fn n4_energy(delta: f64, eta: f64) -> f64 {
    2.0 * delta + 2.0 * eta
}

macro_rules! expm_symmetric {
    ($name:ident, $real:ty, $cplx:ty) => {
        fn $name(h: $real, dt_ns: f64) -> $cplx {
            let eig = SymmetricEigen::new(h);
            let v = eig.eigenvectors.map(|x| C64::new(x, 0.0));
            let phases = <$cplx>::from_diagonal(
                &eig.eigenvalues.map(|lam| C64::from_polar(1.0, -2.0 * PI * 1e-3 * lam * dt_ns)),
            );
            v * phases * v.transpose()
        }
    };
}

expm_symmetric!(expm5, Matrix5<f64>, Matrix5<C64>);
expm_symmetric!(expm2, Matrix2<f64>, Matrix2<C64>);

/// Unitary of the full two-qutrit space, held sector by sector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Propagator {
    pub block: Matrix5<C64>,
    pub n3: Matrix2<C64>,
    pub n4: C64,
}

impl Propagator {
    pub fn identity() -> Self {
        Self {
            block: Matrix5::identity(),
            n3: Matrix2::identity(),
            n4: C64::new(1.0, 0.0),
        }
    }

    /// One piecewise-constant step.
    pub fn step(g: f64, delta: f64, eta: f64, dt_ns: f64) -> Self {
        Self {
            block: expm5(hamiltonian_block(g, delta, eta).matrix, dt_ns),
            n3: expm2(hamiltonian_n3(g, delta, eta), dt_ns),
            n4: C64::from_polar(1.0, -2.0 * PI * 1e-3 * n4_energy(delta, eta) * dt_ns),
        }
    }

    /// `later · self`.
    pub fn followed_by(&self, later: &Propagator) -> Self {
        Self {
            block: later.block * self.block,
            n3: later.n3 * self.n3,
            n4: later.n4 * self.n4,
        }
    }

    pub fn to_matrix9(&self) -> Matrix9c {
        let mut u = Matrix9c::zeros();
        u[(0, 0)] = C64::new(1.0, 0.0);
        for r in 0..5 {
            for c in 0..5 {
                u[(BLOCK_TO_9[r], BLOCK_TO_9[c])] = self.block[(r, c)];
            }
        }
        let n3 = [idx9(1, 2), idx9(2, 1)];
        for r in 0..2 {
            for c in 0..2 {
                u[(n3[r], n3[c])] = self.n3[(r, c)];
            }
        }
        u[(8, 8)] = self.n4;
        u
    }

    /// Rotates the output into the idle frame of each qubit: every qubit-0
    /// excitation gains e^{iψ}.
    pub fn in_qubit_frame(&self, psi10: f64) -> Self {
        let ph = |a: usize| C64::from_polar(1.0, a as f64 * psi10);
        let block_level = [0usize, 1, 1, 2, 0];
        let mut out = *self;
        for r in 0..5 {
            let f = ph(block_level[r]);
            for c in 0..5 {
                out.block[(r, c)] *= f;
            }
        }
        let n3_level = [1usize, 2];
        for r in 0..2 {
            for c in 0..2 {
                out.n3[(r, c)] *= ph(n3_level[r]);
            }
        }
        out.n4 *= ph(2);
        out
    }

    /// Computational-subspace block (|00⟩, |01⟩, |10⟩, |11⟩). Not unitary
    /// when the gate leaks.
    pub fn computational(&self) -> TwoQubitUnitary {
        let map = [None, Some(0usize), Some(1), Some(2)];
        TwoQubitUnitary::from_fn(|r, c| match (map[r], map[c]) {
            (None, None) => C64::new(1.0, 0.0),
            (Some(i), Some(j)) => self.block[(i, j)],
            _ => C64::new(0.0, 0.0),
        })
    }
}

/// Instantaneous (g, Δ) in MHz and the two qubit frequencies in GHz for
/// every sample of a program.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleControls {
    pub g: f64,
    pub delta: f64,
    pub f_q0: f64,
    pub f_q1: f64,
}

pub fn sample_controls(program: &PulseProgram, model: &DeviceModel) -> Result<Vec<SampleControls>, DeviceError> {
    let b0 = model.idle_bias(Qubit::Q0);
    let b1 = model.idle_bias(Qubit::Q1);
    let bc = model.coupler.off_bias();
    (0..program.len())
        .map(|k| {
            let f_q0 = model.qubit_freq(b0 + program.q0_bias[k], Qubit::Q0)?;
            let f_q1 = model.qubit_freq(b1 + program.q1_bias[k], Qubit::Q1)?;
            let g = model.coupler_g(bc + program.coupler_bias[k])?;
            Ok(SampleControls {
                g,
                delta: (f_q1 - f_q0) * 1e3,
                f_q0,
                f_q1,
            })
        })
        .collect()
}

/// Full-space propagator of a program in the simulation frame.
pub fn evolve_propagator(program: &PulseProgram, model: &DeviceModel) -> Result<Propagator, DeviceError> {
    let dt = program.dt();
    let mut u = Propagator::identity();
    let mut last: Option<((f64, f64), Propagator)> = None;
    for s in sample_controls(program, model)? {
        let key = (s.g, s.delta);
        let step = match &last {
            Some((k, p)) if *k == key => *p,
            _ => {
                let p = Propagator::step(s.g, s.delta, model.eta_mhz, dt);
                last = Some((key, p));
                p
            }
        };
        u = u.followed_by(&step);
    }
    Ok(u)
}

/// Time-ordered 5×5 block unitary of a program.
pub fn evolve_block(program: &PulseProgram, model: &DeviceModel) -> Result<Matrix5<C64>, DeviceError> {
    Ok(evolve_propagator(program, model)?.block)
}

/// Phase qubit 0 lags qubit 1 by while idling for the whole program.
pub fn idle_phase(program: &PulseProgram, model: &DeviceModel) -> f64 {
    2.0 * PI * model.idle_detuning_mhz() * 1e-3 * program.total_ns()
}
