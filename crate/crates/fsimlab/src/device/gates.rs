use crate::fsim::C64;
use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};

use super::evolve::Matrix9c;
use super::{Qubit, QutritDensityMatrix};

/// Single-qubit gates available on the simulated device.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SingleQubitGate {
    I,
    X2,
    Y2,
    MinusX2,
    MinusY2,
    /// π/2 about (x + y)/√2.
    PxPy,
    /// π/2 about (x − y)/√2.
    PxMy,
    /// π/2 about (−x + y)/√2.
    MxPy,
    /// π/2 about (−x − y)/√2.
    MxMy,
    X,
    Y,
    /// diag(1, e^{iz}).
    Phase(f64),
    /// Arbitrary 2×2 unitary, row-major.
    Unitary([[C64; 2]; 2]),
}

/// The random-circuit gate set.
pub const XEB_GATES: [SingleQubitGate; 6] = [
    SingleQubitGate::X2,
    SingleQubitGate::Y2,
    SingleQubitGate::PxPy,
    SingleQubitGate::PxMy,
    SingleQubitGate::MxPy,
    SingleQubitGate::MxMy,
];

fn half_turn_about(nx: f64, ny: f64) -> Matrix2<C64> {
    let c = C64::new(FRAC_PI_4.cos(), 0.0);
    let s = FRAC_PI_4.sin();
    // cos(π/4)·I − i sin(π/4)(nx X + ny Y)
    Matrix2::new(c, C64::new(-s * ny, -s * nx), C64::new(s * ny, -s * nx), c)
}

impl SingleQubitGate {
    pub fn matrix(&self) -> Matrix2<C64> {
        let d = FRAC_1_SQRT_2;
        let z = C64::new(0.0, 0.0);
        let one = C64::new(1.0, 0.0);
        match *self {
            SingleQubitGate::I => Matrix2::identity(),
            SingleQubitGate::X2 => half_turn_about(1.0, 0.0),
            SingleQubitGate::Y2 => half_turn_about(0.0, 1.0),
            SingleQubitGate::MinusX2 => half_turn_about(-1.0, 0.0),
            SingleQubitGate::MinusY2 => half_turn_about(0.0, -1.0),
            SingleQubitGate::PxPy => half_turn_about(d, d),
            SingleQubitGate::PxMy => half_turn_about(d, -d),
            SingleQubitGate::MxPy => half_turn_about(-d, d),
            SingleQubitGate::MxMy => half_turn_about(-d, -d),
            SingleQubitGate::X => Matrix2::new(z, C64::new(0.0, -1.0), C64::new(0.0, -1.0), z),
            SingleQubitGate::Y => Matrix2::new(z, -one, one, z),
            SingleQubitGate::Phase(t) => Matrix2::new(one, z, z, C64::from_polar(1.0, t)),
            SingleQubitGate::Unitary(m) => Matrix2::new(m[0][0], m[0][1], m[1][0], m[1][1]),
        }
    }

    pub fn from_matrix(m: &Matrix2<C64>) -> Self {
        SingleQubitGate::Unitary([[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]])
    }
}

/// Embeds a qubit unitary on `which` into the 9-dim space (identity on |2⟩).
pub fn embed(u: &Matrix2<C64>, which: Qubit) -> Matrix9c {
    let mut q = nalgebra::Matrix3::<C64>::identity();
    for r in 0..2 {
        for c in 0..2 {
            q[(r, c)] = u[(r, c)];
        }
    }
    let id = nalgebra::Matrix3::<C64>::identity();
    let (a, b) = match which {
        Qubit::Q0 => (q, id),
        Qubit::Q1 => (id, q),
    };
    Matrix9c::from_fn(|r, c| a[(r / 3, c / 3)] * b[(r % 3, c % 3)])
}

/// Pauli `p` (0 = I, 1 = X, 2 = Y, 3 = Z) on a qutrit as (level map, phase).
fn pauli_action(p: usize, level: usize) -> (usize, C64) {
    let one = C64::new(1.0, 0.0);
    match (p, level) {
        (_, 2) | (0, _) => (level, one),
        (1, l) => (1 - l, one),
        (2, 0) => (1, C64::new(0.0, 1.0)),
        (2, _) => (0, C64::new(0.0, -1.0)),
        (3, 0) => (0, one),
        (3, _) => (1, -one),
        _ => unreachable!("pauli index"),
    }
}

/// (P_a ⊗ P_b) ρ (P_a ⊗ P_b)† for Paulis extended by the identity on |2⟩.
pub fn pauli_pair_conjugate(rho: &Matrix9c, pa: usize, pb: usize) -> Matrix9c {
    let map: [(usize, C64); 9] = std::array::from_fn(|i| {
        let (la, ca) = pauli_action(pa, i / 3);
        let (lb, cb) = pauli_action(pb, i % 3);
        (3 * la + lb, ca * cb)
    });
    let mut out = Matrix9c::zeros();
    for r in 0..9 {
        for c in 0..9 {
            let (r2, cr) = map[r];
            let (c2, cc) = map[c];
            out[(r2, c2)] = cr * rho[(r, c)] * cc.conj();
        }
    }
    out
}

/// Single-qubit depolarizing noise with Pauli error `e_p`.
pub fn depolarize_single(rho: &QutritDensityMatrix, which: Qubit, e_p: f64) -> QutritDensityMatrix {
    if e_p == 0.0 {
        return *rho;
    }
    let mut acc = Matrix9c::zeros();
    for p in 1..4 {
        acc += match which {
            Qubit::Q0 => pauli_pair_conjugate(&rho.0, p, 0),
            Qubit::Q1 => pauli_pair_conjugate(&rho.0, 0, p),
        };
    }
    QutritDensityMatrix(rho.0 * C64::new(1.0 - e_p, 0.0) + acc * C64::new(e_p / 3.0, 0.0))
}

/// Applies the ideal gate followed by a depolarizing channel of Pauli error
/// `error`.
pub fn apply_single_qubit_gate(rho: &QutritDensityMatrix, which: Qubit, gate: SingleQubitGate, error: f64) -> QutritDensityMatrix {
    let u = embed(&gate.matrix(), which);
    depolarize_single(&rho.conjugate(&u), which, error)
}

/// Ideal gates on both qubits at once, then independent depolarizing noise.
pub fn apply_gate_layer(rho: &QutritDensityMatrix, gates: [SingleQubitGate; 2], error: f64) -> QutritDensityMatrix {
    let u = embed(&gates[0].matrix(), Qubit::Q0) * embed(&gates[1].matrix(), Qubit::Q1);
    let r = rho.conjugate(&u);
    depolarize_single(&depolarize_single(&r, Qubit::Q0, error), Qubit::Q1, error)
}

/// The 24 single-qubit Cliffords up to global phase, generated from X/2
/// and Y/2. Element 0 is the identity.
pub fn clifford_group() -> Vec<Matrix2<C64>> {
    let gens = [SingleQubitGate::X2.matrix(), SingleQubitGate::Y2.matrix()];
    let mut group = vec![Matrix2::<C64>::identity()];
    let mut frontier = group.clone();
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for m in &frontier {
            for g in &gens {
                let cand = g * m;
                if !group.iter().any(|h| same_up_to_phase(h, &cand)) {
                    group.push(cand);
                    next.push(cand);
                }
            }
        }
        frontier = next;
    }
    group
}

pub fn same_up_to_phase(a: &Matrix2<C64>, b: &Matrix2<C64>) -> bool {
    let tr = (a.adjoint() * b).trace();
    (tr.norm() - 2.0).abs() < 1e-9
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unitary(m: &Matrix2<C64>) -> bool {
        (m.adjoint() * m - Matrix2::identity()).iter().all(|z| z.norm() < 1e-12)
    }

    #[test]
    fn gates_are_unitary() {
        for g in XEB_GATES.iter().chain(&[SingleQubitGate::X, SingleQubitGate::Y, SingleQubitGate::Phase(0.3)]) {
            assert!(unitary(&g.matrix()), "{g:?}");
        }
    }

    #[test]
    fn two_half_turns_make_x() {
        let x2 = SingleQubitGate::X2.matrix();
        assert!(same_up_to_phase(&(x2 * x2), &SingleQubitGate::X.matrix()));
        let d = SingleQubitGate::PxPy.matrix();
        let xy = Matrix2::new(C64::new(0.0, 0.0), C64::new(1.0, -1.0) * FRAC_1_SQRT_2, C64::new(1.0, 1.0) * FRAC_1_SQRT_2, C64::new(0.0, 0.0));
        assert!(same_up_to_phase(&(d * d), &xy));
    }

    #[test]
    fn phase_gate_keeps_populations() {
        let rho = QutritDensityMatrix::from_pure(&{
            let mut v = [C64::new(0.0, 0.0); 9];
            v[0] = C64::new(0.6, 0.0);
            v[3] = C64::new(0.0, 0.8);
            v
        });
        let out = apply_single_qubit_gate(&rho, Qubit::Q0, SingleQubitGate::Phase(1.1), 0.0);
        for (a, b) in rho.populations().iter().zip(out.populations()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn second_level_is_spectator() {
        let rho = QutritDensityMatrix::basis(2, 1);
        let out = apply_single_qubit_gate(&rho, Qubit::Q0, SingleQubitGate::X2, 0.0);
        assert!((out.population(2, 1) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn clifford_group_has_24_elements() {
        let g = clifford_group();
        assert_eq!(g.len(), 24);
        for m in &g {
            assert!(unitary(m));
        }
    }

    #[test]
    fn single_depolarizing_flips_population() {
        let rho = QutritDensityMatrix::basis(0, 0);
        let out = depolarize_single(&rho, Qubit::Q1, 0.03);
        assert!((out.population(0, 1) - 0.02).abs() < 1e-14);
    }
}
