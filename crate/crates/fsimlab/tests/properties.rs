use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use proptest::prelude::*;

use fsimlab::benchmarking::{error_budget, fsim_channel, with_depolarizing};
use fsimlab::cli::histogram;
use fsimlab::device::QutritDensityMatrix;
use fsimlab::fsim::*;
use fsimlab::pulse::{apply_settling, lsb, predistort, quantize, SettlingModel, Waveform};

fn params() -> impl Strategy<Value = FsimParams> {
    (0.01..PI / 2.0 - 0.01, -PI..PI, -PI..PI, -PI..PI, -PI..PI).prop_map(|(t, p, a, b, c)| FsimParams::with_phases(t, p, a, b, c))
}

fn settling_models() -> impl Strategy<Value = SettlingModel> {
    prop_oneof![Just(SettlingModel::device_q2()), Just(SettlingModel::device_q3()), Just(SettlingModel::device_coupler())]
}

fn waveform(max: f64) -> impl Strategy<Value = Waveform> {
    prop::collection::vec(-max..max, 1..400).prop_map(|s| Waveform::new(s, 1.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn fsim_is_unitary_and_excitation_preserving(p in params()) {
        let u = build_fsim(&p);
        prop_assert!(u.is_unitary(1e-12));
        prop_assert!(u.is_excitation_preserving(1e-12));
    }

    #[test]
    fn normalize_is_idempotent_and_keeps_the_gate(p in params()) {
        let n = p.normalize();
        let nn = n.normalize().as_array();
        for (a, b) in n.as_array().iter().zip(&nn) {
            prop_assert!(angle_diff(*a, *b).abs() < 1e-12);
        }
        prop_assert!(unitary_overlap_error(&build_fsim(&p), &build_fsim(&n)).unwrap() < 1e-12);
    }

    #[test]
    fn tomography_elements_round_trip(p in params()) {
        let got = extract_fsim_params(&TomographyElements::from_unitary(&build_fsim(&p), 0.0)).unwrap().normalize().as_array();
        let want = p.normalize().as_array();
        for (a, b) in got.iter().zip(&want) {
            prop_assert!(angle_diff(*a, *b).abs() < 1e-9, "{got:?} vs {want:?}");
        }
    }

    #[test]
    fn angle_diff_is_wrapped(a in -50.0..50.0f64, b in -50.0..50.0f64) {
        let d = angle_diff(a, b);
        prop_assert!(d > -PI - 1e-12 && d <= PI + 1e-12);
        prop_assert!(((a - b - d) / (2.0 * PI)).fract().abs().min(1.0 - ((a - b - d) / (2.0 * PI)).fract().abs()) < 1e-9);
    }

    #[test]
    fn overlap_error_is_symmetric_and_vanishes_on_the_diagonal(p in params(), q in params()) {
        let (u, v) = (build_fsim(&p), build_fsim(&q));
        let e = unitary_overlap_error(&u, &v).unwrap();
        prop_assert!(e >= -1e-15);
        prop_assert!((e - unitary_overlap_error(&v, &u).unwrap()).abs() < 1e-12);
        prop_assert!(unitary_overlap_error(&u, &u).unwrap().abs() < 1e-12);
    }

    #[test]
    fn depolarized_channel_keeps_states_physical(p in params(), e in 0.0..0.2f64, a in 0..2usize, b in 0..2usize) {
        let ch = with_depolarizing(&fsim_channel(&p), e).unwrap();
        let rho = ch.apply(&QutritDensityMatrix::basis(a, b));
        prop_assert!((rho.trace() - C64::new(1.0, 0.0)).norm() < 1e-12);
        prop_assert!(rho.is_valid(1e-10));
        prop_assert!(rho.leakage().abs() < 1e-12);
    }

    #[test]
    fn coherent_budget_is_xeb_minus_purity(x in 0.0..0.05f64, p in 0.0..0.05f64) {
        prop_assert!((error_budget(x, p, 0.0, [0.0; 2]).coherent - (x - p)).abs() < 1e-15);
    }

    #[test]
    fn pauli_conversion_is_linear(e in 0.0..0.5f64) {
        prop_assert_eq!(pauli_from_decay(e, 2).unwrap(), 1.25 * e);
        prop_assert!((pauli_from_decay(e, 1).unwrap() - 1.5 * e).abs() < 1e-15);
    }

    #[test]
    fn predistortion_inverts_settling(w in waveform(0.9), m in settling_models()) {
        let back = apply_settling(&predistort(&w, &m).unwrap(), &m);
        prop_assert!(back.max_abs_diff(&w) < 1e-9);
    }

    #[test]
    fn settling_is_linear(w in waveform(1.0), k in -2.0..2.0f64, m in settling_models()) {
        let scaled = Waveform::new(w.samples.iter().map(|x| k * x).collect(), 1.0);
        let lhs = apply_settling(&scaled, &m);
        let rhs = Waveform::new(apply_settling(&w, &m).samples.iter().map(|x| k * x).collect(), 1.0);
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn quantization_error_is_half_an_lsb(w in waveform(1.0), bits in 2u32..16) {
        let q = quantize(&w, bits).unwrap();
        prop_assert!(!q.clipped);
        prop_assert!(q.waveform.max_abs_diff(&w) <= 0.5 * lsb(bits) + 1e-15);
    }

    #[test]
    fn histogram_counts_every_value(v in prop::collection::vec(-1e3..1e3f64, 1..200), bins in 1usize..30) {
        let h = histogram("x", &v, bins);
        prop_assert_eq!(h.counts.iter().sum::<usize>(), v.len());
        prop_assert_eq!(h.edges.len(), bins + 1);
    }
}
