use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use super::{DeviceModel, QutritDensityMatrix};

/// Outcome probabilities `p[3a + b]` for reported levels a, b after the
/// confusion matrices. With `discriminate_2` off, reported |2⟩ folds into |1⟩.
pub fn outcome_probabilities(rho: &QutritDensityMatrix, discriminate_2: bool, model: &DeviceModel) -> [f64; 9] {
    let pops = rho.populations();
    let [c0, c1] = model.readout;
    let mut out = [0.0; 9];
    for a in 0..3 {
        for b in 0..3 {
            let p = pops[3 * a + b].max(0.0);
            if p == 0.0 {
                continue;
            }
            for x in 0..3 {
                for y in 0..3 {
                    let (rx, ry) = if discriminate_2 { (x, y) } else { (x.min(1), y.min(1)) };
                    out[3 * rx + ry] += p * c0.0[a][x] * c1.0[b][y];
                }
            }
        }
    }
    let total: f64 = out.iter().sum();
    if total > 0.0 {
        out.iter_mut().for_each(|p| *p /= total);
    }
    out
}

/// Two-qubit outcome probabilities `p[2a + b]` with |2⟩ reported as |1⟩.
pub fn qubit_probabilities(rho: &QutritDensityMatrix, model: &DeviceModel) -> [f64; 4] {
    let p = outcome_probabilities(rho, false, model);
    [p[0], p[1], p[3], p[4]]
}

/// Draws a multinomial sample as a chain of conditional binomials.
pub fn sample_counts<const N: usize>(probs: &[f64; N], shots: u64, rng: &mut ChaCha8Rng) -> [u64; N] {
    let mut counts = [0u64; N];
    let mut left = shots;
    let mut mass = 1.0;
    for i in 0..N {
        if left == 0 {
            break;
        }
        if i == N - 1 || mass <= 0.0 {
            counts[i] = left;
            break;
        }
        let q = (probs[i] / mass).clamp(0.0, 1.0);
        let k = Binomial::new(left, q).expect("binomial probability in range").sample(rng);
        counts[i] = k;
        left -= k;
        mass -= probs[i];
    }
    counts
}

/// Shot-sampled readout counts indexed like [`outcome_probabilities`].
pub fn sample_measurement(rho: &QutritDensityMatrix, shots: u64, discriminate_2: bool, model: &DeviceModel, seed: u64) -> [u64; 9] {
    let probs = outcome_probabilities(rho, discriminate_2, model);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_counts(&probs, shots, &mut rng)
}

/// Mixes a base seed with a stream index (splitmix64 finalizer).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::ConfusionMatrix;
    use crate::fsim::C64;

    #[test]
    fn ground_state_ideal_readout() {
        let m = DeviceModel::noiseless();
        let c = sample_measurement(&QutritDensityMatrix::ground(), 1000, true, &m, 7);
        assert_eq!(c[0], 1000);
    }

    #[test]
    fn mixed_state_is_uniform() {
        let m = DeviceModel::noiseless();
        let mut rho = QutritDensityMatrix(Default::default());
        for i in [0, 1, 3, 4] {
            rho.0[(i, i)] = C64::new(0.25, 0.0);
        }
        let n = 100_000u64;
        let c = sample_measurement(&rho, n, false, &m, 11);
        let sigma = (n as f64 * 0.25 * 0.75).sqrt();
        for i in [0, 1, 3, 4] {
            assert!((c[i] as f64 - 0.25 * n as f64).abs() < 3.0 * sigma, "{c:?}");
        }
    }

    #[test]
    fn confusion_matrix_is_reproduced() {
        let mut m = DeviceModel::noiseless();
        let cm = ConfusionMatrix([[0.97, 0.03, 0.0], [0.03, 0.97, 0.0], [0.0, 0.0, 1.0]]);
        m.readout = [cm, ConfusionMatrix::ideal()];
        let n = 100_000u64;
        for a in 0..2 {
            let c = sample_measurement(&QutritDensityMatrix::basis(a, 0), n, true, &m, 3 + a as u64);
            for x in 0..2 {
                let p = cm.0[a][x];
                let sigma = (n as f64 * p * (1.0 - p)).sqrt();
                assert!((c[3 * x] as f64 - p * n as f64).abs() <= 3.0 * sigma);
            }
        }
    }

    #[test]
    fn second_level_folds_without_discrimination() {
        let m = DeviceModel::noiseless();
        let p = outcome_probabilities(&QutritDensityMatrix::basis(0, 2), false, &m);
        assert_eq!(p[1], 1.0);
    }

    #[test]
    fn sampling_is_deterministic() {
        let m = DeviceModel::default();
        let rho = QutritDensityMatrix::basis(1, 1);
        assert_eq!(sample_measurement(&rho, 500, true, &m, 99), sample_measurement(&rho, 500, true, &m, 99));
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
    }
}
