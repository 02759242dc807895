//! Spectral quantities that govern the passive attack's accuracy.

use nalgebra::DMatrix;
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::theta_out;
use crate::error::{Error, Result};
use crate::federated::{ClientDataset, MessageLog};
use crate::linalg;
use crate::models::{grad_batch_indexed, LossKind, ModelParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralDiagnostics {
    pub n_c: usize,
    /// `lambda_min(Theta_out^T Theta_out / n_c)`; 0 with fewer than `d + 1`
    /// messages.
    pub lambda_min: f64,
    pub condition: f64,
    /// Singular values of `Theta_out`, decreasing, zero-padded.
    pub singular_values: Vec<f64>,
}

pub(crate) fn spectral(t_out: &DMatrix<f64>) -> SpectralDiagnostics {
    let n = t_out.nrows();
    let sv = linalg::singular_values_padded(t_out);
    let smin = sv.last().copied().unwrap_or(0.0);
    SpectralDiagnostics {
        n_c: n,
        lambda_min: if n == 0 { 0.0 } else { smin * smin / n as f64 },
        condition: linalg::condition_number(t_out),
        singular_values: sv,
    }
}

pub fn thm1_diagnostics(log: &MessageLog, rounds: &[usize]) -> Result<SpectralDiagnostics> {
    let entries = log.select(rounds)?;
    if entries.is_empty() {
        return Err(Error::InvalidArgument("diagnostics need at least one message".into()));
    }
    Ok(spectral(&theta_out(&entries)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorScaleInputs {
    pub learning_rate: f64,
    pub sigma: f64,
    pub dim: usize,
    pub local_epochs: usize,
    pub samples: usize,
    pub batch_size: usize,
    pub n_c: usize,
    pub lambda_min: f64,
    pub delta: f64,
}

/// `eta sigma d sqrt(d E ceil(S/B) (d + 1 + ln(2d/delta)) / (n_c lambda))`,
/// the order of the passive attack's error with the hidden constant set to 1.
pub fn error_scale_estimate(p: &ErrorScaleInputs) -> f64 {
    let d = p.dim as f64;
    let k = (p.local_epochs * p.samples.div_ceil(p.batch_size)) as f64;
    let tail = d + 1.0 + (2.0 * d / p.delta).ln();
    p.learning_rate * p.sigma * d * (d * k * tail / (p.n_c as f64 * p.lambda_min)).sqrt()
}

/// Largest per-coordinate standard deviation of mini-batch gradients at
/// `params`, over `draws` batches sampled without replacement.
pub fn gradient_noise_sigma<R: Rng + ?Sized>(
    dataset: &ClientDataset,
    params: &ModelParams,
    batch_size: usize,
    draws: usize,
    rng: &mut R,
) -> Result<f64> {
    if draws < 2 || batch_size == 0 {
        return Err(Error::InvalidArgument("need at least two draws of non-empty batches".into()));
    }
    let b = batch_size.min(dataset.len());
    let mut mean = vec![0.0; params.len()];
    let mut m2 = vec![0.0; params.len()];
    for n in 1..=draws {
        let idx = index::sample(rng, dataset.len(), b).into_vec();
        let g = grad_batch_indexed(params, dataset.features(), dataset.targets(), &idx, LossKind::SquaredError)?;
        for ((m, s), gi) in mean.iter_mut().zip(m2.iter_mut()).zip(&g) {
            let delta = gi - *m;
            *m += delta / n as f64;
            *s += delta * (gi - *m);
        }
    }
    Ok(m2.iter().map(|s| (s / draws as f64).sqrt()).fold(0.0, f64::max))
}

/// Eigenvalues, ascending, of `I - (I - (2 eta / S) A)^K`.
pub fn lemma1_eigenvalues(a: &DMatrix<f64>, learning_rate: f64, samples: usize, steps: usize) -> Result<Vec<f64>> {
    if !a.is_square() {
        return Err(Error::shape("a square matrix", format!("{}x{}", a.nrows(), a.ncols())));
    }
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let m = &eye - a * (2.0 * learning_rate / samples as f64);
    let mut p = eye.clone();
    for _ in 0..steps {
        p = &p * &m;
    }
    let sym = (&eye - &p + (&eye - &p).transpose()) * 0.5;
    Ok(linalg::symmetric_eigenvalues(&sym))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::federated::MessageEntry;
    use crate::linalg::RowMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn orthonormal_rows_scaled_give_unit_lambda() {
        // Theta_out = sqrt(n) I for n = d + 1 = 2: pseudo-gradient column and
        // ones column cannot both be orthonormal rows, so build directly.
        let n = 2.0f64;
        let t = DMatrix::from_row_slice(2, 2, &[n.sqrt(), 0.0, 0.0, n.sqrt()]);
        let s = spectral(&t);
        assert!((s.lambda_min - 1.0).abs() < 1e-12);
        assert!((s.condition - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_pseudo_gradients_have_zero_lambda() {
        let p = ModelParams::linear(vec![1.0, 2.0]).unwrap();
        let mut log = MessageLog::new(0);
        for t in 0..4 {
            log.push(MessageEntry { round: t, sent: p.clone(), received: p.clone(), active: false }).unwrap();
        }
        let d = thm1_diagnostics(&log, &[0, 1, 2, 3]).unwrap();
        assert_eq!(d.lambda_min, 0.0);
        assert!(d.condition.is_infinite());
    }

    #[test]
    fn lemma1_spectrum_in_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = 5;
            let s = 40;
            let x = RowMatrix::new(s, n, (0..s * n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
            let a = x.gram();
            let lmax = *linalg::symmetric_eigenvalues(&a).last().unwrap();
            let eta = rng.random_range(0.05..1.0) * s as f64 / (2.0 * lmax);
            let k = rng.random_range(1..6);
            for e in lemma1_eigenvalues(&a, eta, s, k).unwrap() {
                assert!(e > 0.0 && e <= 1.0 + 1e-12, "eigenvalue {e}");
            }
        }
    }

    #[test]
    fn full_batch_gradients_have_no_noise() {
        let x = RowMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let d = ClientDataset::new(x, vec![1.0, 2.0, 0.0], None).unwrap();
        let p = ModelParams::linear(vec![0.3, 0.1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(gradient_noise_sigma(&d, &p, 3, 10, &mut rng).unwrap() < 1e-15);
        assert!(gradient_noise_sigma(&d, &p, 1, 50, &mut rng).unwrap() > 0.1);
    }

    #[test]
    fn error_scale_formula() {
        let p = ErrorScaleInputs {
            learning_rate: 0.1,
            sigma: 2.0,
            dim: 2,
            local_epochs: 1,
            samples: 10,
            batch_size: 5,
            n_c: 4,
            lambda_min: 0.5,
            delta: 4.0,
        };
        // 0.1 * 2 * 2 * sqrt(2 * 2 * (3 + ln 1) / 2) = 0.4 * sqrt(6)
        assert!((error_scale_estimate(&p) - 0.4 * 6f64.sqrt()).abs() < 1e-12);
    }
}
