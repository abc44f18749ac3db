//! Compensated summation, batch-means error bars and estimate reports.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// A labelled point estimate with its batch-means standard error and the
/// run parameters needed to reproduce it.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport<F> {
    pub observable: String,
    pub estimate: F,
    pub std_error: F,
    pub sweeps: u64,
    pub burn_in: u64,
    pub seed: u64,
}

/// Kahan compensated accumulator; the exact enumerations add up millions
/// of positive Boltzmann weights and plain summation noise would swamp the
/// cutoff-ladder stability checks.
#[derive(Debug, Clone, Copy)]
pub struct KahanSum<F> {
    sum: F,
    carry: F,
}

impl<F: Real> Default for KahanSum<F> {
    fn default() -> Self {
        KahanSum { sum: F::zero(), carry: F::zero() }
    }
}

impl<F: Real> KahanSum<F> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, v: F) {
        let y = v - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> F {
        self.sum
    }
}

/// Point estimate and standard error from non-overlapping batch means.
///
/// The series is split into `batches` equal blocks (a trailing remainder is
/// dropped); the standard error is the sample standard deviation of the
/// block means divided by sqrt(batches).
pub fn batch_means<F: Real>(samples: &[F], batches: usize) -> Result<(F, F)> {
    let b = batches.max(1);
    let len = samples.len() / b;
    if len == 0 {
        return Err(Error::TooFewSweeps { measurements: samples.len() as u64, batches: b as u64 });
    }
    let means: Vec<F> = (0..b)
        .map(|i| {
            let mut acc = KahanSum::new();
            for &s in &samples[i * len..(i + 1) * len] {
                acc.add(s);
            }
            acc.value() / F::from_usize_lossy(len)
        })
        .collect();
    Ok(mean_and_stderr(&means))
}

/// Mean of a list of (batch) means together with its standard error.
pub fn mean_and_stderr<F: Real>(means: &[F]) -> (F, F) {
    let b = means.len();
    let bf = F::from_usize_lossy(b);
    let grand = means.iter().copied().sum::<F>() / bf;
    if b < 2 {
        return (grand, F::zero());
    }
    let var = means
        .iter()
        .map(|&m| {
            let d = m - grand;
            d * d
        })
        .sum::<F>()
        / F::from_usize_lossy(b - 1);
    (grand, (var / bf).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_beats_naive_on_adversarial_series() {
        let mut acc = KahanSum::<f64>::new();
        let mut naive = 0.0f64;
        for _ in 0..1_000_000 {
            acc.add(0.1);
            naive += 0.1;
        }
        assert!((acc.value() - 100_000.0).abs() < 1e-9);
        assert!((acc.value() - 100_000.0).abs() <= (naive - 100_000.0).abs());
    }

    #[test]
    fn batch_means_constant_series() {
        let xs = vec![2.5f64; 320];
        let (m, se) = batch_means(&xs, 32).unwrap();
        assert_eq!(m, 2.5);
        assert_eq!(se, 0.0);
    }

    #[test]
    fn batch_means_alternating_series() {
        // Alternating +1/-1 within every batch: mean 0, zero batch spread.
        let xs: Vec<f64> = (0..640).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let (m, se) = batch_means(&xs, 32).unwrap();
        assert!(m.abs() < 1e-15);
        assert!(se.abs() < 1e-15);
    }

    #[test]
    fn batch_means_rejects_short_series() {
        let xs = vec![1.0f64; 10];
        assert!(batch_means(&xs, 32).is_err());
    }

    #[test]
    fn stderr_scales_like_sqrt() {
        // Two-point batches alternating 0,1 -> batch means all 0.5.
        let xs: Vec<f64> = (0..64).map(|i| (i % 2) as f64).collect();
        let (m, se) = batch_means(&xs, 32).unwrap();
        assert!((m - 0.5).abs() < 1e-15);
        assert_eq!(se, 0.0);
        // Batch means 0 or 1 alternating when batch length is 1.
        let (m2, se2) = batch_means(&xs, 64).unwrap();
        assert!((m2 - 0.5).abs() < 1e-15);
        let expect = (0.25f64 * 64.0 / 63.0 / 64.0).sqrt();
        assert!((se2 - expect).abs() < 1e-12);
    }
}
