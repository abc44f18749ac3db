//! Minimal dense routines for the small reduced Laplacian systems
//! (at desk scale the matrix is at most a few hundred rows, so a plain
//! Cholesky factorization is all that is needed).

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Dense symmetric positive definite matrix in row-major storage.
pub(crate) struct Cholesky<F> {
    n: usize,
    /// Lower-triangular factor, row-major.
    l: Vec<F>,
}

impl<F: Real> Cholesky<F> {
    pub(crate) fn factor(a: &[F], n: usize) -> Result<Self> {
        debug_assert_eq!(a.len(), n * n);
        let mut l = vec![F::zero(); n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = a[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if s <= F::zero() {
                        return Err(Error::NotPositiveDefinite {
                            row: i,
                            pivot: s.to_f64().unwrap_or(f64::NAN),
                        });
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Ok(Cholesky { n, l })
    }

    /// log det A = 2 sum log L_ii (stays finite where det itself overflows).
    pub(crate) fn log_det(&self) -> F {
        let two = F::one() + F::one();
        two * (0..self.n).map(|i| self.l[i * self.n + i].ln()).sum::<F>()
    }

    /// Solve A x = b in place.
    #[allow(dead_code)]
    pub(crate) fn solve(&self, b: &mut [F]) {
        let n = self.n;
        debug_assert_eq!(b.len(), n);
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[i * n + k] * b[k];
            }
            b[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..n {
                s -= self.l[k * n + i] * b[k];
            }
            b[i] = s / self.l[i * n + i];
        }
    }
}
