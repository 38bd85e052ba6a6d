//! Dense Cholesky factorization for covariance sampling.

use alloc::format;
use alloc::vec::Vec;

use libm::sqrt;

use crate::error::{Error, Result};

/// Lower-triangular factor stored row-major as an `n × n` matrix.
#[derive(Debug, Clone)]
pub(crate) struct Cholesky {
    n: usize,
    l: Vec<f64>,
    pub(crate) jitter: f64,
}

fn dot4(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// Overwrites the lower triangle (with diagonal) of `a` by the factor of `a + τI`.
/// The strict upper triangle is left untouched, which allows a restore on failure.
fn factor_in_place(a: &mut [f64], n: usize, diag: &[f64], jitter: f64) -> bool {
    for i in 0..n {
        for j in 0..=i {
            let (head, row_i) = a.split_at_mut(i * n);
            let s = if j < i {
                dot4(&row_i[..j], &head[j * n..j * n + j])
            } else {
                dot4(&row_i[..j], &row_i[..j])
            };
            if i == j {
                let v = diag[i] + jitter - s;
                if !(v > 0.0) {
                    return false;
                }
                row_i[i] = sqrt(v);
            } else {
                row_i[j] = (row_i[j] - s) / head[j * n + j];
            }
        }
    }
    true
}

fn restore(a: &mut [f64], n: usize, diag: &[f64]) {
    for i in 0..n {
        for j in 0..i {
            a[i * n + j] = a[j * n + i];
        }
        a[i * n + i] = diag[i];
    }
}

impl Cholesky {
    /// Factors the symmetric `a + τI` in place, trying `τ = 0` then
    /// `1e-10 · 10^k · scale` up to `1e-6 · scale`, where `scale` is the largest diagonal entry.
    pub(crate) fn with_jitter(mut a: Vec<f64>, n: usize) -> Result<Self> {
        debug_assert_eq!(a.len(), n * n);
        let diag: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
        let scale = diag.iter().copied().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let mut jitter = 0.0;
        let mut next = 1e-10;
        loop {
            if factor_in_place(&mut a, n, &diag, jitter) {
                return Ok(Self { n, l: a, jitter });
            }
            if next > 1e-6 * 1.000_001 {
                return Err(Error::NumericalDegeneracy(format!(
                    "covariance of size {n} is not positive definite even with jitter {jitter:e}"
                )));
            }
            restore(&mut a, n, &diag);
            jitter = next * scale;
            next *= 10.0;
        }
    }

    pub(crate) fn dim(&self) -> usize {
        self.n
    }

    /// `out = L z`.
    pub(crate) fn mul_into(&self, z: &[f64], out: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            out[i] = dot4(&self.l[i * n..i * n + i + 1], &z[..i + 1]);
        }
    }
}
