//! Exact one-dimensional Wasserstein distances.
//!
//! Both CDFs of an empirical pair are step functions, so `W₁ = ∫|F − G|` and
//! `W_p^p = ∫₀¹ |F⁻¹ − G⁻¹|^p` reduce to finite sums over merged breakpoints.
//! The quantile function is the right-continuous generalized inverse
//! `F⁻¹(u) = inf{x : F(x) ≥ u}`; cell `(u_k, u_{k+1}]` of the merged cumulative
//! weights maps to one atom on each side.

use alloc::format;
use alloc::vec::Vec;

use libm::{fabs, pow};

use crate::error::{invalid, Error, Result};
use crate::measures::{check_probability, pow_abs};

/// Sorted, tie-merged one-dimensional weighted distribution.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Sorted1D {
    values: Vec<f64>,
    cumweights: Vec<f64>,
}

impl Sorted1D {
    /// Sorts, merges equal values and accumulates weights.
    pub fn from_samples(values: &[f64], weights: &[f64]) -> Result<Self> {
        if values.len() != weights.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} values but {} weights",
                values.len(),
                weights.len()
            )));
        }
        if values.is_empty() {
            return Err(Error::InvalidMeasure("empty sample".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMeasure("non-finite value".into()));
        }
        check_probability(weights)?;
        let mut pairs: Vec<(f64, f64)> = values.iter().copied().zip(weights.iter().copied()).collect();
        Ok(Self::from_pairs(&mut pairs))
    }

    /// Equal-weight distribution on `values` (no validation beyond finiteness).
    pub fn from_uniform(mut values: Vec<f64>) -> Self {
        debug_assert!(!values.is_empty());
        values.sort_unstable_by(f64::total_cmp);
        Self::from_sorted_uniform(values)
    }

    /// Equal-weight distribution on already sorted values.
    pub(crate) fn from_sorted_uniform(mut values: Vec<f64>) -> Self {
        let n = values.len();
        let inv = n as f64;
        let mut cumweights = Vec::with_capacity(n);
        let mut write = 0;
        for read in 0..n {
            let v = values[read];
            if write > 0 && values[write - 1] == v {
                *cumweights.last_mut().unwrap() = (read + 1) as f64 / inv;
            } else {
                values[write] = v;
                cumweights.push((read + 1) as f64 / inv);
                write += 1;
            }
        }
        values.truncate(write);
        Self { values, cumweights }
    }

    /// Builds from (value, weight) pairs whose weights are already validated.
    pub(crate) fn from_pairs(pairs: &mut [(f64, f64)]) -> Self {
        pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        let mut values: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut masses: Vec<f64> = Vec::with_capacity(pairs.len());
        for &(v, w) in pairs.iter() {
            if w == 0.0 {
                continue;
            }
            if values.last() == Some(&v) {
                *masses.last_mut().unwrap() += w;
            } else {
                values.push(v);
                masses.push(w);
            }
        }
        // Compensated running sum, renormalized so the last entry is exactly 1.
        let mut cumweights = Vec::with_capacity(masses.len());
        let (mut sum, mut c) = (0.0_f64, 0.0_f64);
        for m in masses {
            let t = sum + m;
            if fabs(sum) >= fabs(m) {
                c += (sum - t) + m;
            } else {
                c += (m - t) + sum;
            }
            sum = t;
            cumweights.push(sum + c);
        }
        let total = *cumweights.last().unwrap();
        for cw in &mut cumweights {
            *cw /= total;
        }
        *cumweights.last_mut().unwrap() = 1.0;
        Self { values, cumweights }
    }

    /// Point mass at `x`.
    pub fn dirac(x: f64) -> Self {
        Self {
            values: alloc::vec![x],
            cumweights: alloc::vec![1.0],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn cumweights(&self) -> &[f64] {
        &self.cumweights
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `F(x) = P(X ≤ x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        let k = self.values.partition_point(|&v| v <= x);
        if k == 0 {
            0.0
        } else {
            self.cumweights[k - 1]
        }
    }

    /// `F⁻¹(u) = inf{x : F(x) ≥ u}` for `u ∈ (0, 1]`; `u ≤ 0` maps to the minimum.
    pub fn quantile(&self, u: f64) -> f64 {
        let k = self.cumweights.partition_point(|&c| c < u);
        self.values[k.min(self.values.len() - 1)]
    }

    /// Weights of the merged atoms.
    pub fn masses(&self) -> impl Iterator<Item = f64> + '_ {
        let mut prev = 0.0;
        self.cumweights.iter().map(move |&c| {
            let m = c - prev;
            prev = c;
            m
        })
    }
}

/// `W₁ = ∫|F − G| dx` over the merged breakpoint partition.
pub fn w1_1d(a: &Sorted1D, b: &Sorted1D) -> f64 {
    let (av, ac) = (&a.values, &a.cumweights);
    let (bv, bc) = (&b.values, &b.cumweights);
    let (mut i, mut j) = (0, 0);
    let (mut f, mut g) = (0.0, 0.0);
    let mut x_prev = av[0].min(bv[0]);
    let mut total = 0.0;
    while i < av.len() || j < bv.len() {
        let x = match (av.get(i), bv.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        total += fabs(f - g) * (x - x_prev);
        if i < av.len() && av[i] == x {
            f = ac[i];
            i += 1;
        }
        if j < bv.len() && bv[j] == x {
            g = bc[j];
            j += 1;
        }
        x_prev = x;
    }
    total
}

/// `∫₀¹ |F⁻¹ − G⁻¹|^p du` without the final root.
pub fn wp_pow_1d(a: &Sorted1D, b: &Sorted1D, p: f64) -> f64 {
    let (av, ac) = (&a.values, &a.cumweights);
    let (bv, bc) = (&b.values, &b.cumweights);
    let (mut i, mut j) = (0, 0);
    let mut u_prev = 0.0;
    let mut total = 0.0;
    while i < av.len() && j < bv.len() {
        let u = ac[i].min(bc[j]);
        total += (u - u_prev) * pow_abs(av[i] - bv[j], p);
        u_prev = u;
        if ac[i] <= u {
            i += 1;
        }
        if bc[j] <= u {
            j += 1;
        }
    }
    total
}

/// `W_p = (∫₀¹ |F⁻¹ − G⁻¹|^p du)^{1/p}`.
pub fn wp_1d(a: &Sorted1D, b: &Sorted1D, p: f64) -> Result<f64> {
    if !(p >= 1.0) || !p.is_finite() {
        return invalid(format!("order p = {p} must be >= 1"));
    }
    let s = wp_pow_1d(a, b, p);
    Ok(if p == 1.0 { s } else { pow(s, 1.0 / p) })
}

/// `W₁` between two equal-size, equal-weight samples already sorted ascending.
pub(crate) fn w1_sorted_equal(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let s: f64 = a.iter().zip(b).map(|(x, y)| fabs(x - y)).sum();
    s / a.len() as f64
}
