//! Sup-norm brackets for 1-Lipschitz functions on `[0, M]` vanishing at 0,
//! sphere covering numbers, and the bracketing entropy integral.

use alloc::format;
use alloc::vec::Vec;

use libm::{ceil, cos, fabs, log, pow, round, sqrt};

use crate::error::{invalid, Error, Result};
use crate::maxsliced::PiecewiseLinear;

/// Largest `M/ε` accepted by [`build_brackets`].
pub const MAX_RATIO: f64 = 20.0;
/// Largest bracket count [`BracketSet::brackets`] will materialize.
pub const MAX_MATERIALIZED: u64 = 1 << 20;

const NODE_TOL: f64 = 1e-12;

/// Lower and upper envelopes given by their values at the set's nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Bracket {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bracket {
    /// Largest node-wise `upper − lower`.
    pub fn gap(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).fold(0.0, f64::max)
    }
}

/// All brackets of the doubling construction at resolution `ε`.
///
/// Nodes are `t_k = min(kε/2, M)`, `k = 0..K` with `K = ⌈2M/ε⌉`. The first cell
/// holds the single bracket `[−x, x]`; on every later cell each bracket splits
/// into a child shifted up (both envelopes with slope +1) and one shifted down
/// (slope −1). Bracket `i` takes the up/down choice of cell `c` from bit
/// `K − 1 − c` of `i` (0 = up).
#[derive(Debug, Clone, PartialEq)]
pub struct BracketSet {
    m: f64,
    epsilon: f64,
    nodes: Vec<f64>,
}

/// Builds the bracket set; the count is `2^{⌈2M/ε⌉−1}`.
pub fn build_brackets(m: f64, epsilon: f64) -> Result<BracketSet> {
    if !(m > 0.0) || !m.is_finite() || !(epsilon > 0.0) || !epsilon.is_finite() {
        return invalid(format!("need M > 0 and epsilon > 0, got M = {m}, epsilon = {epsilon}"));
    }
    if m / epsilon > MAX_RATIO {
        return Err(Error::BudgetExceeded(format!(
            "M/epsilon = {} exceeds {MAX_RATIO}; the bracket count grows like 2^(2M/epsilon)",
            m / epsilon
        )));
    }
    let k = ceil(2.0 * m / epsilon) as usize;
    let nodes = (0..=k).map(|i| (i as f64 * epsilon / 2.0).min(m)).collect();
    Ok(BracketSet { m, epsilon, nodes })
}

impl BracketSet {
    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    fn cells(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn count(&self) -> u64 {
        1u64 << (self.cells() - 1)
    }

    /// Bracket number `i`.
    pub fn bracket(&self, i: u64) -> Result<Bracket> {
        if i >= self.count() {
            return invalid(format!("bracket index {i} out of range (count {})", self.count()));
        }
        let k = self.cells();
        let mut lower = Vec::with_capacity(k + 1);
        let mut upper = Vec::with_capacity(k + 1);
        lower.push(0.0);
        upper.push(0.0);
        let half = self.nodes[1];
        let mut center = 0.0;
        lower.push(-half);
        upper.push(half);
        for c in 1..k {
            let h = self.nodes[c + 1] - self.nodes[c];
            let down = (i >> (k - 1 - c)) & 1 == 1;
            center += if down { -h } else { h };
            lower.push(center - half);
            upper.push(center + half);
        }
        Ok(Bracket { lower, upper })
    }

    /// Every bracket, in index order.
    pub fn brackets(&self) -> Result<Vec<Bracket>> {
        if self.count() > MAX_MATERIALIZED {
            return Err(Error::BudgetExceeded(format!("{} brackets exceed the limit {MAX_MATERIALIZED}", self.count())));
        }
        (0..self.count()).map(|i| self.bracket(i)).collect()
    }

    /// Index of a bracket containing `f` on `[0, M]`.
    ///
    /// Descends the construction greedily by the value of `f` at each node,
    /// then verifies containment at every node and every knot of `f` inside
    /// `[0, M]` (both envelopes and `f` are linear between consecutive points).
    pub fn membership(&self, f: &PiecewiseLinear) -> Result<u64> {
        if f.lipschitz() > 1.0 + NODE_TOL {
            return Err(Error::InvalidWitness(format!("Lipschitz constant {} exceeds 1", f.lipschitz())));
        }
        if fabs(f.eval(0.0)) > NODE_TOL {
            return Err(Error::InvalidWitness(format!("f(0) = {}, expected 0", f.eval(0.0))));
        }
        let k = self.cells();
        let mut index = 0u64;
        let mut center = 0.0;
        for c in 1..k {
            let h = self.nodes[c + 1] - self.nodes[c];
            let down = f.eval(self.nodes[c + 1]) < center;
            center += if down { -h } else { h };
            index = 2 * index + down as u64;
        }
        let b = self.bracket(index)?;
        let mut points: Vec<f64> = self.nodes.clone();
        points.extend(f.xs().iter().copied().filter(|&x| x > 0.0 && x < self.m));
        points.sort_unstable_by(f64::total_cmp);
        for x in points {
            let (lo, hi) = (envelope(&self.nodes, &b.lower, x), envelope(&self.nodes, &b.upper, x));
            let v = f.eval(x);
            if v < lo - NODE_TOL || v > hi + NODE_TOL {
                return Err(Error::Construction(format!(
                    "bracket {index} does not contain f at x = {x}: {lo} <= {v} <= {hi} fails"
                )));
            }
        }
        Ok(index)
    }
}

/// Linear interpolation of node values.
fn envelope(nodes: &[f64], values: &[f64], x: f64) -> f64 {
    let k = nodes.partition_point(|&t| t <= x).clamp(1, nodes.len() - 1) - 1;
    let (t0, t1) = (nodes[k], nodes[k + 1]);
    if t1 == t0 {
        return values[k];
    }
    values[k] + (values[k + 1] - values[k]) * (x - t0) / (t1 - t0)
}

/// `⌈(1 + 4/ε)^d⌉`, an upper bound on the ε-covering number of `S^{d−1}`;
/// saturates at `u64::MAX`.
pub fn sphere_covering_bound(d: usize, epsilon: f64) -> Result<u64> {
    if d == 0 {
        return invalid("dimension must be >= 1");
    }
    if !(epsilon > 0.0) {
        return invalid(format!("epsilon = {epsilon} must be > 0"));
    }
    let v = pow(1.0 + 4.0 / epsilon, d as f64);
    if !(v < u64::MAX as f64) {
        return Ok(u64::MAX);
    }
    // Absorb rounding in exactly integral cases such as ε = 0.1.
    let r = round(v);
    Ok(if fabs(v - r) <= 1e-9 * v { r as u64 } else { ceil(v) as u64 })
}

/// Value of the entropy integral, or divergence.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", content = "value", rename_all = "snake_case"))]
pub enum EntropyBound {
    Finite(f64),
    Infinite,
}

/// `C = √(2 + 8m₂ + 8m_{2+δ})`.
pub fn entropy_constant(m2: f64, m2pd: f64) -> f64 {
    sqrt(2.0 + 8.0 * m2 + 8.0 * m2pd)
}

/// Integrand `√(4 log 2 · (C/ε)^{1+2/δ} + d log(1 + 4C/ε))`.
pub fn entropy_integrand(eps: f64, d: usize, delta: f64, c: f64) -> f64 {
    sqrt(4.0 * core::f64::consts::LN_2 * pow(c / eps, 1.0 + 2.0 / delta) + d as f64 * log(1.0 + 4.0 * c / eps))
}

/// `∫₀¹ √(log N_[](ε)) dε` for the bracketing bound
/// `N_[](ε) ≤ exp(4 log 2 (C/ε)^{1+2/δ}) (1 + 4C/ε)^d`.
///
/// Finite exactly when `δ > 2`. The `ε^{−(1/2+1/δ)}` endpoint singularity is
/// removed by substituting `ε = u^k` with `k = 1/(1/2 − 1/δ)`; the smooth
/// result is integrated by adaptive Gauss–Legendre. `δ = ∞` is accepted.
pub fn entropy_integral_bound(d: usize, delta: f64, m2: f64, m2pd: f64) -> Result<EntropyBound> {
    if !(delta > 0.0) {
        return invalid(format!("delta = {delta} must be > 0"));
    }
    if !(m2 >= 0.0 && m2pd >= 0.0) || !m2.is_finite() || !m2pd.is_finite() {
        return invalid("moments must be finite and >= 0");
    }
    if delta <= 2.0 {
        return Ok(EntropyBound::Infinite);
    }
    let c = entropy_constant(m2, m2pd);
    let a = 0.5 + 1.0 / delta;
    let k = 1.0 / (1.0 - a);
    let g = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        let eps = pow(u, k);
        entropy_integrand(eps, d, delta, c) * k * pow(u, k - 1.0)
    };
    Ok(EntropyBound::Finite(adaptive_gauss_legendre(&g, 0.0, 1.0, 1e-12)))
}

/// 16-point Gauss–Legendre nodes and weights on `[−1, 1]`, by Newton iteration.
fn gauss_legendre_16() -> ([f64; 16], [f64; 16]) {
    const N: usize = 16;
    let mut x = [0.0; N];
    let mut w = [0.0; N];
    for i in 0..N / 2 {
        let mut z = cos(core::f64::consts::PI * (i as f64 + 0.75) / (N as f64 + 0.5));
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=N {
                let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = N as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if fabs(dz) < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[N - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[N - 1 - i] = w[i];
    }
    (x, w)
}

fn gl(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rule: &([f64; 16], [f64; 16])) -> f64 {
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    rule.0.iter().zip(&rule.1).map(|(x, w)| w * f(mid + half * x)).sum::<f64>() * half
}

fn adaptive_gauss_legendre(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    let rule = gauss_legendre_16();
    let whole = gl(f, a, b, &rule);
    let mut stack: Vec<(f64, f64, f64, u32)> = Vec::new();
    stack.push((a, b, whole, 0));
    let mut total = 0.0;
    let scale = fabs(whole).max(f64::MIN_POSITIVE);
    while let Some((lo, hi, est, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let (l, r) = (gl(f, lo, mid, &rule), gl(f, mid, hi, &rule));
        if fabs(l + r - est) <= rel_tol * scale || depth >= 40 {
            total += l + r;
        } else {
            stack.push((lo, mid, l, depth + 1));
            stack.push((mid, hi, r, depth + 1));
        }
    }
    total
}
