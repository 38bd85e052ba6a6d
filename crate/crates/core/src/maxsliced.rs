//! Max-sliced W₁: the largest projected W₁ over the unit sphere.
//!
//! [`msw1`] runs a multi-start ascent with finite-difference tangent
//! gradients. The objective is not concave, so the result is a lower bound
//! on the true maximum (it is always an exact evaluation at the returned
//! direction). [`msw1_grid`] is a brute-force oracle for `d ≤ 3`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use libm::{fabs, sin, sqrt};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::exec::map_indexed;
use crate::measures::EmpiricalMeasure;
use crate::ot1d::{w1_1d, w1_sorted_equal};
use crate::projections::{dot, grid_sphere, project_into, project_unchecked};
use crate::rng::{rng, Stream};

const FD_STEP: f64 = 1e-4;
const MIN_STEP: f64 = 1e-10;

/// Optimizer settings for [`msw1`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MaxSlicedConfig {
    pub restarts: usize,
    pub max_iters: usize,
    /// Stop a restart once one accepted step improves the objective by less than this.
    pub tol: f64,
    pub seed: u64,
}

impl Default for MaxSlicedConfig {
    fn default() -> Self {
        Self {
            restarts: 8,
            max_iters: 100,
            tol: 1e-9,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MaxSlicedResult {
    pub value: f64,
    pub argmax: Vec<f64>,
    pub restarts_used: usize,
    /// Best objective value reached by each restart (or each grid direction's maximum, for the grid).
    pub trace: Vec<f64>,
}

fn check_dims(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<()> {
    if mu.dim() != nu.dim() {
        return invalid(format!("dimension mismatch: {} vs {}", mu.dim(), nu.dim()));
    }
    Ok(())
}

/// `W₁(θ#μ, θ#ν)`.
pub fn projected_w1(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, theta: &[f64]) -> f64 {
    w1_1d(&project_unchecked(mu, theta), &project_unchecked(nu, theta))
}

struct Objective<'a> {
    mu: &'a EmpiricalMeasure,
    nu: &'a EmpiricalMeasure,
    equal_uniform: bool,
    pa: Vec<f64>,
    pb: Vec<f64>,
    evaluations: usize,
}

impl<'a> Objective<'a> {
    fn new(mu: &'a EmpiricalMeasure, nu: &'a EmpiricalMeasure) -> Self {
        Self {
            mu,
            nu,
            equal_uniform: mu.is_uniform() && nu.is_uniform() && mu.len() == nu.len(),
            pa: Vec::with_capacity(mu.len()),
            pb: Vec::with_capacity(nu.len()),
            evaluations: 0,
        }
    }

    fn eval(&mut self, theta: &[f64]) -> f64 {
        self.evaluations += 1;
        if self.equal_uniform {
            project_into(self.mu, theta, &mut self.pa);
            project_into(self.nu, theta, &mut self.pb);
            self.pa.sort_unstable_by(f64::total_cmp);
            self.pb.sort_unstable_by(f64::total_cmp);
            w1_sorted_equal(&self.pa, &self.pb)
        } else {
            projected_w1(self.mu, self.nu, theta)
        }
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = sqrt(dot(v, v));
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
    n
}

/// Orthonormal basis of the tangent space at `theta` by Gram–Schmidt on the
/// coordinate axes, skipping the axis most aligned with `theta`.
fn tangent_basis(theta: &[f64]) -> Vec<Vec<f64>> {
    let d = theta.len();
    let skip = (0..d)
        .max_by(|&i, &j| fabs(theta[i]).total_cmp(&fabs(theta[j])).then(j.cmp(&i)))
        .unwrap_or(0);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(d.saturating_sub(1));
    for axis in (0..d).filter(|&i| i != skip) {
        let mut v = vec![0.0; d];
        v[axis] = 1.0;
        let c = dot(&v, theta);
        for (x, t) in v.iter_mut().zip(theta) {
            *x -= c * t;
        }
        for b in &basis {
            let c = dot(&v, b);
            for (x, y) in v.iter_mut().zip(b) {
                *x -= c * y;
            }
        }
        normalize(&mut v);
        basis.push(v);
    }
    basis
}

/// Flips `v` so its first nonzero coordinate is positive.
fn canonical_sign(v: &mut [f64]) {
    if let Some(&first) = v.iter().find(|x| **x != 0.0) {
        if first < 0.0 {
            for x in v.iter_mut() {
                *x = -*x;
            }
        }
    }
}

fn step(theta: &[f64], dir: &[f64], eta: f64) -> Vec<f64> {
    let mut v: Vec<f64> = theta.iter().zip(dir).map(|(t, g)| t + eta * g).collect();
    normalize(&mut v);
    v
}

fn ascend(obj: &mut Objective<'_>, start: Vec<f64>, config: &MaxSlicedConfig) -> (Vec<f64>, f64) {
    let mut theta = start;
    let mut value = obj.eval(&theta);
    let mut eta = 0.25;
    let d = theta.len();
    for _ in 0..config.max_iters {
        let mut grad = vec![0.0; d];
        for b in tangent_basis(&theta) {
            let up = obj.eval(&step(&theta, &b, FD_STEP));
            let down = obj.eval(&step(&theta, &b, -FD_STEP));
            let g = (up - down) / (2.0 * FD_STEP);
            for (x, y) in grad.iter_mut().zip(&b) {
                *x += g * y;
            }
        }
        if normalize(&mut grad) == 0.0 {
            break;
        }
        let mut accepted = None;
        while eta >= MIN_STEP {
            let cand = step(&theta, &grad, eta);
            let v = obj.eval(&cand);
            if v > value {
                accepted = Some((cand, v));
                break;
            }
            eta *= 0.5;
        }
        let Some((cand, v)) = accepted else { break };
        let improvement = v - value;
        theta = cand;
        value = v;
        eta = (2.0 * eta).min(1.0);
        if improvement < config.tol {
            break;
        }
    }
    (theta, value)
}

fn start_directions(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, config: &MaxSlicedConfig) -> Vec<Vec<f64>> {
    let d = mu.dim();
    let mut starts = Vec::with_capacity(config.restarts);
    let mut gap: Vec<f64> = mu.mean().iter().zip(nu.mean()).map(|(a, b)| a - b).collect();
    let scale = mu.centered_abs_moment() + nu.centered_abs_moment();
    if normalize(&mut gap) > 1e-12 * scale.max(f64::MIN_POSITIVE) {
        canonical_sign(&mut gap);
        starts.push(gap);
    }
    let mut rng = rng(config.seed, Stream::Restarts);
    while starts.len() < config.restarts {
        let mut v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        if normalize(&mut v) > 1e-300 {
            starts.push(v);
        }
    }
    starts
}

/// Multi-start ascent of `θ ↦ W₁(θ#μ, θ#ν)` over `S^{d−1}`.
///
/// Restart 0 starts at the normalized mean gap when it is nonzero; the others
/// start at uniform directions drawn from `config.seed`. Ties between
/// restarts go to the lowest index, so results do not depend on threading.
pub fn msw1(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, config: &MaxSlicedConfig) -> Result<MaxSlicedResult> {
    check_dims(mu, nu)?;
    if config.restarts == 0 {
        return invalid("restarts must be >= 1");
    }
    if !(config.tol >= 0.0) {
        return invalid(format!("tol = {} must be >= 0", config.tol));
    }
    let d = mu.dim();
    if d == 1 {
        let value = projected_w1(mu, nu, &[1.0]);
        return Ok(MaxSlicedResult {
            value,
            argmax: vec![1.0],
            restarts_used: 1,
            trace: vec![value],
        });
    }
    // The objective is translation invariant; centering at the pooled mean keeps
    // projected values small.
    let center: Vec<f64> = mu.mean().iter().zip(nu.mean()).map(|(a, b)| -0.5 * (a + b)).collect();
    let mu_c = mu.translated(&center)?;
    let nu_c = nu.translated(&center)?;
    let starts = start_directions(mu, nu, config);
    let runs = map_indexed(starts.len(), |r| {
        let mut obj = Objective::new(&mu_c, &nu_c);
        ascend(&mut obj, starts[r].clone(), config)
    });
    let mut best = 0;
    for (r, run) in runs.iter().enumerate() {
        if run.1 > runs[best].1 {
            best = r;
        }
    }
    let mut argmax = runs[best].0.clone();
    canonical_sign(&mut argmax);
    let value = projected_w1(mu, nu, &argmax);
    Ok(MaxSlicedResult {
        value,
        argmax,
        restarts_used: runs.len(),
        trace: runs.into_iter().map(|r| r.1).collect(),
    })
}

/// Exact maximum of the projected W₁ over [`grid_sphere`] directions.
pub fn msw1_grid(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, resolution: usize) -> Result<MaxSlicedResult> {
    check_dims(mu, nu)?;
    let grid = grid_sphere(mu.dim(), resolution)?;
    let trace = map_indexed(grid.len(), |i| {
        let mut obj = Objective::new(mu, nu);
        obj.eval(grid.get(i))
    });
    let mut best = 0;
    for (i, &v) in trace.iter().enumerate() {
        if v > trace[best] {
            best = i;
        }
    }
    let argmax = grid.get(best).to_vec();
    let value = projected_w1(mu, nu, &argmax);
    Ok(MaxSlicedResult {
        value,
        argmax,
        restarts_used: 0,
        trace,
    })
}

/// Upper bound on `MSW₁ − msw1_grid` for `d ≤ 2`.
///
/// `θ ↦ W₁(θ#μ, θ#ν)` is Lipschitz with constant `E‖X − c‖ + E‖Y − c‖` for any
/// common center `c`, and every circle point lies within chord `2 sin(π/(2R))`
/// of an `R`-point grid. Returns `None` for `d = 3`, where the Fibonacci grid has
/// no closed-form covering radius.
pub fn grid_gap_bound(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, resolution: usize) -> Result<Option<f64>> {
    check_dims(mu, nu)?;
    match mu.dim() {
        1 => Ok(Some(0.0)),
        2 => {
            if resolution == 0 {
                return invalid("grid resolution must be >= 1");
            }
            let center: Vec<f64> = mu.mean().iter().zip(nu.mean()).map(|(a, b)| 0.5 * (a + b)).collect();
            let spread = |m: &EmpiricalMeasure| -> f64 {
                m.rows()
                    .zip(m.weights())
                    .map(|(row, w)| {
                        let s: f64 = row.iter().zip(&center).map(|(x, c)| (x - c) * (x - c)).sum();
                        w * sqrt(s)
                    })
                    .sum()
            };
            let chord = 2.0 * sin(core::f64::consts::PI / (2.0 * resolution as f64));
            Ok(Some(chord * (spread(mu) + spread(nu))))
        }
        3 => Ok(None),
        d => Err(Error::UnsupportedDimension(d)),
    }
}

/// Piecewise-linear function through strictly increasing knots, extended
/// linearly beyond the end knots (constant if there is a single knot).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PiecewiseLinear {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.is_empty() || xs.len() != ys.len() {
            return invalid(format!("need matching nonempty knots, got {} x and {} y", xs.len(), ys.len()));
        }
        if xs.iter().chain(&ys).any(|v| !v.is_finite()) {
            return invalid("knots must be finite");
        }
        if xs.windows(2).any(|w| !(w[0] < w[1])) {
            return invalid("knot abscissae must be strictly increasing");
        }
        Ok(Self { xs, ys })
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn slopes(&self) -> impl Iterator<Item = f64> + '_ {
        self.xs
            .windows(2)
            .zip(self.ys.windows(2))
            .map(|(x, y)| (y[1] - y[0]) / (x[1] - x[0]))
    }

    pub fn lipschitz(&self) -> f64 {
        self.slopes().map(fabs).fold(0.0, f64::max)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if n == 1 {
            return self.ys[0];
        }
        // Segment index, clamped so the end segments extrapolate.
        let k = self.xs.partition_point(|&v| v <= x).clamp(1, n - 1) - 1;
        let (x0, x1, y0, y1) = (self.xs[k], self.xs[k + 1], self.ys[k], self.ys[k + 1]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }
}

/// `∫ g(θᵀx) dμ − ∫ g(θᵀy) dν` for a 1-Lipschitz `g` with `g(0) = 0`.
///
/// Every such value is a lower bound on MSW₁(μ, ν).
pub fn dual_witness_check(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, theta: &[f64], g: &PiecewiseLinear) -> Result<f64> {
    check_dims(mu, nu)?;
    if theta.len() != mu.dim() {
        return invalid(format!("direction of dimension {} for dimension {}", theta.len(), mu.dim()));
    }
    let norm = sqrt(dot(theta, theta));
    if fabs(norm - 1.0) > 1e-9 {
        return invalid(format!("direction has norm {norm}, expected 1"));
    }
    let lip = g.lipschitz();
    if lip > 1.0 + 1e-12 {
        return Err(Error::InvalidWitness(format!("Lipschitz constant {lip} exceeds 1")));
    }
    let g0 = g.eval(0.0);
    if fabs(g0) > 1e-12 {
        return Err(Error::InvalidWitness(format!("g(0) = {g0}, expected 0")));
    }
    let side = |m: &EmpiricalMeasure| -> f64 { m.rows().zip(m.weights()).map(|(row, w)| w * g.eval(dot(row, theta))).sum() };
    Ok(side(mu) - side(nu))
}
