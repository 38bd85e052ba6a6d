//! Gaussian limit laws of √n-scaled sliced statistics.
//!
//! The limit processes live on the cylinder `S^{d−1} × ℝ`. They are simulated
//! on a finite grid of directions and abscissae: the covariance kernel is
//! counted exactly from a reference sample, factored once, and each draw is
//! pushed through a quadrature of the relevant functional. The matching
//! finite-`n` statistics are simulated by resampling from the same reference,
//! which plays the role of the true measure.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use libm::{fabs, sqrt};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::exec::map_indexed;
use crate::linalg::Cholesky;
use crate::maxsliced::{msw1, MaxSlicedConfig};
use crate::measures::{generate, DistributionSpec, EmpiricalMeasure};
use crate::projections::{dot, grid_sphere, sample_sphere, DirectionKind, DirectionSet};
use crate::rng::{replicate_seed, rng, Stream};
use crate::sliced::per_direction_wp_pow;

/// Cells whose variance falls below this are treated as deterministic.
const INACTIVE_VARIANCE: f64 = 1e-12;
/// `|F − G|` at or below this counts as `F = G` in the signed functionals.
pub const TIE_BAND: f64 = 1e-9;

/// Knobs for [`CylinderGrid::build`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridConfig {
    /// Passed to [`grid_sphere`].
    pub sphere_resolution: usize,
    /// Quantile levels `k/(m+1)`, `k = 1..m`, of the pooled projected reference.
    pub quantile_nodes: usize,
    /// Equally spaced nodes over the (expanded) projected range.
    pub range_nodes: usize,
    /// Fraction of the range added on each side of the range nodes.
    pub range_expansion: f64,
}

impl GridConfig {
    /// 64 angles in `d = 2` and 256 Fibonacci points in `d = 3`, where fewer
    /// abscissae keep the kernel at a manageable size.
    pub fn for_dim(d: usize) -> Self {
        let (sphere_resolution, quantile_nodes, range_nodes) = match d {
            0 | 1 => (2, 60, 30),
            2 => (64, 60, 30),
            _ => (256, 16, 8),
        };
        Self {
            sphere_resolution,
            quantile_nodes,
            range_nodes,
            range_expansion: 0.0,
        }
    }
}

/// Directions with sphere weights and per-direction abscissae with trapezoid weights.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CylinderGrid {
    dirs: DirectionSet,
    sphere_weights: Vec<f64>,
    t_nodes: Vec<Vec<f64>>,
    quad_weights: Vec<Vec<f64>>,
    offsets: Vec<usize>,
}

/// Indices of one representative per antipodal pair, if every direction's
/// negation is also in the set.
///
/// Projected W₁ and the L¹ norm of the limit process take equal values at `θ`
/// and `−θ`, so such pairs collapse into one direction of double weight.
pub(crate) fn antipodal_representatives(dirs: &DirectionSet) -> Option<Vec<usize>> {
    let k = dirs.len();
    let mut keep = Vec::with_capacity(k / 2);
    for i in 0..k {
        let a = dirs.get(i);
        let paired = (0..k).any(|j| j != i && dirs.get(j).iter().zip(a).all(|(x, y)| fabs(x + y) <= 1e-12));
        if !paired {
            return None;
        }
        if a.iter().find(|x| fabs(**x) > 1e-12).is_some_and(|x| *x > 0.0) {
            keep.push(i);
        }
    }
    (2 * keep.len() == k).then_some(keep)
}

/// Representative directions and their probability weights.
pub(crate) fn weighted_directions(dirs: &DirectionSet) -> Result<(DirectionSet, Vec<f64>)> {
    let k = dirs.len() as f64;
    match antipodal_representatives(dirs) {
        Some(keep) => Ok((dirs.subset(&keep), vec![2.0 / k; keep.len()])),
        None => Ok((dirs.clone(), vec![1.0 / k; dirs.len()])),
    }
}

fn weighted_quantiles(pairs: &mut [(f64, f64)], levels: impl Iterator<Item = f64>) -> Vec<f64> {
    pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    let mut cum = Vec::with_capacity(pairs.len());
    let mut s = 0.0;
    for p in pairs.iter() {
        s += p.1 / total;
        cum.push(s);
    }
    levels
        .map(|q| {
            let i = cum.partition_point(|&c| c < q).min(pairs.len() - 1);
            pairs[i].0
        })
        .collect()
}

fn trapezoid(nodes: &[f64]) -> Vec<f64> {
    let m = nodes.len();
    (0..m)
        .map(|k| {
            let left = if k > 0 { nodes[k] - nodes[k - 1] } else { 0.0 };
            let right = if k + 1 < m { nodes[k + 1] - nodes[k] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect()
}

impl CylinderGrid {
    /// Builds abscissae from the pooled projections of `refs` (equal mixture).
    pub fn build(refs: &[&EmpiricalMeasure], config: &GridConfig) -> Result<Self> {
        let Some(first) = refs.first() else {
            return invalid("at least one reference measure is required");
        };
        let d = first.dim();
        if refs.iter().any(|m| m.dim() != d) {
            return invalid("reference measures differ in dimension");
        }
        if config.quantile_nodes + config.range_nodes == 0 {
            return invalid("grid needs at least one abscissa");
        }
        if !(config.range_expansion >= 0.0) {
            return invalid(format!("range_expansion = {} must be >= 0", config.range_expansion));
        }
        let (dirs, sphere_weights) = weighted_directions(&grid_sphere(d, config.sphere_resolution)?)?;
        let share = 1.0 / refs.len() as f64;
        let t_nodes = map_indexed(dirs.len(), |j| {
            let theta = dirs.get(j);
            let mut pairs: Vec<(f64, f64)> = refs
                .iter()
                .flat_map(|m| m.rows().zip(m.weights()).map(move |(row, &w)| (dot(row, theta), w * share)))
                .collect();
            let m = config.quantile_nodes;
            let mut nodes = weighted_quantiles(&mut pairs, (1..=m).map(|k| k as f64 / (m + 1) as f64));
            let (lo, hi) = (pairs[0].0, pairs[pairs.len() - 1].0);
            let pad = config.range_expansion * (hi - lo);
            let (lo, hi) = (lo - pad, hi + pad);
            let r = config.range_nodes;
            if r == 1 {
                nodes.push(0.5 * (lo + hi));
            } else {
                nodes.extend((0..r).map(|k| lo + (hi - lo) * k as f64 / (r - 1) as f64));
            }
            nodes.sort_unstable_by(f64::total_cmp);
            nodes.dedup();
            if nodes.len() < 2 {
                // Degenerate projection: any bracketing pair works, the process is zero here.
                let c = nodes[0];
                nodes = vec![c - 0.5, c, c + 0.5];
            }
            nodes
        });
        Self::from_parts(dirs, sphere_weights, t_nodes)
    }

    /// Grid from explicit parts; abscissae must be strictly increasing with at least two per direction.
    pub fn from_parts(dirs: DirectionSet, sphere_weights: Vec<f64>, t_nodes: Vec<Vec<f64>>) -> Result<Self> {
        if dirs.is_empty() || sphere_weights.len() != dirs.len() || t_nodes.len() != dirs.len() {
            return invalid("grid parts must be nonempty and of matching lengths");
        }
        if sphere_weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return invalid("sphere weights must be positive");
        }
        for nodes in &t_nodes {
            if nodes.len() < 2 || nodes.iter().any(|t| !t.is_finite()) || nodes.windows(2).any(|w| !(w[0] < w[1])) {
                return invalid("abscissae must be finite, strictly increasing, at least two per direction");
            }
        }
        let quad_weights: Vec<Vec<f64>> = t_nodes
            .iter()
            .zip(&sphere_weights)
            .map(|(nodes, &s)| trapezoid(nodes).into_iter().map(|q| q * s).collect())
            .collect();
        let mut offsets = Vec::with_capacity(t_nodes.len() + 1);
        offsets.push(0);
        for nodes in &t_nodes {
            offsets.push(offsets.last().unwrap() + nodes.len());
        }
        Ok(Self {
            dirs,
            sphere_weights,
            t_nodes,
            quad_weights,
            offsets,
        })
    }

    pub fn dirs(&self) -> &DirectionSet {
        &self.dirs
    }

    pub fn sphere_weights(&self) -> &[f64] {
        &self.sphere_weights
    }

    pub fn t_nodes(&self, j: usize) -> &[f64] {
        &self.t_nodes[j]
    }

    pub fn quad_weights(&self, j: usize) -> &[f64] {
        &self.quad_weights[j]
    }

    /// Total number of `(θ, t)` cells.
    pub fn len(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn flat_quad_weights(&self) -> Vec<f64> {
        self.quad_weights.iter().flatten().copied().collect()
    }
}

/// Dense symmetric covariance over grid cells, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl KernelMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }
}

/// Signed indicator process `Σ_u s_u 1{θᵀX_u ≤ t}` over atoms shared by all terms.
struct IndicatorProcess<'a> {
    terms: Vec<(&'a EmpiricalMeasure, f64)>,
}

impl<'a> IndicatorProcess<'a> {
    fn new(terms: Vec<(&'a EmpiricalMeasure, f64)>) -> Result<Self> {
        let (m0, _) = terms[0];
        for (m, _) in &terms[1..] {
            if m.dim() != m0.dim() || m.len() != m0.len() || m.weights() != m0.weights() {
                return invalid("paired references must have equal size, dimension and weights");
            }
        }
        Ok(Self { terms })
    }

    /// Per term and direction, the number of abscissae strictly below each atom's projection.
    fn bins(&self, grid: &CylinderGrid) -> Vec<Vec<Vec<u32>>> {
        self.terms
            .iter()
            .map(|(m, _)| {
                map_indexed(grid.dirs.len(), |j| {
                    let theta = grid.dirs.get(j);
                    let nodes = &grid.t_nodes[j];
                    m.rows().map(|row| nodes.partition_point(|&t| t < dot(row, theta)) as u32).collect()
                })
            })
            .collect()
    }

    /// Mean `E Z(θ_j, t_k)` and the full covariance kernel.
    fn moments(&self, grid: &CylinderGrid) -> (Vec<f64>, KernelMatrix) {
        let bins = self.bins(grid);
        let weights = self.terms[0].0.weights();
        let ndirs = grid.dirs.len();
        let mut mean = vec![0.0; grid.len()];
        for j in 0..ndirs {
            let mj = grid.t_nodes[j].len();
            let mut hist = vec![0.0; mj + 1];
            for (u, (_, s)) in self.terms.iter().enumerate() {
                for (b, w) in bins[u][j].iter().zip(weights) {
                    hist[*b as usize] += s * w;
                }
            }
            let mut acc = 0.0;
            for k in 0..mj {
                acc += hist[k];
                mean[grid.offsets[j] + k] = acc;
            }
        }
        let pairs: Vec<(usize, usize)> = (0..ndirs).flat_map(|j| (j..ndirs).map(move |l| (j, l))).collect();
        let blocks = map_indexed(pairs.len(), |p| {
            let (j, l) = pairs[p];
            let (mj, ml) = (grid.t_nodes[j].len(), grid.t_nodes[l].len());
            let stride = ml + 1;
            let mut hist = vec![0.0; (mj + 1) * stride];
            for (u, (_, su)) in self.terms.iter().enumerate() {
                for (v, (_, sv)) in self.terms.iter().enumerate() {
                    let s = su * sv;
                    for ((a, b), w) in bins[u][j].iter().zip(&bins[v][l]).zip(weights) {
                        hist[*a as usize * stride + *b as usize] += s * w;
                    }
                }
            }
            // 2D prefix sums: entry (k, k') becomes E[Z(j, t_k) Z(l, t_k')].
            for a in 0..=mj {
                for b in 1..=ml {
                    hist[a * stride + b] += hist[a * stride + b - 1];
                }
            }
            for a in 1..=mj {
                for b in 0..=ml {
                    hist[a * stride + b] += hist[(a - 1) * stride + b];
                }
            }
            let mut block = vec![0.0; mj * ml];
            for k in 0..mj {
                for kk in 0..ml {
                    let cross = hist[k * stride + kk];
                    block[k * ml + kk] = cross - mean[grid.offsets[j] + k] * mean[grid.offsets[l] + kk];
                }
            }
            block
        });
        let n = grid.len();
        let mut data = vec![0.0; n * n];
        for (&(j, l), block) in pairs.iter().zip(&blocks) {
            let ml = grid.t_nodes[l].len();
            for k in 0..grid.t_nodes[j].len() {
                for kk in 0..ml {
                    let (r, c) = (grid.offsets[j] + k, grid.offsets[l] + kk);
                    let v = block[k * ml + kk];
                    data[r * n + c] = v;
                    data[c * n + r] = v;
                }
            }
        }
        (mean, KernelMatrix { dim: n, data })
    }
}

fn check_grid_dim(grid: &CylinderGrid, m: &EmpiricalMeasure) -> Result<()> {
    if grid.dirs.dim() != m.dim() {
        return invalid(format!("grid of dimension {} for a measure of dimension {}", grid.dirs.dim(), m.dim()));
    }
    Ok(())
}

/// Covariance of `G_μ`: `μ(θ₁ᵀx ≤ t₁, θ₂ᵀx ≤ t₂) − μ(θ₁ᵀx ≤ t₁) μ(θ₂ᵀx ≤ t₂)`, counted exactly.
pub fn covariance_kernel(reference: &EmpiricalMeasure, grid: &CylinderGrid) -> Result<KernelMatrix> {
    check_grid_dim(grid, reference)?;
    Ok(IndicatorProcess::new(vec![(reference, 1.0)])?.moments(grid).1)
}

/// CDF of `θ_j#m` at every grid cell.
pub fn grid_cdf(m: &EmpiricalMeasure, grid: &CylinderGrid) -> Result<Vec<f64>> {
    check_grid_dim(grid, m)?;
    Ok(IndicatorProcess::new(vec![(m, 1.0)])?.moments(grid).0)
}

/// Which functional a [`LimitSample`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum LimitKind {
    /// `‖G‖_{L¹}` or `√n·SW₁(μ_n, μ)`.
    OneSampleL1,
    /// Signed split by `F − G`, or `√n·(SW₁(μ_n, ν) − SW₁(μ, ν))`.
    OneSampleVsNu,
    /// Signed split of the paired-difference process.
    TwoSamplePaired,
    /// `√n·MSW₁(μ_n, μ)`.
    OneSampleSup,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LimitSample {
    /// Sorted ascending.
    pub draws: Vec<f64>,
    pub kind: LimitKind,
    /// Diagonal jitter added before factoring the kernel (0 for finite-sample statistics).
    pub jitter: f64,
}

impl LimitSample {
    fn new(mut draws: Vec<f64>, kind: LimitKind, jitter: f64) -> Self {
        draws.sort_unstable_by(f64::total_cmp);
        Self { draws, kind, jitter }
    }

    pub fn mean(&self) -> f64 {
        self.draws.iter().sum::<f64>() / self.draws.len() as f64
    }

    pub fn std_error(&self) -> f64 {
        let k = self.draws.len() as f64;
        if self.draws.len() < 2 {
            return 0.0;
        }
        let m = self.mean();
        sqrt(self.draws.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (k - 1.0) / k)
    }
}

/// Centered Gaussian vector with a given covariance, zero on deterministic cells.
struct GaussianField {
    n: usize,
    active: Vec<usize>,
    chol: Option<Cholesky>,
}

impl GaussianField {
    fn new(kernel: KernelMatrix) -> Result<Self> {
        let n = kernel.dim;
        let active: Vec<usize> = (0..n).filter(|&i| kernel.get(i, i) > INACTIVE_VARIANCE).collect();
        if active.is_empty() {
            return Ok(Self { n, active, chol: None });
        }
        let m = active.len();
        let mut sub = vec![0.0; m * m];
        for (a, &i) in active.iter().enumerate() {
            for (b, &j) in active.iter().enumerate() {
                sub[a * m + b] = kernel.data[i * n + j];
            }
        }
        drop(kernel);
        let chol = Cholesky::with_jitter(sub, m)?;
        Ok(Self { n, active, chol: Some(chol) })
    }

    fn jitter(&self) -> f64 {
        self.chol.as_ref().map_or(0.0, |c| c.jitter)
    }

    fn draw(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        let Some(chol) = &self.chol else { return };
        let xi: Vec<f64> = (0..chol.dim()).map(|_| rng.sample(StandardNormal)).collect();
        let mut z = vec![0.0; chol.dim()];
        chol.mul_into(&xi, &mut z);
        for (&i, v) in self.active.iter().zip(z) {
            out[i] = v;
        }
    }
}

/// Signs from `F − G` per cell: `0` inside the tie band, else `±1`.
fn split_signs(f: &[f64], g: &[f64]) -> Vec<f64> {
    f.iter()
        .zip(g)
        .map(|(a, b)| {
            let diff = a - b;
            if fabs(diff) <= TIE_BAND {
                0.0
            } else if diff > 0.0 {
                1.0
            } else {
                -1.0
            }
        })
        .collect()
}

fn simulate(field: &GaussianField, quad: &[f64], signs: Option<&[f64]>, reps: usize, seed: u64) -> Vec<f64> {
    map_indexed(reps, |r| {
        let mut rng = rng(replicate_seed(seed, r), Stream::Limit);
        let mut z = vec![0.0; field.n];
        field.draw(&mut rng, &mut z);
        match signs {
            None => z.iter().zip(quad).map(|(v, q)| q * fabs(*v)).sum(),
            Some(s) => z
                .iter()
                .zip(quad)
                .zip(s)
                .map(|((v, q), s)| if *s == 0.0 { q * fabs(*v) } else { q * s * v })
                .sum(),
        }
    })
}

fn check_reps(reps: usize) -> Result<()> {
    if reps == 0 {
        return invalid("reps must be >= 1");
    }
    Ok(())
}

/// Draws of `‖G_μ‖_{L¹(S^{d−1}×ℝ)}`, the limit of `√n·SW₁(μ_n, μ)`.
pub fn simulate_limit_one_sample(reference: &EmpiricalMeasure, grid: &CylinderGrid, reps: usize, seed: u64) -> Result<LimitSample> {
    check_reps(reps)?;
    let kernel = covariance_kernel(reference, grid)?;
    let field = GaussianField::new(kernel)?;
    let draws = simulate(&field, &grid.flat_quad_weights(), None, reps, seed);
    Ok(LimitSample::new(draws, LimitKind::OneSampleL1, field.jitter()))
}

/// Draws of `∫_{F>G} G_μ − ∫_{F<G} G_μ + ∫_{F=G} |G_μ|`, the limit of
/// `√n·(SW₁(μ_n, ν) − SW₁(μ, ν))`.
pub fn simulate_limit_vs_nu(
    ref_mu: &EmpiricalMeasure,
    ref_nu: &EmpiricalMeasure,
    grid: &CylinderGrid,
    reps: usize,
    seed: u64,
) -> Result<LimitSample> {
    check_reps(reps)?;
    check_grid_dim(grid, ref_mu)?;
    check_grid_dim(grid, ref_nu)?;
    let (f, kernel) = IndicatorProcess::new(vec![(ref_mu, 1.0)])?.moments(grid);
    let g = grid_cdf(ref_nu, grid)?;
    let signs = split_signs(&f, &g);
    let field = GaussianField::new(kernel)?;
    let draws = simulate(&field, &grid.flat_quad_weights(), Some(&signs), reps, seed);
    Ok(LimitSample::new(draws, LimitKind::OneSampleVsNu, field.jitter()))
}

/// Same functional as [`simulate_limit_vs_nu`] for the process with covariance
/// of `1{θᵀX ≤ t} − 1{θᵀY ≤ t}`, where `(xᵢ, yᵢ)` are the paired rows of the
/// two references. This is the limit of `√n·(SW₁(μ_n, ν_n) − SW₁(μ, ν))` for paired samples.
pub fn simulate_limit_paired(
    ref_x: &EmpiricalMeasure,
    ref_y: &EmpiricalMeasure,
    grid: &CylinderGrid,
    reps: usize,
    seed: u64,
) -> Result<LimitSample> {
    check_reps(reps)?;
    check_grid_dim(grid, ref_x)?;
    let process = IndicatorProcess::new(vec![(ref_x, 1.0), (ref_y, -1.0)])?;
    let (_, kernel) = process.moments(grid);
    let f = grid_cdf(ref_x, grid)?;
    let g = grid_cdf(ref_y, grid)?;
    let signs = split_signs(&f, &g);
    let field = GaussianField::new(kernel)?;
    let draws = simulate(&field, &grid.flat_quad_weights(), Some(&signs), reps, seed);
    Ok(LimitSample::new(draws, LimitKind::TwoSamplePaired, field.jitter()))
}

/// Finite-sample statistic to simulate against a reference measure.
#[derive(Debug, Clone, Copy)]
pub enum RootnStatistic<'a> {
    /// `√n·SW₁(μ_n, μ)`.
    Sw1OneSample,
    /// `√n·(SW₁(μ_n, ν) − SW₁(μ, ν))`.
    Sw1VsNu(&'a EmpiricalMeasure),
    /// `√n·MSW₁(μ_n, μ)`; each replicate reseeds the optimizer with its own seed.
    Msw1OneSample(MaxSlicedConfig),
}

/// Directions used by the sliced statistics.
#[derive(Debug, Clone)]
pub enum DirectionSource {
    /// The same set for every replicate (enables cached reference projections).
    Fixed(DirectionSet),
    /// A fresh uniform set of this size per replicate.
    FreshUniform(usize),
}

/// Draws indices i.i.d. from a measure's weights.
pub(crate) struct Resampler {
    n: usize,
    cumulative: Option<Vec<f64>>,
}

impl Resampler {
    pub(crate) fn new(m: &EmpiricalMeasure) -> Self {
        let cumulative = (!m.is_uniform()).then(|| {
            let mut s = 0.0;
            m.weights()
                .iter()
                .map(|w| {
                    s += w;
                    s
                })
                .collect()
        });
        Self { n: m.len(), cumulative }
    }

    pub(crate) fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        match &self.cumulative {
            None => rng.random_range(0..self.n),
            Some(c) => {
                let u: f64 = rng.random::<f64>() * c[self.n - 1];
                c.partition_point(|&x| x <= u).min(self.n - 1)
            }
        }
    }
}

/// Reference atoms sorted along each fixed direction.
///
/// Atom indices below `n_mu` belong to μ; the rest to ν (if any).
struct SortedReference {
    order: Vec<Vec<u32>>,
    gaps: Vec<Vec<f64>>,
    sphere_weights: Vec<f64>,
    /// `SW₁(μ, ν)` under the same directions (0 in the one-sample case).
    baseline: f64,
}

impl SortedReference {
    fn new(mu: &EmpiricalMeasure, nu: Option<&EmpiricalMeasure>, dirs: &DirectionSet) -> Result<Self> {
        let total = mu.len() + nu.map_or(0, |m| m.len());
        if total > u32::MAX as usize {
            return invalid("reference too large");
        }
        let (dirs, sphere_weights) = weighted_directions(dirs)?;
        let sorted = map_indexed(dirs.len(), |j| {
            let theta = dirs.get(j);
            let mut vals: Vec<(f64, u32)> = mu.rows().enumerate().map(|(i, r)| (dot(r, theta), i as u32)).collect();
            if let Some(nu) = nu {
                let off = mu.len();
                vals.extend(nu.rows().enumerate().map(|(i, r)| (dot(r, theta), (off + i) as u32)));
            }
            vals.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            let gaps: Vec<f64> = vals.windows(2).map(|w| w[1].0 - w[0].0).collect();
            (vals.into_iter().map(|v| v.1).collect::<Vec<u32>>(), gaps)
        });
        let (order, gaps): (Vec<_>, Vec<_>) = sorted.into_iter().unzip();
        let mut reference = Self {
            order,
            gaps,
            sphere_weights,
            baseline: 0.0,
        };
        if let Some(nu) = nu {
            reference.baseline = reference.sw1(mu, Some(nu), |i| mu.weights()[i]);
        }
        Ok(reference)
    }

    /// `Σ_j σ_j ∫|F_j − G_j|` where `F` puts `mass(i)` on μ-atom `i` and `G` is ν
    /// (or μ's own weights in the one-sample case).
    fn sw1(&self, mu: &EmpiricalMeasure, nu: Option<&EmpiricalMeasure>, mass: impl Fn(usize) -> f64) -> f64 {
        let n_mu = mu.len();
        let mut total = 0.0;
        for ((order, gaps), sw) in self.order.iter().zip(&self.gaps).zip(&self.sphere_weights) {
            let (mut f, mut g) = (0.0, 0.0);
            let mut acc = 0.0;
            for (k, &idx) in order.iter().enumerate() {
                let idx = idx as usize;
                if idx < n_mu {
                    f += mass(idx);
                    if nu.is_none() {
                        g += mu.weights()[idx];
                    }
                } else if let Some(nu) = nu {
                    g += nu.weights()[idx - n_mu];
                }
                if k < gaps.len() {
                    acc += fabs(f - g) * gaps[k];
                }
            }
            total += sw * acc;
        }
        total
    }
}

/// Generates a reference of `reference_size` points from `spec` and simulates
/// the statistic against it (see [`empirical_rootn_from_reference`]).
#[allow(clippy::too_many_arguments)]
pub fn empirical_rootn_distribution(
    spec: &DistributionSpec,
    reference_size: usize,
    statistic: RootnStatistic<'_>,
    n: usize,
    reps: usize,
    directions: &DirectionSource,
    seed: u64,
) -> Result<LimitSample> {
    let reference = generate(spec, reference_size, seed)?;
    empirical_rootn_from_reference(&reference, statistic, n, reps, directions, seed)
}

/// `reps` replicates of a √n-scaled statistic, with `μ_n` drawn i.i.d. from the reference.
pub fn empirical_rootn_from_reference(
    reference: &EmpiricalMeasure,
    statistic: RootnStatistic<'_>,
    n: usize,
    reps: usize,
    directions: &DirectionSource,
    seed: u64,
) -> Result<LimitSample> {
    check_reps(reps)?;
    if n == 0 {
        return invalid("sample size must be >= 1");
    }
    let d = reference.dim();
    if let RootnStatistic::Sw1VsNu(nu) = statistic {
        if nu.dim() != d {
            return invalid(format!("dimension mismatch: {} vs {}", d, nu.dim()));
        }
    }
    if let DirectionSource::Fixed(dirs) = directions {
        if dirs.dim() != d {
            return invalid(format!("directions of dimension {} for dimension {d}", dirs.dim()));
        }
        if let DirectionKind::Gaussian { .. } = dirs.kind() {
            return invalid("sliced statistics need unit directions");
        }
    }
    if let DirectionSource::FreshUniform(0) = directions {
        return invalid("direction count must be >= 1");
    }
    let resampler = Resampler::new(reference);
    let root_n = sqrt(n as f64);
    let draw_indices = |r: usize| -> Vec<usize> {
        let mut rng = rng(replicate_seed(seed, r), Stream::Resample);
        (0..n).map(|_| resampler.sample(&mut rng)).collect()
    };
    let (draws, kind): (Vec<Result<f64>>, LimitKind) = match (statistic, directions) {
        (RootnStatistic::Msw1OneSample(config), _) => {
            let draws = map_indexed(reps, |r| {
                let sample = reference.select_uniform(&draw_indices(r));
                let cfg = MaxSlicedConfig { seed: replicate_seed(config.seed, r), ..config };
                Ok(root_n * msw1(&sample, reference, &cfg)?.value)
            });
            (draws, LimitKind::OneSampleSup)
        }
        (stat, DirectionSource::Fixed(dirs)) => {
            let nu = match stat {
                RootnStatistic::Sw1VsNu(nu) => Some(nu),
                _ => None,
            };
            let sorted = SortedReference::new(reference, nu, dirs)?;
            let inv_n = 1.0 / n as f64;
            let draws = map_indexed(reps, |r| {
                let mut counts = vec![0u32; reference.len()];
                for i in draw_indices(r) {
                    counts[i] += 1;
                }
                let value = sorted.sw1(reference, nu, |i| counts[i] as f64 * inv_n);
                Ok(root_n * (value - sorted.baseline))
            });
            (draws, if nu.is_some() { LimitKind::OneSampleVsNu } else { LimitKind::OneSampleL1 })
        }
        (stat, DirectionSource::FreshUniform(k)) => {
            let nu = match stat {
                RootnStatistic::Sw1VsNu(nu) => Some(nu),
                _ => None,
            };
            let draws = map_indexed(reps, |r| {
                let dirs = sample_sphere(d, *k, replicate_seed(seed, r))?;
                let sample = reference.select_uniform(&draw_indices(r));
                let mean = |a: &EmpiricalMeasure, b: &EmpiricalMeasure| {
                    per_direction_wp_pow(a, b, 1.0, &dirs).iter().sum::<f64>() / *k as f64
                };
                let value = match nu {
                    Some(nu) => mean(&sample, nu) - mean(reference, nu),
                    None => mean(&sample, reference),
                };
                Ok(root_n * value)
            });
            (draws, if nu.is_some() { LimitKind::OneSampleVsNu } else { LimitKind::OneSampleL1 })
        }
    };
    let draws = draws.into_iter().collect::<Result<Vec<f64>>>()?;
    Ok(LimitSample::new(draws, kind, 0.0))
}

/// Kolmogorov–Smirnov distance between two empirical distributions.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return invalid("KS distance needs nonempty samples");
    }
    if a.iter().chain(b).any(|x| x.is_nan()) {
        return invalid("KS distance got NaN");
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_unstable_by(f64::total_cmp);
    b.sort_unstable_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut best: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        best = best.max(fabs(i as f64 / na - j as f64 / nb));
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maxsliced::projected_w1;
    use approx::assert_abs_diff_eq;

    fn gaussian(d: usize, n: usize, seed: u64) -> EmpiricalMeasure {
        generate(&DistributionSpec::standard_gaussian(d), n, seed).unwrap()
    }

    fn dirac(x: &[f64]) -> EmpiricalMeasure {
        EmpiricalMeasure::uniform(x.to_vec(), x.len()).unwrap()
    }

    #[test]
    fn antipodal_detection() {
        let g = grid_sphere(2, 8).unwrap();
        let keep = antipodal_representatives(&g).unwrap();
        assert_eq!(keep, vec![0, 1, 2, 7]);
        assert!(antipodal_representatives(&grid_sphere(2, 7).unwrap()).is_none());
        assert_eq!(antipodal_representatives(&grid_sphere(1, 0).unwrap()).unwrap(), vec![1]);
        assert!(antipodal_representatives(&grid_sphere(3, 50).unwrap()).is_none());
    }

    #[test]
    fn grid_invariants() {
        let mu = gaussian(2, 500, 1);
        let cfg = GridConfig { sphere_resolution: 16, ..GridConfig::for_dim(2) };
        let grid = CylinderGrid::build(&[&mu], &cfg).unwrap();
        assert_eq!(grid.dirs().len(), 8);
        assert_abs_diff_eq!(grid.sphere_weights().iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        for j in 0..8 {
            assert!(grid.t_nodes(j).windows(2).all(|w| w[0] < w[1]));
            assert!(grid.quad_weights(j).iter().all(|&q| q > 0.0));
        }
        let point = CylinderGrid::build(&[&dirac(&[1.0, 2.0])], &cfg).unwrap();
        assert!(point.quad_weights(0).iter().all(|&q| q > 0.0));
        assert!(CylinderGrid::build(&[&mu, &gaussian(3, 5, 1)], &cfg).is_err());
    }

    #[test]
    fn kernel_of_point_mass_vanishes() {
        let m = dirac(&[0.5, -1.0]);
        let grid = CylinderGrid::build(&[&m], &GridConfig { sphere_resolution: 8, ..GridConfig::for_dim(2) }).unwrap();
        let k = covariance_kernel(&m, &grid).unwrap();
        assert!(k.data.iter().all(|&v| v == 0.0));
        let draws = simulate_limit_one_sample(&m, &grid, 20, 3).unwrap();
        assert!(draws.draws.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn kernel_against_direct_counting() {
        let mu = EmpiricalMeasure::new(vec![0.1, 0.4, -0.3, 0.9, 0.2, 0.2, -1.0, 0.0], 2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let cfg = GridConfig { sphere_resolution: 6, quantile_nodes: 3, range_nodes: 4, range_expansion: 0.1 };
        let grid = CylinderGrid::build(&[&mu], &cfg).unwrap();
        let k = covariance_kernel(&mu, &grid).unwrap();
        let cells: Vec<(usize, f64)> = (0..grid.dirs().len())
            .flat_map(|j| grid.t_nodes(j).iter().map(move |&t| (j, t)))
            .collect();
        let ind = |j: usize, t: f64, row: &[f64]| if dot(row, grid.dirs().get(j)) <= t { 1.0 } else { 0.0 };
        for (a, &(j1, t1)) in cells.iter().enumerate() {
            for (b, &(j2, t2)) in cells.iter().enumerate() {
                let mut joint = 0.0;
                let mut f1 = 0.0;
                let mut f2 = 0.0;
                for (row, w) in mu.rows().zip(mu.weights()) {
                    joint += w * ind(j1, t1, row) * ind(j2, t2, row);
                    f1 += w * ind(j1, t1, row);
                    f2 += w * ind(j2, t2, row);
                }
                assert_abs_diff_eq!(k.get(a, b), joint - f1 * f2, epsilon = 1e-14);
                if a == b {
                    assert_abs_diff_eq!(k.get(a, a), f1 * (1.0 - f1), epsilon = 1e-14);
                }
            }
        }
    }

    #[test]
    fn one_dimensional_kernel_is_bridge_like() {
        let mu = gaussian(1, 300, 4);
        let grid = CylinderGrid::build(&[&mu], &GridConfig::for_dim(1)).unwrap();
        assert_eq!(grid.dirs().len(), 1);
        let k = covariance_kernel(&mu, &grid).unwrap();
        let f = grid_cdf(&mu, &grid).unwrap();
        let t = grid.t_nodes(0);
        for a in 0..t.len() {
            for b in 0..t.len() {
                assert_abs_diff_eq!(k.get(a, b), f[a.min(b)] - f[a] * f[b], epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn limit_draws_nonnegative_and_deterministic() {
        let mu = gaussian(2, 2000, 9);
        let cfg = GridConfig { sphere_resolution: 8, quantile_nodes: 10, range_nodes: 5, range_expansion: 0.0 };
        let grid = CylinderGrid::build(&[&mu], &cfg).unwrap();
        let a = simulate_limit_one_sample(&mu, &grid, 200, 5).unwrap();
        assert!(a.draws.iter().all(|&v| v >= 0.0));
        assert_eq!(a, simulate_limit_one_sample(&mu, &grid, 200, 5).unwrap());
        assert!(simulate_limit_one_sample(&mu, &grid, 0, 5).is_err());
    }

    #[test]
    fn vs_nu_with_equal_references_is_l1() {
        let mu = gaussian(2, 1000, 2);
        let cfg = GridConfig { sphere_resolution: 8, quantile_nodes: 10, range_nodes: 5, range_expansion: 0.0 };
        let grid = CylinderGrid::build(&[&mu, &mu], &cfg).unwrap();
        let a = simulate_limit_one_sample(&mu, &grid, 100, 1).unwrap();
        let b = simulate_limit_vs_nu(&mu, &mu, &grid, 100, 1).unwrap();
        assert_eq!(a.draws, b.draws);
    }

    #[test]
    fn vs_nu_separated_is_centered_linear() {
        // ν sits far to the right of μ along every grid direction with positive first coordinate.
        let mu = gaussian(1, 2000, 3);
        let nu = dirac(&[50.0]);
        let grid = CylinderGrid::build(&[&mu, &nu], &GridConfig::for_dim(1)).unwrap();
        let s = simulate_limit_vs_nu(&mu, &nu, &grid, 2000, 4).unwrap();
        assert!(fabs(s.mean()) <= 4.0 * s.std_error());
        // Variance equals the quadrature form qᵀKq over cells where F > G.
        let k = covariance_kernel(&mu, &grid).unwrap();
        let f = grid_cdf(&mu, &grid).unwrap();
        let g = grid_cdf(&nu, &grid).unwrap();
        let q: Vec<f64> = grid
            .quad_weights(0)
            .iter()
            .zip(f.iter().zip(&g))
            .map(|(q, (f, g))| if f - g > TIE_BAND { *q } else if g - f > TIE_BAND { -q } else { 0.0 })
            .collect();
        let var: f64 = (0..q.len()).flat_map(|a| (0..q.len()).map(move |b| (a, b))).map(|(a, b)| q[a] * k.get(a, b) * q[b]).sum();
        let m = s.mean();
        let sample_var = s.draws.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / 1999.0;
        assert!(fabs(sample_var / var - 1.0) < 0.1, "{sample_var} vs {var}");
    }

    #[test]
    fn paired_with_identical_coordinates_is_zero() {
        let x = gaussian(2, 300, 1);
        let grid = CylinderGrid::build(&[&x], &GridConfig { sphere_resolution: 8, ..GridConfig::for_dim(2) }).unwrap();
        let s = simulate_limit_paired(&x, &x, &grid, 50, 2).unwrap();
        assert!(s.draws.iter().all(|&v| v == 0.0));
        assert!(simulate_limit_paired(&x, &gaussian(2, 10, 1), &grid, 5, 1).is_err());
    }

    #[test]
    fn empirical_statistics_match_direct_computation() {
        let reference = gaussian(2, 400, 7);
        let dirs = grid_sphere(2, 12).unwrap();
        let s = empirical_rootn_from_reference(&reference, RootnStatistic::Sw1OneSample, 50, 5, &DirectionSource::Fixed(dirs.clone()), 11).unwrap();
        // Recompute each replicate through the generic projection path.
        let resampler = Resampler::new(&reference);
        let mut direct: Vec<f64> = (0..5)
            .map(|r| {
                let mut g = rng(replicate_seed(11, r), Stream::Resample);
                let idx: Vec<usize> = (0..50).map(|_| resampler.sample(&mut g)).collect();
                let sample = reference.select_uniform(&idx);
                let mean = dirs.iter().map(|t| projected_w1(&sample, &reference, t)).sum::<f64>() / 12.0;
                sqrt(50.0) * mean
            })
            .collect();
        direct.sort_unstable_by(f64::total_cmp);
        for (a, b) in s.draws.iter().zip(&direct) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }

        let nu = generate(&DistributionSpec::UniformCube { dim: 2, side: 2.0 }, 300, 8).unwrap();
        let s = empirical_rootn_from_reference(&reference, RootnStatistic::Sw1VsNu(&nu), 40, 4, &DirectionSource::Fixed(dirs.clone()), 3).unwrap();
        let base = dirs.iter().map(|t| projected_w1(&reference, &nu, t)).sum::<f64>() / 12.0;
        let mut direct: Vec<f64> = (0..4)
            .map(|r| {
                let mut g = rng(replicate_seed(3, r), Stream::Resample);
                let idx: Vec<usize> = (0..40).map(|_| resampler.sample(&mut g)).collect();
                let sample = reference.select_uniform(&idx);
                let v = dirs.iter().map(|t| projected_w1(&sample, &nu, t)).sum::<f64>() / 12.0;
                sqrt(40.0) * (v - base)
            })
            .collect();
        direct.sort_unstable_by(f64::total_cmp);
        for (a, b) in s.draws.iter().zip(&direct) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn empirical_point_mass_is_zero() {
        let spec = DistributionSpec::PointList(vec![vec![1.0, 2.0]]);
        let dirs = DirectionSource::Fixed(grid_sphere(2, 16).unwrap());
        for stat in [RootnStatistic::Sw1OneSample, RootnStatistic::Msw1OneSample(MaxSlicedConfig::default())] {
            let s = empirical_rootn_distribution(&spec, 50, stat, 30, 5, &dirs, 1).unwrap();
            assert!(s.draws.iter().all(|&v| v == 0.0));
        }
        let s = empirical_rootn_distribution(&spec, 50, RootnStatistic::Sw1OneSample, 30, 5, &DirectionSource::FreshUniform(7), 1).unwrap();
        assert!(s.draws.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn empirical_draws_nonnegative() {
        let reference = gaussian(3, 500, 1);
        for source in [DirectionSource::FreshUniform(10), DirectionSource::Fixed(sample_sphere(3, 10, 2).unwrap())] {
            let s = empirical_rootn_from_reference(&reference, RootnStatistic::Sw1OneSample, 40, 6, &source, 5).unwrap();
            assert!(s.draws.iter().all(|&v| v >= 0.0));
        }
        let s = empirical_rootn_from_reference(
            &reference,
            RootnStatistic::Msw1OneSample(MaxSlicedConfig { restarts: 2, ..Default::default() }),
            40,
            3,
            &DirectionSource::FreshUniform(1),
            5,
        )
        .unwrap();
        assert!(s.draws.iter().all(|&v| v > 0.0));
        assert_eq!(s.kind, LimitKind::OneSampleSup);
    }

    #[test]
    fn weighted_resampling_frequencies() {
        let m = EmpiricalMeasure::new(vec![0.0, 1.0, 2.0], 1, vec![0.2, 0.0, 0.8]).unwrap();
        let r = Resampler::new(&m);
        let mut g = rng(1, Stream::Resample);
        let mut counts = [0usize; 3];
        for _ in 0..20_000 {
            counts[r.sample(&mut g)] += 1;
        }
        assert_eq!(counts[1], 0);
        assert!(fabs(counts[0] as f64 / 20_000.0 - 0.2) < 0.015);
    }

    #[test]
    fn ks_examples() {
        let a = [0.1, 0.5, 0.3];
        assert_eq!(ks_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(ks_distance(&a, &[5.0, 6.0]).unwrap(), 1.0);
        assert_abs_diff_eq!(ks_distance(&[1.0, 2.0], &[2.0, 3.0]).unwrap(), 0.5);
        assert!(ks_distance(&[], &a).is_err());
    }
}
