//! Bootstrap two-sample tests, sub-Gaussian concentration bounds and
//! convergence-rate experiments.

use alloc::format;
use alloc::vec::Vec;

use libm::{ceil, exp, floor, log, sqrt};
use rand::Rng;

use crate::error::{invalid, Result};
use crate::exec::map_indexed;
use crate::limits::{empirical_rootn_from_reference, DirectionSource, RootnStatistic};
use crate::maxsliced::{msw1, MaxSlicedConfig};
use crate::measures::{generate, DistributionSpec, EmpiricalMeasure};
use crate::projections::{sample_sphere, DirectionSet};
use crate::rng::{replicate_seed, rng, Stream};
use crate::sliced::sw_p;

/// Distance behind a test statistic or rate experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum StatisticKind {
    Msw1,
    Sw1,
}

/// How the distance is estimated; reused verbatim for every bootstrap replicate.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum EstimatorConfig {
    /// Monte Carlo SW₁ over `projections` uniform directions drawn from `direction_seed`.
    Sw1 { projections: usize, direction_seed: u64 },
    Msw1(MaxSlicedConfig),
}

impl EstimatorConfig {
    pub fn kind(&self) -> StatisticKind {
        match self {
            Self::Sw1 { .. } => StatisticKind::Sw1,
            Self::Msw1(_) => StatisticKind::Msw1,
        }
    }
}

/// An estimator with its direction set drawn once.
enum Estimator {
    Sw1(DirectionSet),
    Msw1(MaxSlicedConfig),
}

impl Estimator {
    fn new(config: &EstimatorConfig, d: usize) -> Result<Self> {
        Ok(match *config {
            EstimatorConfig::Sw1 { projections, direction_seed } => Self::Sw1(sample_sphere(d, projections, direction_seed)?),
            EstimatorConfig::Msw1(cfg) => Self::Msw1(cfg),
        })
    }

    fn distance(&self, x: &EmpiricalMeasure, y: &EmpiricalMeasure) -> Result<f64> {
        match self {
            Self::Sw1(dirs) => Ok(sw_p(x, y, 1.0, dirs)?.value),
            Self::Msw1(cfg) => Ok(msw1(x, y, cfg)?.value),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Decision {
    Reject,
    Retain,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TestReport {
    pub statistic_kind: StatisticKind,
    pub m: usize,
    pub n: usize,
    /// `√(mn/N)` times the distance between the two samples.
    pub statistic_value: f64,
    /// In replicate order.
    pub bootstrap_draws: Vec<f64>,
    pub critical_value: f64,
    pub alpha: f64,
    pub decision: Decision,
    pub seed: u64,
    pub estimator: EstimatorConfig,
}

/// Empirical `q`-quantile with midpoint interpolation: the average of the
/// order statistics at `⌊q(R−1)⌋` and `⌈q(R−1)⌉` (0-based).
pub fn quantile_midpoint(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return invalid("quantile of an empty sample");
    }
    if !(0.0..=1.0).contains(&q) {
        return invalid(format!("quantile level {q} outside [0, 1]"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let h = q * (sorted.len() - 1) as f64;
    Ok(0.5 * (sorted[floor(h) as usize] + sorted[ceil(h) as usize]))
}

/// Pooled-bootstrap two-sample test of `H₀: P = Q`.
///
/// Each replicate draws `m + n` points i.i.d. from the pooled multiset, uses the
/// first `m` and last `n` as the two samples, and recomputes the statistic with
/// the same estimator (same directions for SW₁, same optimizer settings for
/// MSW₁). Rejects when the statistic exceeds the upper `α` bootstrap quantile.
pub fn two_sample_test(
    x: &EmpiricalMeasure,
    y: &EmpiricalMeasure,
    alpha: f64,
    boot_reps: usize,
    estimator: &EstimatorConfig,
    seed: u64,
) -> Result<TestReport> {
    if x.dim() != y.dim() {
        return invalid(format!("dimension mismatch: {} vs {}", x.dim(), y.dim()));
    }
    let (m, n) = (x.len(), y.len());
    if m < 2 || n < 2 {
        return invalid("both samples need at least 2 points");
    }
    if !x.is_uniform() || !y.is_uniform() {
        return invalid("bootstrap test needs equal-weight samples");
    }
    if boot_reps < 100 {
        return invalid(format!("boot_reps = {boot_reps} must be >= 100"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return invalid(format!("alpha = {alpha} must lie in (0, 1)"));
    }
    let big_n = m + n;
    let scale = sqrt((m as f64 * n as f64) / big_n as f64);
    let est = Estimator::new(estimator, x.dim())?;
    let statistic_value = scale * est.distance(x, y)?;

    let mut rows: Vec<f64> = Vec::with_capacity(big_n * x.dim());
    rows.extend_from_slice(x.points());
    rows.extend_from_slice(y.points());
    let pooled = EmpiricalMeasure::uniform(rows, x.dim())?;
    let draws = map_indexed(boot_reps, |r| -> Result<f64> {
        let mut g = rng(replicate_seed(seed, r), Stream::Bootstrap);
        let idx: Vec<usize> = (0..big_n).map(|_| g.random_range(0..big_n)).collect();
        let xb = pooled.select_uniform(&idx[..m]);
        let yb = pooled.select_uniform(&idx[m..]);
        Ok(scale * est.distance(&xb, &yb)?)
    });
    let bootstrap_draws = draws.into_iter().collect::<Result<Vec<f64>>>()?;
    let critical_value = quantile_midpoint(&bootstrap_draws, 1.0 - alpha)?;
    let decision = if statistic_value > critical_value { Decision::Reject } else { Decision::Retain };
    Ok(TestReport {
        statistic_kind: estimator.kind(),
        m,
        n,
        statistic_value,
        bootstrap_draws,
        critical_value,
        alpha,
        decision,
        seed,
        estimator: *estimator,
    })
}

/// Tail bound for `|D − E D| ≥ t` with `D = MSW₁(μ_n, μ)` or `SW₁(μ_n, μ)`
/// under a σ²-sub-Gaussian μ: `2e^{−nt²/(32dσ²)}` and `2e^{−nt²/(4σ²)}`.
pub fn concentration_bound(kind: StatisticKind, n: usize, t: f64, sigma2: f64, d: usize) -> Result<f64> {
    if n == 0 || d == 0 {
        return invalid("n and d must be >= 1");
    }
    if !(t >= 0.0) || !t.is_finite() {
        return invalid(format!("t = {t} must be finite and >= 0"));
    }
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return invalid(format!("sigma2 = {sigma2} must be finite and > 0"));
    }
    let nt2 = n as f64 * t * t;
    let exponent = match kind {
        StatisticKind::Msw1 => nt2 / (32.0 * d as f64 * sigma2),
        StatisticKind::Sw1 => nt2 / (4.0 * sigma2),
    };
    Ok(2.0 * exp(-exponent))
}

/// Mean distance to the reference across a grid of sample sizes.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RateTable {
    pub distance: StatisticKind,
    pub n_grid: Vec<usize>,
    pub mean_distance: Vec<f64>,
    /// Standard error of each mean.
    pub std_error: Vec<f64>,
    pub reps: usize,
    /// OLS slope of `log mean_distance` on `log n`; NaN when `degenerate`.
    #[cfg_attr(feature = "serde", serde(deserialize_with = "null_as_nan"))]
    pub fitted_slope: f64,
    #[cfg_attr(feature = "serde", serde(deserialize_with = "null_as_nan"))]
    pub slope_stderr: f64,
    /// Set when some mean is not positive, so no log-log fit exists.
    pub degenerate: bool,
    pub reference_size: usize,
    /// `E‖X − EX‖` under the reference, the scale of the `c/√n` lower bound.
    pub centered_abs_moment: f64,
}

/// JSON writes NaN as `null`; read it back as NaN.
#[cfg(feature = "serde")]
fn null_as_nan<'de, D: serde::Deserializer<'de>>(d: D) -> core::result::Result<f64, D::Error> {
    use serde::Deserialize;
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

/// Least-squares slope and its standard error.
pub fn ols_slope(x: &[f64], y: &[f64]) -> (f64, f64) {
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    if x.len() < 3 {
        return (slope, f64::NAN);
    }
    let intercept = my - slope * mx;
    let ssr: f64 = x.iter().zip(y).map(|(a, b)| {
            let r = b - intercept - slope * a;
            r * r
        })
        .sum();
    (slope, sqrt(ssr / (k - 2.0) / sxx))
}

/// Mean of `D(μ_n, μ_ref)` over `reps` samples at every `n` in `n_grid`, with a
/// log-log slope. `μ_ref` is a frozen sample of `reference_size` points from
/// `spec`, and each `μ_n` is drawn i.i.d. from it.
pub fn rate_experiment(
    spec: &DistributionSpec,
    reference_size: usize,
    n_grid: &[usize],
    reps: usize,
    estimator: &EstimatorConfig,
    seed: u64,
) -> Result<RateTable> {
    if n_grid.len() < 2 || n_grid.windows(2).any(|w| w[0] >= w[1]) || n_grid[0] == 0 {
        return invalid("n_grid must hold at least two strictly increasing positive sizes");
    }
    if reps < 10 {
        return invalid(format!("reps = {reps} must be >= 10"));
    }
    let reference = generate(spec, reference_size, seed)?;
    let d = reference.dim();
    let (statistic, directions) = match *estimator {
        EstimatorConfig::Sw1 { projections, direction_seed } => (
            RootnStatistic::Sw1OneSample,
            DirectionSource::Fixed(sample_sphere(d, projections, direction_seed)?),
        ),
        EstimatorConfig::Msw1(cfg) => (RootnStatistic::Msw1OneSample(cfg), DirectionSource::FreshUniform(1)),
    };
    let mut mean_distance = Vec::with_capacity(n_grid.len());
    let mut std_error = Vec::with_capacity(n_grid.len());
    for (g, &n) in n_grid.iter().enumerate() {
        let grid_seed = replicate_seed(seed, (g + 1) << 32);
        let sample = empirical_rootn_from_reference(&reference, statistic, n, reps, &directions, grid_seed)?;
        let root_n = sqrt(n as f64);
        mean_distance.push(sample.mean() / root_n);
        std_error.push(sample.std_error() / root_n);
    }
    let degenerate = mean_distance.iter().any(|&m| !(m > 0.0));
    let (fitted_slope, slope_stderr) = if degenerate {
        (f64::NAN, f64::NAN)
    } else {
        let lx: Vec<f64> = n_grid.iter().map(|&n| log(n as f64)).collect();
        let ly: Vec<f64> = mean_distance.iter().map(|&m| log(m)).collect();
        ols_slope(&lx, &ly)
    };
    Ok(RateTable {
        distance: estimator.kind(),
        n_grid: n_grid.to_vec(),
        mean_distance,
        std_error,
        reps,
        fitted_slope,
        slope_stderr,
        degenerate,
        reference_size,
        centered_abs_moment: reference.centered_abs_moment(),
    })
}
