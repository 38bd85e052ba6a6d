//! Weighted empirical measures, moment functionals and synthetic generators.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::str::FromStr;

use libm::{pow, sqrt};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::rng::{rng, Stream};

/// Tolerance on the total mass of a probability vector.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Weighted point cloud in `d` dimensions.
///
/// Points are stored row-major (`n × d`). Weights are nonnegative and sum to
/// one. All values are immutable after construction.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EmpiricalMeasure {
    points: Vec<f64>,
    weights: Vec<f64>,
    dim: usize,
    uniform: bool,
}

impl EmpiricalMeasure {
    /// Builds a measure from row-major points and explicit weights.
    pub fn new(points: Vec<f64>, dim: usize, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidMeasure("dimension must be at least 1".into()));
        }
        if points.is_empty() || !points.len().is_multiple_of(dim) {
            return Err(Error::InvalidMeasure(format!(
                "{} coordinates do not form rows of dimension {dim}",
                points.len()
            )));
        }
        let n = points.len() / dim;
        if weights.len() != n {
            return Err(Error::InvalidMeasure(format!(
                "{} weights for {n} points",
                weights.len()
            )));
        }
        if let Some(i) = points.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidMeasure(format!(
                "non-finite coordinate in row {}",
                i / dim
            )));
        }
        check_probability(&weights)?;
        let uniform = weights.iter().all(|&w| w == weights[0]);
        Ok(Self {
            points,
            weights,
            dim,
            uniform,
        })
    }

    /// Builds an equal-weight measure (`1/n` per point).
    pub fn uniform(points: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || points.is_empty() || !points.len().is_multiple_of(dim) {
            return Err(Error::InvalidMeasure(format!(
                "{} coordinates do not form rows of dimension {dim}",
                points.len()
            )));
        }
        let n = points.len() / dim;
        Self::new(points, dim, vec![1.0 / n as f64; n])
    }

    /// Builds an equal-weight measure from a list of rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidMeasure("ragged rows".into()));
        }
        Self::uniform(rows.concat(), dim)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// True when every weight is identical, i.e. the measure is a point multiset.
    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.points.chunks_exact(self.dim)
    }

    /// Weighted mean vector.
    pub fn mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.dim];
        for (row, &w) in self.rows().zip(&self.weights) {
            for (m, x) in mean.iter_mut().zip(row) {
                *m += w * x;
            }
        }
        mean
    }

    /// Weighted mean of `‖x − mean‖`.
    pub fn centered_abs_moment(&self) -> f64 {
        let mean = self.mean();
        self.rows()
            .zip(&self.weights)
            .map(|(row, &w)| w * sqrt(row.iter().zip(&mean).map(|(x, m)| (x - m) * (x - m)).sum()))
            .sum()
    }

    /// Same points shifted by `shift`.
    pub fn translated(&self, shift: &[f64]) -> Result<Self> {
        if shift.len() != self.dim {
            return invalid("shift dimension mismatch");
        }
        let mut points = self.points.clone();
        for row in points.chunks_exact_mut(self.dim) {
            for (x, s) in row.iter_mut().zip(shift) {
                *x += s;
            }
        }
        Ok(Self { points, ..self.clone() })
    }

    /// Same points scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            points: self.points.iter().map(|x| x * factor).collect(),
            ..self.clone()
        }
    }

    /// Equal-weight measure on the selected rows (duplicates allowed).
    pub fn select_uniform(&self, indices: &[usize]) -> Self {
        let mut points = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            points.extend_from_slice(self.point(i));
        }
        let n = indices.len();
        Self {
            points,
            weights: vec![1.0 / n as f64; n],
            dim: self.dim,
            uniform: true,
        }
    }
}

/// Neumaier-compensated sum.
pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let t = sum + v;
        if libm::fabs(sum) >= libm::fabs(v) {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

pub(crate) fn check_probability(weights: &[f64]) -> Result<()> {
    if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
        return Err(Error::InvalidMeasure(format!("invalid weight {w}")));
    }
    let total = compensated_sum(weights.iter().copied());
    if libm::fabs(total - 1.0) > MASS_TOLERANCE {
        return Err(Error::InvalidMeasure(format!(
            "weights sum to {total}, expected 1"
        )));
    }
    Ok(())
}

/// `M_p = (Σ wᵢ‖xᵢ‖^p)^{1/p}`.
pub fn moment_p(m: &EmpiricalMeasure, p: f64) -> Result<f64> {
    if !(p >= 1.0) || !p.is_finite() {
        return invalid(format!("moment order p = {p} must be >= 1"));
    }
    let sum: f64 = m
        .rows()
        .zip(m.weights())
        .map(|(row, &w)| {
            let norm = sqrt(row.iter().map(|x| x * x).sum());
            w * pow_abs(norm, p)
        })
        .sum();
    Ok(pow(sum, 1.0 / p))
}

pub(crate) fn pow_abs(x: f64, p: f64) -> f64 {
    let x = libm::fabs(x);
    if p == 1.0 {
        x
    } else if p == 2.0 {
        x * x
    } else {
        pow(x, p)
    }
}

/// `∫₀^∞ √P(‖X‖ > t) dt`, evaluated exactly on the step survival function.
///
/// For empirical inputs this is always finite; it is a diagnostic only.
pub fn lambda_21(m: &EmpiricalMeasure) -> f64 {
    let mut norms: Vec<(f64, f64)> = m
        .rows()
        .zip(m.weights())
        .map(|(row, &w)| (sqrt(row.iter().map(|x| x * x).sum()), w))
        .collect();
    norms.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

    let mut total = 0.0;
    let mut prev = 0.0;
    // Mass with norm strictly above `prev`.
    let mut survival = 1.0_f64;
    let mut i = 0;
    while i < norms.len() {
        let r = norms[i].0;
        total += sqrt(survival.max(0.0)) * (r - prev);
        while i < norms.len() && norms[i].0 == r {
            survival -= norms[i].1;
            i += 1;
        }
        prev = r;
    }
    total
}

/// Distributions the synthetic generator can sample from.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum DistributionSpec {
    /// `N(mean, variance · I)`.
    Gaussian { mean: Vec<f64>, variance: f64 },
    /// Uniform on `[-side/2, side/2]^dim`.
    UniformCube { dim: usize, side: f64 },
    /// Uniform choice among the listed points.
    PointList(Vec<Vec<f64>>),
}

impl DistributionSpec {
    pub fn standard_gaussian(dim: usize) -> Self {
        Self::Gaussian {
            mean: vec![0.0; dim],
            variance: 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Gaussian { mean, .. } => mean.len(),
            Self::UniformCube { dim, .. } => *dim,
            Self::PointList(points) => points.first().map(Vec::len).unwrap_or(0),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Self::Gaussian { mean, variance } => {
                if mean.is_empty() {
                    return invalid("gaussian mean must have dimension >= 1");
                }
                if !(*variance > 0.0) || !variance.is_finite() {
                    return invalid(format!("gaussian variance {variance} must be > 0"));
                }
            }
            Self::UniformCube { dim, side } => {
                if *dim == 0 {
                    return invalid("cube dimension must be >= 1");
                }
                if !(*side > 0.0) || !side.is_finite() {
                    return invalid(format!("cube side {side} must be > 0"));
                }
            }
            Self::PointList(points) => {
                let d = self.dim();
                if points.is_empty() || d == 0 || points.iter().any(|p| p.len() != d) {
                    return invalid("point list must be non-empty with equal-length rows");
                }
                if points.iter().flatten().any(|x| !x.is_finite()) {
                    return invalid("point list contains non-finite coordinates");
                }
            }
        }
        Ok(())
    }
}

/// Parses `gaussian:d=2`, `gaussian:mean=1,0;var=2`, `cube:d=3;side=1`
/// and `points:0,0|3,4`.
impl FromStr for DistributionSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut fields: Vec<(&str, &str)> = Vec::new();
        if kind.trim() != "points" {
            for part in rest.split(';').filter(|p| !p.trim().is_empty()) {
                let (k, v) = part
                    .split_once('=')
                    .ok_or_else(|| Error::InvalidParameter(format!("malformed field `{part}`")))?;
                fields.push((k.trim(), v.trim()));
            }
        }
        let get = |key: &str| fields.iter().find(|(k, _)| *k == key).map(|(_, v)| *v);
        let spec = match kind.trim() {
            "gaussian" => {
                let variance = get("var").map(parse_f64).transpose()?.unwrap_or(1.0);
                let mean = match (get("mean"), get("d")) {
                    (Some(m), _) => parse_list(m)?,
                    (None, Some(d)) => vec![0.0; parse_usize(d)?],
                    (None, None) => return invalid("gaussian needs `d=` or `mean=`"),
                };
                Self::Gaussian { mean, variance }
            }
            "cube" => Self::UniformCube {
                dim: parse_usize(get("d").ok_or_else(|| Error::InvalidParameter("cube needs `d=`".into()))?)?,
                side: get("side").map(parse_f64).transpose()?.unwrap_or(1.0),
            },
            "points" => Self::PointList(
                rest.split('|')
                    .filter(|r| !r.trim().is_empty())
                    .map(parse_list)
                    .collect::<Result<_>>()?,
            ),
            other => return invalid(format!("unknown distribution `{other}`")),
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("`{s}` is not a number")))
}

fn parse_usize(s: &str) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("`{s}` is not a count")))
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',').map(parse_f64).collect()
}

/// Draws `n` i.i.d. points with equal weights; a pure function of its inputs.
pub fn generate(spec: &DistributionSpec, n: usize, seed: u64) -> Result<EmpiricalMeasure> {
    if n == 0 {
        return invalid("sample size must be >= 1");
    }
    spec.validate()?;
    let mut rng = rng(seed, Stream::Generate);
    let dim = spec.dim();
    let mut points = Vec::with_capacity(n * dim);
    match spec {
        DistributionSpec::Gaussian { mean, variance } => {
            let sd = sqrt(*variance);
            for _ in 0..n {
                for m in mean {
                    let z: f64 = rng.sample(StandardNormal);
                    points.push(m + sd * z);
                }
            }
        }
        DistributionSpec::UniformCube { side, .. } => {
            for _ in 0..n * dim {
                points.push(side * (rng.random::<f64>() - 0.5));
            }
        }
        DistributionSpec::PointList(list) => {
            for _ in 0..n {
                let i = if list.len() == 1 { 0 } else { rng.random_range(0..list.len()) };
                points.extend_from_slice(&list[i]);
            }
        }
    }
    EmpiricalMeasure::uniform(points, dim)
}

/// Human-readable name used in reports.
pub fn describe(spec: &DistributionSpec) -> String {
    match spec {
        DistributionSpec::Gaussian { mean, variance } => {
            format!("gaussian(d={}, var={variance})", mean.len())
        }
        DistributionSpec::UniformCube { dim, side } => format!("cube(d={dim}, side={side})"),
        DistributionSpec::PointList(p) => format!("points({})", p.len()),
    }
}
