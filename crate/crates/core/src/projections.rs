//! Projection directions and one-dimensional pushforwards.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use libm::{cos, sin, sqrt};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::measures::EmpiricalMeasure;
use crate::ot1d::Sorted1D;
use crate::rng::{rng, Stream};

/// How a direction set was produced.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case", tag = "type"))]
pub enum DirectionKind {
    /// I.i.d. uniform on the unit sphere.
    UniformSphere,
    /// I.i.d. `N(0, variance · I)`, not normalized.
    Gaussian { variance: f64 },
    /// Deterministic quadrature grid with equal weights.
    Grid,
}

/// Covariance scale for Gaussian directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GaussianScale {
    /// Covariance `I/d`.
    InverseDim,
    /// Covariance `I`.
    Unit,
}

/// A batch of `k` directions in `ℝ^d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DirectionSet {
    dirs: Vec<f64>,
    dim: usize,
    kind: DirectionKind,
    seed: Option<u64>,
}

impl DirectionSet {
    /// Wraps explicit unit directions as a grid (equal weights, no seed).
    pub fn from_unit_rows(dirs: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || dirs.is_empty() || !dirs.len().is_multiple_of(dim) {
            return invalid("direction rows do not match the dimension");
        }
        for row in dirs.chunks_exact(dim) {
            let norm = sqrt(row.iter().map(|x| x * x).sum());
            if libm::fabs(norm - 1.0) > 1e-12 {
                return invalid(format!("direction has norm {norm}, expected 1"));
            }
        }
        Ok(Self {
            dirs,
            dim,
            kind: DirectionKind::Grid,
            seed: None,
        })
    }

    pub fn len(&self) -> usize {
        self.dirs.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> DirectionKind {
        self.kind
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.dirs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.dirs.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.dirs
    }

    /// The rows at `indices`, keeping kind and seed.
    pub(crate) fn subset(&self, indices: &[usize]) -> Self {
        Self {
            dirs: indices.iter().flat_map(|&i| self.get(i).iter().copied()).collect(),
            dim: self.dim,
            kind: self.kind,
            seed: self.seed,
        }
    }
}

fn check_counts(d: usize, k: usize) -> Result<()> {
    if d == 0 {
        return invalid("dimension must be >= 1");
    }
    if k == 0 {
        return invalid("direction count must be >= 1");
    }
    Ok(())
}

/// Draws `k` i.i.d. uniform directions on `S^{d−1}` by normalizing standard normals.
pub fn sample_sphere(d: usize, k: usize, seed: u64) -> Result<DirectionSet> {
    check_counts(d, k)?;
    let mut rng = rng(seed, Stream::Sphere);
    let mut dirs = Vec::with_capacity(d * k);
    let mut row = alloc::vec![0.0; d];
    for _ in 0..k {
        loop {
            for x in row.iter_mut() {
                *x = rng.sample(StandardNormal);
            }
            let norm = sqrt(row.iter().map(|x| x * x).sum());
            // A zero (or subnormal) draw has probability zero; redraw.
            if norm > 1e-300 {
                dirs.extend(row.iter().map(|x| x / norm));
                break;
            }
        }
    }
    Ok(DirectionSet {
        dirs,
        dim: d,
        kind: DirectionKind::UniformSphere,
        seed: Some(seed),
    })
}

/// Draws `k` i.i.d. `N(0, σ²I)` rows with `σ² ∈ {1/d, 1}`.
pub fn sample_gaussian_dirs(d: usize, k: usize, scale: GaussianScale, seed: u64) -> Result<DirectionSet> {
    check_counts(d, k)?;
    let variance = match scale {
        GaussianScale::InverseDim => 1.0 / d as f64,
        GaussianScale::Unit => 1.0,
    };
    let sd = sqrt(variance);
    let mut rng = rng(seed, Stream::Gaussian);
    let dirs = (0..d * k)
        .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Ok(DirectionSet {
        dirs,
        dim: d,
        kind: DirectionKind::Gaussian { variance },
        seed: Some(seed),
    })
}

/// Deterministic direction grid for `d ≤ 3`.
///
/// `d = 1` gives `{−1, +1}`; `d = 2` gives `resolution` equally spaced angles
/// on `[0, 2π)`; `d = 3` gives a Fibonacci sphere with `resolution` points.
pub fn grid_sphere(d: usize, resolution: usize) -> Result<DirectionSet> {
    let dirs = match d {
        1 => alloc::vec![-1.0, 1.0],
        2 => {
            if resolution == 0 {
                return invalid("grid resolution must be >= 1");
            }
            let mut v = Vec::with_capacity(2 * resolution);
            for k in 0..resolution {
                let phi = 2.0 * PI * k as f64 / resolution as f64;
                v.push(cos(phi));
                v.push(sin(phi));
            }
            v
        }
        3 => {
            if resolution == 0 {
                return invalid("grid resolution must be >= 1");
            }
            let golden = PI * (3.0 - sqrt(5.0));
            let mut v = Vec::with_capacity(3 * resolution);
            for k in 0..resolution {
                let z = 1.0 - (2.0 * k as f64 + 1.0) / resolution as f64;
                let r = sqrt((1.0 - z * z).max(0.0));
                let phi = golden * k as f64;
                let (x, y) = (r * cos(phi), r * sin(phi));
                let norm = sqrt(x * x + y * y + z * z);
                v.extend_from_slice(&[x / norm, y / norm, z / norm]);
            }
            v
        }
        0 => return invalid("dimension must be >= 1"),
        _ => return Err(Error::UnsupportedDimension(d)),
    };
    Ok(DirectionSet {
        dirs,
        dim: d,
        kind: DirectionKind::Grid,
        seed: None,
    })
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Writes `θᵀxᵢ` for every point into `out`.
pub(crate) fn project_into(m: &EmpiricalMeasure, theta: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.extend(m.rows().map(|row| dot(row, theta)));
}

/// Pushforward `θ#m` as a sorted one-dimensional distribution.
pub fn project(m: &EmpiricalMeasure, theta: &[f64]) -> Result<Sorted1D> {
    if theta.len() != m.dim() {
        return invalid(format!(
            "direction of dimension {} for a measure of dimension {}",
            theta.len(),
            m.dim()
        ));
    }
    Ok(project_unchecked(m, theta))
}

pub(crate) fn project_unchecked(m: &EmpiricalMeasure, theta: &[f64]) -> Sorted1D {
    let mut values = Vec::with_capacity(m.len());
    project_into(m, theta, &mut values);
    if m.is_uniform() {
        Sorted1D::from_uniform(values)
    } else {
        let mut pairs: Vec<(f64, f64)> = values.into_iter().zip(m.weights().iter().copied()).collect();
        Sorted1D::from_pairs(&mut pairs)
    }
}
