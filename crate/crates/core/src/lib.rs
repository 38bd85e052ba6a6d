//! Sliced and max-sliced 1-Wasserstein distances between empirical measures.
//!
//! The crate is `no_std` and only needs `alloc`. Every randomized routine takes
//! an explicit 64-bit seed; there is no global RNG state.
//!
//! Module map:
//!
//! * [`measures`]: weighted point clouds, moment functionals, synthetic generators.
//! * [`ot1d`]: exact one-dimensional transport on sorted weighted samples.
//! * [`projections`]: sphere/Gaussian direction sampling, deterministic grids, pushforwards.
//! * [`sliced`]: Monte Carlo sliced estimators and projection-budget planners.
//! * [`maxsliced`]: max-sliced W₁ by multi-start ascent on the sphere, plus grid oracle.
//! * [`limits`]: Gaussian limit-process simulation on a discretized cylinder.
//! * [`inference`]: bootstrap two-sample tests, concentration bounds, rate harness.
//! * [`brackets`]: sup-norm brackets for 1-Lipschitz functions and entropy bounds.
//!
//! Enable the `parallel` feature to spread independent work (directions,
//! restarts, replicates) over a rayon pool. Results are collected in index
//! order, so output does not depend on the worker count.

#![no_std]
#![forbid(unsafe_code)]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod brackets;
pub mod error;
mod exec;
pub mod inference;
pub mod limits;
mod linalg;
pub mod maxsliced;
pub mod measures;
pub mod ot1d;
pub mod projections;
mod rng;
pub mod sliced;

pub use error::{Error, Result};
pub use measures::{DistributionSpec, EmpiricalMeasure};
pub use ot1d::Sorted1D;
pub use projections::{DirectionKind, DirectionSet};
