//! Monte Carlo sliced Wasserstein estimators and projection-budget planners.
//!
//! Planners never sample and estimators never plan. The Lipschitz-type
//! constants a planner needs depend on the unknown distance itself, so
//! [`estimate_plan_inputs`] supplies them separately: exact moments, the
//! coarse bound `W_p(μ, ν) ≤ M_p(μ) + M_p(ν)` (coupling through `δ₀`, often
//! loose) and a pilot lower estimate.

use alloc::format;
use alloc::vec::Vec;

use libm::{ceil, exp, lgamma, log, pow, sqrt};

use crate::error::{invalid, Result};
use crate::exec::map_indexed;
use crate::measures::{moment_p, EmpiricalMeasure};
use crate::ot1d::{w1_1d, wp_pow_1d};
use crate::projections::{project_unchecked, DirectionKind, DirectionSet};

/// Which quantity an estimate targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Estimand {
    /// `SW_p^p`: mean of per-direction `W_p^p`.
    SwPow,
    /// `SW_p`: `p`-th root of the mean of per-direction `W_p^p`.
    Sw,
    /// Mean of per-direction `W_p` (unpowered).
    SwHat,
    /// Gaussian-direction average of `W_p^p`, rescaled to covariance `I/d`.
    SwTildePow,
}

/// Summary of the directions behind an estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DirectionSummary {
    pub kind: DirectionKind,
    pub seed: Option<u64>,
    pub count: usize,
    pub dim: usize,
}

impl From<&DirectionSet> for DirectionSummary {
    fn from(d: &DirectionSet) -> Self {
        Self {
            kind: d.kind(),
            seed: d.seed(),
            count: d.len(),
            dim: d.dim(),
        }
    }
}

/// Monte Carlo estimate with its per-direction values.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SlicedEstimate {
    pub value: f64,
    pub per_projection: Vec<f64>,
    /// Sample standard deviation of `per_projection` over `√k` (0 when `k = 1`).
    pub std_error: f64,
    pub dirs: DirectionSummary,
    pub estimand: Estimand,
    pub p: f64,
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0);
    (mean, sqrt(var / k))
}

fn check_pair(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, p: f64, dirs: &DirectionSet) -> Result<()> {
    if mu.dim() != nu.dim() {
        return invalid(format!("dimension mismatch: {} vs {}", mu.dim(), nu.dim()));
    }
    if dirs.dim() != mu.dim() {
        return invalid(format!(
            "directions of dimension {} for measures of dimension {}",
            dirs.dim(),
            mu.dim()
        ));
    }
    if !(p >= 1.0) || !p.is_finite() {
        return invalid(format!("order p = {p} must be >= 1"));
    }
    Ok(())
}

fn require_unit_directions(dirs: &DirectionSet) -> Result<()> {
    match dirs.kind() {
        DirectionKind::UniformSphere | DirectionKind::Grid => Ok(()),
        DirectionKind::Gaussian { .. } => invalid("estimator needs unit directions (uniform sphere or grid)"),
    }
}

/// `W_p^p(θ#μ, θ#ν)` for every direction, in direction order.
pub fn per_direction_wp_pow(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, p: f64, dirs: &DirectionSet) -> Vec<f64> {
    map_indexed(dirs.len(), |i| {
        let theta = dirs.get(i);
        let a = project_unchecked(mu, theta);
        let b = project_unchecked(nu, theta);
        if p == 1.0 {
            w1_1d(&a, &b)
        } else {
            wp_pow_1d(&a, &b, p)
        }
    })
}

fn estimate(per_projection: Vec<f64>, dirs: &DirectionSet, estimand: Estimand, p: f64, finish: impl Fn(f64) -> f64) -> SlicedEstimate {
    let (mean, std_error) = mean_and_se(&per_projection);
    SlicedEstimate {
        value: finish(mean),
        per_projection,
        std_error,
        dirs: dirs.into(),
        estimand,
        p,
    }
}

/// Mean over directions of `W_p^p` between the projections.
pub fn sw_p_pow(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, p: f64, dirs: &DirectionSet) -> Result<SlicedEstimate> {
    check_pair(mu, nu, p, dirs)?;
    require_unit_directions(dirs)?;
    let values = per_direction_wp_pow(mu, nu, p, dirs);
    Ok(estimate(values, dirs, Estimand::SwPow, p, |m| m))
}

/// `p`-th root of [`sw_p_pow`].
pub fn sw_p(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, p: f64, dirs: &DirectionSet) -> Result<SlicedEstimate> {
    check_pair(mu, nu, p, dirs)?;
    require_unit_directions(dirs)?;
    let values = per_direction_wp_pow(mu, nu, p, dirs);
    Ok(estimate(values, dirs, Estimand::Sw, p, |m| if p == 1.0 { m } else { pow(m, 1.0 / p) }))
}

/// Mean over directions of the unpowered `W_p`.
pub fn sw_hat(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, p: f64, dirs: &DirectionSet) -> Result<SlicedEstimate> {
    check_pair(mu, nu, p, dirs)?;
    require_unit_directions(dirs)?;
    let mut values = per_direction_wp_pow(mu, nu, p, dirs);
    if p != 1.0 {
        for v in &mut values {
            *v = pow(*v, 1.0 / p);
        }
    }
    Ok(estimate(values, dirs, Estimand::SwHat, p, |m| m))
}

/// `c_{p,d} = (2/d)^{1/2} (Γ(d/2 + p/2) / Γ(d/2))^{1/p}`.
///
/// Equals 1 at `p = 2` for every `d`. The exact ratio between the Gaussian
/// and uniform slicings of `W_p^p` is [`gaussian_slice_factor`].
pub fn c_pd(p: f64, d: usize) -> f64 {
    let h = d as f64 / 2.0;
    sqrt(2.0 / d as f64) * exp((lgamma(h + p / 2.0) - lgamma(h)) / p)
}

/// `E_{θ∼N(0, I/d)} ‖θ‖^p = (2/d)^{p/2} Γ(d/2 + p/2) / Γ(d/2)`.
///
/// The Gaussian-slicing `W_p^p` average equals this factor times `SW_p^p`.
/// It coincides with [`c_pd`] at `p ∈ {1, 2}` and equals `c_pd^p` in general.
pub fn gaussian_slice_factor(p: f64, d: usize) -> f64 {
    let h = d as f64 / 2.0;
    pow(2.0 / d as f64, p / 2.0) * exp(lgamma(h + p / 2.0) - lgamma(h))
}

/// Estimates the Gaussian-slicing `W_p^p` average with covariance `I/d`.
///
/// Directions must be Gaussian. With covariance `I` the per-direction values are
/// divided by `d^{p/2}`; with covariance `I/d` they are used as is.
pub fn sw_tilde_p_pow(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, p: f64, dirs: &DirectionSet) -> Result<SlicedEstimate> {
    check_pair(mu, nu, p, dirs)?;
    let variance = match dirs.kind() {
        DirectionKind::Gaussian { variance } => variance,
        _ => return invalid("Gaussian-slicing estimator needs Gaussian directions"),
    };
    let d = mu.dim() as f64;
    let scale = pow(1.0 / (d * variance), p / 2.0);
    let values = per_direction_wp_pow(mu, nu, p, dirs)
        .into_iter()
        .map(|v| v * scale)
        .collect();
    Ok(estimate(values, dirs, Estimand::SwTildePow, p, |m| m))
}

/// Planner formula selector; each bounds a different estimator's deviation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum PlanVariant {
    /// `SW_p^p` with uniform directions: `2L²/((d−1)ε²)·log(2/δ)`.
    SwPow,
    /// `SW_p` with uniform directions: `2L²/((d−1)ε^{2p})·log(2/δ)`.
    SwRoot,
    /// `SW_1` via coordinate-marginal moments: `4(Δ_μ+Δ_ν)²/ε²·log(2/δ)`.
    Sw1Marginal,
    /// Unpowered average: `2L̃²/((d−1)ε²)·log(2/δ)`.
    SwHat,
    /// Gaussian slicing: `2L²/(d^p ε²)·log(2/δ)`.
    SwTilde,
    /// Gaussian slicing rescaled to `SW_p^p`: `2L²/(d^p c²_{p,d} ε²)·log(2/δ)`.
    SwRescaled,
}

impl PlanVariant {
    pub const ALL: [PlanVariant; 6] = [
        Self::SwPow,
        Self::SwRoot,
        Self::Sw1Marginal,
        Self::SwHat,
        Self::SwTilde,
        Self::SwRescaled,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::SwPow => "sw-pow",
            Self::SwRoot => "sw-root",
            Self::Sw1Marginal => "sw1-marginal",
            Self::SwHat => "sw-hat",
            Self::SwTilde => "sw-tilde",
            Self::SwRescaled => "sw-rescaled",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.name() == name)
    }
}

/// Named planner inputs; only the ones a variant needs must be set.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PlanParams {
    /// `L = p·W_p^{p−1}(μ,ν)·(M_p(μ) + M_p(ν))`.
    pub l: Option<f64>,
    /// `L̃ = M_p(μ) + M_p(ν)`.
    pub l_tilde: Option<f64>,
    /// Largest coordinate-marginal second moment of μ.
    pub delta_mu: Option<f64>,
    pub delta_nu: Option<f64>,
    pub p: Option<f64>,
    pub d: Option<usize>,
}

/// Number of projections that meets an `(ε, δ)` deviation guarantee.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProjectionPlan {
    pub variant: PlanVariant,
    pub epsilon: f64,
    pub delta: f64,
    pub params: PlanParams,
    /// The unrounded bound.
    pub bound: f64,
    pub n_required: u64,
}

fn need<T: Copy>(v: Option<T>, name: &str, variant: PlanVariant) -> Result<T> {
    v.ok_or_else(|| crate::Error::InvalidParameter(format!("{} plan needs `{name}`", variant.name())))
}

/// Evaluates the chosen bound with natural logarithms; bounds below 1 clamp to 1.
pub fn plan_projections(variant: PlanVariant, epsilon: f64, delta: f64, params: PlanParams) -> Result<ProjectionPlan> {
    if !(epsilon > 0.0) {
        return invalid(format!("epsilon = {epsilon} must be > 0"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return invalid(format!("delta = {delta} must lie in (0, 1)"));
    }
    let log_term = log(2.0 / delta);
    let nonneg = |v: f64, name: &str| -> Result<f64> {
        if v >= 0.0 && v.is_finite() {
            Ok(v)
        } else {
            invalid(format!("`{name}` = {v} must be finite and >= 0"))
        }
    };
    let d_minus_one = || -> Result<f64> {
        let d = need(params.d, "d", variant)?;
        if d < 2 {
            return invalid(format!("{} plan needs d >= 2", variant.name()));
        }
        Ok((d - 1) as f64)
    };
    let p_of = || -> Result<f64> {
        let p = need(params.p, "p", variant)?;
        if !(p >= 1.0) || !p.is_finite() {
            return invalid(format!("p = {p} must be >= 1"));
        }
        Ok(p)
    };
    let dim = || -> Result<f64> {
        let d = need(params.d, "d", variant)?;
        if d == 0 {
            return invalid("d must be >= 1");
        }
        Ok(d as f64)
    };
    let bound = match variant {
        PlanVariant::SwPow => {
            let l = nonneg(need(params.l, "L", variant)?, "L")?;
            2.0 * l * l / (d_minus_one()? * epsilon * epsilon) * log_term
        }
        PlanVariant::SwRoot => {
            let l = nonneg(need(params.l, "L", variant)?, "L")?;
            let p = p_of()?;
            2.0 * l * l / (d_minus_one()? * pow(epsilon, 2.0 * p)) * log_term
        }
        PlanVariant::Sw1Marginal => {
            let s = nonneg(need(params.delta_mu, "delta_mu", variant)?, "delta_mu")?
                + nonneg(need(params.delta_nu, "delta_nu", variant)?, "delta_nu")?;
            4.0 * s * s / (epsilon * epsilon) * log_term
        }
        PlanVariant::SwHat => {
            let l = nonneg(need(params.l_tilde, "L_tilde", variant)?, "L_tilde")?;
            2.0 * l * l / (d_minus_one()? * epsilon * epsilon) * log_term
        }
        PlanVariant::SwTilde => {
            let l = nonneg(need(params.l, "L", variant)?, "L")?;
            let (p, d) = (p_of()?, dim()?);
            2.0 * l * l / (pow(d, p) * epsilon * epsilon) * log_term
        }
        PlanVariant::SwRescaled => {
            let l = nonneg(need(params.l, "L", variant)?, "L")?;
            let (p, d) = (p_of()?, dim()?);
            let c = c_pd(p, d as usize);
            2.0 * l * l / (pow(d, p) * c * c * epsilon * epsilon) * log_term
        }
    };
    if !bound.is_finite() || bound > (1u64 << 53) as f64 {
        return invalid(format!("projection bound {bound} is not representable"));
    }
    let n_required = (ceil(bound) as u64).max(1);
    Ok(ProjectionPlan {
        variant,
        epsilon,
        delta,
        params,
        bound,
        n_required,
    })
}

/// Data-driven inputs for the planners.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PlanInputs {
    pub p: f64,
    pub d: usize,
    pub moment_mu: f64,
    pub moment_nu: f64,
    /// `max_i M₂` of the coordinate marginals of μ.
    pub delta_mu: f64,
    pub delta_nu: f64,
    /// `M_p(μ) + M_p(ν)`, an upper bound on `W_p(μ, ν)`.
    pub wp_upper: f64,
    /// Largest per-direction `W_p` over the pilot directions (a lower bound on `W_p`).
    pub wp_pilot: f64,
    /// `L` computed from `wp_upper`.
    pub l_conservative: f64,
    /// `L` computed from `wp_pilot`.
    pub l_pilot: f64,
    pub l_tilde: f64,
}

impl PlanInputs {
    /// Planner parameters using the conservative `L`.
    pub fn conservative_params(&self) -> PlanParams {
        self.params_with(self.l_conservative)
    }

    pub fn pilot_params(&self) -> PlanParams {
        self.params_with(self.l_pilot)
    }

    fn params_with(&self, l: f64) -> PlanParams {
        PlanParams {
            l: Some(l),
            l_tilde: Some(self.l_tilde),
            delta_mu: Some(self.delta_mu),
            delta_nu: Some(self.delta_nu),
            p: Some(self.p),
            d: Some(self.d),
        }
    }
}

fn max_marginal_m2(m: &EmpiricalMeasure) -> f64 {
    let mut second = alloc::vec![0.0; m.dim()];
    for (row, &w) in m.rows().zip(m.weights()) {
        for (s, x) in second.iter_mut().zip(row) {
            *s += w * x * x;
        }
    }
    second.into_iter().map(sqrt).fold(0.0, f64::max)
}

/// Computes moments exactly and a pilot lower estimate of `W_p`.
pub fn estimate_plan_inputs(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, p: f64, pilot_dirs: &DirectionSet) -> Result<PlanInputs> {
    check_pair(mu, nu, p, pilot_dirs)?;
    if pilot_dirs.is_empty() {
        return invalid("pilot directions must be nonempty");
    }
    require_unit_directions(pilot_dirs)?;
    let moment_mu = moment_p(mu, p)?;
    let moment_nu = moment_p(nu, p)?;
    let sum = moment_mu + moment_nu;
    let wp_upper = sum;
    let wp_pilot = per_direction_wp_pow(mu, nu, p, pilot_dirs)
        .into_iter()
        .map(|v| if p == 1.0 { v } else { pow(v, 1.0 / p) })
        .fold(0.0, f64::max);
    let l_of = |w: f64| if p == 1.0 { sum } else { p * pow(w, p - 1.0) * sum };
    Ok(PlanInputs {
        p,
        d: mu.dim(),
        moment_mu,
        moment_nu,
        delta_mu: max_marginal_m2(mu),
        delta_nu: max_marginal_m2(nu),
        wp_upper,
        wp_pilot,
        l_conservative: l_of(wp_upper),
        l_pilot: l_of(wp_pilot),
        l_tilde: sum,
    })
}
