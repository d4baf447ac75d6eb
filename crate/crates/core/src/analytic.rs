//! Extinction probabilities, survival criteria and critical birth rates.
//!
//! The sedentary model has closed forms throughout. For the two dispersal
//! models extinction of the population coincides with extinction of the
//! colony-level Galton-Watson process, so the extinction probability is the
//! least fixed point of the offspring generating function on `[0, 1]`, and
//! survival is possible exactly when the offspring mean exceeds 1.

use serde::{Deserialize, Serialize};

use crate::effects::{mixed_collapse_pmf, Model, ModelParams};
use crate::error::{Error, Result};
use crate::numfmt;
use crate::offspring::{mean_dispersal, mean_regular_graph, mean_regular_graph_at, Pgf, PgfEvaluator};

/// Default stopping tolerance of the fixed-point iteration.
pub const FIXED_POINT_TOL: f64 = 1e-14;
const FIXED_POINT_MAX_ITER: u64 = 1_000_000;
/// Upper end of the fallback bisection bracket.
const BISECTION_CEILING: f64 = 1.0 - 1e-9;
/// Absolute tolerance of the critical-rate bisection.
pub const CRITICAL_TOL: f64 = 1e-12;
const BRACKET_DOUBLINGS: u32 = 60;
/// Offspring means within this distance above 1 are treated as critical.
/// Decimal inputs such as `p = 0.4` land a few ulps off an exactly critical
/// point, where the least fixed point sits within 1e-15 of 1 and cannot be
/// separated from it in double precision.
pub const CRITICAL_BAND: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    FixedPoint,
    MonteCarlo,
}

/// An extinction probability and how it was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtinctionEstimate {
    #[serde(with = "numfmt::real")]
    pub probability: f64,
    pub method: Method,
    /// Fixed-point iterations, or replicates for Monte Carlo.
    pub iterations: u64,
    /// 95% normal half-width; zero for deterministic methods.
    #[serde(with = "numfmt::real")]
    pub ci_half_width: f64,
    /// Replicates stopped by the generation or step cap.
    #[serde(with = "numfmt::real")]
    pub censored_fraction: f64,
    /// Replicates stopped by the population cap.
    #[serde(with = "numfmt::real")]
    pub escaped_fraction: f64,
    /// Mean generations (or embedded steps) to extinction over extinct
    /// replicates.
    #[serde(default, with = "numfmt::opt_real", skip_serializing_if = "Option::is_none")]
    pub mean_extinction_time: Option<f64>,
}

impl ExtinctionEstimate {
    pub fn deterministic(probability: f64, method: Method, iterations: u64) -> Self {
        ExtinctionEstimate {
            probability: probability.clamp(0.0, 1.0),
            method,
            iterations,
            ci_half_width: 0.0,
            censored_fraction: 0.0,
            escaped_fraction: 0.0,
            mean_extinction_time: None,
        }
    }

    /// Binomial standard error of a Monte Carlo estimate.
    pub fn standard_error(&self) -> f64 {
        if self.method != Method::MonteCarlo || self.iterations == 0 {
            return 0.0;
        }
        let p = self.probability;
        (p * (1.0 - p) / self.iterations as f64).sqrt()
    }
}

/// Smallest `s` in `[0, 1]` with `pgf(s) = s`.
///
/// Iterates `s <- pgf(s)` from 0, which increases monotonically to the least
/// fixed point, then polishes with Newton steps when the derivative is known.
/// If the iteration has not settled after a million steps the remaining
/// bracket is bisected. Subcritical and critical laws (mean at most 1) return
/// 1 without iterating.
pub fn smallest_fixed_point<P: Pgf + ?Sized>(pgf: &P, tol: f64) -> Result<ExtinctionEstimate> {
    let at_one = pgf.value(1.0);
    if (at_one - 1.0).abs() > 1e-10 {
        return Err(Error::Domain(format!("generating function equals {at_one} at 1")));
    }
    if pgf.mean() <= 1.0 + CRITICAL_BAND {
        return Ok(ExtinctionEstimate::deterministic(1.0, Method::FixedPoint, 0));
    }

    let mut s = 0.0f64;
    let mut iterations = 0u64;
    let mut converged = false;
    while iterations < FIXED_POINT_MAX_ITER {
        let next = pgf.value(s);
        iterations += 1;
        let step = (next - s).abs();
        s = next;
        if step < tol {
            converged = true;
            break;
        }
    }

    let root = if converged {
        newton_polish(pgf, s)
    } else {
        bisect_fixed_point(pgf, s.min(BISECTION_CEILING), tol)?
    };
    Ok(ExtinctionEstimate::deterministic(root, Method::FixedPoint, iterations))
}

fn newton_polish<P: Pgf + ?Sized>(pgf: &P, mut s: f64) -> f64 {
    for _ in 0..8 {
        let Some(slope) = pgf.derivative(s) else { break };
        let g = pgf.value(s) - s;
        let dg = slope - 1.0;
        if dg >= 0.0 || g == 0.0 {
            break;
        }
        let next = s - g / dg;
        if !(0.0..=1.0).contains(&next) || next == s {
            break;
        }
        s = next;
    }
    s
}

fn bisect_fixed_point<P: Pgf + ?Sized>(pgf: &P, from: f64, tol: f64) -> Result<f64> {
    let g = |s: f64| pgf.value(s) - s;
    let (mut lo, mut hi) = (from, BISECTION_CEILING);
    if g(lo) < 0.0 {
        lo = 0.0;
    }
    if g(hi) >= 0.0 {
        return Err(Error::NonConvergence(format!(
            "no sign change of pgf(s) - s on [{lo}, {hi}]"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi || hi - lo < tol {
            break;
        }
        if g(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Extinction probability of the sedentary colony.
pub fn extinction_sedentary(params: &ModelParams) -> ExtinctionEstimate {
    let probability = if !survives_sedentary(params) {
        1.0
    } else {
        (params.q() / (params.lambda() * params.p())).min(1.0)
    };
    ExtinctionEstimate::deterministic(probability, Method::ClosedForm, 0)
}

/// Survival with positive probability in the sedentary model requires a
/// purely geometric effect and `lambda p > 1 - p`.
pub fn survives_sedentary(params: &ModelParams) -> bool {
    params.r() >= 1.0 && params.lambda() * params.p() > params.q() * (1.0 + CRITICAL_BAND)
}

pub fn survives_dispersal(params: &ModelParams) -> bool {
    mean_dispersal(params) > 1.0 + CRITICAL_BAND
}

pub fn survives_regular_graph(params: &ModelParams) -> Result<bool> {
    Ok(mean_regular_graph(params)? > 1.0 + CRITICAL_BAND)
}

pub fn survives(model: Model, params: &ModelParams) -> Result<bool> {
    match model {
        Model::Sedentary => Ok(survives_sedentary(params)),
        Model::Dispersal => Ok(survives_dispersal(params)),
        Model::RegularGraph => survives_regular_graph(params),
    }
}

/// Offspring mean of a dispersal model; `None` for the sedentary colony.
pub fn mean_offspring(model: Model, params: &ModelParams) -> Result<Option<f64>> {
    match model {
        Model::Sedentary => Ok(None),
        Model::Dispersal => Ok(Some(mean_dispersal(params))),
        Model::RegularGraph => mean_regular_graph(params).map(Some),
    }
}

/// Closed-form dispersal extinction probability at `r = 0` or `r = 1`.
pub fn extinction_dispersal_closed_form(params: &ModelParams) -> Option<f64> {
    let (p, q, lambda) = (params.p(), params.q(), params.lambda());
    if params.r() == 0.0 {
        Some((q / (lambda * p)).min(1.0))
    } else if params.r() == 1.0 {
        Some((q * (lambda + 1.0) / (lambda * (1.0 + lambda * p))).min(1.0))
    } else {
        None
    }
}

pub fn extinction_dispersal(params: &ModelParams, tol: f64) -> Result<ExtinctionEstimate> {
    let estimate = smallest_fixed_point(&PgfEvaluator::dispersal(*params), tol)?;
    if let Some(closed) = extinction_dispersal_closed_form(params) {
        if (closed - estimate.probability).abs() > 1e-9 {
            return Err(Error::NonConvergence(format!(
                "fixed point {} disagrees with closed form {closed}",
                estimate.probability
            )));
        }
    }
    Ok(estimate)
}

pub fn extinction_regular_graph(params: &ModelParams, tol: f64) -> Result<ExtinctionEstimate> {
    smallest_fixed_point(&PgfEvaluator::regular_graph(*params)?, tol)
}

pub fn extinction(model: Model, params: &ModelParams, tol: f64) -> Result<ExtinctionEstimate> {
    match model {
        Model::Sedentary => Ok(extinction_sedentary(params)),
        Model::Dispersal => extinction_dispersal(params, tol),
        Model::RegularGraph => extinction_regular_graph(params, tol),
    }
}

/// A critical birth rate, possibly infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rate {
    Finite(f64),
    Infinite,
}

impl Rate {
    pub fn value(self) -> f64 {
        match self {
            Rate::Finite(v) => v,
            Rate::Infinite => f64::INFINITY,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Rate::Infinite)
    }
}

impl std::fmt::Display for Rate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Rate::Finite(v) => f.write_str(&numfmt::format_real(*v)),
            Rate::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Rate {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        numfmt::real::serialize(&self.value(), serializer)
    }
}

impl<'de> Deserialize<'de> for Rate {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let v = numfmt::real::deserialize(deserializer)?;
        Ok(if v.is_infinite() { Rate::Infinite } else { Rate::Finite(v) })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    ClosedForm,
    Bisection,
}

/// Infimum of the birth rates at which a model survives with positive
/// probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalRate {
    pub value: Rate,
    pub model: Model,
    pub solver: Solver,
}

fn check_curve_args(model: Model, p: f64, r: f64, m: Option<u32>) -> Result<()> {
    ModelParams::new(p, r, 1.0)?;
    match (model, m) {
        (Model::RegularGraph, None) => Err(Error::invalid("m", "none", "the regular-graph model needs a degree")),
        (Model::RegularGraph, Some(0)) => Err(Error::invalid("m", 0, "graph degree must be at least 1")),
        (Model::Sedentary | Model::Dispersal, Some(m)) => {
            Err(Error::invalid("m", m, "a degree applies to the regular-graph model only"))
        }
        _ => Ok(()),
    }
}

/// Root of an increasing `f` with `f(0) < 1` crossing 1. Brackets by doubling
/// from 1, then bisects.
fn solve_unit_crossing(f: impl Fn(f64) -> f64) -> Result<f64> {
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut doublings = 0;
    while f(hi) <= 1.0 {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > BRACKET_DOUBLINGS {
            return Err(Error::NonConvergence("no birth rate brackets the critical value".into()));
        }
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= CRITICAL_TOL || mid == lo || mid == hi {
            break;
        }
        if f(mid) > 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Critical birth rate found numerically from the survival criterion.
pub fn critical_lambda(model: Model, p: f64, r: f64, m: Option<u32>) -> Result<CriticalRate> {
    check_curve_args(model, p, r, m)?;
    let finite = |value| CriticalRate { value: Rate::Finite(value), model, solver: Solver::Bisection };
    let infinite = CriticalRate { value: Rate::Infinite, model, solver: Solver::ClosedForm };
    match model {
        Model::Sedentary => {
            if r < 1.0 {
                return Ok(infinite);
            }
            // extinction probability (1 - p) / (lambda p) drops below 1
            solve_unit_crossing(|lambda| lambda * p / (1.0 - p)).map(finite)
        }
        Model::Dispersal => {
            let params = |lambda| ModelParams::new(p, r, lambda).expect("validated");
            solve_unit_crossing(|lambda| if lambda == 0.0 { p } else { mean_dispersal(&params(lambda)) })
                .map(finite)
        }
        Model::RegularGraph => {
            let m = m.expect("validated");
            if m == 1 {
                return Ok(infinite);
            }
            solve_unit_crossing(|lambda| mean_regular_graph_at(p, r, lambda, m as f64)).map(finite)
        }
    }
}

/// The closed forms available under a purely geometric effect.
pub fn critical_lambda_closed_form_r1(model: Model, p: f64, m: Option<u32>) -> Result<CriticalRate> {
    check_curve_args(model, p, 1.0, m)?;
    let ratio = (1.0 - p) / p;
    let value = match model {
        Model::Sedentary => Rate::Finite(ratio),
        Model::Dispersal => Rate::Finite((0.25 + ratio).sqrt() - 0.5),
        Model::RegularGraph => {
            let m = m.expect("validated") as f64;
            if m == 1.0 {
                Rate::Infinite
            } else {
                let b = 1.0 - m * p;
                let disc = b * b + 4.0 * m * (m - 1.0) * p * (1.0 - p);
                Rate::Finite((b + disc.sqrt()) / (2.0 * p * (m - 1.0)))
            }
        }
    };
    Ok(CriticalRate { value, model, solver: Solver::ClosedForm })
}

/// Expected one-step change of `f(i) = i + 1` for the embedded jump chain of
/// the sedentary colony in state `i`, in closed form.
pub fn drift_sedentary(i: u64, params: &ModelParams) -> f64 {
    let (p, q, r, lambda) = (params.p(), params.q(), params.r(), params.lambda());
    let i_f = i as f64;
    (lambda - i_f * (1.0 - r) * q) / (1.0 + lambda) - r * q * (1.0 - q.powf(i_f)) / (p * (1.0 + lambda))
}

/// The same drift summed transition by transition.
pub fn drift_sedentary_by_transitions(i: u64, params: &ModelParams) -> Result<f64> {
    let lambda = params.lambda();
    let mut total = lambda / (1.0 + lambda);
    for j in 0..=i {
        total += (j as f64 - i as f64) * mixed_collapse_pmf(i, j, params)? / (1.0 + lambda);
    }
    Ok(total)
}

/// For `r < 1` the drift is negative in every state above this bound.
pub fn drift_negative_beyond(params: &ModelParams) -> Option<u64> {
    if params.r() >= 1.0 {
        return None;
    }
    Some((params.lambda() / ((1.0 - params.r()) * params.q())).floor() as u64)
}
