//! Offspring laws of the colony-level branching processes.
//!
//! A colony founded by one individual grows at rate `lambda` until it
//! collapses (rate 1). Under dispersal every survivor founds a new colony, so
//! the number of new colonies has a zero-inflated geometric law. On an
//! `m`-regular graph the survivors pick neighbours uniformly and at most one
//! colony is founded per neighbour, which folds the survivor law through
//! surjection counts onto `{0, ..., m}`.
//!
//! The regular-graph coefficients involve alternating inclusion-exclusion
//! sums and are assembled in exact rational arithmetic. Every `f64` is a
//! dyadic rational, so the inputs convert without loss and only the final
//! coefficient is rounded.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::effects::{Model, ModelParams};
use crate::error::{Error, Result};

/// Probability that a freshly founded colony leaves no survivors, identical
/// for both collapse effects: `q / (1 + lambda p)`.
pub fn empty_collapse_probability(params: &ModelParams) -> f64 {
    params.q() / (1.0 + params.lambda() * params.p())
}

/// Ratio of the geometric tail of the binomial-effect survivor law.
fn binomial_tail_ratio(params: &ModelParams) -> f64 {
    let lp = params.lambda() * params.p();
    lp / (1.0 + lp)
}

/// Ratio of the geometric tail of the geometric-effect survivor law.
fn geometric_tail_ratio(params: &ModelParams) -> f64 {
    params.lambda() / (1.0 + params.lambda())
}

/// Survivors of one colony's collapse under the binomial effect.
pub fn pmf_binomial_survivors(k: u64, params: &ModelParams) -> f64 {
    if k == 0 {
        return empty_collapse_probability(params);
    }
    let (p, lambda) = (params.p(), params.lambda());
    let lp = lambda * p;
    (1.0 + lambda) / (lambda * (1.0 + lp)) * binomial_tail_ratio(params).powf(k as f64)
}

/// Survivors of one colony's collapse under the geometric effect.
pub fn pmf_geometric_survivors(k: u64, params: &ModelParams) -> f64 {
    if k == 0 {
        return empty_collapse_probability(params);
    }
    let p = params.p();
    let lp = params.lambda() * p;
    p / (1.0 + lp) * geometric_tail_ratio(params).powf((k - 1) as f64)
}

/// `P[Z_B >= from]`.
fn binomial_survivor_tail(from: u64, params: &ModelParams) -> f64 {
    if from == 0 {
        return 1.0;
    }
    (1.0 + params.lambda()) / params.lambda() * binomial_tail_ratio(params).powf(from as f64)
}

/// `P[Z_G >= from]`.
fn geometric_survivor_tail(from: u64, params: &ModelParams) -> f64 {
    if from == 0 {
        return 1.0;
    }
    let p = params.p();
    let lambda = params.lambda();
    p * (1.0 + lambda) / (1.0 + lambda * p) * geometric_tail_ratio(params).powf((from - 1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OffspringKind {
    /// Pure binomial effect with dispersal.
    Binomial,
    /// Pure geometric effect with dispersal.
    Geometric,
    /// `r`-mixture of the two, with dispersal.
    Mixed,
    /// Dispersal onto `m` neighbours.
    RegularGraph,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Support {
    /// `{0, ..., m}`.
    Bounded(u32),
    /// All of `N`, with a geometric tail.
    Unbounded,
}

/// The law of the number of colonies founded by one colony.
#[derive(Debug, Clone, PartialEq)]
pub struct OffspringPmf {
    kind: OffspringKind,
    params: ModelParams,
    /// Exact-then-rounded masses for the bounded regular-graph law.
    masses: Vec<f64>,
}

impl OffspringPmf {
    pub fn new(kind: OffspringKind, params: ModelParams) -> Result<Self> {
        let masses = match kind {
            OffspringKind::RegularGraph => regular_graph_masses(&params)?,
            _ => Vec::new(),
        };
        Ok(OffspringPmf { kind, params, masses })
    }

    /// Offspring law of the given dispersal model; the sedentary model has none.
    pub fn for_model(model: Model, params: ModelParams) -> Result<Self> {
        match model {
            Model::Dispersal => Self::new(OffspringKind::Mixed, params),
            Model::RegularGraph => Self::new(OffspringKind::RegularGraph, params),
            Model::Sedentary => Err(Error::Domain(
                "the sedentary model is not a branching process".into(),
            )),
        }
    }

    pub fn kind(&self) -> OffspringKind {
        self.kind
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn support(&self) -> Support {
        match self.kind {
            OffspringKind::RegularGraph => Support::Bounded(self.masses.len() as u32 - 1),
            _ => Support::Unbounded,
        }
    }

    pub fn mass(&self, k: u64) -> f64 {
        let params = &self.params;
        match self.kind {
            OffspringKind::Binomial => pmf_binomial_survivors(k, params),
            OffspringKind::Geometric => pmf_geometric_survivors(k, params),
            OffspringKind::Mixed => {
                let r = params.r();
                r * pmf_geometric_survivors(k, params) + (1.0 - r) * pmf_binomial_survivors(k, params)
            }
            OffspringKind::RegularGraph => self.masses.get(k as usize).copied().unwrap_or(0.0),
        }
    }

    /// `P[offspring >= from]`, from closed-form tail sums.
    pub fn tail_mass(&self, from: u64) -> f64 {
        let params = &self.params;
        match self.kind {
            OffspringKind::Binomial => binomial_survivor_tail(from, params),
            OffspringKind::Geometric => geometric_survivor_tail(from, params),
            OffspringKind::Mixed => {
                let r = params.r();
                r * geometric_survivor_tail(from, params)
                    + (1.0 - r) * binomial_survivor_tail(from, params)
            }
            OffspringKind::RegularGraph => {
                self.masses.iter().skip(from as usize).sum()
            }
        }
    }

    pub fn mean(&self) -> f64 {
        let params = &self.params;
        match self.kind {
            OffspringKind::Binomial => mean_dispersal(&ModelParams::new(params.p(), 0.0, params.lambda()).unwrap()),
            OffspringKind::Geometric => mean_dispersal(&ModelParams::new(params.p(), 1.0, params.lambda()).unwrap()),
            OffspringKind::Mixed => mean_dispersal(params),
            OffspringKind::RegularGraph => {
                self.masses.iter().enumerate().map(|(k, w)| k as f64 * w).sum()
            }
        }
    }

    /// Masses `0..=m` of the regular-graph law; empty for unbounded laws.
    pub fn coefficients(&self) -> &[f64] {
        &self.masses
    }
}

/// Offspring generating function of the dispersal model.
pub fn pgf_dispersal(s: f64, params: &ModelParams) -> f64 {
    let (p, r, lambda) = (params.p(), params.r(), params.lambda());
    let lp = lambda * p;
    let geometric = r * (lambda + 1.0) * p * s / (1.0 + lambda - lambda * s);
    let binomial = (1.0 - r) * (lambda + 1.0) * p * s / (1.0 + lp - lp * s);
    (params.q() + geometric + binomial) / (1.0 + lp)
}

fn pgf_dispersal_derivative(s: f64, params: &ModelParams) -> f64 {
    let (p, r, lambda) = (params.p(), params.r(), params.lambda());
    let lp = lambda * p;
    let g = 1.0 + lambda - lambda * s;
    let b = 1.0 + lp - lp * s;
    let geometric = r * (lambda + 1.0) * p * (1.0 + lambda) / (g * g);
    let binomial = (1.0 - r) * (lambda + 1.0) * p * (1.0 + lp) / (b * b);
    (geometric + binomial) / (1.0 + lp)
}

/// Mean number of colonies founded per colony under dispersal.
pub fn mean_dispersal(params: &ModelParams) -> f64 {
    let (p, r, lambda) = (params.p(), params.r(), params.lambda());
    p * (lambda + 1.0).powi(2) * r / (lambda * p + 1.0) + p * (lambda + 1.0) * (1.0 - r)
}

/// Mean number of colonies founded per colony on an `m`-regular graph. Valid
/// for any degree, including those above [`crate::effects::MAX_DEGREE`].
pub fn mean_regular_graph(params: &ModelParams) -> Result<f64> {
    let m = params.require_degree()? as f64;
    Ok(mean_regular_graph_at(params.p(), params.r(), params.lambda(), m))
}

pub(crate) fn mean_regular_graph_at(p: f64, r: f64, lambda: f64, m: f64) -> f64 {
    m * p * (lambda + 1.0).powi(2) * r / ((m + lambda) * (lambda * p + 1.0))
        + m * p * (lambda + 1.0) * (1.0 - r) / (m + lambda * p)
}

/// Number of surjections from a `j`-set onto a `k`-set, by inclusion-exclusion.
pub fn surjection_count(j: u32, k: u32) -> BigUint {
    let mut total = BigInt::zero();
    let mut choose = BigInt::one();
    for i in 0..=k {
        let term = &choose * BigInt::from(k - i).pow(j);
        if i % 2 == 0 {
            total += term;
        } else {
            total -= term;
        }
        choose = choose * BigInt::from(k - i) / BigInt::from(i + 1);
    }
    total
        .to_biguint()
        .expect("inclusion-exclusion count is nonnegative")
}

fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite parameter")
}

fn int(n: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

fn binomials(n: u32) -> Vec<BigInt> {
    let mut row = Vec::with_capacity(n as usize + 1);
    let mut c = BigInt::one();
    for i in 0..=n {
        row.push(c.clone());
        c = c * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    row
}

/// Exact parameter values shared by both forms of the regular-graph law.
struct ExactParams {
    m: u32,
    p: BigRational,
    q: BigRational,
    r: BigRational,
    lambda: BigRational,
    lp: BigRational,
    choose_m: Vec<BigInt>,
}

impl ExactParams {
    fn new(params: &ModelParams) -> Result<Self> {
        let m = params.polynomial_degree()?;
        let p = exact(params.p());
        let lambda = exact(params.lambda());
        Ok(ExactParams {
            m,
            q: BigRational::one() - &p,
            r: exact(params.r()),
            lp: &lambda * &p,
            p,
            lambda,
            choose_m: binomials(m),
        })
    }

    fn empty(&self) -> BigRational {
        &self.q / (BigRational::one() + &self.lp)
    }
}

/// Binomial and geometric parts of `P[offspring = k]` for `1 <= k <= m`, in the
/// geometric-series form indexed by the number of unoccupied targets `i`.
fn regular_graph_parts(e: &ExactParams, k: u32) -> (BigRational, BigRational) {
    let one = BigRational::one();
    let m = int(e.m as u64);
    let choose_k = binomials(k);
    let binom_den = &m * (&one + &e.lp);
    let geom_den = &m * (&one + &e.lambda);

    let mut binom_sum = BigRational::zero();
    let mut geom_sum = BigRational::zero();
    for i in 0..=k {
        let occupied = k - i;
        if occupied == 0 {
            continue;
        }
        let mut weight = BigRational::from_integer(&choose_k[i as usize] * BigInt::from(occupied).pow(k));
        if i % 2 == 1 {
            weight = -weight;
        }
        let o = int(occupied as u64);
        binom_sum += &weight / (&binom_den - &e.lp * &o);
        geom_sum += &weight / (&geom_den - &e.lambda * &o);
    }

    let choose = BigRational::from_integer(e.choose_m[k as usize].clone());
    let binom_ratio = &e.lp / &binom_den;
    let geom_ratio = &e.lambda / &geom_den;
    let binomial = &choose * (&m * (&one + &e.lambda) / &e.lambda)
        * pow(&binom_ratio, k)
        * binom_sum;
    let geometric = &choose * ((&one + &e.lambda) * &e.p / (&e.lp + &one))
        * pow(&geom_ratio, k - 1)
        * geom_sum;
    (binomial, geometric)
}

fn pow(x: &BigRational, e: u32) -> BigRational {
    num_traits::pow::pow(x.clone(), e as usize)
}

fn regular_graph_exact(params: &ModelParams) -> Result<Vec<BigRational>> {
    let e = ExactParams::new(params)?;
    let one = BigRational::one();
    let mut masses = Vec::with_capacity(e.m as usize + 1);
    masses.push(e.empty());
    for k in 1..=e.m {
        let (binomial, geometric) = regular_graph_parts(&e, k);
        masses.push(&e.r * geometric + (&one - &e.r) * binomial);
    }
    Ok(masses)
}

fn regular_graph_masses(params: &ModelParams) -> Result<Vec<f64>> {
    let exact = regular_graph_exact(params)?;
    if let Some(k) = exact.iter().position(|w| w.is_negative()) {
        return Err(Error::Domain(format!("negative offspring mass at k = {k}")));
    }
    Ok(exact.iter().map(to_f64).collect())
}

/// `P[offspring = k]` on an `m`-regular graph.
pub fn pmf_offspring_regular_graph(k: u32, params: &ModelParams) -> Result<f64> {
    let m = params.polynomial_degree()?;
    if k > m {
        return Err(Error::Domain(format!("offspring count {k} exceeds degree {m}")));
    }
    if k == 0 {
        return Ok(empty_collapse_probability(params));
    }
    let e = ExactParams::new(params)?;
    let (binomial, geometric) = regular_graph_parts(&e, k);
    let r = &e.r;
    Ok(to_f64(&(r * geometric + (BigRational::one() - r) * binomial)))
}

/// The regular-graph generating function in its double-sum form, indexed by
/// the number of occupied targets `j` and evaluated exactly at `s`.
///
/// This is algebraically the same polynomial as [`pgf_regular_graph`] but is
/// assembled along a different route, which makes it a check on the index
/// bookkeeping of the coefficient form.
pub fn pgf_regular_graph_double_sum(s: f64, params: &ModelParams) -> Result<f64> {
    let e = ExactParams::new(params)?;
    let one = BigRational::one();
    let s = exact(s);
    let m = int(e.m as u64);
    let binom_den = &m * (&one + &e.lp);
    let geom_den = &m * (&one + &e.lambda);
    let binom_step = -(&e.lp * &s) / &binom_den;
    let geom_step = -(&e.lambda * &s) / &geom_den;

    let mut binom_outer = BigRational::zero();
    let mut geom_outer = BigRational::zero();
    for k in 1..=e.m {
        let choose_k = binomials(k);
        let mut binom_inner = BigRational::zero();
        let mut geom_inner = BigRational::zero();
        for j in 1..=k {
            let base = BigRational::from_integer(&choose_k[j as usize] * BigInt::from(j).pow(k));
            let jj = int(j as u64);
            // (-1)^j and (-1)^(j-1)
            let (b, g) = if j % 2 == 0 { (base.clone(), -base) } else { (-base.clone(), base) };
            binom_inner += b / (&binom_den - &e.lp * &jj);
            geom_inner += g / (&geom_den - &e.lambda * &jj);
        }
        let choose = BigRational::from_integer(e.choose_m[k as usize].clone());
        binom_outer += &choose * pow(&binom_step, k) * binom_inner;
        geom_outer += &choose * pow(&geom_step, k - 1) * geom_inner;
    }
    let empty = e.empty();
    let psi_b = &empty + &m * (&one + &e.lambda) / &e.lambda * binom_outer;
    let psi_g = &empty + (&one + &e.lambda) * &e.p * &s / (&e.lp + &one) * geom_outer;
    Ok(to_f64(&(&e.r * psi_g + (&one - &e.r) * psi_b)))
}

/// Offspring generating function on an `m`-regular graph, as a polynomial
/// whose coefficients are [`pmf_offspring_regular_graph`].
pub fn pgf_regular_graph(s: f64, params: &ModelParams) -> Result<f64> {
    Ok(horner(&regular_graph_masses(params)?, s))
}

fn horner(coefficients: &[f64], s: f64) -> f64 {
    coefficients.iter().rev().fold(0.0, |acc, c| acc * s + c)
}

/// A probability generating function on `[0, 1]`.
pub trait Pgf {
    fn value(&self, s: f64) -> f64;

    /// Analytic derivative, when available.
    fn derivative(&self, _s: f64) -> Option<f64> {
        None
    }

    /// Offspring mean, from the closed form where one exists.
    fn mean(&self) -> f64;
}

/// Generating function of a dispersal model's offspring law.
#[derive(Debug, Clone, PartialEq)]
pub enum PgfEvaluator {
    Dispersal(ModelParams),
    RegularGraph {
        params: ModelParams,
        coefficients: Vec<f64>,
    },
}

impl PgfEvaluator {
    pub fn dispersal(params: ModelParams) -> Self {
        PgfEvaluator::Dispersal(params)
    }

    pub fn regular_graph(params: ModelParams) -> Result<Self> {
        Ok(PgfEvaluator::RegularGraph {
            coefficients: regular_graph_masses(&params)?,
            params,
        })
    }

    pub fn for_model(model: Model, params: ModelParams) -> Result<Self> {
        match model {
            Model::Dispersal => Ok(Self::dispersal(params)),
            Model::RegularGraph => Self::regular_graph(params),
            Model::Sedentary => Err(Error::Domain(
                "the sedentary model has no offspring generating function".into(),
            )),
        }
    }

    pub fn model(&self) -> Model {
        match self {
            PgfEvaluator::Dispersal(_) => Model::Dispersal,
            PgfEvaluator::RegularGraph { .. } => Model::RegularGraph,
        }
    }

    pub fn params(&self) -> &ModelParams {
        match self {
            PgfEvaluator::Dispersal(params) => params,
            PgfEvaluator::RegularGraph { params, .. } => params,
        }
    }

    /// Polynomial coefficients, for the regular-graph model only.
    pub fn coefficients(&self) -> Option<&[f64]> {
        match self {
            PgfEvaluator::Dispersal(_) => None,
            PgfEvaluator::RegularGraph { coefficients, .. } => Some(coefficients),
        }
    }
}

impl Pgf for PgfEvaluator {
    fn value(&self, s: f64) -> f64 {
        match self {
            PgfEvaluator::Dispersal(params) => pgf_dispersal(s, params),
            PgfEvaluator::RegularGraph { coefficients, .. } => horner(coefficients, s),
        }
    }

    fn derivative(&self, s: f64) -> Option<f64> {
        Some(match self {
            PgfEvaluator::Dispersal(params) => pgf_dispersal_derivative(s, params),
            PgfEvaluator::RegularGraph { coefficients, .. } => coefficients
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (k, c)| acc * s + k as f64 * c),
        })
    }

    fn mean(&self) -> f64 {
        match self {
            PgfEvaluator::Dispersal(params) => mean_dispersal(params),
            PgfEvaluator::RegularGraph { params, .. } => {
                mean_regular_graph(params).expect("degree checked at construction")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(p: f64, r: f64, lambda: f64) -> ModelParams {
        ModelParams::new(p, r, lambda).unwrap()
    }

    fn graph(p: f64, r: f64, lambda: f64, m: u32) -> ModelParams {
        params(p, r, lambda).with_degree(m).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() < tol
    }

    #[test]
    fn survivor_law_examples() {
        let half = params(0.5, 0.0, 1.0);
        assert!(close(pmf_binomial_survivors(0, &half), 1.0 / 3.0, 1e-15));
        assert!(close(pmf_binomial_survivors(1, &half), 4.0 / 9.0, 1e-15));
        assert!(close(pmf_binomial_survivors(2, &half), 4.0 / 27.0, 1e-15));
        assert!(close(pmf_geometric_survivors(0, &half), 1.0 / 3.0, 1e-15));
        assert!(close(pmf_geometric_survivors(1, &half), 1.0 / 3.0, 1e-15));
        assert!(close(pmf_geometric_survivors(2, &half), 1.0 / 6.0, 1e-15));
    }

    #[test]
    fn dispersal_pgf_examples() {
        let ex = |r| params(0.4, r, 1.0);
        for r in [0.0, 0.3, 1.0] {
            assert!(close(pgf_dispersal(1.0, &ex(r)), 1.0, 1e-15));
            assert!(close(pgf_dispersal(0.0, &ex(r)), 3.0 / 7.0, 1e-15));
        }
        assert!(close(pgf_dispersal(0.5, &params(0.5, 0.0, 1.0)), 0.6, 1e-15));
    }

    #[test]
    fn dispersal_mean_examples() {
        assert!(close(mean_dispersal(&params(0.4, 1.0, 1.0)), 8.0 / 7.0, 1e-15));
        assert!(close(mean_dispersal(&params(0.4, 0.0, 1.0)), 0.8, 1e-15));
        assert!(close(mean_dispersal(&params(0.4, 7.0 / 12.0, 1.0)), 1.0, 1e-15));
    }

    fn brute_surjections(j: u32, k: u32) -> u64 {
        // enumerate all k^j maps
        let total = (k as u64).pow(j);
        (0..total)
            .filter(|&code| {
                let mut hit = 0u64;
                let mut c = code;
                for _ in 0..j {
                    hit |= 1 << (c % k as u64);
                    c /= k as u64;
                }
                hit.count_ones() == k
            })
            .count() as u64
    }

    #[test]
    fn surjection_examples() {
        assert_eq!(surjection_count(3, 2), BigUint::from(6u32));
        assert_eq!(surjection_count(4, 4), BigUint::from(24u32));
        assert_eq!(surjection_count(2, 3), BigUint::from(0u32));
        assert_eq!(surjection_count(0, 0), BigUint::from(1u32));
        assert_eq!(surjection_count(3, 0), BigUint::from(0u32));
        for j in 1..=6 {
            for k in 1..=5 {
                assert_eq!(surjection_count(j, k), BigUint::from(brute_surjections(j, k)), "T({j},{k})");
            }
        }
    }

    #[test]
    fn regular_graph_published_coefficients() {
        let at0 = graph(2.0 / 3.0, 0.0, 1.0, 3);
        let at1 = graph(2.0 / 3.0, 1.0, 1.0, 3);
        assert!(close(pmf_offspring_regular_graph(0, &at0).unwrap(), 0.2, 1e-15));
        assert!(close(pmf_offspring_regular_graph(3, &at0).unwrap(), 32.0 / 715.0, 1e-15));
        assert!(close(pmf_offspring_regular_graph(2, &at0).unwrap(), 144.0 / 715.0, 1e-15));
        assert!(close(pmf_offspring_regular_graph(1, &at0).unwrap(), 36.0 / 65.0, 1e-15));
        assert!(close(pmf_offspring_regular_graph(1, &at1).unwrap(), 156.0 / 325.0, 1e-15));
        assert!(close(pmf_offspring_regular_graph(2, &at1).unwrap(), 138.0 / 3575.0 + 144.0 / 715.0, 1e-15));
        assert!(close(pmf_offspring_regular_graph(3, &at1).unwrap(), 126.0 / 3575.0 + 32.0 / 715.0, 1e-15));
        assert!(pmf_offspring_regular_graph(4, &at0).is_err());
    }

    #[test]
    fn regular_graph_pgf_examples() {
        let at0 = graph(2.0 / 3.0, 0.0, 1.0, 3);
        assert!(close(pgf_regular_graph(1.0, &at0).unwrap(), 1.0, 1e-15));
        assert!(close(pgf_regular_graph(0.0, &at0).unwrap(), 0.2, 1e-15));
        let s: f64 = 0.5;
        let published = 32.0 / 715.0 * s.powi(3) + 144.0 / 715.0 * s * s + 36.0 / 65.0 * s + 0.2;
        assert!(close(pgf_regular_graph(s, &at0).unwrap(), published, 1e-15));
        assert!(close(published, 0.532867, 1e-6));
    }

    #[test]
    fn regular_graph_means() {
        assert!(close(mean_regular_graph(&graph(2.0 / 3.0, 0.0, 1.0, 3)).unwrap(), 12.0 / 11.0, 1e-15));
        assert!(close(mean_regular_graph(&graph(2.0 / 3.0, 1.0, 1.0, 3)).unwrap(), 1.2, 1e-15));
        // one neighbour: never more than one new colony on average
        for lambda in [0.01, 1.0, 10.0, 1e3, 1e6] {
            for r in [0.0, 0.5, 1.0] {
                assert!(mean_regular_graph(&graph(0.9, r, lambda, 1)).unwrap() <= 1.0);
            }
        }
        // published polynomial at r = 0 has derivative 780/715 at 1
        let pgf = PgfEvaluator::regular_graph(graph(2.0 / 3.0, 0.0, 1.0, 3)).unwrap();
        assert!(close(pgf.derivative(1.0).unwrap(), 780.0 / 715.0, 1e-14));
    }

    /// Positive-term oracle: `C(m,k) sum_{j>=k} T(j,k) m^-j P[Z=j]`, summed
    /// until the survivor tail is negligible.
    fn series_oracle(k: u32, params: &ModelParams) -> f64 {
        let m = params.m().unwrap();
        if k == 0 {
            return empty_collapse_probability(params);
        }
        let survivors = OffspringPmf::new(OffspringKind::Mixed, *params).unwrap();
        let choose = binomials(m)[k as usize].to_f64().unwrap();
        let mut total = 0.0;
        let mut j = k;
        loop {
            let t = surjection_count(j, k).to_f64().unwrap();
            let ln = t.ln() - j as f64 * (m as f64).ln();
            total += choose * ln.exp() * survivors.mass(j as u64);
            if survivors.tail_mass(j as u64 + 1) < 1e-16 || j > 2000 {
                break;
            }
            j += 1;
        }
        total
    }

    #[test]
    fn coefficient_form_matches_series_oracle() {
        for m in 1..=6 {
            for &(p, lambda) in &[(0.3, 0.5), (0.7, 1.0), (0.5, 3.0)] {
                for r in [0.0, 0.5, 1.0] {
                    let params = graph(p, r, lambda, m);
                    for k in 0..=m {
                        let a = pmf_offspring_regular_graph(k, &params).unwrap();
                        let b = series_oracle(k, &params);
                        assert!(close(a, b, 1e-12), "m={m} p={p} l={lambda} r={r} k={k}: {a} vs {b}");
                    }
                }
            }
        }
    }

    #[test]
    fn double_sum_matches_coefficient_form() {
        for m in 1..=8 {
            for r in [0.0, 0.5, 1.0] {
                let params = graph(0.45, r, 2.0, m);
                for s in [0.0, 0.25, 0.6, 1.0] {
                    let a = pgf_regular_graph(s, &params).unwrap();
                    let b = pgf_regular_graph_double_sum(s, &params).unwrap();
                    assert!(close(a, b, 1e-12), "m={m} r={r} s={s}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn large_degree_is_well_conditioned() {
        let params = graph(0.6, 0.5, 5.0, 64);
        let pmf = OffspringPmf::new(OffspringKind::RegularGraph, params).unwrap();
        let total: f64 = pmf.coefficients().iter().sum();
        assert!(close(total, 1.0, 1e-12));
        assert!(pmf.coefficients().iter().all(|&w| w >= 0.0));
        assert!(close(pmf.mean(), mean_regular_graph(&params).unwrap(), 1e-10));
        assert!(PgfEvaluator::regular_graph(graph(0.6, 0.5, 5.0, 65)).is_err());
    }

    #[test]
    fn tails_are_closed_form() {
        let params = params(0.35, 0.4, 2.5);
        for kind in [OffspringKind::Binomial, OffspringKind::Geometric, OffspringKind::Mixed] {
            let pmf = OffspringPmf::new(kind, params).unwrap();
            for from in [0u64, 1, 3, 10] {
                let truncated: f64 = (from..2000).map(|k| pmf.mass(k)).sum();
                assert!(close(pmf.tail_mass(from), truncated, 1e-12), "{kind:?} from={from}");
            }
        }
    }
}
