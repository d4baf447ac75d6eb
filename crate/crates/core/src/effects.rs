//! Collapse effects: the law of the number of survivors when a catastrophe
//! strikes a colony of `i` individuals.
//!
//! Two effects are mixed. Under the binomial effect every individual survives
//! independently with probability `p`. Under the geometric effect individuals
//! are struck one at a time until the first one survives. With probability `r`
//! a collapse acts geometrically, otherwise binomially. The collapse rate is
//! fixed at 1 throughout the crate.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Colony sizes up to this bound use direct products; larger sizes go
/// through log space.
const DIRECT_PRODUCT_MAX: u64 = 50;

/// Largest graph degree accepted where a degree-`m` polynomial is built.
pub const MAX_DEGREE: u32 = 64;

/// The three population processes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Model {
    /// A single colony; survivors stay together (no dispersal).
    #[serde(rename = "c1")]
    Sedentary,
    /// Every collapse survivor founds a new colony.
    #[serde(rename = "c2")]
    Dispersal,
    /// Survivors jump to one of `m` neighbouring vertices; at most one new
    /// colony per vertex.
    #[serde(rename = "c3")]
    RegularGraph,
}

impl Model {
    pub fn tag(self) -> &'static str {
        match self {
            Model::Sedentary => "c1",
            Model::Dispersal => "c2",
            Model::RegularGraph => "c3",
        }
    }
}

impl std::fmt::Display for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

impl std::str::FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "c1" => Ok(Model::Sedentary),
            "c2" => Ok(Model::Dispersal),
            "c3" => Ok(Model::RegularGraph),
            _ => Err(Error::invalid("model", s, "expected one of c1, c2, c3")),
        }
    }
}

/// Parameters `(p, r, lambda)` plus the graph degree `m` for the regular-graph
/// process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    p: f64,
    r: f64,
    lambda: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    m: Option<u32>,
}

impl ModelParams {
    pub fn new(p: f64, r: f64, lambda: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::invalid("p", p, "must lie in the open interval (0, 1)"));
        }
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::invalid("r", r, "must lie in [0, 1]"));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::invalid("lambda", lambda, "must be a positive finite number"));
        }
        Ok(ModelParams { p, r, lambda, m: None })
    }

    pub fn with_degree(self, m: u32) -> Result<Self> {
        if m < 1 {
            return Err(Error::invalid("m", m, "graph degree must be at least 1"));
        }
        Ok(ModelParams { m: Some(m), ..self })
    }

    /// Survival probability of an exposed individual.
    pub fn p(&self) -> f64 {
        self.p
    }

    /// Death probability `1 - p`.
    pub fn q(&self) -> f64 {
        1.0 - self.p
    }

    /// Weight of the geometric effect in the mixture.
    pub fn r(&self) -> f64 {
        self.r
    }

    /// Birth rate.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn m(&self) -> Option<u32> {
        self.m
    }

    /// Degree, or an error naming `m` when it was never set.
    pub fn require_degree(&self) -> Result<u32> {
        self.m
            .ok_or_else(|| Error::invalid("m", "none", "the regular-graph model needs a degree"))
    }

    /// Degree bounded by [`MAX_DEGREE`], for code that expands the degree-`m`
    /// offspring polynomial.
    pub fn polynomial_degree(&self) -> Result<u32> {
        let m = self.require_degree()?;
        if m > MAX_DEGREE {
            return Err(Error::invalid("m", m, "degree above 64 is not supported here"));
        }
        Ok(m)
    }
}

fn check_counts(i: u64, j: u64, p: f64) -> Result<()> {
    if i < 1 {
        return Err(Error::Domain("collapse applied to an empty colony".into()));
    }
    if j > i {
        return Err(Error::Domain(format!("{j} survivors out of a colony of {i}")));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid("p", p, "must lie in the open interval (0, 1)"));
    }
    Ok(())
}

fn ln_choose(n: u64, k: u64) -> f64 {
    let k = k.min(n - k);
    (1..=k).map(|t| ((n - k + t) as f64 / t as f64).ln()).sum()
}

/// `C(i, j) p^j q^(i-j)`.
pub fn binomial_collapse_pmf(i: u64, j: u64, p: f64) -> Result<f64> {
    check_counts(i, j, p)?;
    let q = 1.0 - p;
    if i <= DIRECT_PRODUCT_MAX {
        let k = j.min(i - j);
        let mut choose = 1.0;
        for t in 1..=k {
            choose = choose * (i - k + t) as f64 / t as f64;
        }
        Ok(choose * p.powi(j as i32) * q.powi((i - j) as i32))
    } else {
        let ln = ln_choose(i, j) + j as f64 * p.ln() + (i - j) as f64 * q.ln();
        Ok(ln.exp())
    }
}

/// `q^i` for `j = 0`, `p q^(i-j)` otherwise.
pub fn geometric_collapse_pmf(i: u64, j: u64, p: f64) -> Result<f64> {
    check_counts(i, j, p)?;
    let q = 1.0 - p;
    let pow = |e: u64| {
        if e <= DIRECT_PRODUCT_MAX {
            q.powi(e as i32)
        } else {
            (e as f64 * q.ln()).exp()
        }
    };
    Ok(if j == 0 { pow(i) } else { p * pow(i - j) })
}

/// `r * geometric + (1 - r) * binomial`.
pub fn mixed_collapse_pmf(i: u64, j: u64, params: &ModelParams) -> Result<f64> {
    let g = geometric_collapse_pmf(i, j, params.p)?;
    let b = binomial_collapse_pmf(i, j, params.p)?;
    Ok(params.r * g + (1.0 - params.r) * b)
}

/// The effect a particular collapse acts with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CollapseEffect {
    Binomial,
    Geometric,
}

impl CollapseEffect {
    /// Chooses the geometric effect with probability `r`.
    pub fn draw<R: Rng + ?Sized>(params: &ModelParams, rng: &mut R) -> Self {
        if params.r >= 1.0 || (params.r > 0.0 && rng.random::<f64>() < params.r) {
            CollapseEffect::Geometric
        } else {
            CollapseEffect::Binomial
        }
    }

    /// Number of survivors among `i` exposed individuals.
    pub fn sample_survivors<R: Rng + ?Sized>(self, i: u64, p: f64, rng: &mut R) -> u64 {
        match self {
            CollapseEffect::Binomial => Binomial::new(i, p)
                .expect("p validated in (0, 1)")
                .sample(rng),
            CollapseEffect::Geometric => {
                // deaths before the first survivor
                let killed = Geometric::new(p).expect("p validated in (0, 1)").sample(rng);
                i.saturating_sub(killed)
            }
        }
    }
}

/// Applies one mixed collapse to a colony of `i` individuals.
pub fn sample_mixed_collapse<R: Rng + ?Sized>(i: u64, params: &ModelParams, rng: &mut R) -> u64 {
    CollapseEffect::draw(params, rng).sample_survivors(i, params.p, rng)
}
