//! Seeded Monte Carlo for the three processes.
//!
//! The sedentary colony is simulated on its embedded jump chain. The dispersal
//! models are simulated generation by generation as Galton-Watson processes
//! whose offspring are drawn from the closed-form zero-inflated geometric
//! survivor laws. An independent event-level sampler (exponential lifetime,
//! Poisson births, then a collapse) is kept alongside as a distributional
//! oracle for those laws.
//!
//! Replicate `i` draws from its own ChaCha8 stream keyed by `(base_seed, i)`
//! and aggregation only adds integer counts, so results do not depend on the
//! number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Exp1, Gamma, Geometric, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{ExtinctionEstimate, Method};
use crate::effects::{sample_mixed_collapse, Model, ModelParams};
use crate::error::{Error, Result};
use crate::offspring::{empty_collapse_probability, OffspringKind, OffspringPmf};

/// Generations at or above this many colonies are advanced by drawing the
/// next generation's total directly instead of colony by colony.
pub const BULK_THRESHOLD: u64 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub replicates: u64,
    pub generation_cap: u64,
    /// Colonies alive in one generation (or individuals, for the sedentary
    /// colony) at which a run is declared surviving.
    pub population_cap: u64,
    pub step_cap: u64,
    pub base_seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            replicates: 10_000,
            generation_cap: 10_000,
            population_cap: 10_000_000,
            step_cap: 10_000_000,
            base_seed: 0,
        }
    }
}

impl SimConfig {
    pub fn new(replicates: u64, base_seed: u64) -> Self {
        SimConfig { replicates, base_seed, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("n", self.replicates),
            ("gen-cap", self.generation_cap),
            ("pop-cap", self.population_cap),
            ("step-cap", self.step_cap),
        ];
        for (name, value) in checks {
            if value < 1 {
                return Err(Error::invalid(name, value, "must be at least 1"));
            }
        }
        Ok(())
    }
}

/// The random stream of one replicate.
pub fn replicate_rng(base_seed: u64, replicate_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(replicate_index);
    rng
}

/// How a single replicate ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub extinct: bool,
    /// Stopped by the generation or step cap.
    pub censored: bool,
    /// Stopped by the population cap.
    pub escaped: bool,
    pub generations_or_steps: u64,
    pub max_population: u64,
}

impl RunOutcome {
    fn extinct(time: u64, max_population: u64) -> Self {
        RunOutcome { extinct: true, censored: false, escaped: false, generations_or_steps: time, max_population }
    }

    fn censored(time: u64, max_population: u64) -> Self {
        RunOutcome { extinct: false, censored: true, escaped: false, generations_or_steps: time, max_population }
    }

    fn escaped(time: u64, max_population: u64) -> Self {
        RunOutcome { extinct: false, censored: false, escaped: true, generations_or_steps: time, max_population }
    }
}

/// Survivors of one colony's collapse, drawn event by event: lifetime
/// `T ~ Exp(1)`, `N ~ Poisson(lambda T)` births, then a mixed collapse of the
/// `N + 1` individuals.
pub fn sample_survivors_event_level<R: Rng + ?Sized>(params: &ModelParams, rng: &mut R) -> u64 {
    let lifetime: f64 = Exp1.sample(rng);
    let mean_births = params.lambda() * lifetime;
    let births = if mean_births > 0.0 {
        Poisson::new(mean_births).expect("positive finite mean").sample(rng) as u64
    } else {
        0
    };
    sample_mixed_collapse(births + 1, params, rng)
}

/// Number of distinct slots hit when `balls` are thrown uniformly into `m`.
pub fn occupied_slots<R: Rng + ?Sized>(balls: u64, m: u32, rng: &mut R) -> u64 {
    let mut hit = vec![false; m as usize];
    let mut occupied = 0u64;
    for _ in 0..balls {
        let slot = rng.random_range(0..m as usize);
        if !hit[slot] {
            hit[slot] = true;
            occupied += 1;
            if occupied == m as u64 {
                break;
            }
        }
    }
    occupied
}

/// Draws offspring counts for the dispersal models.
#[derive(Debug, Clone)]
pub struct OffspringSampler {
    model: Model,
    params: ModelParams,
    /// Probability that a collapse leaves at least one survivor.
    nonempty: f64,
    binomial_extra: Geometric,
    geometric_extra: Geometric,
    /// Offspring law on the regular graph, for bulk generations only.
    graph_masses: Vec<f64>,
}

impl OffspringSampler {
    pub fn new(model: Model, params: ModelParams) -> Result<Self> {
        let graph_masses = match model {
            Model::Sedentary => {
                return Err(Error::Domain("the sedentary model has no offspring law".into()))
            }
            Model::Dispersal => Vec::new(),
            Model::RegularGraph => OffspringPmf::new(OffspringKind::RegularGraph, params)?
                .coefficients()
                .to_vec(),
        };
        let lp = params.lambda() * params.p();
        let binomial_extra = Geometric::new(1.0 / (1.0 + lp)).expect("probability in (0, 1]");
        let geometric_extra =
            Geometric::new(1.0 / (1.0 + params.lambda())).expect("probability in (0, 1]");
        Ok(OffspringSampler {
            model,
            params,
            nonempty: 1.0 - empty_collapse_probability(&params),
            binomial_extra,
            geometric_extra,
            graph_masses,
        })
    }

    /// Survivors of one collapse, from the zero-inflated geometric laws.
    pub fn sample_survivors<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        if rng.random::<f64>() >= self.nonempty {
            return 0;
        }
        let r = self.params.r();
        let geometric = r >= 1.0 || (r > 0.0 && rng.random::<f64>() < r);
        1 + if geometric {
            self.geometric_extra.sample(rng)
        } else {
            self.binomial_extra.sample(rng)
        }
    }

    /// New colonies founded by one colony.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let survivors = self.sample_survivors(rng);
        match self.model {
            Model::RegularGraph => {
                let m = self.params.m().expect("checked at construction");
                occupied_slots(survivors, m, rng)
            }
            _ => survivors,
        }
    }

    /// Total colonies founded by `colonies` independent colonies, drawn in
    /// O(1) (dispersal) or O(m) (regular graph) time.
    pub fn sample_total<R: Rng + ?Sized>(&self, colonies: u64, rng: &mut R) -> u64 {
        if colonies == 0 {
            return 0;
        }
        match self.model {
            Model::RegularGraph => {
                let mut remaining = colonies;
                let mut remaining_mass = 1.0;
                let mut total = 0;
                for (k, &w) in self.graph_masses.iter().enumerate().skip(1).rev() {
                    if remaining == 0 {
                        break;
                    }
                    let share = (w / remaining_mass).clamp(0.0, 1.0);
                    let n = binomial(remaining, share, rng);
                    total += k as u64 * n;
                    remaining -= n;
                    remaining_mass -= w;
                }
                total
            }
            _ => {
                let nonempty = binomial(colonies, self.nonempty, rng);
                let geometric = binomial(nonempty, self.params.r(), rng);
                let binomial_part = nonempty - geometric;
                let lp = self.params.lambda() * self.params.p();
                nonempty
                    + negative_binomial(geometric, self.params.lambda(), rng)
                    + negative_binomial(binomial_part, lp, rng)
            }
        }
    }
}

fn binomial<R: Rng + ?Sized>(n: u64, p: f64, rng: &mut R) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p).expect("probability in (0, 1)").sample(rng)
}

/// Sum of `n` geometric failure counts with odds `odds = (1 - s) / s`, via the
/// gamma-Poisson mixture.
fn negative_binomial<R: Rng + ?Sized>(n: u64, odds: f64, rng: &mut R) -> u64 {
    if n == 0 {
        return 0;
    }
    let rate: f64 = Gamma::new(n as f64, odds).expect("positive shape and scale").sample(rng);
    if rate <= 0.0 {
        return 0;
    }
    Poisson::new(rate).expect("positive finite mean").sample(rng) as u64
}

/// One offspring draw for a dispersal model.
pub fn sample_offspring<R: Rng + ?Sized>(model: Model, params: &ModelParams, rng: &mut R) -> Result<u64> {
    Ok(OffspringSampler::new(model, *params)?.sample(rng))
}

/// Embedded jump chain of the sedentary colony, from one individual.
pub fn run_sedentary(params: &ModelParams, config: &SimConfig, replicate_index: u64) -> RunOutcome {
    let mut rng = replicate_rng(config.base_seed, replicate_index);
    let birth = params.lambda() / (1.0 + params.lambda());
    let mut state = 1u64;
    let mut max_population = 1;
    let mut steps = 0u64;
    loop {
        if state == 0 {
            return RunOutcome::extinct(steps, max_population);
        }
        if state >= config.population_cap {
            return RunOutcome::escaped(steps, max_population);
        }
        if steps >= config.step_cap {
            return RunOutcome::censored(steps, max_population);
        }
        if rng.random::<f64>() < birth {
            state += 1;
            max_population = max_population.max(state);
        } else {
            state = sample_mixed_collapse(state, params, &mut rng);
        }
        steps += 1;
    }
}

/// Colony-count Galton-Watson process of a dispersal model, from one colony.
pub fn run_branching(
    model: Model,
    params: &ModelParams,
    config: &SimConfig,
    replicate_index: u64,
) -> Result<RunOutcome> {
    let sampler = OffspringSampler::new(model, *params)?;
    Ok(run_with_sampler(&sampler, config, replicate_index))
}

fn run_with_sampler(sampler: &OffspringSampler, config: &SimConfig, replicate_index: u64) -> RunOutcome {
    let mut rng = replicate_rng(config.base_seed, replicate_index);
    let mut alive = 1u64;
    let mut max_population = 1;
    let mut generation = 0u64;
    loop {
        if alive == 0 {
            return RunOutcome::extinct(generation, max_population);
        }
        if alive >= config.population_cap {
            return RunOutcome::escaped(generation, max_population);
        }
        if generation >= config.generation_cap {
            return RunOutcome::censored(generation, max_population);
        }
        alive = if alive >= BULK_THRESHOLD {
            sampler.sample_total(alive, &mut rng)
        } else {
            (0..alive).map(|_| sampler.sample(&mut rng)).sum()
        };
        max_population = max_population.max(alive);
        generation += 1;
    }
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
struct Tally {
    replicates: u64,
    extinct: u64,
    censored: u64,
    escaped: u64,
    extinction_time: u64,
}

impl Tally {
    fn of(outcome: RunOutcome) -> Self {
        Tally {
            replicates: 1,
            extinct: outcome.extinct as u64,
            censored: outcome.censored as u64,
            escaped: outcome.escaped as u64,
            extinction_time: if outcome.extinct { outcome.generations_or_steps } else { 0 },
        }
    }

    fn merge(self, other: Self) -> Self {
        Tally {
            replicates: self.replicates + other.replicates,
            extinct: self.extinct + other.extinct,
            censored: self.censored + other.censored,
            escaped: self.escaped + other.escaped,
            extinction_time: self.extinction_time + other.extinction_time,
        }
    }
}

/// Monte Carlo extinction probability. Runs stopped by a cap count as
/// surviving, which biases the estimate downward by at most
/// `censored_fraction + escaped_fraction`.
pub fn estimate_extinction(model: Model, params: &ModelParams, config: &SimConfig) -> Result<ExtinctionEstimate> {
    config.validate()?;
    let sampler = match model {
        Model::Sedentary => None,
        _ => Some(OffspringSampler::new(model, *params)?),
    };
    let tally = (0..config.replicates)
        .into_par_iter()
        .map(|index| {
            Tally::of(match &sampler {
                None => run_sedentary(params, config, index),
                Some(sampler) => run_with_sampler(sampler, config, index),
            })
        })
        .reduce(Tally::default, Tally::merge);

    let n = tally.replicates as f64;
    let probability = tally.extinct as f64 / n;
    Ok(ExtinctionEstimate {
        probability,
        method: Method::MonteCarlo,
        iterations: tally.replicates,
        ci_half_width: 1.96 * (probability * (1.0 - probability) / n).sqrt(),
        censored_fraction: tally.censored as f64 / n,
        escaped_fraction: tally.escaped as f64 / n,
        mean_extinction_time: (tally.extinct > 0)
            .then(|| tally.extinction_time as f64 / tally.extinct as f64),
    })
}

/// Histogram of `n` draws of `draw`, each draw on stream `(seed, i)`.
pub fn histogram<F>(n: u64, seed: u64, draw: F) -> Vec<u64>
where
    F: Fn(&mut ChaCha8Rng) -> u64 + Sync,
{
    let draws: Vec<u64> = (0..n)
        .into_par_iter()
        .map(|i| draw(&mut replicate_rng(seed, i)))
        .collect();
    let top = draws.iter().copied().max().unwrap_or(0) as usize;
    let mut counts = vec![0u64; top + 1];
    for d in draws {
        counts[d as usize] += 1;
    }
    counts
}

/// Total-variation distance between an empirical histogram and an offspring
/// law, including the law's mass beyond the largest observed value.
pub fn total_variation(counts: &[u64], pmf: &OffspringPmf) -> f64 {
    let n: u64 = counts.iter().sum();
    let observed: f64 = counts
        .iter()
        .enumerate()
        .map(|(k, &c)| (c as f64 / n as f64 - pmf.mass(k as u64)).abs())
        .sum();
    0.5 * (observed + pmf.tail_mass(counts.len() as u64))
}
