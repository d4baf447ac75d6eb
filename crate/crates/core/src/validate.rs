//! Built-in cross-checks: published golden values, closed forms against the
//! numerical solvers, the exact polynomial against its double-sum form, and
//! small Monte Carlo runs against the analytic answers.
//!
//! Every check reports its worst deviation and passes iff that deviation is
//! strictly below `tolerance * scale`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{
    self, critical_lambda, critical_lambda_closed_form_r1, drift_negative_beyond, drift_sedentary,
    drift_sedentary_by_transitions, extinction_dispersal, extinction_regular_graph, FIXED_POINT_TOL,
};
use crate::effects::{Model, ModelParams};
use crate::numfmt;
use crate::offspring::{
    pgf_dispersal, pgf_regular_graph, pgf_regular_graph_double_sum, pmf_offspring_regular_graph,
    OffspringPmf,
};
use crate::simulate::{self, histogram, sample_survivors_event_level, total_variation, SimConfig};
use crate::sweep::SURVIVAL_GAP;

pub const CHECK_SEED: u64 = 20_240_601;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    #[serde(with = "numfmt::real")]
    pub worst: f64,
    #[serde(with = "numfmt::real")]
    pub tolerance: f64,
    pub detail: String,
}

struct Check {
    name: &'static str,
    tolerance: f64,
    run: fn() -> (f64, String),
}

const P_GRID: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
const R_GRID: [f64; 3] = [0.0, 0.5, 1.0];

fn params(p: f64, r: f64, lambda: f64) -> ModelParams {
    ModelParams::new(p, r, lambda).expect("grid parameters are valid")
}

fn graph(p: f64, r: f64, lambda: f64, m: u32) -> ModelParams {
    params(p, r, lambda).with_degree(m).expect("grid degree is valid")
}

fn worst_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, |acc, x| if x.is_nan() || acc.is_nan() { f64::NAN } else { acc.max(x) })
}

fn example_dispersal() -> (f64, String) {
    let worst = worst_of((0..=10).map(|k| {
        let r = k as f64 / 10.0;
        let golden = if r <= 7.0 / 12.0 {
            1.0
        } else {
            (12.0 * r + 49.0 - (144.0 * r * r + 1176.0 * r + 49.0).sqrt()) / 28.0
        };
        match extinction_dispersal(&params(0.4, r, 1.0), FIXED_POINT_TOL) {
            Ok(e) => (e.probability - golden).abs(),
            Err(_) => f64::INFINITY,
        }
    }));
    (worst, "p = 2/5, lambda = 1, r in 0..1 step 0.1".into())
}

fn example_regular_graph() -> (f64, String) {
    let worst = worst_of([0.0, 0.25, 0.5, 0.75, 1.0].map(|r: f64| {
        let golden = (-440.0 - 132.0 * r + (22.0 * (14000.0 + 9375.0 * r + 792.0 * r * r)).sqrt())
            / (2.0 * (80.0 + 63.0 * r));
        match extinction_regular_graph(&graph(2.0 / 3.0, r, 1.0, 3), FIXED_POINT_TOL) {
            Ok(e) => (e.probability - golden).abs(),
            Err(_) => f64::INFINITY,
        }
    }));
    (worst, "p = 2/3, lambda = 1, m = 3, r in {0, 1/4, 1/2, 3/4, 1}".into())
}

fn example_coefficients() -> (f64, String) {
    let published = [
        (0.0, [0.2, 36.0 / 65.0, 144.0 / 715.0, 32.0 / 715.0]),
        (1.0, [0.2, 156.0 / 325.0, 138.0 / 3575.0 + 144.0 / 715.0, 126.0 / 3575.0 + 32.0 / 715.0]),
    ];
    let worst = worst_of(published.iter().flat_map(|(r, coefficients)| {
        let at = graph(2.0 / 3.0, *r, 1.0, 3);
        coefficients.iter().enumerate().map(move |(k, c)| match pmf_offspring_regular_graph(k as u32, &at) {
            Ok(v) => (v - c).abs(),
            Err(_) => f64::INFINITY,
        })
    }));
    (worst, "offspring law on the 3-regular graph at r = 0 and r = 1".into())
}

fn dispersal_closed_forms() -> (f64, String) {
    let mut deviations = Vec::new();
    for p in P_GRID {
        for lambda in [0.25, 1.0, 4.0] {
            let q = 1.0 - p;
            let pure_binomial = (q / (lambda * p)).min(1.0);
            let pure_geometric = (q * (lambda + 1.0) / (lambda * (1.0 + lambda * p))).min(1.0);
            for (r, closed) in [(0.0, pure_binomial), (1.0, pure_geometric)] {
                deviations.push(match extinction_dispersal(&params(p, r, lambda), FIXED_POINT_TOL) {
                    Ok(e) => (e.probability - closed).abs(),
                    Err(_) => f64::INFINITY,
                });
            }
        }
    }
    (worst_of(deviations), "fixed point against the r = 0 and r = 1 closed forms".into())
}

fn survival_consistency() -> (f64, String) {
    let lambdas = [0.25, 0.5, 1.0, 2.0, 4.0];
    let mut cases = Vec::new();
    for &p in &[0.1, 0.3, 0.5, 0.7, 0.9] {
        for &lambda in &lambdas {
            for r in R_GRID {
                cases.push((Model::Dispersal, params(p, r, lambda)));
                for m in 1..=8 {
                    cases.push((Model::RegularGraph, graph(p, r, lambda, m)));
                }
            }
        }
    }
    let mismatches = cases
        .par_iter()
        .filter(|(model, params)| {
            let survives = analytic::survives(*model, params);
            let rho = analytic::extinction(*model, params, FIXED_POINT_TOL);
            match (survives, rho) {
                (Ok(s), Ok(e)) => s != (e.probability < 1.0 - SURVIVAL_GAP),
                _ => true,
            }
        })
        .count();
    (mismatches as f64, format!("{} parameter points", cases.len()))
}

fn critical_closed_forms() -> (f64, String) {
    let mut deviations = Vec::new();
    for p in P_GRID {
        let mut cases = vec![(Model::Sedentary, None), (Model::Dispersal, None)];
        cases.extend((2..=8).map(|m| (Model::RegularGraph, Some(m))));
        for (model, m) in cases {
            deviations.push(match (critical_lambda(model, p, 1.0, m), critical_lambda_closed_form_r1(model, p, m)) {
                (Ok(a), Ok(b)) => (a.value.value() - b.value.value()).abs(),
                _ => f64::INFINITY,
            });
        }
    }
    (worst_of(deviations), "bisection against closed forms at r = 1".into())
}

fn rate(model: Model, p: f64, r: f64, m: Option<u32>) -> f64 {
    critical_lambda(model, p, r, m).map(|c| c.value.value()).unwrap_or(f64::NAN)
}

fn critical_ordering() -> (f64, String) {
    let mut violations = 0usize;
    for p in P_GRID {
        for r in R_GRID {
            let dispersal = rate(Model::Dispersal, p, r, None);
            let mut previous = rate(Model::RegularGraph, p, r, Some(2));
            if !(dispersal > 0.0 && dispersal < previous) {
                violations += 1;
            }
            for m in 3..=11 {
                let next = rate(Model::RegularGraph, p, r, Some(m));
                if !(dispersal < next && next < previous) {
                    violations += 1;
                }
                previous = next;
            }
            if !rate(Model::RegularGraph, p, r, Some(1)).is_infinite() {
                violations += 1;
            }
        }
    }
    (violations as f64, "0 < dispersal rate < graph rate at m + 1 < graph rate at m".into())
}

fn critical_large_degree() -> (f64, String) {
    let worst = worst_of(P_GRID.iter().flat_map(|&p| {
        R_GRID.map(|r| rate(Model::RegularGraph, p, r, Some(1000)) - rate(Model::Dispersal, p, r, None))
    }));
    (worst, "graph rate at m = 1000 minus the free-dispersal rate".into())
}

/// Largest distance, in grid steps, between the first `p` where the graph
/// beats staying put and `1 - 1/(m - 1)`.
fn strategy_boundary() -> (f64, String) {
    let n = 999;
    let step = 1.0 / (n + 1) as f64;
    let ps: Vec<f64> = (1..=n).map(|k| k as f64 * step).collect();
    let worst = worst_of((3..=10u32).map(|m| {
        let better: Vec<bool> = ps
            .par_iter()
            .map(|&p| rate(Model::RegularGraph, p, 1.0, Some(m)) < rate(Model::Sedentary, p, 1.0, None))
            .collect();
        let flips: Vec<usize> = (1..n).filter(|&k| better[k] != better[k - 1]).collect();
        match flips.as_slice() {
            [k] if better[*k - 1] => {
                let switch = 0.5 * (ps[*k - 1] + ps[*k]);
                (switch - (1.0 - 1.0 / (m - 1) as f64)).abs() / step
            }
            _ => f64::INFINITY,
        }
    }));
    (worst, "m = 3..10 on a 999-point grid".into())
}

fn pgf_normalization() -> (f64, String) {
    let mut deviations = Vec::new();
    for p in P_GRID {
        for lambda in [0.25, 1.0, 4.0] {
            for r in R_GRID {
                deviations.push((pgf_dispersal(1.0, &params(p, r, lambda)) - 1.0).abs());
                for m in 1..=8 {
                    let at = graph(p, r, lambda, m);
                    deviations.push(match OffspringPmf::for_model(Model::RegularGraph, at) {
                        Ok(pmf) => {
                            let total: f64 = pmf.coefficients().iter().sum();
                            let negative = pmf.coefficients().iter().fold(0.0f64, |a, &c| a.max(-c));
                            (total - 1.0).abs().max(negative)
                        }
                        Err(_) => f64::INFINITY,
                    });
                }
            }
        }
    }
    (worst_of(deviations), "value at 1 and coefficient signs".into())
}

fn pgf_index_forms() -> (f64, String) {
    let mut deviations = Vec::new();
    for p in [0.1, 0.5, 0.9] {
        for lambda in [0.25, 1.0, 4.0] {
            for r in R_GRID {
                for m in 1..=8 {
                    let at = graph(p, r, lambda, m);
                    for s in [0.0, 0.3, 0.7, 1.0] {
                        deviations.push(match (pgf_regular_graph(s, &at), pgf_regular_graph_double_sum(s, &at)) {
                            (Ok(a), Ok(b)) => (a - b).abs(),
                            _ => f64::INFINITY,
                        });
                    }
                }
            }
        }
    }
    (worst_of(deviations), "coefficient form against the double sum, m <= 8".into())
}

fn sedentary_drift() -> (f64, String) {
    let mut deviations = Vec::new();
    for p in [0.1, 0.5, 0.9] {
        for lambda in [0.25, 1.0, 4.0] {
            for r in R_GRID {
                let at = params(p, r, lambda);
                for i in 1..=100 {
                    deviations.push(match drift_sedentary_by_transitions(i, &at) {
                        Ok(d) => (d - drift_sedentary(i, &at)).abs(),
                        Err(_) => f64::INFINITY,
                    });
                }
            }
        }
    }
    (worst_of(deviations), "closed-form drift against the transition sum, i = 1..100".into())
}

fn sedentary_drift_sign() -> (f64, String) {
    let mut violations = 0usize;
    for p in [0.1, 0.5, 0.9] {
        for lambda in [0.25, 1.0, 4.0, 16.0] {
            for r in [0.0, 0.3, 0.7, 0.95] {
                let at = params(p, r, lambda);
                match drift_negative_beyond(&at) {
                    Some(bound) => {
                        violations += (bound + 1..=bound + 200).filter(|&i| drift_sedentary(i, &at) >= 0.0).count()
                    }
                    None => violations += 1,
                }
            }
        }
    }
    (violations as f64, "drift negative above the computed bound when r < 1".into())
}

fn monte_carlo(model: Model, at: ModelParams, truth: f64) -> (f64, String) {
    let config = SimConfig {
        replicates: 20_000,
        population_cap: 1_000,
        base_seed: CHECK_SEED,
        ..SimConfig::default()
    };
    match simulate::estimate_extinction(model, &at, &config) {
        Ok(e) => {
            if e.censored_fraction >= 0.02 {
                return (f64::INFINITY, format!("censored fraction {}", e.censored_fraction));
            }
            let se = (truth * (1.0 - truth) / config.replicates as f64).sqrt();
            (
                (e.probability - truth).abs() / se,
                format!("estimate {} against {}", numfmt::format_real(e.probability), numfmt::format_real(truth)),
            )
        }
        Err(e) => (f64::INFINITY, e.to_string()),
    }
}

fn monte_carlo_dispersal() -> (f64, String) {
    monte_carlo(Model::Dispersal, params(0.4, 1.0, 1.0), 6.0 / 7.0)
}

fn monte_carlo_regular_graph() -> (f64, String) {
    monte_carlo(Model::RegularGraph, graph(2.0 / 3.0, 0.0, 1.0, 3), (-440.0 + 308000f64.sqrt()) / 160.0)
}

fn monte_carlo_sedentary() -> (f64, String) {
    monte_carlo(Model::Sedentary, params(0.5, 1.0, 3.0), 1.0 / 3.0)
}

fn event_level_oracle() -> (f64, String) {
    let cases = [(Model::Dispersal, params(0.5, 0.5, 1.5)), (Model::RegularGraph, graph(0.4, 0.5, 2.0, 4))];
    let worst = worst_of(cases.map(|(model, at)| {
        let Ok(pmf) = OffspringPmf::for_model(model, at) else { return f64::INFINITY };
        let counts = histogram(100_000, CHECK_SEED, |rng| {
            let survivors = sample_survivors_event_level(&at, rng);
            match at.m() {
                Some(m) => simulate::occupied_slots(survivors, m, rng),
                None => survivors,
            }
        });
        total_variation(&counts, &pmf)
    }));
    (worst, "total variation at 1e5 event-level draws".into())
}

const CHECKS: [Check; 17] = [
    Check { name: "example-2.4-golden", tolerance: 1e-10, run: example_dispersal },
    Check { name: "example-2.8-golden", tolerance: 1e-10, run: example_regular_graph },
    Check { name: "graph-offspring-coefficients", tolerance: 1e-14, run: example_coefficients },
    Check { name: "dispersal-closed-forms", tolerance: 1e-10, run: dispersal_closed_forms },
    Check { name: "survival-criterion-consistency", tolerance: 0.5, run: survival_consistency },
    Check { name: "critical-closed-forms", tolerance: 1e-9, run: critical_closed_forms },
    Check { name: "critical-ordering", tolerance: 0.5, run: critical_ordering },
    Check { name: "critical-large-degree", tolerance: 1e-2, run: critical_large_degree },
    Check { name: "strategy-boundary", tolerance: 1.0, run: strategy_boundary },
    Check { name: "pgf-normalization", tolerance: 1e-12, run: pgf_normalization },
    Check { name: "pgf-index-forms", tolerance: 1e-10, run: pgf_index_forms },
    Check { name: "sedentary-drift", tolerance: 1e-10, run: sedentary_drift },
    Check { name: "sedentary-drift-sign", tolerance: 0.5, run: sedentary_drift_sign },
    Check { name: "monte-carlo-dispersal", tolerance: 4.0, run: monte_carlo_dispersal },
    Check { name: "monte-carlo-regular-graph", tolerance: 4.0, run: monte_carlo_regular_graph },
    Check { name: "monte-carlo-sedentary", tolerance: 4.0, run: monte_carlo_sedentary },
    Check { name: "event-level-oracle", tolerance: 1e-2, run: event_level_oracle },
];

pub fn check_names() -> Vec<&'static str> {
    CHECKS.iter().map(|c| c.name).collect()
}

/// Runs every check with tolerances multiplied by `scale`, in a fixed order.
pub fn run_checks(scale: f64) -> Vec<CheckOutcome> {
    CHECKS
        .par_iter()
        .map(|check| {
            let (worst, detail) = (check.run)();
            let tolerance = check.tolerance * scale;
            CheckOutcome { name: check.name.to_string(), passed: worst < tolerance, worst, tolerance, detail }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_unique() {
        let mut names = check_names();
        assert!(names.len() >= 12);
        names.sort();
        names.dedup();
        assert_eq!(names.len(), CHECKS.len());
        assert!(names.contains(&"example-2.4-golden") && names.contains(&"example-2.8-golden"));
    }

    #[test]
    fn the_suite_passes_and_fails_when_squeezed() {
        let outcomes = run_checks(1.0);
        for o in &outcomes {
            assert!(o.passed, "{o:?}");
        }
        let squeezed = run_checks(0.0);
        assert!(squeezed.iter().all(|o| !o.passed));
    }
}
