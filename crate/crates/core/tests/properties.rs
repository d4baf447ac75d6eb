use collapse_core::analytic::{self, critical_lambda, FIXED_POINT_TOL};
use collapse_core::offspring::{Pgf, PgfEvaluator};
use collapse_core::{Model, ModelParams};
use proptest::prelude::*;

fn model_params() -> impl Strategy<Value = (Model, ModelParams)> {
    (0.02f64..0.98, 0.0f64..=1.0, 0.05f64..6.0, prop::option::of(1u32..=10)).prop_map(|(p, r, lambda, m)| {
        let params = ModelParams::new(p, r, lambda).unwrap();
        match m {
            Some(m) => (Model::RegularGraph, params.with_degree(m).unwrap()),
            None => (Model::Dispersal, params),
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pgfs_are_normalized_increasing_and_convex((model, params) in model_params()) {
        let pgf = PgfEvaluator::for_model(model, params).unwrap();
        prop_assert!((pgf.value(1.0) - 1.0).abs() < 1e-12);
        let grid: Vec<f64> = (0..=40).map(|k| pgf.value(k as f64 / 40.0)).collect();
        for w in grid.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-15);
        }
        for w in grid.windows(3) {
            prop_assert!(w[0] + w[2] - 2.0 * w[1] >= -1e-13);
        }
    }

    #[test]
    fn mean_is_the_slope_at_one((model, params) in model_params()) {
        let pgf = PgfEvaluator::for_model(model, params).unwrap();
        let h = 1e-6;
        let slope = (pgf.value(1.0) - pgf.value(1.0 - h)) / h;
        let mean = analytic::mean_offspring(model, &params).unwrap().unwrap();
        prop_assert!((slope - mean).abs() < 1e-4 * (1.0 + mean));
    }

    #[test]
    fn extinction_is_a_fixed_point((model, params) in model_params()) {
        let pgf = PgfEvaluator::for_model(model, params).unwrap();
        let rho = analytic::extinction(model, &params, FIXED_POINT_TOL).unwrap().probability;
        prop_assert!((0.0..=1.0).contains(&rho));
        prop_assert!((pgf.value(rho) - rho).abs() < 1e-10);
        let survives = analytic::survives(model, &params).unwrap();
        prop_assert_eq!(survives, rho < 1.0 - 1e-9);
    }

    #[test]
    fn critical_curves_decrease_in_p(p in 0.02f64..0.9, dp in 0.01f64..0.08, r in 0.0f64..=1.0, m in 2u32..=12) {
        let (a, b) = (p, p + dp);
        for (model, m) in [(Model::Dispersal, None), (Model::RegularGraph, Some(m))] {
            let lo = critical_lambda(model, a, r, m).unwrap().value.value();
            let hi = critical_lambda(model, b, r, m).unwrap().value.value();
            prop_assert!(hi < lo);
        }
    }

    #[test]
    fn survival_is_monotone_in_lambda((model, params) in model_params(), bump in 1.0f64..4.0) {
        let more = ModelParams::new(params.p(), params.r(), params.lambda() * bump).unwrap();
        let more = match params.m() { Some(m) => more.with_degree(m).unwrap(), None => more };
        let rho = analytic::extinction(model, &params, FIXED_POINT_TOL).unwrap().probability;
        let rho_more = analytic::extinction(model, &more, FIXED_POINT_TOL).unwrap().probability;
        prop_assert!(rho_more <= rho + 1e-10);
    }

    #[test]
    fn critical_rate_separates_the_phases(p in 0.05f64..0.95, r in 0.0f64..=1.0, m in 2u32..=8) {
        for (model, m) in [(Model::Dispersal, None), (Model::RegularGraph, Some(m))] {
            let c = critical_lambda(model, p, r, m).unwrap().value.value();
            let at = |lambda: f64| {
                let params = ModelParams::new(p, r, lambda).unwrap();
                let params = match m { Some(m) => params.with_degree(m).unwrap(), None => params };
                analytic::survives(model, &params).unwrap()
            };
            prop_assert!(!at(c * 0.99));
            prop_assert!(at(c * 1.01));
        }
    }
}

#[test]
fn sedentary_never_survives_binomial_collapses() {
    for p in [0.1, 0.5, 0.9] {
        for lambda in [0.5, 5.0, 500.0] {
            let params = ModelParams::new(p, 0.99, lambda).unwrap();
            assert_eq!(analytic::extinction_sedentary(&params).probability, 1.0);
            assert!(critical_lambda(Model::Sedentary, p, 0.99, None).unwrap().value.is_infinite());
        }
    }
}
