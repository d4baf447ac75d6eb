use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::time::Instant;

use collapse_core::analytic::{self, critical_lambda, ExtinctionEstimate, Method};
use collapse_core::numfmt::format_real;
use collapse_core::simulate::{estimate_extinction, SimConfig};
use collapse_core::sweep::{self, Axis, SweepTable};
use collapse_core::validate::run_checks;
use collapse_core::{Error, Model, ModelParams};

use crate::args::{AnalyticArgs, Command, ModelFlags, SimulateArgs, SweepArgs, SweepKindArg, ValidateArgs};
use crate::report::{Params, Results, RunReport};

/// Runs with more than this fraction of censored replicates are unreliable.
pub const CENSOR_LIMIT: f64 = 0.5;

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Numerical(String),
    Io(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Numerical(_) | Failure::Io(_) => 2,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Numerical(m) | Failure::Io(m) => f.write_str(m),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match &e {
            Error::InvalidParameter { name, .. } => Failure::Usage(format!("--{name}: {e}")),
            Error::Domain(_) => Failure::Usage(e.to_string()),
            Error::NonConvergence(_) => Failure::Numerical(e.to_string()),
            Error::Table(_) => Failure::Io(e.to_string()),
        }
    }
}

pub struct Outcome {
    pub report: RunReport,
    pub text: String,
    pub json: bool,
    pub code: u8,
}

fn report(command: &str, args: &[String], started: Instant, params: Params, results: Results) -> RunReport {
    RunReport {
        command: command.into(),
        args: args.to_vec(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: None,
        wall_time: started.elapsed().as_secs_f64(),
        params,
        results,
        diagnostics: Vec::new(),
    }
}

fn check_tol(tol: f64) -> Result<(), Failure> {
    if tol > 0.0 && tol < 1.0 {
        Ok(())
    } else {
        Err(Failure::Usage(format!("--tol: {tol} must lie in (0, 1)")))
    }
}

fn model_params(flags: &ModelFlags, lambda: f64) -> Result<ModelParams, Failure> {
    let model: Model = flags.model.into();
    let params = ModelParams::new(flags.p, flags.r, lambda)?;
    match (model, flags.m) {
        (Model::RegularGraph, Some(m)) => Ok(params.with_degree(m)?),
        (Model::RegularGraph, None) => Err(Failure::Usage("--m: the c3 model needs a graph degree".into())),
        (_, Some(_)) => Err(Failure::Usage("--m: a degree applies to the c3 model only".into())),
        (_, None) => Ok(params),
    }
}

fn base_params(flags: &ModelFlags, lambda: Option<f64>) -> Params {
    Params { model: Some(flags.model.into()), p: Some(flags.p), lambda, r: Some(flags.r), m: flags.m, ..Params::default() }
}

fn line(text: &mut String, key: &str, value: impl std::fmt::Display) {
    writeln!(text, "{key} = {value}").expect("writing to a string");
}

fn echo_params(text: &mut String, flags: &ModelFlags, lambda: Option<f64>) {
    line(text, "model", Model::from(flags.model));
    line(text, "p", format_real(flags.p));
    if let Some(lambda) = lambda {
        line(text, "lambda", format_real(lambda));
    }
    line(text, "r", format_real(flags.r));
    if let Some(m) = flags.m {
        line(text, "m", m);
    }
}

fn method_name(method: Method) -> &'static str {
    match method {
        Method::ClosedForm => "closed_form",
        Method::FixedPoint => "fixed_point",
        Method::MonteCarlo => "monte_carlo",
    }
}

pub fn analytic_cmd(a: &AnalyticArgs, argv: &[String]) -> Result<Outcome, Failure> {
    let started = Instant::now();
    let model: Model = a.model.model.into();
    if a.lambda.is_none() && !a.critical {
        return Err(Failure::Usage("--lambda: required unless --critical is given".into()));
    }
    check_tol(a.tol)?;
    let mut text = String::new();
    echo_params(&mut text, &a.model, a.lambda);
    let mut diagnostics = Vec::new();

    let (mut extinction, mut survives, mut mean) = (None, None, None);
    if let Some(lambda) = a.lambda {
        let params = model_params(&a.model, lambda)?;
        let estimate = analytic::extinction(model, &params, a.tol)?;
        let verdict = analytic::survives(model, &params)?;
        mean = analytic::mean_offspring(model, &params)?;
        line(&mut text, "rho", format_real(estimate.probability));
        line(&mut text, "survives", verdict);
        if let Some(mean) = mean {
            line(&mut text, "mean_offspring", format_real(mean));
        }
        line(&mut text, "method", method_name(estimate.method));
        if estimate.method == Method::FixedPoint {
            diagnostics.push(format!("fixed point reached after {} iterations", estimate.iterations));
        }
        if model == Model::RegularGraph {
            diagnostics.push(format!(
                "offspring polynomial built in exact rationals from p = {:?}, lambda = {:?}, r = {:?}",
                params.p(),
                params.lambda(),
                params.r()
            ));
        }
        extinction = Some(estimate);
        survives = Some(verdict);
    } else {
        ModelParams::new(a.model.p, a.model.r, 1.0)?;
    }

    let critical = if a.critical {
        let rate = critical_lambda(model, a.model.p, a.model.r, a.model.m)?;
        line(&mut text, "critical_lambda", rate.value);
        Some(rate)
    } else {
        None
    };

    let mut params = base_params(&a.model, a.lambda);
    params.tol = Some(a.tol);
    let mut report = report(
        "analytic",
        argv,
        started,
        params,
        Results::Analytic { extinction, survives, mean_offspring: mean, critical_lambda: critical },
    );
    report.diagnostics = diagnostics;
    Ok(Outcome { report, text, json: a.json, code: 0 })
}

fn reference_value(model: Model, params: &ModelParams, tol: f64) -> Option<f64> {
    analytic::extinction(model, params, tol).ok().map(|e| e.probability)
}

pub fn simulate_cmd(a: &SimulateArgs, argv: &[String]) -> Result<Outcome, Failure> {
    let started = Instant::now();
    let model: Model = a.model.model.into();
    check_tol(a.tol)?;
    let params = model_params(&a.model, a.lambda)?;
    let config = SimConfig {
        replicates: a.n,
        generation_cap: a.gen_cap,
        population_cap: a.pop_cap,
        step_cap: a.step_cap,
        base_seed: a.seed,
    };
    let estimate: ExtinctionEstimate = estimate_extinction(model, &params, &config)?;
    let reference = reference_value(model, &params, a.tol);
    let reliable = estimate.censored_fraction <= CENSOR_LIMIT;

    let mut text = String::new();
    echo_params(&mut text, &a.model, Some(a.lambda));
    line(&mut text, "replicates", a.n);
    line(&mut text, "seed", a.seed);
    line(
        &mut text,
        "estimate",
        format!("{} +- {}", format_real(estimate.probability), format_real(estimate.ci_half_width)),
    );
    line(&mut text, "censored_fraction", format_real(estimate.censored_fraction));
    line(&mut text, "escaped_fraction", format_real(estimate.escaped_fraction));
    if let Some(t) = estimate.mean_extinction_time {
        line(&mut text, "mean_extinction_time", format_real(t));
    }
    match reference {
        Some(value) => line(&mut text, "analytic", format_real(value)),
        None => line(&mut text, "analytic", "unavailable"),
    }

    let mut diagnostics = Vec::new();
    if estimate.escaped_fraction > 0.0 {
        let unit = if model == Model::Sedentary { "individuals" } else { "colonies" };
        diagnostics.push(format!("runs reaching {} {unit} are counted as surviving", a.pop_cap));
    }
    if !reliable {
        diagnostics.push(format!(
            "censored fraction {} exceeds {}; estimate is unreliable",
            format_real(estimate.censored_fraction),
            CENSOR_LIMIT
        ));
    }
    let mut params_out = base_params(&a.model, Some(a.lambda));
    params_out.replicates = Some(a.n);
    params_out.generation_cap = Some(a.gen_cap);
    params_out.population_cap = Some(a.pop_cap);
    params_out.step_cap = Some(a.step_cap);
    params_out.tol = Some(a.tol);
    let standard_error = estimate.standard_error();
    let mut report = report(
        "simulate",
        argv,
        started,
        params_out,
        Results::Simulate { estimate, standard_error, analytic: reference, reliable },
    );
    report.seed = Some(a.seed);
    report.diagnostics = diagnostics;
    Ok(Outcome { report, text, json: a.json, code: if reliable { 0 } else { 2 } })
}

fn parse_axis(flag: &str, name: &str, text: Option<&str>) -> Result<Axis, Failure> {
    let text = text.ok_or_else(|| Failure::Usage(format!("--{flag}: required, as min:max:steps")))?;
    let bad = || Failure::Usage(format!("--{flag}: expected min:max:steps, got {text:?}"));
    let parts: Vec<&str> = text.split(':').collect();
    let [min, max, steps] = parts.as_slice() else { return Err(bad()) };
    let (min, max, steps) = (
        min.parse::<f64>().map_err(|_| bad())?,
        max.parse::<f64>().map_err(|_| bad())?,
        steps.parse::<usize>().map_err(|_| bad())?,
    );
    Axis::linear(name, min, max, steps).map_err(|e| Failure::Usage(format!("--{flag}: {e}")))
}

fn parse_range(text: &str) -> Result<Vec<u32>, Failure> {
    let bad = || Failure::Usage(format!("--m: expected an integer range a:b, got {text:?}"));
    let (a, b) = text.split_once(':').ok_or_else(bad)?;
    let (a, b): (u32, u32) = (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?);
    if a > b {
        return Err(bad());
    }
    Ok((a..=b).collect())
}

fn parse_degree(text: Option<&str>) -> Result<Option<u32>, Failure> {
    text.map(|s| s.parse::<u32>().map_err(|_| Failure::Usage(format!("--m: expected an integer, got {s:?}"))))
        .transpose()
}

pub fn sweep_cmd(a: &SweepArgs, argv: &[String]) -> Result<Outcome, Failure> {
    let started = Instant::now();
    check_tol(a.tol)?;
    let mut params = Params {
        sweep_kind: Some(format!("{:?}", a.kind).to_lowercase()),
        p_axis: a.p.clone(),
        ..Params::default()
    };
    let p_axis = parse_axis("p", "p", a.p.as_deref())?;
    let table: SweepTable = match a.kind {
        SweepKindArg::Strategy => {
            if let Some(model) = a.model.map(Model::from).filter(|m| *m != Model::RegularGraph) {
                return Err(Failure::Usage(format!("--model: strategy sweeps compare c3 with c1, not {model}")));
            }
            if a.r.is_some_and(|r| r != 1.0) {
                return Err(Failure::Usage("--r: strategy sweeps are defined at r = 1".into()));
            }
            let text = a.m.as_deref().ok_or_else(|| Failure::Usage("--m: required, as a:b".into()))?;
            let degrees = parse_range(text)?;
            params.m_range = Some(text.into());
            sweep::strategy_comparison(&degrees, &p_axis)?
        }
        SweepKindArg::Phase | SweepKindArg::Critical => {
            let model: Model = a.model.ok_or_else(|| Failure::Usage("--model: required".into()))?.into();
            let r = a.r.ok_or_else(|| Failure::Usage("--r: required".into()))?;
            let m = parse_degree(a.m.as_deref())?;
            params.model = Some(model);
            params.r = Some(r);
            params.m = m;
            if a.kind == SweepKindArg::Phase {
                let lambda_axis = parse_axis("lambda", "lambda", a.lambda.as_deref())?;
                params.lambda_axis = a.lambda.clone();
                params.tol = Some(a.tol);
                sweep::phase_grid(model, r, m, &p_axis, &lambda_axis, a.tol)?
            } else {
                sweep::critical_curve_table(model, r, m, &p_axis)?
            }
        }
    };

    let out = a.out.display().to_string();
    let file = File::create(&a.out).map_err(|e| Failure::Io(format!("--out: cannot create {out}: {e}")))?;
    table.write_csv(BufWriter::new(file)).map_err(|e| Failure::Io(format!("--out: {e}")))?;

    let counts = table.label_counts();
    let mut text = String::new();
    line(&mut text, "rows", table.cells.len());
    for (label, count) in &counts {
        line(&mut text, label, count);
    }
    line(&mut text, "out", &out);
    let label_counts = counts.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    let mut report = report(
        "sweep",
        argv,
        started,
        params,
        Results::Sweep { rows: table.cells.len(), out, label_counts },
    );
    let failed = table.cells.iter().filter(|c| c.status == sweep::Status::Failed).count();
    if failed > 0 {
        report.diagnostics.push(format!("{failed} cells failed to evaluate"));
    }
    Ok(Outcome { report, text, json: a.json, code: 0 })
}

pub fn validate_cmd(a: &ValidateArgs, argv: &[String]) -> Result<Outcome, Failure> {
    let started = Instant::now();
    if !(a.tol_scale >= 0.0 && a.tol_scale.is_finite()) {
        return Err(Failure::Usage(format!("--tol-scale: {} must be a finite nonnegative number", a.tol_scale)));
    }
    let checks = run_checks(a.tol_scale);
    let passed = checks.iter().filter(|c| c.passed).count();
    let failed = checks.len() - passed;
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    let mut text = String::new();
    for c in &checks {
        writeln!(
            text,
            "{} {:width$}  worst {:>14}  tol {:>8}  {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            format_real(c.worst),
            format_real(c.tolerance),
            c.detail,
        )
        .expect("writing to a string");
    }
    writeln!(text, "{passed} passed, {failed} failed").expect("writing to a string");
    let params = Params { tol_scale: Some(a.tol_scale), ..Params::default() };
    let report = report("validate", argv, started, params, Results::Validate { passed, failed, checks });
    Ok(Outcome { report, text, json: a.json, code: if failed == 0 { 0 } else { 3 } })
}

pub fn run(command: &Command, argv: &[String]) -> Result<Outcome, Failure> {
    match command {
        Command::Analytic(a) => analytic_cmd(a, argv),
        Command::Simulate(a) => simulate_cmd(a, argv),
        Command::Sweep(a) => sweep_cmd(a, argv),
        Command::Validate(a) => validate_cmd(a, argv),
    }
}
