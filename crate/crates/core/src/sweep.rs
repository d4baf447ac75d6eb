//! Parameter grids: survival phase diagrams over `(p, lambda)`, tables of the
//! critical birth rate against `p`, and the map of where dispersal on an
//! `m`-regular graph beats staying put.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{self, critical_lambda, critical_lambda_closed_form_r1, Rate};
use crate::effects::{Model, ModelParams};
use crate::error::{Error, Result};
use crate::numfmt::{format_real, parse_real};

/// Grid values of `p` are kept this far inside `(0, 1)`.
pub const P_MARGIN: f64 = 1e-6;
/// Cells whose extinction probability is at least `1 - SURVIVAL_GAP` count as
/// certain extinction.
pub const SURVIVAL_GAP: f64 = 1e-9;
/// Critical rates closer than this are reported as a tie.
pub const TIE_TOL: f64 = 1e-9;

pub const CSV_HEADER: [&str; 11] = [
    "model",
    "p",
    "lambda",
    "r",
    "m",
    "mean_offspring",
    "survives",
    "extinction_prob",
    "critical_lambda",
    "label",
    "status",
];

/// An inclusive, linearly spaced grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl Axis {
    pub fn linear(name: &str, min: f64, max: f64, steps: usize) -> Result<Self> {
        if steps < 1 {
            return Err(Error::invalid("steps", steps, "an axis needs at least one point"));
        }
        if !(min.is_finite() && max.is_finite()) || min > max {
            return Err(Error::Domain(format!("bad {name} range {min}:{max}")));
        }
        if steps == 1 && min != max {
            return Err(Error::Domain(format!("{name} axis with one point needs min == max")));
        }
        Ok(Axis { name: name.to_string(), min, max, steps })
    }

    /// Integers `from..=to`.
    pub fn integers(name: &str, from: u32, to: u32) -> Result<Self> {
        if from > to {
            return Err(Error::Domain(format!("empty {name} range {from}:{to}")));
        }
        Self::linear(name, from as f64, to as f64, (to - from + 1) as usize)
    }

    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.min];
        }
        let h = (self.max - self.min) / (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| if i + 1 == self.steps { self.max } else { self.min + h * i as f64 })
            .collect()
    }

    /// Values clamped into `[P_MARGIN, 1 - P_MARGIN]`.
    pub fn probabilities(&self) -> Vec<f64> {
        self.values().into_iter().map(|p| p.clamp(P_MARGIN, 1.0 - P_MARGIN)).collect()
    }

    pub fn spacing(&self) -> f64 {
        if self.steps < 2 { 0.0 } else { (self.max - self.min) / (self.steps - 1) as f64 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Survival,
    Extinction,
    DispersionBetter,
    NoDispersionBetter,
    Tie,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Survival => "survival",
            Label::Extinction => "extinction",
            Label::DispersionBetter => "dispersion_better",
            Label::NoDispersionBetter => "no_dispersion_better",
            Label::Tie => "tie",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "survival" => Label::Survival,
            "extinction" => Label::Extinction,
            "dispersion_better" => Label::DispersionBetter,
            "no_dispersion_better" => Label::NoDispersionBetter,
            "tie" => Label::Tie,
            other => return Err(Error::Table(format!("unknown label {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Failed,
}

/// One row of a sweep table. Fields that do not apply to the sweep are empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub model: Model,
    pub p: f64,
    pub lambda: Option<f64>,
    pub r: f64,
    pub m: Option<u32>,
    pub mean_offspring: Option<f64>,
    pub survives: Option<bool>,
    pub extinction_prob: Option<f64>,
    pub critical_lambda: Option<Rate>,
    pub label: Option<Label>,
    pub status: Status,
}

impl Cell {
    fn blank(model: Model, p: f64, r: f64, m: Option<u32>) -> Self {
        Cell {
            model,
            p,
            lambda: None,
            r,
            m,
            mean_offspring: None,
            survives: None,
            extinction_prob: None,
            critical_lambda: None,
            label: None,
            status: Status::Ok,
        }
    }

    fn failed(mut self) -> Self {
        self.status = Status::Failed;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Phase,
    Critical,
    Strategy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub kind: SweepKind,
    pub model: Model,
    pub r: f64,
    pub m: Option<u32>,
    pub fixed_point_tol: f64,
    pub critical_tol: f64,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub axes: Vec<Axis>,
    pub cells: Vec<Cell>,
    pub metadata: Metadata,
}

impl SweepTable {
    /// Number of cells per label, failed cells under `"failed"`.
    pub fn label_counts(&self) -> BTreeMap<&'static str, usize> {
        let mut counts = BTreeMap::new();
        for cell in &self.cells {
            let key = match (cell.status, cell.label) {
                (Status::Failed, _) => "failed",
                (Status::Ok, Some(label)) => label.as_str(),
                (Status::Ok, None) => "ok",
            };
            *counts.entry(key).or_insert(0) += 1;
        }
        counts
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_cells(&self.cells, writer)
    }
}

fn metadata(kind: SweepKind, model: Model, r: f64, m: Option<u32>, tol: f64) -> Metadata {
    Metadata {
        kind,
        model,
        r,
        m,
        fixed_point_tol: tol,
        critical_tol: analytic::CRITICAL_TOL,
        version: env!("CARGO_PKG_VERSION").to_string(),
    }
}

fn phase_cell(model: Model, p: f64, lambda: f64, r: f64, m: Option<u32>, critical: Option<Rate>, tol: f64) -> Cell {
    let mut cell = Cell::blank(model, p, r, m);
    cell.lambda = Some(lambda);
    cell.critical_lambda = critical;
    let params = match ModelParams::new(p, r, lambda) {
        Ok(params) => match m {
            Some(m) => params.with_degree(m),
            None => Ok(params),
        },
        Err(e) => Err(e),
    };
    let Ok(params) = params else { return cell.failed() };
    let (Ok(survives), Ok(mean)) = (analytic::survives(model, &params), analytic::mean_offspring(model, &params)) else {
        return cell.failed();
    };
    cell.survives = Some(survives);
    cell.mean_offspring = mean;
    cell.label = Some(if survives { Label::Survival } else { Label::Extinction });
    match analytic::extinction(model, &params, tol) {
        Ok(estimate) => {
            cell.extinction_prob = Some(estimate.probability);
            cell
        }
        Err(_) => cell.failed(),
    }
}

/// Survival verdict and extinction probability on a `(p, lambda)` grid,
/// row-major with `p` outermost. Each row also carries the critical rate for
/// its `p`.
pub fn phase_grid(
    model: Model,
    r: f64,
    m: Option<u32>,
    p_axis: &Axis,
    lambda_axis: &Axis,
    tol: f64,
) -> Result<SweepTable> {
    if p_axis.steps < 2 || lambda_axis.steps < 2 {
        return Err(Error::Domain("phase grids need at least two steps per axis".into()));
    }
    if lambda_axis.min <= 0.0 {
        return Err(Error::invalid("lambda", lambda_axis.min, "birth rates must be positive"));
    }
    // validates r and the presence of m up front
    critical_lambda(model, 0.5, r, m)?;
    let ps = p_axis.probabilities();
    let lambdas = lambda_axis.values();
    let critical: Vec<Option<Rate>> = ps
        .par_iter()
        .map(|&p| critical_lambda(model, p, r, m).ok().map(|c| c.value))
        .collect();
    let cells = (0..ps.len() * lambdas.len())
        .into_par_iter()
        .map(|index| {
            let (row, col) = (index / lambdas.len(), index % lambdas.len());
            phase_cell(model, ps[row], lambdas[col], r, m, critical[row], tol)
        })
        .collect();
    Ok(SweepTable {
        axes: vec![p_axis.clone(), lambda_axis.clone()],
        cells,
        metadata: metadata(SweepKind::Phase, model, r, m, tol),
    })
}

/// Critical birth rate for each `p`. Under a purely geometric effect every
/// row is checked against the closed form and marked failed on disagreement.
pub fn critical_curve_table(model: Model, r: f64, m: Option<u32>, p_axis: &Axis) -> Result<SweepTable> {
    critical_lambda(model, 0.5, r, m)?;
    let cells = p_axis
        .probabilities()
        .into_par_iter()
        .map(|p| {
            let mut cell = Cell::blank(model, p, r, m);
            let Ok(rate) = critical_lambda(model, p, r, m) else { return cell.failed() };
            cell.critical_lambda = Some(rate.value);
            if r == 1.0 {
                let closed = critical_lambda_closed_form_r1(model, p, m).map(|c| c.value);
                let agrees = match (closed, rate.value) {
                    (Ok(Rate::Infinite), Rate::Infinite) => true,
                    (Ok(Rate::Finite(a)), Rate::Finite(b)) => (a - b).abs() <= TIE_TOL,
                    _ => false,
                };
                if !agrees {
                    return cell.failed();
                }
            }
            cell
        })
        .collect();
    Ok(SweepTable {
        axes: vec![p_axis.clone()],
        cells,
        metadata: metadata(SweepKind::Critical, model, r, m, analytic::FIXED_POINT_TOL),
    })
}

/// Compares the regular-graph critical rate with the sedentary one under a
/// purely geometric effect, for each `(m, p)`, row-major with `m` outermost.
pub fn strategy_comparison(m_values: &[u32], p_axis: &Axis) -> Result<SweepTable> {
    if let Some(&m) = m_values.iter().find(|&&m| m < 2) {
        return Err(Error::invalid("m", m, "strategy comparison needs degree at least 2"));
    }
    let ps = p_axis.probabilities();
    let cells = (0..m_values.len() * ps.len())
        .into_par_iter()
        .map(|index| {
            let m = m_values[index / ps.len()];
            let p = ps[index % ps.len()];
            let mut cell = Cell::blank(Model::RegularGraph, p, 1.0, Some(m));
            let (Ok(graph), Ok(alone)) = (
                critical_lambda(Model::RegularGraph, p, 1.0, Some(m)),
                critical_lambda(Model::Sedentary, p, 1.0, None),
            ) else {
                return cell.failed();
            };
            let (graph, alone) = (graph.value.value(), alone.value.value());
            cell.critical_lambda = Some(Rate::Finite(graph));
            cell.label = Some(if (graph - alone).abs() <= TIE_TOL {
                Label::Tie
            } else if graph < alone {
                Label::DispersionBetter
            } else {
                Label::NoDispersionBetter
            });
            cell
        })
        .collect();
    let lo = m_values.iter().copied().min().unwrap_or(2);
    let hi = m_values.iter().copied().max().unwrap_or(2);
    Ok(SweepTable {
        axes: vec![Axis::integers("m", lo, hi)?, p_axis.clone()],
        cells,
        metadata: metadata(SweepKind::Strategy, Model::RegularGraph, 1.0, None, analytic::FIXED_POINT_TOL),
    })
}

fn opt_real(x: Option<f64>) -> String {
    x.map(format_real).unwrap_or_default()
}

pub fn write_cells<W: Write>(cells: &[Cell], writer: W) -> Result<()> {
    let mut out = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    let io = |e: csv::Error| Error::Table(e.to_string());
    out.write_record(CSV_HEADER).map_err(io)?;
    for cell in cells {
        out.write_record([
            cell.model.tag().to_string(),
            format_real(cell.p),
            opt_real(cell.lambda),
            format_real(cell.r),
            cell.m.map(|m| m.to_string()).unwrap_or_default(),
            opt_real(cell.mean_offspring),
            cell.survives.map(|s| s.to_string()).unwrap_or_default(),
            opt_real(cell.extinction_prob),
            cell.critical_lambda.map(|c| c.to_string()).unwrap_or_default(),
            cell.label.map(|l| l.as_str().to_string()).unwrap_or_default(),
            match cell.status {
                Status::Ok => "ok".into(),
                Status::Failed => "failed".into(),
            },
        ])
        .map_err(io)?;
    }
    out.flush().map_err(|e| Error::Table(e.to_string()))?;
    Ok(())
}

/// Parses a table written by [`write_cells`].
pub fn read_cells<R: Read>(reader: R) -> Result<Vec<Cell>> {
    let mut input = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let bad = |what: &str, v: &str| Error::Table(format!("bad {what}: {v:?}"));
    let header = input.headers().map_err(|e| Error::Table(e.to_string()))?;
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Table(format!("unexpected header {header:?}")));
    }
    let mut cells = Vec::new();
    for record in input.records() {
        let record = record.map_err(|e| Error::Table(e.to_string()))?;
        let field = |i: usize| record.get(i).unwrap_or("");
        let real = |i: usize| -> Result<Option<f64>> {
            let v = field(i);
            if v.is_empty() {
                return Ok(None);
            }
            parse_real(v).map(Some).ok_or_else(|| bad(CSV_HEADER[i], v))
        };
        let required = |i: usize| real(i)?.ok_or_else(|| bad(CSV_HEADER[i], ""));
        cells.push(Cell {
            model: field(0).parse()?,
            p: required(1)?,
            lambda: real(2)?,
            r: required(3)?,
            m: match field(4) {
                "" => None,
                v => Some(v.parse().map_err(|_| bad("m", v))?),
            },
            mean_offspring: real(5)?,
            survives: match field(6) {
                "" => None,
                "true" => Some(true),
                "false" => Some(false),
                v => return Err(bad("survives", v)),
            },
            extinction_prob: real(7)?,
            critical_lambda: real(8)?.map(|v| if v.is_infinite() { Rate::Infinite } else { Rate::Finite(v) }),
            label: match field(9) {
                "" => None,
                v => Some(Label::parse(v)?),
            },
            status: match field(10) {
                "ok" => Status::Ok,
                "failed" => Status::Failed,
                v => return Err(bad("status", v)),
            },
        });
    }
    Ok(cells)
}
