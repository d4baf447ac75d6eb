use clap::{Args, Parser, Subcommand, ValueEnum};

use collapse_core::analytic::FIXED_POINT_TOL;
use collapse_core::simulate::SimConfig;
use collapse_core::Model;

#[derive(Debug, Parser)]
#[command(name = "collapse-lab", version, about = "Extinction and survival of colonies under collapses")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extinction probability, survival verdict and mean offspring.
    Analytic(AnalyticArgs),
    /// Monte Carlo estimate of the extinction probability.
    Simulate(SimulateArgs),
    /// Parameter sweep written as CSV.
    Sweep(SweepArgs),
    /// Built-in cross-check suite.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    C1,
    C2,
    C3,
}

impl From<ModelArg> for Model {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::C1 => Model::Sedentary,
            ModelArg::C2 => Model::Dispersal,
            ModelArg::C3 => Model::RegularGraph,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ModelFlags {
    #[arg(long, value_enum)]
    pub model: ModelArg,
    /// Survival probability of an individual hit by a collapse.
    #[arg(long, allow_negative_numbers = true)]
    pub p: f64,
    /// Probability that a collapse acts geometrically.
    #[arg(long, allow_negative_numbers = true)]
    pub r: f64,
    /// Graph degree for c3.
    #[arg(long)]
    pub m: Option<u32>,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyticArgs {
    #[command(flatten)]
    pub model: ModelFlags,
    /// Birth rate; optional with --critical.
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    /// Also report the critical birth rate.
    #[arg(long)]
    pub critical: bool,
    #[arg(long, allow_negative_numbers = true, default_value_t = FIXED_POINT_TOL)]
    pub tol: f64,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelFlags,
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: f64,
    /// Replicates.
    #[arg(long, default_value_t = SimConfig::default().replicates)]
    pub n: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "gen-cap", default_value_t = SimConfig::default().generation_cap)]
    pub gen_cap: u64,
    #[arg(long = "pop-cap", default_value_t = SimConfig::default().population_cap)]
    pub pop_cap: u64,
    #[arg(long = "step-cap", default_value_t = SimConfig::default().step_cap)]
    pub step_cap: u64,
    #[arg(long, allow_negative_numbers = true, default_value_t = FIXED_POINT_TOL)]
    pub tol: f64,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepKindArg {
    Phase,
    Critical,
    Strategy,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub kind: SweepKindArg,
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    #[arg(long, allow_negative_numbers = true)]
    pub r: Option<f64>,
    /// Degree for c3, or an integer range `a:b` for strategy sweeps.
    #[arg(long)]
    pub m: Option<String>,
    /// Axis `min:max:steps`.
    #[arg(long, allow_negative_numbers = true)]
    pub p: Option<String>,
    /// Axis `min:max:steps`, phase sweeps only.
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<String>,
    #[arg(long, allow_negative_numbers = true, default_value_t = FIXED_POINT_TOL)]
    pub tol: f64,
    #[arg(short = 'o', long = "out")]
    pub out: std::path::PathBuf,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub json: bool,
    /// Multiplies every check tolerance.
    #[arg(long = "tol-scale", default_value_t = 1.0, hide = true, allow_negative_numbers = true)]
    pub tol_scale: f64,
}
