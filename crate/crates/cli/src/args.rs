use std::path::PathBuf;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use slir_core::io::{GapPolicy, MobilityFormat};

#[derive(Debug, Parser)]
#[command(
    name = "slir",
    version,
    about = "Simulate and calibrate the SLIR epidemic model"
)]
pub struct Cli {
    /// JSON run configuration; command-line flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for output files.
    #[arg(long, global = true, env = "SLIR_OUTPUT_DIR")]
    pub output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the SLIR system and draw a noisy synthetic data set.
    Simulate(SimulateArgs),
    /// Sample the posterior given case and mobility series.
    Fit(FitArgs),
    /// Fit on a leading window and project the predictive band forward.
    Forecast(ForecastArgs),
    /// Attack rate under rescaled lockdown scenarios.
    Sensitivity(SensitivityArgs),
    /// Next-generation-matrix reproduction numbers.
    R0(R0Args),
    /// R-hat, ESS and divergence report for a chains CSV.
    Diagnose(DiagnoseArgs),
}

#[derive(Debug, Clone, Args, Default)]
pub struct ParamArgs {
    #[arg(long = "r0")]
    pub r0: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub phi1: Option<f64>,
    #[arg(long)]
    pub phi2: Option<f64>,
}

#[derive(Debug, Clone, Args, Default)]
pub struct PopulationArgs {
    #[arg(long)]
    pub population: Option<f64>,
    /// Initial infected; defaults to the first day's case count for data, 1 for simulations.
    #[arg(long)]
    pub i0: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MobilityFormatArg {
    Percent,
    Fraction,
}

impl From<MobilityFormatArg> for MobilityFormat {
    fn from(v: MobilityFormatArg) -> Self {
        match v {
            MobilityFormatArg::Percent => MobilityFormat::PercentOfBaseline,
            MobilityFormatArg::Fraction => MobilityFormat::DeclineFraction,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GapPolicyArg {
    Fill,
    Error,
}

impl From<GapPolicyArg> for GapPolicy {
    fn from(v: GapPolicyArg) -> Self {
        match v {
            GapPolicyArg::Fill => GapPolicy::ForwardFill,
            GapPolicyArg::Error => GapPolicy::Error,
        }
    }
}

#[derive(Debug, Clone, Args, Default)]
pub struct DataArgs {
    /// Case counts, `date,value` CSV.
    #[arg(long)]
    pub cases: Option<PathBuf>,
    /// Mobility, `date,value` CSV.
    #[arg(long)]
    pub mobility: Option<PathBuf>,
    /// A `day,date,mobility,cases` file such as the one written by `simulate`.
    #[arg(long, conflicts_with_all = ["cases", "mobility"])]
    pub observed: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mobility_format: Option<MobilityFormatArg>,
    #[arg(long, value_enum)]
    pub gap_policy: Option<GapPolicyArg>,
    /// Drop rows before this date (YYYY-MM-DD).
    #[arg(long)]
    pub start_date: Option<NaiveDate>,
    /// Keep this many aligned days.
    #[arg(long)]
    pub days: Option<usize>,
    #[command(flatten)]
    pub population: PopulationArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AlgorithmArg {
    Nuts,
    Hmc,
    RandomWalk,
}

#[derive(Debug, Clone, Args, Default)]
pub struct SamplerArgs {
    #[arg(long)]
    pub chains: Option<usize>,
    /// Iterations per chain, warmup included.
    #[arg(long)]
    pub iter: Option<usize>,
    #[arg(long)]
    pub warmup: Option<usize>,
    #[arg(long, value_enum)]
    pub algorithm: Option<AlgorithmArg>,
    /// Adapt a diagonal mass matrix during warmup.
    #[arg(long)]
    pub adapt_mass: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub population: PopulationArgs,
    /// Last simulated day.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Calendar date of day 0 for the output files.
    #[arg(long)]
    pub start_date: Option<NaiveDate>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub sampler: SamplerArgs,
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    /// Days used for fitting.
    #[arg(long)]
    pub train_days: usize,
    /// Days covered by the band; defaults to all observed days.
    #[arg(long)]
    pub total_days: Option<usize>,
    /// Number of simulated predictive paths (at least 1000).
    #[arg(long)]
    pub paths: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SensitivityArgs {
    /// Take base parameters from the medians of a fit summary.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub population: PopulationArgs,
    /// Peak mobility declines to hit, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1.0,0.8,0.6,0.4,0.2")]
    pub targets: Vec<f64>,
    #[arg(long)]
    pub horizon: Option<usize>,
}

#[derive(Debug, Args)]
pub struct R0Args {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long)]
    pub population: Option<f64>,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    /// Chains CSV written by `fit`.
    #[arg(long)]
    pub chains: PathBuf,
}
