use std::path::PathBuf;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::IoError;
use crate::ode::SolverConfig;
use crate::sampler::SamplerConfig;
use crate::stats::ModelParams;

/// New York City population used as the default `N`.
pub const NYC_POPULATION: f64 = 8_336_817.0;

/// How raw mobility values are interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MobilityFormat {
    /// 100 means baseline mobility; converted with `1 − v/100`.
    #[default]
    PercentOfBaseline,
    /// Already the fraction adhering to mitigation.
    DeclineFraction,
}

/// What to do with missing days in the mobility series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapPolicy {
    #[default]
    ForwardFill,
    Error,
}

/// Source of the initial number of infected.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum I0Policy {
    /// The case count on the first aligned day.
    #[default]
    FirstCase,
    Fixed(f64),
}

impl I0Policy {
    pub fn resolve(&self, cases: &[u64]) -> Result<f64, IoError> {
        match *self {
            I0Policy::Fixed(v) if v > 0.0 && v.is_finite() => Ok(v),
            I0Policy::Fixed(v) => Err(IoError::Config(format!(
                "fixed i0 must be positive, got {v}"
            ))),
            I0Policy::FirstCase => match cases.first() {
                Some(&c) if c > 0 => Ok(c as f64),
                Some(_) => Err(IoError::Config(
                    "first-day case count is 0; set a fixed i0".into(),
                )),
                None => Err(IoError::Config("no case data to take i0 from".into())),
            },
        }
    }
}

fn default_population() -> f64 {
    NYC_POPULATION
}

fn default_horizon() -> usize {
    90
}

fn default_paths() -> usize {
    1000
}

fn default_seed() -> u64 {
    1
}

/// Settings shared by all subcommands, read from JSON. Every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_population")]
    pub population: f64,
    #[serde(default)]
    pub i0: I0Policy,
    /// First day of the aligned series; earlier rows are trimmed.
    #[serde(default)]
    pub start_date: Option<NaiveDate>,
    /// Last simulated day for `simulate` and `sensitivity`.
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    /// Keep only this many aligned days of data.
    #[serde(default)]
    pub days: Option<usize>,
    #[serde(default)]
    pub solver: SolverConfig<f64>,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub mobility_format: MobilityFormat,
    #[serde(default)]
    pub gap_policy: GapPolicy,
    #[serde(default)]
    pub cases: Option<PathBuf>,
    #[serde(default)]
    pub mobility: Option<PathBuf>,
    /// Parameters for `simulate` and the base scenario of `sensitivity`.
    #[serde(default)]
    pub params: Option<ModelParams>,
    #[serde(default = "default_paths")]
    pub n_paths: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            population: default_population(),
            i0: I0Policy::default(),
            start_date: None,
            horizon: default_horizon(),
            days: None,
            solver: SolverConfig::default(),
            sampler: SamplerConfig::default(),
            seed: default_seed(),
            output_dir: None,
            mobility_format: MobilityFormat::default(),
            gap_policy: GapPolicy::default(),
            cases: None,
            mobility: None,
            params: None,
            n_paths: default_paths(),
        }
    }
}

impl RunConfig {
    /// Sampler settings with the run seed applied.
    pub fn sampler(&self) -> SamplerConfig {
        SamplerConfig {
            seed: self.seed,
            ..self.sampler.clone()
        }
    }

    pub fn validate(&self) -> Result<(), IoError> {
        if !(self.population > 0.0 && self.population.is_finite()) {
            return Err(IoError::Config(format!(
                "population must be positive, got {}",
                self.population
            )));
        }
        for path in [&self.cases, &self.mobility].into_iter().flatten() {
            if !path.exists() {
                return Err(IoError::Config(format!(
                    "input file {} does not exist",
                    path.display()
                )));
            }
        }
        self.solver
            .validate()
            .map_err(|e| IoError::Config(e.to_string()))?;
        self.sampler()
            .validate()
            .map_err(|e| IoError::Config(e.to_string()))?;
        if let Some(p) = &self.params {
            p.validate().map_err(|e| IoError::Config(e.to_string()))?;
        }
        Ok(())
    }
}
