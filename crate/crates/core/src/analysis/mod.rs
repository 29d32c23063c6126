//! Workflows built on the model and sampler: synthetic data, fitting,
//! predictive bands, forecasts and the mobility sensitivity sweep.

mod predictive;
mod sensitivity;

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, Poisson};
use thiserror::Error;

use crate::compartmental::{simulate_slir, CompartmentState, ModelError, SlirTrajectory};
use crate::ode::SolverConfig;
use crate::sampler::{
    run_chains, summarize, ChainSet, DiagnosticsError, ParameterSummary, SamplerConfig,
    SamplerError,
};
use crate::stats::{
    to_constrained, ModelParams, ObservedData, SlirPosterior, StatsError, UnconstrainedParams,
    MOBILITY_CLAMP, PARAM_NAMES,
};

pub use predictive::{
    forecast, predictive_band, prior_draws, BandKind, BandPoint, Forecast, ForecastConfig,
    PredictiveBand, MIN_BAND_DRAWS,
};
pub use sensitivity::{sensitivity_sweep, SensitivityOutcome, SensitivityRow, SWEEP_A_MAX};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("need at least {needed} parameter draws, got {got}")]
    TooFewDraws { needed: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(
        "peak lockdown fraction {target} is unattainable: reachable range is [0, {reachable:.6}]"
    )]
    Unattainable { target: f64, reachable: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
}

/// Smallest mean used when drawing case counts.
const MIN_CASE_MEAN: f64 = 1e-10;

/// Draws one mobility observation around the modelled fraction `L/N`.
pub(crate) fn draw_mobility<R: Rng + ?Sized>(
    state: &CompartmentState<f64>,
    n: f64,
    phi1: f64,
    rng: &mut R,
) -> f64 {
    let m = (state.l / n).clamp(MOBILITY_CLAMP, 1.0 - MOBILITY_CLAMP);
    let y = Beta::new(phi1 * m, phi1 * (1.0 - m)).map_or(m, |d| d.sample(rng));
    y.clamp(MOBILITY_CLAMP, 1.0 - MOBILITY_CLAMP)
}

/// Draws one case count as a Gamma–Poisson mixture with mean `I` and dispersion `φ2`.
pub(crate) fn draw_cases<R: Rng + ?Sized>(
    state: &CompartmentState<f64>,
    phi2: f64,
    rng: &mut R,
) -> u64 {
    let mu = state.i.max(MIN_CASE_MEAN);
    let rate = Gamma::new(phi2, mu / phi2).map_or(mu, |g| g.sample(rng));
    if rate <= 0.0 {
        return 0;
    }
    Poisson::new(rate).map_or(mu.round(), |p| p.sample(rng)) as u64
}

/// Simulates the SLIR system over days `0..=horizon` and draws noisy observations.
///
/// Day 0 has no lockdown yet, so its mobility value is the lower clamp.
pub fn generate_synthetic<R: Rng + ?Sized>(
    params: &ModelParams,
    n: f64,
    i0: f64,
    horizon: usize,
    solver: &SolverConfig<f64>,
    rng: &mut R,
) -> Result<(ObservedData, SlirTrajectory<f64>), AnalysisError> {
    params.validate()?;
    let traj = simulate_slir(&params.slir(), n, i0, horizon, solver)?;
    let mut mobility = Vec::with_capacity(traj.len());
    let mut cases = Vec::with_capacity(traj.len());
    for (t, x) in traj.states.iter().enumerate() {
        mobility.push(if t == 0 {
            MOBILITY_CLAMP
        } else {
            draw_mobility(x, n, params.phi1, rng)
        });
        cases.push(draw_cases(x, params.phi2, rng));
    }
    Ok((ObservedData::new(mobility, cases, n, i0)?, traj))
}

/// `(I + R)/N` at the last day of the trajectory.
pub fn attack_rate(trajectory: &SlirTrajectory<f64>) -> f64 {
    let x = trajectory.final_state();
    (x.i + x.r) / trajectory.population
}

/// Outcome of a posterior fit.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub chains: ChainSet,
    pub summary: Vec<ParameterSummary>,
    pub ode_failures: usize,
}

impl FitResult {
    /// Post-warmup draws of all chains on the constrained scale, chain by chain.
    pub fn constrained_draws(&self) -> Vec<ModelParams> {
        self.chains
            .pooled()
            .map(|u| to_constrained(&UnconstrainedParams::from_slice(u)))
            .collect()
    }

    pub fn max_rhat(&self) -> f64 {
        self.summary
            .iter()
            .map(|s| s.rhat)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn parameter(&self, name: &str) -> Option<&ParameterSummary> {
        self.summary.iter().find(|s| s.name == name)
    }
}

/// Constrained draws regrouped as `[parameter][chain][draw]`.
pub fn constrained_by_parameter(chains: &ChainSet) -> Vec<Vec<Vec<f64>>> {
    let per_chain: Vec<Vec<[f64; 6]>> = chains
        .chains
        .iter()
        .map(|c| {
            c.draws
                .iter()
                .map(|u| to_constrained(&UnconstrainedParams::from_slice(u)).to_array())
                .collect()
        })
        .collect();
    (0..PARAM_NAMES.len())
        .map(|p| {
            per_chain
                .iter()
                .map(|c| c.iter().map(|x| x[p]).collect())
                .collect()
        })
        .collect()
}

/// Summary table on the constrained scale.
pub fn summarize_chains(chains: &ChainSet) -> Result<Vec<ParameterSummary>, AnalysisError> {
    Ok(summarize(&PARAM_NAMES, &constrained_by_parameter(chains))?)
}

/// Runs the sampler on the posterior for `data`.
pub fn fit(
    data: &ObservedData,
    sampler: &SamplerConfig,
    solver: &SolverConfig<f64>,
) -> Result<FitResult, AnalysisError> {
    let target = SlirPosterior::new(data.clone(), solver.clone())?;
    let chains = run_chains(&target, sampler)?;
    let summary = summarize_chains(&chains)?;
    Ok(FitResult {
        chains,
        summary,
        ode_failures: target.ode_failures(),
    })
}
