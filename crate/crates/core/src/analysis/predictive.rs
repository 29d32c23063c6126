//! Prior/posterior predictive bands and truncated-window forecasts.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{draw_cases, draw_mobility, fit, AnalysisError, FitResult};
use crate::compartmental::{simulate_slir, SlirTrajectory};
use crate::ode::SolverConfig;
use crate::sampler::{chain_rng, SamplerConfig};
use crate::stats::{sample_prior, ModelParams, ObservedData};

/// Fewest parameter draws accepted by [`predictive_band`].
pub const MIN_BAND_DRAWS: usize = 100;
const MIN_PATHS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandKind {
    Prior,
    Posterior,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandPoint {
    pub median: f64,
    pub lower: f64,
    pub upper: f64,
}

impl BandPoint {
    fn from_samples(samples: &mut [f64]) -> Self {
        samples.sort_by(f64::total_cmp);
        let q = |p| crate::sampler::quantile_sorted(samples, p);
        Self {
            median: q(0.5),
            lower: q(0.025),
            upper: q(0.975),
        }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

/// Per-day 95% predictive intervals for both observation series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveBand {
    pub kind: BandKind,
    pub mobility: Vec<BandPoint>,
    pub cases: Vec<BandPoint>,
}

impl PredictiveBand {
    pub fn days(&self) -> usize {
        self.cases.len()
    }
}

/// `n` independent prior draws.
pub fn prior_draws(n: usize, seed: u64) -> Vec<ModelParams> {
    let mut rng = chain_rng(seed, 0);
    (0..n).map(|_| sample_prior(&mut rng)).collect()
}

/// Simulates observation paths over days `0..=horizon` and reports per-day
/// median and 2.5%/97.5% quantiles.
///
/// Paths are spread evenly over `draws` (cycling when `n_paths` exceeds the
/// number of draws); at least 1000 paths are always simulated. Each path
/// draws its noise from its own stream of `seed`, so the band is deterministic.
/// Draws whose ODE solve fails are skipped.
#[allow(clippy::too_many_arguments)]
pub fn predictive_band(
    draws: &[ModelParams],
    n: f64,
    i0: f64,
    horizon: usize,
    kind: BandKind,
    n_paths: usize,
    solver: &SolverConfig<f64>,
    seed: u64,
) -> Result<PredictiveBand, AnalysisError> {
    if draws.len() < MIN_BAND_DRAWS {
        return Err(AnalysisError::TooFewDraws {
            needed: MIN_BAND_DRAWS,
            got: draws.len(),
        });
    }
    let n_paths = n_paths.max(MIN_PATHS);
    let paths: Vec<(Vec<f64>, Vec<f64>)> = (0..n_paths)
        .into_par_iter()
        .filter_map(|k| {
            let p = &draws[(k * draws.len() / n_paths) % draws.len()];
            let traj: SlirTrajectory<f64> =
                simulate_slir(&p.slir(), n, i0, horizon, solver).ok()?;
            let mut rng = chain_rng(seed, k);
            let mut mobility = Vec::with_capacity(traj.len());
            let mut cases = Vec::with_capacity(traj.len());
            for x in &traj.states {
                mobility.push(draw_mobility(x, n, p.phi1, &mut rng));
                cases.push(draw_cases(x, p.phi2, &mut rng) as f64);
            }
            Some((mobility, cases))
        })
        .collect();
    if paths.len() < MIN_PATHS / 2 {
        return Err(AnalysisError::InvalidArgument(format!(
            "only {} of {n_paths} predictive paths could be simulated",
            paths.len()
        )));
    }
    type Pick = fn(&(Vec<f64>, Vec<f64>)) -> &Vec<f64>;
    let band = |pick: Pick| -> Vec<BandPoint> {
        (0..=horizon)
            .map(|t| {
                let mut day: Vec<f64> = paths.iter().map(|p| pick(p)[t]).collect();
                BandPoint::from_samples(&mut day)
            })
            .collect()
    };
    Ok(PredictiveBand {
        kind,
        mobility: band(|p| &p.0),
        cases: band(|p| &p.1),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastConfig {
    pub sampler: SamplerConfig,
    pub solver: SolverConfig<f64>,
    pub n_paths: usize,
    pub seed: u64,
}

/// A band fitted on the leading window with the held-out observations alongside.
#[derive(Debug, Clone)]
pub struct Forecast {
    pub train_days: usize,
    pub band: PredictiveBand,
    /// Observed `(day, mobility, cases)` for days not used in the fit.
    pub held_out: Vec<(usize, f64, u64)>,
    pub fit: FitResult,
}

impl Forecast {
    /// Width of the case-count interval on `day`.
    pub fn case_width(&self, day: usize) -> Option<f64> {
        self.band.cases.get(day).map(BandPoint::width)
    }
}

/// Fits on days `0..train_days` and projects the band over `0..total_days`.
pub fn forecast(
    data: &ObservedData,
    train_days: usize,
    total_days: usize,
    config: &ForecastConfig,
) -> Result<Forecast, AnalysisError> {
    if train_days == 0 || train_days > total_days || train_days > data.days() {
        return Err(AnalysisError::InvalidArgument(format!(
            "need 0 < train_days ({train_days}) ≤ total_days ({total_days}) and ≤ observed days ({})",
            data.days()
        )));
    }
    let fitted = fit(&data.truncate(train_days), &config.sampler, &config.solver)?;
    let draws = fitted.constrained_draws();
    let band = predictive_band(
        &draws,
        data.population,
        data.i0,
        total_days - 1,
        BandKind::Posterior,
        config.n_paths,
        &config.solver,
        config.seed,
    )?;
    let held_out = (train_days..total_days.min(data.days()))
        .map(|t| (t, data.mobility[t], data.cases[t]))
        .collect();
    Ok(Forecast {
        train_days,
        band,
        held_out,
        fit: fitted,
    })
}
