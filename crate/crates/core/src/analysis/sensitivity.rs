//! Hypothetical mobility scenarios: rescale the lockdown inflow rate `a` so the
//! lockdown fraction peaks at a chosen level, then record the attack rate.

use serde::{Deserialize, Serialize};

use super::{attack_rate, AnalysisError};
use crate::compartmental::{simulate_slir, SlirParams, SlirTrajectory};
use crate::ode::SolverConfig;
use crate::stats::ModelParams;

/// Upper end of the search range for `a` (per day).
pub const SWEEP_A_MAX: f64 = 100.0;
const BISECTION_STEPS: usize = 200;
const PEAK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    /// Requested peak mobility decline.
    pub target_decline: f64,
    /// Achieved `max_t L(t)/N`.
    pub peak_decline: f64,
    /// Lockdown inflow rate that produces the peak.
    pub a: f64,
    pub attack_rate: f64,
    /// The target is the full-adherence limit; `a` sits at [`SWEEP_A_MAX`].
    pub saturated: bool,
}

#[derive(Debug)]
pub struct SensitivityOutcome {
    pub target: f64,
    pub row: Result<SensitivityRow, AnalysisError>,
}

fn scenario(
    base: &ModelParams,
    a: f64,
    n: f64,
    i0: f64,
    horizon: usize,
    solver: &SolverConfig<f64>,
) -> Result<SlirTrajectory<f64>, AnalysisError> {
    Ok(simulate_slir(
        &SlirParams::new(base.r0, base.gamma, a, base.b),
        n,
        i0,
        horizon,
        solver,
    )?)
}

fn row(target: f64, a: f64, traj: &SlirTrajectory<f64>, saturated: bool) -> SensitivityRow {
    SensitivityRow {
        target_decline: target,
        peak_decline: traj.peak_lockdown_fraction(),
        a,
        attack_rate: attack_rate(traj),
        saturated,
    }
}

fn solve_target(
    base: &ModelParams,
    target: f64,
    n: f64,
    i0: f64,
    horizon: usize,
    solver: &SolverConfig<f64>,
) -> Result<SensitivityRow, AnalysisError> {
    if !(target > 0.0 && target <= 1.0) {
        return Err(AnalysisError::InvalidArgument(format!(
            "peak decline target {target} is outside (0, 1]"
        )));
    }
    let top = scenario(base, SWEEP_A_MAX, n, i0, horizon, solver)?;
    let reachable = top.peak_lockdown_fraction();
    if target == 1.0 {
        return Ok(row(target, SWEEP_A_MAX, &top, true));
    }
    if target > reachable {
        return Err(AnalysisError::Unattainable { target, reachable });
    }
    // max_t L/N increases with a, so bisect on [0, a_max].
    let (mut lo, mut hi) = (0.0, SWEEP_A_MAX);
    let mut best = top;
    let mut best_a = SWEEP_A_MAX;
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let traj = scenario(base, mid, n, i0, horizon, solver)?;
        let peak = traj.peak_lockdown_fraction();
        if peak < target {
            lo = mid;
        } else {
            hi = mid;
            best = traj;
            best_a = mid;
        }
        if (peak - target).abs() < PEAK_TOLERANCE || hi - lo < 1e-14 * hi.max(1.0) {
            break;
        }
    }
    Ok(row(target, best_a, &best, false))
}

/// One row per target; failures are reported per row rather than aborting the sweep.
pub fn sensitivity_sweep(
    base: &ModelParams,
    n: f64,
    i0: f64,
    horizon: usize,
    targets: &[f64],
    solver: &SolverConfig<f64>,
) -> Vec<SensitivityOutcome> {
    targets
        .iter()
        .map(|&target| SensitivityOutcome {
            target,
            row: solve_target(base, target, n, i0, horizon, solver),
        })
        .collect()
}
