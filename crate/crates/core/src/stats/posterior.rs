//! ODE-embedded likelihood, log posterior and finite-difference gradient.

use std::sync::atomic::{AtomicUsize, Ordering};

use rand::RngCore;

use super::distributions::{beta_obs_logpdf, log_prior, negbin_obs_logpmf, sample_prior};
use super::transform::{log_jacobian, to_constrained, to_unconstrained};
use super::{ModelParams, ObservedData, StatsError, UnconstrainedParams, N_PARAMS};
use crate::compartmental::{simulate_slir, ModelError, SlirTrajectory};
use crate::ode::SolverConfig;
use crate::sampler::TargetDensity;

/// Smallest case-count mean passed to the negative binomial; guards against
/// solver undershoot of `I(t)` below zero.
const MIN_CASE_MEAN: f64 = 1e-10;

/// Per-day log-likelihood contributions.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodTerms {
    /// `mobility[t]` for `t ≥ 1`; day 0 carries no mobility term and is stored as 0.
    pub mobility: Vec<f64>,
    pub cases: Vec<f64>,
}

impl LikelihoodTerms {
    pub fn total(&self) -> f64 {
        let sum = self.mobility.iter().sum::<f64>() + self.cases.iter().sum::<f64>();
        if sum.is_nan() {
            f64::NEG_INFINITY
        } else {
            sum
        }
    }
}

fn solve(
    p: &ModelParams,
    data: &ObservedData,
    solver: &SolverConfig<f64>,
) -> Result<SlirTrajectory<f64>, ModelError> {
    simulate_slir(&p.slir(), data.population, data.i0, data.horizon(), solver)
}

/// Scores each observed day against the SLIR solution at `p`.
pub fn likelihood_terms(
    p: &ModelParams,
    data: &ObservedData,
    solver: &SolverConfig<f64>,
) -> Result<LikelihoodTerms, StatsError> {
    p.validate()?;
    let traj = solve(p, data, solver)?;
    let n = data.population;
    let mobility = traj
        .states
        .iter()
        .zip(&data.mobility)
        .enumerate()
        .map(|(t, (x, &y))| {
            if t == 0 {
                0.0
            } else {
                beta_obs_logpdf(y, x.l, n, p.phi1)
            }
        })
        .collect();
    let cases = traj
        .states
        .iter()
        .zip(&data.cases)
        .map(|(x, &y)| negbin_obs_logpmf(y, x.i.max(MIN_CASE_MEAN), p.phi2))
        .collect();
    Ok(LikelihoodTerms { mobility, cases })
}

/// Log likelihood, `−∞` when the parameters are invalid or the ODE solve fails.
pub fn log_likelihood(p: &ModelParams, data: &ObservedData, solver: &SolverConfig<f64>) -> f64 {
    likelihood_terms(p, data, solver).map_or(f64::NEG_INFINITY, |t| t.total())
}

/// `log_prior(θ) + log_jacobian(u) + log_likelihood(θ)` with `θ = to_constrained(u)`.
pub fn log_posterior(
    u: &UnconstrainedParams,
    data: &ObservedData,
    solver: &SolverConfig<f64>,
) -> f64 {
    let p = to_constrained(u);
    let prior = log_prior(&p);
    if prior == f64::NEG_INFINITY {
        return prior;
    }
    finite_or_neg_inf(prior + log_jacobian(u) + log_likelihood(&p, data, solver))
}

fn finite_or_neg_inf(x: f64) -> f64 {
    if x.is_finite() {
        x
    } else {
        f64::NEG_INFINITY
    }
}

/// Finite-difference step for coordinate value `x`.
fn fd_step(x: f64) -> f64 {
    (1e-5 * x.abs()).max(1e-5)
}

fn central_difference<F: Fn(&[f64]) -> f64>(
    f: F,
    u: &[f64],
    grad: &mut [f64],
    scale: f64,
) -> Result<(), StatsError> {
    let mut x = u.to_vec();
    for i in 0..u.len() {
        let h = scale * fd_step(u[i]);
        x[i] = u[i] + h;
        let up = f(&x);
        x[i] = u[i] - h;
        let down = f(&x);
        x[i] = u[i];
        if !(up.is_finite() && down.is_finite()) {
            return Err(StatsError::NonFiniteGradient {
                coordinate: i,
                step: h,
            });
        }
        grad[i] = (up - down) / (2.0 * h);
    }
    Ok(())
}

/// Central-difference gradient of [`log_posterior`] with step `max(1e−5, 1e−5·|u_i|)`.
pub fn grad_log_posterior(
    u: &UnconstrainedParams,
    data: &ObservedData,
    solver: &SolverConfig<f64>,
) -> Result<[f64; N_PARAMS], StatsError> {
    let mut grad = [0.0; N_PARAMS];
    central_difference(
        |x| log_posterior(&UnconstrainedParams::from_slice(x), data, solver),
        &u.0,
        &mut grad,
        1.0,
    )?;
    Ok(grad)
}

/// The posterior as a sampler target on unconstrained coordinates.
///
/// Chains start from prior draws. With `with_likelihood(false)` the target is the
/// prior pushed forward to ℝ⁶, which is useful for checking the transform.
#[derive(Debug)]
pub struct SlirPosterior {
    data: ObservedData,
    solver: SolverConfig<f64>,
    likelihood: bool,
    fd_scale: f64,
    failures: AtomicUsize,
}

impl SlirPosterior {
    pub fn new(data: ObservedData, solver: SolverConfig<f64>) -> Result<Self, StatsError> {
        data.validate()?;
        solver.validate().map_err(ModelError::from)?;
        Ok(Self {
            data,
            solver,
            likelihood: true,
            fd_scale: 1.0,
            failures: AtomicUsize::new(0),
        })
    }

    pub fn with_likelihood(mut self, on: bool) -> Self {
        self.likelihood = on;
        self
    }

    /// Multiplies the finite-difference step (1 = the default rule).
    pub fn with_fd_scale(mut self, scale: f64) -> Self {
        self.fd_scale = scale;
        self
    }

    pub fn data(&self) -> &ObservedData {
        &self.data
    }

    pub fn solver(&self) -> &SolverConfig<f64> {
        &self.solver
    }

    /// Evaluations whose parameters were valid but whose ODE solve failed.
    pub fn ode_failures(&self) -> usize {
        self.failures.load(Ordering::Relaxed)
    }

    pub fn evaluate(&self, u: &UnconstrainedParams) -> f64 {
        let p = to_constrained(u);
        let prior = log_prior(&p);
        if prior == f64::NEG_INFINITY {
            return prior;
        }
        let mut total = prior + log_jacobian(u);
        if self.likelihood {
            match likelihood_terms(&p, &self.data, &self.solver) {
                Ok(terms) => total += terms.total(),
                Err(StatsError::Model(_)) => {
                    self.failures.fetch_add(1, Ordering::Relaxed);
                    return f64::NEG_INFINITY;
                }
                Err(_) => return f64::NEG_INFINITY,
            }
        }
        finite_or_neg_inf(total)
    }

    pub fn gradient(&self, u: &UnconstrainedParams) -> Result<[f64; N_PARAMS], StatsError> {
        let mut grad = [0.0; N_PARAMS];
        central_difference(
            |x| self.evaluate(&UnconstrainedParams::from_slice(x)),
            &u.0,
            &mut grad,
            self.fd_scale,
        )?;
        Ok(grad)
    }
}

impl TargetDensity for SlirPosterior {
    fn dim(&self) -> usize {
        N_PARAMS
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        self.evaluate(&UnconstrainedParams::from_slice(x))
    }

    fn log_density_and_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let u = UnconstrainedParams::from_slice(x);
        let value = self.evaluate(&u);
        if !value.is_finite() {
            return f64::NEG_INFINITY;
        }
        match self.gradient(&u) {
            Ok(g) => {
                grad.copy_from_slice(&g);
                value
            }
            Err(_) => f64::NEG_INFINITY,
        }
    }

    fn initial_point(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        to_unconstrained(&sample_prior(rng)).0.to_vec()
    }
}
