//! The hierarchical observation model: priors on `{R0, γ, a, b, φ1, φ2}`, a Beta
//! layer on mobility, a negative-binomial layer on case counts and the
//! ODE-embedded log-posterior on unconstrained coordinates.

mod distributions;
mod posterior;
mod transform;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compartmental::{ModelError, SlirParams};

pub use distributions::{
    beta_obs_logpdf, log_prior, log_prior_gradient_unconstrained, negbin_obs_logpmf, sample_prior,
    MOBILITY_CLAMP,
};
pub use posterior::{
    grad_log_posterior, likelihood_terms, log_likelihood, log_posterior, LikelihoodTerms,
    SlirPosterior,
};
pub use transform::{log_jacobian, logit, sigmoid, to_constrained, to_unconstrained};

/// Number of model parameters.
pub const N_PARAMS: usize = 6;

/// Parameter names in storage order.
pub const PARAM_NAMES: [&str; N_PARAMS] = ["R0", "gamma", "a", "b", "phi1", "phi2"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("parameter out of support: {0}")]
    OutOfSupport(String),
    #[error("invalid observed data: {0}")]
    InvalidData(String),
    #[error(
        "log posterior is not finite near coordinate {coordinate} (step {step:e}); \
         use a smaller finite-difference step or tighten the ODE tolerances"
    )]
    NonFiniteGradient { coordinate: usize, step: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Structural and dispersion parameters on their natural scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    #[serde(rename = "R0")]
    pub r0: f64,
    pub gamma: f64,
    pub a: f64,
    pub b: f64,
    pub phi1: f64,
    pub phi2: f64,
}

impl ModelParams {
    pub fn new(r0: f64, gamma: f64, a: f64, b: f64, phi1: f64, phi2: f64) -> Self {
        Self {
            r0,
            gamma,
            a,
            b,
            phi1,
            phi2,
        }
    }

    pub fn to_array(&self) -> [f64; N_PARAMS] {
        [self.r0, self.gamma, self.a, self.b, self.phi1, self.phi2]
    }

    pub fn from_array(x: [f64; N_PARAMS]) -> Self {
        Self::new(x[0], x[1], x[2], x[3], x[4], x[5])
    }

    pub fn in_support(&self) -> bool {
        let unit = |x: f64| x > 0.0 && x < 1.0;
        self.r0 > 0.0
            && self.r0.is_finite()
            && unit(self.gamma)
            && unit(self.a)
            && unit(self.b)
            && self.phi1 > 0.0
            && self.phi1.is_finite()
            && self.phi2 > 0.0
            && self.phi2.is_finite()
    }

    pub fn validate(&self) -> Result<(), StatsError> {
        if self.in_support() {
            Ok(())
        } else {
            Err(StatsError::OutOfSupport(format!("{self:?}")))
        }
    }

    pub fn slir(&self) -> SlirParams<f64> {
        SlirParams::new(self.r0, self.gamma, self.a, self.b)
    }
}

/// Parameters mapped to ℝ⁶: `(log R0, logit γ, logit a, logit b, log φ1, log φ2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnconstrainedParams(pub [f64; N_PARAMS]);

impl UnconstrainedParams {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn from_slice(x: &[f64]) -> Self {
        let mut out = [0.0; N_PARAMS];
        out.copy_from_slice(x);
        Self(out)
    }
}

/// Daily series aligned on day 0 = the first observation.
///
/// `mobility[t]` is the fraction adhering to mitigation on day `t`; `mobility[0]`
/// is stored but never scored because `L(0) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedData {
    pub mobility: Vec<f64>,
    pub cases: Vec<u64>,
    pub population: f64,
    pub i0: f64,
    #[serde(default)]
    pub start_date: Option<NaiveDate>,
}

impl ObservedData {
    pub fn new(
        mobility: Vec<f64>,
        cases: Vec<u64>,
        population: f64,
        i0: f64,
    ) -> Result<Self, StatsError> {
        let data = Self {
            mobility,
            cases,
            population,
            i0,
            start_date: None,
        };
        data.validate()?;
        Ok(data)
    }

    pub fn with_start_date(mut self, date: NaiveDate) -> Self {
        self.start_date = Some(date);
        self
    }

    /// Number of observed days.
    pub fn days(&self) -> usize {
        self.cases.len()
    }

    /// Last day index, used as the ODE horizon.
    pub fn horizon(&self) -> usize {
        self.days().saturating_sub(1)
    }

    pub fn validate(&self) -> Result<(), StatsError> {
        let bad = |msg: String| Err(StatsError::InvalidData(msg));
        if self.mobility.len() != self.cases.len() {
            return bad(format!(
                "{} mobility days but {} case days",
                self.mobility.len(),
                self.cases.len()
            ));
        }
        if self.cases.is_empty() {
            return bad("no observations".into());
        }
        if !(self.population > 0.0 && self.population.is_finite()) {
            return bad(format!(
                "population must be positive, got {}",
                self.population
            ));
        }
        if !(self.i0 > 0.0 && self.i0 < self.population) {
            return bad(format!("i0 must lie in (0, N), got {}", self.i0));
        }
        if let Some(t) = self.mobility.iter().position(|y| !(*y > 0.0 && *y < 1.0)) {
            return bad(format!(
                "mobility[{t}] = {} is outside (0, 1)",
                self.mobility[t]
            ));
        }
        Ok(())
    }

    /// The first `days` observations.
    pub fn truncate(&self, days: usize) -> Self {
        let days = days.min(self.days());
        Self {
            mobility: self.mobility[..days].to_vec(),
            cases: self.cases[..days].to_vec(),
            ..self.clone()
        }
    }
}
