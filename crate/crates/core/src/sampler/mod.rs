//! General-purpose MCMC over a log-density on ℝᵈ.
//!
//! Random-walk Metropolis, static HMC and the No-U-Turn sampler share one
//! driver ([`run_chains`]) that handles initialisation, warmup adaptation and
//! parallel execution of independent chains.

mod adapt;
mod chains;
mod diagnostics;
mod hmc;
mod leapfrog;
mod metropolis;
mod nuts;

use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adapt::{DualAveraging, DualAveragingOptions, VarianceEstimator};
pub use chains::{run_chains, Chain, ChainSet};
pub(crate) use diagnostics::quantile_sorted;
pub use diagnostics::{
    autocorrelation, effective_sample_size, gelman_rubin, mcse_mean, quantile, summarize,
    DiagnosticsError, ParameterSummary,
};
pub use hmc::hmc_step;
pub use leapfrog::{hamiltonian, leapfrog, LeapfrogOutput};
pub use metropolis::{metropolis_step, RandomWalkProposal};
pub use nuts::nuts_step;

/// Energy error beyond which a trajectory is flagged divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1000.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),
    #[error("chain {chain}: no initial point with finite density after {attempts} prior draws")]
    Initialization { chain: usize, attempts: usize },
    #[error("all chains stuck: acceptance rates {rates:?} are below 1%")]
    Stuck { rates: Vec<f64> },
}

/// Log-density target. Implementations must be safe to evaluate from several
/// chains at once.
pub trait TargetDensity: Sync {
    fn dim(&self) -> usize;

    /// Log density, `f64::NEG_INFINITY` outside the support. Must never return NaN.
    fn log_density(&self, x: &[f64]) -> f64;

    /// Log density with its gradient written into `grad`. A non-finite return value
    /// means the point (or its gradient) is unusable.
    fn log_density_and_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;

    /// Starting point for a chain. Defaults to `Uniform(-2, 2)` per coordinate.
    fn initial_point(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        (0..self.dim())
            .map(|_| rng.random_range(-2.0..2.0))
            .collect()
    }
}

/// Current position of a chain with cached density and gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub position: Vec<f64>,
    pub log_density: f64,
    pub grad: Vec<f64>,
}

impl ChainState {
    /// Evaluates the target at `position`; `None` when density or gradient is not finite.
    pub fn at<T: TargetDensity + ?Sized>(target: &T, position: Vec<f64>) -> Option<Self> {
        let mut grad = vec![0.0; position.len()];
        let log_density = target.log_density_and_grad(&position, &mut grad);
        if log_density.is_finite() && grad.iter().all(|g| g.is_finite()) {
            Some(Self {
                position,
                log_density,
                grad,
            })
        } else {
            None
        }
    }
}

/// Per-transition bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepInfo {
    /// Acceptance statistic fed to step-size adaptation.
    pub accept_stat: f64,
    /// Whether the chain moved.
    pub accepted: bool,
    pub divergent: bool,
    /// Number of leapfrog steps (or density evaluations for random walk).
    pub n_steps: usize,
    pub tree_depth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Algorithm {
    /// Gaussian random walk with covariance `scale² · I`; the scale is tuned in warmup.
    RandomWalk { scale: f64 },
    Hmc {
        step_size: f64,
        n_steps: usize,
        target_accept: f64,
    },
    Nuts {
        max_tree_depth: usize,
        target_accept: f64,
    },
}

impl Default for Algorithm {
    fn default() -> Self {
        Algorithm::Nuts {
            max_tree_depth: 10,
            target_accept: 0.8,
        }
    }
}

/// Mass matrix for the kinetic energy. Identity unless diagonal adaptation is requested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MassMatrix {
    #[default]
    Identity,
    /// Diagonal, estimated from windows of warmup draws.
    AdaptDiagonal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub n_chains: usize,
    /// Total iterations per chain, warmup included.
    pub n_iter: usize,
    pub n_warmup: usize,
    pub seed: u64,
    pub algorithm: Algorithm,
    #[serde(default)]
    pub mass_matrix: MassMatrix,
}

impl Default for SamplerConfig {
    /// Four chains of 10 000 iterations with half discarded as warmup.
    fn default() -> Self {
        Self {
            n_chains: 4,
            n_iter: 10_000,
            n_warmup: 5_000,
            seed: 1,
            algorithm: Algorithm::default(),
            mass_matrix: MassMatrix::Identity,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        let bad = |m: &str| Err(SamplerError::InvalidConfig(m.to_string()));
        if self.n_chains == 0 {
            return bad("n_chains must be at least 1");
        }
        if self.n_iter == 0 || self.n_warmup >= self.n_iter {
            return bad("need 0 <= n_warmup < n_iter");
        }
        match self.algorithm {
            Algorithm::RandomWalk { scale } if !(scale > 0.0 && scale.is_finite()) => {
                bad("random-walk scale must be positive")
            }
            Algorithm::Hmc {
                step_size,
                n_steps,
                target_accept,
            } => {
                if !(step_size > 0.0 && step_size.is_finite()) || n_steps == 0 {
                    bad("HMC needs a positive step size and at least one leapfrog step")
                } else if !(target_accept > 0.0 && target_accept < 1.0) {
                    bad("target_accept must lie in (0, 1)")
                } else {
                    Ok(())
                }
            }
            Algorithm::Nuts { target_accept, .. }
                if !(target_accept > 0.0 && target_accept < 1.0) =>
            {
                bad("target_accept must lie in (0, 1)")
            }
            _ => Ok(()),
        }
    }

    pub fn n_draws(&self) -> usize {
        self.n_iter - self.n_warmup
    }
}

/// Independent generator for one chain: a shared seed selects the key and the
/// chain index selects the ChaCha stream.
pub fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

pub(crate) fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(rand_distr::StandardNormal)
}

pub(crate) fn log_sum_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}
