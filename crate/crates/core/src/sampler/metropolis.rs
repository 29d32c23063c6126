use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::{standard_normal, ChainState, StepInfo, TargetDensity};

/// Symmetric Gaussian proposal `N(θ, V)` stored as a Cholesky factor of `V`.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomWalkProposal {
    chol: DMatrix<f64>,
}

impl RandomWalkProposal {
    pub fn isotropic(dim: usize, scale: f64) -> Self {
        Self {
            chol: DMatrix::identity(dim, dim) * scale,
        }
    }

    /// `None` when `cov` is not symmetric positive definite.
    pub fn from_covariance(cov: DMatrix<f64>) -> Option<Self> {
        cov.cholesky().map(|c| Self { chol: c.l() })
    }

    pub fn dim(&self) -> usize {
        self.chol.nrows()
    }

    /// Same shape, factor multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            chol: &self.chol * factor,
        }
    }

    fn draw<R: Rng + ?Sized>(&self, current: &[f64], rng: &mut R) -> Vec<f64> {
        let z = DVector::from_iterator(
            current.len(),
            (0..current.len()).map(|_| standard_normal(rng)),
        );
        let step = &self.chol * z;
        current
            .iter()
            .zip(step.iter())
            .map(|(x, s)| x + s)
            .collect()
    }
}

/// One random-walk Metropolis transition; the proposal is accepted with probability
/// `min(1, p(θ*)/p(θ))` and proposals with zero density are always rejected.
pub fn metropolis_step<T: TargetDensity + ?Sized, R: Rng + ?Sized>(
    target: &T,
    current: &ChainState,
    proposal: &RandomWalkProposal,
    rng: &mut R,
) -> (ChainState, StepInfo) {
    let candidate = proposal.draw(&current.position, rng);
    let log_density = target.log_density(&candidate);
    let log_ratio = log_density - current.log_density;
    let accept_stat = if log_ratio.is_nan() {
        0.0
    } else {
        log_ratio.min(0.0).exp()
    };
    let accepted = log_density.is_finite() && rng.random::<f64>() < accept_stat;
    let info = StepInfo {
        accept_stat,
        accepted,
        divergent: false,
        n_steps: 1,
        tree_depth: 0,
    };
    if accepted {
        let grad = vec![0.0; candidate.len()];
        (
            ChainState {
                position: candidate,
                log_density,
                grad,
            },
            info,
        )
    } else {
        (current.clone(), info)
    }
}
