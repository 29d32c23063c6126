use rand::Rng;
use rayon::prelude::*;

use super::adapt::{mass_windows, DualAveraging, DualAveragingOptions, VarianceEstimator};
use super::hmc::{draw_momentum, hmc_step};
use super::leapfrog::{integrate, kinetic_energy};
use super::metropolis::{metropolis_step, RandomWalkProposal};
use super::nuts::nuts_step;
use super::{
    chain_rng, Algorithm, ChainState, MassMatrix, SamplerConfig, SamplerError, StepInfo,
    TargetDensity,
};

const MAX_INIT_ATTEMPTS: usize = 100;
const RANDOM_WALK_TARGET_ACCEPT: f64 = 0.234;
const STUCK_ACCEPT_RATE: f64 = 0.01;

/// Post-warmup output of one chain, in the target's (unconstrained) coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub draws: Vec<Vec<f64>>,
    pub log_density: Vec<f64>,
    pub divergent: Vec<bool>,
    pub accept_stat: Vec<f64>,
    pub moved: Vec<bool>,
    /// Step size (or random-walk scale) used after warmup.
    pub step_size: f64,
    /// Step size used at each warmup iteration.
    pub step_size_trace: Vec<f64>,
    pub inv_mass: Vec<f64>,
    pub warmup_divergences: usize,
    pub n_leapfrog: usize,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn n_divergent(&self) -> usize {
        self.divergent.iter().filter(|d| **d).count()
    }

    /// Fraction of post-warmup iterations where the state changed.
    pub fn acceptance_rate(&self) -> f64 {
        if self.moved.is_empty() {
            return 0.0;
        }
        self.moved.iter().filter(|m| **m).count() as f64 / self.moved.len() as f64
    }

    pub fn parameter(&self, index: usize) -> Vec<f64> {
        self.draws.iter().map(|d| d[index]).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainSet {
    pub chains: Vec<Chain>,
    pub dim: usize,
}

impl ChainSet {
    /// Draws of one coordinate, one vector per chain.
    pub fn parameter(&self, index: usize) -> Vec<Vec<f64>> {
        self.chains.iter().map(|c| c.parameter(index)).collect()
    }

    pub fn n_divergent(&self) -> usize {
        self.chains.iter().map(Chain::n_divergent).sum()
    }

    /// All post-warmup draws, chain after chain.
    pub fn pooled(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.chains.iter().flat_map(|c| c.draws.iter())
    }
}

/// Runs `config.n_chains` independent chains in parallel.
///
/// Each chain starts at `target.initial_point` (retried until the density is finite),
/// adapts its step size by dual averaging during warmup and then keeps
/// `n_iter - n_warmup` draws. Output is a pure function of `config.seed`.
pub fn run_chains<T: TargetDensity + ?Sized>(
    target: &T,
    config: &SamplerConfig,
) -> Result<ChainSet, SamplerError> {
    config.validate()?;
    let chains: Vec<Chain> = (0..config.n_chains)
        .into_par_iter()
        .map(|c| run_chain(target, config, c))
        .collect::<Result<_, _>>()?;
    let rates: Vec<f64> = chains.iter().map(Chain::acceptance_rate).collect();
    if rates.iter().all(|r| *r < STUCK_ACCEPT_RATE) {
        return Err(SamplerError::Stuck { rates });
    }
    Ok(ChainSet {
        chains,
        dim: target.dim(),
    })
}

fn initial_state<T: TargetDensity + ?Sized, R: Rng>(
    target: &T,
    chain: usize,
    rng: &mut R,
) -> Result<ChainState, SamplerError> {
    for _ in 0..MAX_INIT_ATTEMPTS {
        let point = target.initial_point(rng);
        if let Some(state) = ChainState::at(target, point) {
            return Ok(state);
        }
    }
    Err(SamplerError::Initialization {
        chain,
        attempts: MAX_INIT_ATTEMPTS,
    })
}

/// Doubles or halves a trial step until the one-step acceptance crosses 1/2.
fn reasonable_step_size<T: TargetDensity + ?Sized, R: Rng>(
    target: &T,
    state: &ChainState,
    inv_mass: &[f64],
    initial: f64,
    rng: &mut R,
) -> f64 {
    let mut eps = initial;
    let log_accept = |eps: f64, rng: &mut R| {
        let r = draw_momentum(inv_mass, rng);
        let h0 = -state.log_density + kinetic_energy(&r, inv_mass);
        let out = integrate(target, state, &r, eps, 1, inv_mass);
        let h1 = -out.log_density + kinetic_energy(&out.momentum, inv_mass);
        let v = h0 - h1;
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };
    let half = 0.5f64.ln();
    let direction = if log_accept(eps, rng) > half {
        1.0
    } else {
        -1.0
    };
    for _ in 0..100 {
        let la = log_accept(eps, rng);
        if (direction > 0.0 && la <= half) || (direction < 0.0 && la > half) {
            break;
        }
        eps *= 2f64.powf(direction);
        if !(1e-10..1e7).contains(&eps) {
            break;
        }
    }
    eps.clamp(1e-10, 1e7)
}

fn run_chain<T: TargetDensity + ?Sized>(
    target: &T,
    config: &SamplerConfig,
    chain: usize,
) -> Result<Chain, SamplerError> {
    let mut rng = chain_rng(config.seed, chain);
    let dim = target.dim();
    let mut state = initial_state(target, chain, &mut rng)?;
    let mut inv_mass = vec![1.0; dim];

    let (initial_step, target_accept) = match config.algorithm {
        Algorithm::RandomWalk { scale } => (scale, RANDOM_WALK_TARGET_ACCEPT),
        Algorithm::Hmc {
            step_size,
            target_accept,
            ..
        } => (step_size, target_accept),
        Algorithm::Nuts { target_accept, .. } => (
            reasonable_step_size(target, &state, &inv_mass, 1.0, &mut rng),
            target_accept,
        ),
    };
    let mut adapter =
        DualAveraging::new(initial_step, target_accept, DualAveragingOptions::default());
    let windows = match config.mass_matrix {
        MassMatrix::AdaptDiagonal => mass_windows(config.n_warmup),
        MassMatrix::Identity => Vec::new(),
    };
    let window_start = if windows.is_empty() {
        usize::MAX
    } else {
        (config.n_warmup as f64 * 0.15).ceil() as usize
    };
    let mut variance = VarianceEstimator::new(dim);

    let n_draws = config.n_draws();
    let mut out = Chain {
        draws: Vec::with_capacity(n_draws),
        log_density: Vec::with_capacity(n_draws),
        divergent: Vec::with_capacity(n_draws),
        accept_stat: Vec::with_capacity(n_draws),
        moved: Vec::with_capacity(n_draws),
        step_size: initial_step,
        step_size_trace: Vec::with_capacity(config.n_warmup),
        inv_mass: inv_mass.clone(),
        warmup_divergences: 0,
        n_leapfrog: 0,
    };
    let mut step = if config.n_warmup > 0 {
        adapter.current()
    } else {
        initial_step
    };

    for iter in 0..config.n_iter {
        let warming = iter < config.n_warmup;
        let (next, info): (ChainState, StepInfo) = match config.algorithm {
            Algorithm::RandomWalk { .. } => {
                let proposal = diagonal_proposal(&inv_mass, step);
                metropolis_step(target, &state, &proposal, &mut rng)
            }
            Algorithm::Hmc { n_steps, .. } => {
                hmc_step(target, &state, step, n_steps, &inv_mass, &mut rng)
            }
            Algorithm::Nuts { max_tree_depth, .. } => {
                nuts_step(target, &state, step, max_tree_depth, &inv_mass, &mut rng)
            }
        };
        state = next;
        out.n_leapfrog += info.n_steps;

        if warming {
            out.step_size_trace.push(step);
            out.warmup_divergences += info.divergent as usize;
            adapter.update(info.accept_stat);
            if iter >= window_start {
                variance.add(&state.position);
            }
            if windows.contains(&(iter + 1)) {
                inv_mass = variance.regularized_variance();
                variance = VarianceEstimator::new(dim);
                let restart = match config.algorithm {
                    Algorithm::Nuts { .. } => {
                        reasonable_step_size(target, &state, &inv_mass, adapter.current(), &mut rng)
                    }
                    _ => adapter.current(),
                };
                adapter.restart(restart);
            }
            step = if iter + 1 == config.n_warmup {
                adapter.final_step()
            } else {
                adapter.current()
            };
        } else {
            out.draws.push(state.position.clone());
            out.log_density.push(state.log_density);
            out.divergent.push(info.divergent);
            out.accept_stat.push(info.accept_stat);
            out.moved.push(info.accepted);
        }
    }
    out.step_size = step;
    out.inv_mass = inv_mass;
    Ok(out)
}

fn diagonal_proposal(inv_mass: &[f64], scale: f64) -> RandomWalkProposal {
    let dim = inv_mass.len();
    let mut cov = nalgebra::DMatrix::zeros(dim, dim);
    for (i, v) in inv_mass.iter().enumerate() {
        cov[(i, i)] = v * scale * scale;
    }
    RandomWalkProposal::from_covariance(cov)
        .unwrap_or_else(|| RandomWalkProposal::isotropic(dim, scale))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::diagnostics::{effective_sample_size, gelman_rubin};
    use crate::sampler::test_targets::Gaussian;

    fn config(algorithm: Algorithm) -> SamplerConfig {
        SamplerConfig {
            n_chains: 4,
            n_iter: 2000,
            n_warmup: 1000,
            seed: 42,
            algorithm,
            mass_matrix: MassMatrix::Identity,
        }
    }

    #[test]
    fn identical_seeds_identical_draws() {
        let target = Gaussian::correlated(0.5);
        let cfg = SamplerConfig {
            n_iter: 300,
            n_warmup: 150,
            ..config(Algorithm::default())
        };
        let a = run_chains(&target, &cfg).unwrap();
        let b = run_chains(&target, &cfg).unwrap();
        assert_eq!(a, b);
        let c = run_chains(&target, &SamplerConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a.chains[0].draws, c.chains[0].draws);
        assert_ne!(a.chains[0].draws, a.chains[1].draws);
    }

    #[test]
    fn nuts_converges_on_correlated_gaussian() {
        let set = run_chains(&Gaussian::correlated(0.9), &config(Algorithm::default())).unwrap();
        for p in 0..2 {
            let rhat = gelman_rubin(&set.parameter(p)).unwrap();
            assert!(rhat < 1.01, "rhat {rhat}");
        }
    }

    #[test]
    fn nuts_more_efficient_than_random_walk_per_evaluation() {
        let target = Gaussian::correlated(0.9);
        let nuts = run_chains(&target, &config(Algorithm::default())).unwrap();
        let rw = run_chains(&target, &config(Algorithm::RandomWalk { scale: 0.5 })).unwrap();
        let efficiency =
            |set: &ChainSet, evals: f64| effective_sample_size(&set.parameter(0)).unwrap() / evals;
        let nuts_evals: f64 = nuts.chains.iter().map(|c| c.n_leapfrog as f64).sum();
        let rw_evals: f64 = rw.chains.iter().map(|c| c.n_leapfrog as f64).sum();
        let ratio = efficiency(&nuts, nuts_evals) / efficiency(&rw, rw_evals);
        // The endpoint U-turn rule stops after a few steps on this geometry, so the margin is modest.
        assert!(ratio > 1.0, "NUTS/RW ESS per evaluation ratio {ratio}");
    }

    #[test]
    fn hmc_adapts_towards_target_acceptance() {
        let target = Gaussian::correlated(0.9);
        let set = run_chains(
            &target,
            &config(Algorithm::Hmc {
                step_size: 1.0,
                n_steps: 8,
                target_accept: 0.8,
            }),
        )
        .unwrap();
        for chain in &set.chains {
            let mean_accept = chain.accept_stat.iter().sum::<f64>() / chain.len() as f64;
            // Starting at ε = 1 is beyond the leapfrog stability limit 2·sqrt(0.1) for this target.
            assert!(
                chain.step_size < 2.0 * 0.1f64.sqrt(),
                "step {}",
                chain.step_size
            );
            assert!(mean_accept > 0.6, "accept {mean_accept}");
        }
    }

    #[test]
    fn diagonal_mass_adaptation_learns_scales() {
        let target = Gaussian {
            precision: vec![vec![1.0 / 100.0, 0.0], vec![0.0, 100.0]],
        };
        let cfg = SamplerConfig {
            mass_matrix: MassMatrix::AdaptDiagonal,
            ..config(Algorithm::default())
        };
        let set = run_chains(&target, &cfg).unwrap();
        let m = &set.chains[0].inv_mass;
        assert!(m[0] > 30.0 && m[0] < 300.0, "{m:?}");
        assert!(m[1] > 0.003 && m[1] < 0.03, "{m:?}");
    }

    #[test]
    fn stationarity_from_target_draws() {
        // Start exactly at target draws and sample without warmup: moments must not drift.
        struct Started(Gaussian);
        impl TargetDensity for Started {
            fn dim(&self) -> usize {
                self.0.dim()
            }
            fn log_density(&self, x: &[f64]) -> f64 {
                self.0.log_density(x)
            }
            fn log_density_and_grad(&self, x: &[f64], g: &mut [f64]) -> f64 {
                self.0.log_density_and_grad(x, g)
            }
            fn initial_point(&self, rng: &mut dyn rand::RngCore) -> Vec<f64> {
                (0..self.dim())
                    .map(|_| crate::sampler::standard_normal(rng))
                    .collect()
            }
        }
        let target = Started(Gaussian::standard(2));
        for algorithm in [
            Algorithm::RandomWalk { scale: 1.5 },
            Algorithm::Hmc {
                step_size: 0.5,
                n_steps: 5,
                target_accept: 0.8,
            },
            Algorithm::Nuts {
                max_tree_depth: 8,
                target_accept: 0.8,
            },
        ] {
            let cfg = SamplerConfig {
                n_chains: 4,
                n_iter: 10_000,
                n_warmup: 0,
                seed: 8,
                algorithm: algorithm.clone(),
                mass_matrix: MassMatrix::Identity,
            };
            let set = run_chains(&target, &cfg).unwrap();
            for p in 0..2 {
                let draws = set.parameter(p);
                let all: Vec<f64> = draws.iter().flatten().copied().collect();
                let n = all.len() as f64;
                let mean = all.iter().sum::<f64>() / n;
                let var = all.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
                let ess = effective_sample_size(&draws).unwrap();
                let squares: Vec<Vec<f64>> = draws
                    .iter()
                    .map(|c| c.iter().map(|x| x * x).collect())
                    .collect();
                let ess_sq = effective_sample_size(&squares).unwrap();
                assert!(
                    mean.abs() < 4.0 * (var / ess).sqrt(),
                    "{algorithm:?} mean {mean}"
                );
                assert!(
                    (var - 1.0).abs() < 4.0 * (2.0 / ess_sq).sqrt(),
                    "{algorithm:?} var {var}"
                );
            }
        }
    }

    struct Nowhere;

    impl TargetDensity for Nowhere {
        fn dim(&self) -> usize {
            1
        }
        fn log_density(&self, _x: &[f64]) -> f64 {
            f64::NEG_INFINITY
        }
        fn log_density_and_grad(&self, _x: &[f64], _g: &mut [f64]) -> f64 {
            f64::NEG_INFINITY
        }
    }

    #[test]
    fn initialization_failure_is_reported() {
        let err = run_chains(&Nowhere, &config(Algorithm::default())).unwrap_err();
        assert_eq!(
            err,
            SamplerError::Initialization {
                chain: 0,
                attempts: 100
            }
        );
    }

    #[test]
    fn invalid_config_is_rejected() {
        let bad = SamplerConfig {
            n_warmup: 2000,
            ..config(Algorithm::default())
        };
        assert!(matches!(
            run_chains(&Gaussian::standard(1), &bad),
            Err(SamplerError::InvalidConfig(_))
        ));
    }

    #[test]
    fn stuck_chains_are_reported() {
        // A huge fixed random-walk scale with no warmup never moves on a narrow target.
        let target = Gaussian {
            precision: vec![vec![1e12]],
        };
        let cfg = SamplerConfig {
            n_chains: 2,
            n_iter: 200,
            n_warmup: 0,
            seed: 1,
            algorithm: Algorithm::RandomWalk { scale: 1e3 },
            mass_matrix: MassMatrix::Identity,
        };
        assert!(matches!(
            run_chains(&target, &cfg),
            Err(SamplerError::Stuck { .. })
        ));
    }
}
