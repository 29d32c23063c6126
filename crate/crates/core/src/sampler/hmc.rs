use rand::Rng;

use super::leapfrog::{integrate, kinetic_energy};
use super::{standard_normal, ChainState, StepInfo, TargetDensity, DIVERGENCE_THRESHOLD};

/// Draws `r ~ N(0, M)` for a diagonal mass given by its inverse.
pub(crate) fn draw_momentum<R: Rng + ?Sized>(inv_mass: &[f64], rng: &mut R) -> Vec<f64> {
    inv_mass
        .iter()
        .map(|m| standard_normal(rng) / m.sqrt())
        .collect()
}

/// Static-trajectory HMC transition: fresh momentum, `n_steps` leapfrog steps,
/// Metropolis correction on the joint energy.
pub fn hmc_step<T: TargetDensity + ?Sized, R: Rng + ?Sized>(
    target: &T,
    state: &ChainState,
    eps: f64,
    n_steps: usize,
    inv_mass: &[f64],
    rng: &mut R,
) -> (ChainState, StepInfo) {
    let r0 = draw_momentum(inv_mass, rng);
    let h0 = -state.log_density + kinetic_energy(&r0, inv_mass);
    let out = integrate(target, state, &r0, eps, n_steps, inv_mass);
    let h1 = -out.log_density + kinetic_energy(&out.momentum, inv_mass);
    let energy_error = h1 - h0;
    let divergent =
        out.divergent || !energy_error.is_finite() || energy_error > DIVERGENCE_THRESHOLD;
    let accept_stat = if divergent {
        0.0
    } else {
        (-energy_error).min(0.0).exp()
    };
    let accepted = !divergent && rng.random::<f64>() < accept_stat;
    let info = StepInfo {
        accept_stat,
        accepted,
        divergent,
        n_steps,
        tree_depth: 0,
    };
    if accepted {
        (
            ChainState {
                position: out.position,
                log_density: out.log_density,
                grad: out.grad,
            },
            info,
        )
    } else {
        (state.clone(), info)
    }
}
