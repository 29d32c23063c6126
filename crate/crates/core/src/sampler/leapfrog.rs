use super::{ChainState, TargetDensity};

#[derive(Debug, Clone, PartialEq)]
pub struct LeapfrogOutput {
    pub position: Vec<f64>,
    pub momentum: Vec<f64>,
    /// Log density at the final position (`-inf` if the trajectory failed).
    pub log_density: f64,
    pub grad: Vec<f64>,
    /// Set when a density or gradient evaluation was not finite.
    pub divergent: bool,
}

/// `H(θ, r) = −log p(θ) + ½ rᵀ M⁻¹ r`.
pub fn hamiltonian(log_density: f64, momentum: &[f64], inv_mass: &[f64]) -> f64 {
    -log_density + kinetic_energy(momentum, inv_mass)
}

pub(crate) fn kinetic_energy(momentum: &[f64], inv_mass: &[f64]) -> f64 {
    0.5 * momentum
        .iter()
        .zip(inv_mass)
        .map(|(r, m)| r * r * m)
        .sum::<f64>()
}

/// Runs `n_steps` leapfrog steps from `(theta, r)` with identity mass.
///
/// Each step is a half kick `r += ε/2 ∇log p(θ)`, a drift `θ += ε r` and a second half kick.
pub fn leapfrog<T: TargetDensity + ?Sized>(
    target: &T,
    theta: &[f64],
    r: &[f64],
    eps: f64,
    n_steps: usize,
) -> LeapfrogOutput {
    let inv_mass = vec![1.0; theta.len()];
    let mut grad = vec![0.0; theta.len()];
    let log_density = target.log_density_and_grad(theta, &mut grad);
    let start = ChainState {
        position: theta.to_vec(),
        log_density,
        grad,
    };
    if !log_density.is_finite() || start.grad.iter().any(|g| !g.is_finite()) {
        return LeapfrogOutput {
            position: theta.to_vec(),
            momentum: r.to_vec(),
            log_density: f64::NEG_INFINITY,
            grad: start.grad,
            divergent: true,
        };
    }
    integrate(target, &start, r, eps, n_steps, &inv_mass)
}

/// Leapfrog from a state whose density and gradient are already known.
pub(crate) fn integrate<T: TargetDensity + ?Sized>(
    target: &T,
    start: &ChainState,
    r: &[f64],
    eps: f64,
    n_steps: usize,
    inv_mass: &[f64],
) -> LeapfrogOutput {
    let mut theta = start.position.clone();
    let mut momentum = r.to_vec();
    let mut grad = start.grad.clone();
    let mut log_density = start.log_density;
    let half = 0.5 * eps;
    for _ in 0..n_steps {
        for (p, g) in momentum.iter_mut().zip(&grad) {
            *p += half * g;
        }
        for ((x, p), m) in theta.iter_mut().zip(&momentum).zip(inv_mass) {
            *x += eps * m * p;
        }
        log_density = target.log_density_and_grad(&theta, &mut grad);
        if !log_density.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return LeapfrogOutput {
                position: theta,
                momentum,
                log_density: f64::NEG_INFINITY,
                grad,
                divergent: true,
            };
        }
        for (p, g) in momentum.iter_mut().zip(&grad) {
            *p += half * g;
        }
    }
    LeapfrogOutput {
        position: theta,
        momentum,
        log_density,
        grad,
        divergent: false,
    }
}
