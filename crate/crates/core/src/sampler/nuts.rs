//! Multinomial No-U-Turn sampler.
//!
//! The trajectory grows by repeated doubling in a random direction. Within a
//! subtree the candidate is drawn in proportion to `exp(−H)`; across doublings
//! the new subtree's candidate replaces the current one with probability
//! `min(1, W_new / W_old)`. Expansion stops on a U-turn, a divergence or when
//! the depth cap is reached.

use rand::Rng;

use super::hmc::draw_momentum;
use super::leapfrog::{integrate, kinetic_energy};
use super::{log_sum_exp, ChainState, StepInfo, TargetDensity, DIVERGENCE_THRESHOLD};

#[derive(Clone)]
struct Leaf {
    state: ChainState,
    momentum: Vec<f64>,
}

struct Subtree {
    minus: Leaf,
    plus: Leaf,
    candidate: Leaf,
    log_weight: f64,
    accept_sum: f64,
    n_leapfrog: usize,
    divergent: bool,
    turned: bool,
}

struct TreeBuilder<'a, T: ?Sized> {
    target: &'a T,
    eps: f64,
    inv_mass: &'a [f64],
    h0: f64,
}

/// `(θ⁺ − θ⁻)·M⁻¹r⁻ < 0` or `(θ⁺ − θ⁻)·M⁻¹r⁺ < 0`.
fn is_u_turn(minus: &Leaf, plus: &Leaf, inv_mass: &[f64]) -> bool {
    let mut dot_minus = 0.0;
    let mut dot_plus = 0.0;
    for i in 0..inv_mass.len() {
        let span = plus.state.position[i] - minus.state.position[i];
        dot_minus += span * inv_mass[i] * minus.momentum[i];
        dot_plus += span * inv_mass[i] * plus.momentum[i];
    }
    dot_minus < 0.0 || dot_plus < 0.0
}

impl<T: TargetDensity + ?Sized> TreeBuilder<'_, T> {
    fn build<R: Rng + ?Sized>(
        &self,
        start: &Leaf,
        direction: f64,
        depth: usize,
        rng: &mut R,
    ) -> Subtree {
        if depth == 0 {
            return self.single_step(start, direction);
        }
        let first = self.build(start, direction, depth - 1, rng);
        if first.divergent || first.turned {
            return first;
        }
        let edge = if direction > 0.0 {
            &first.plus
        } else {
            &first.minus
        };
        let second = self.build(edge, direction, depth - 1, rng);
        let accept_sum = first.accept_sum + second.accept_sum;
        let n_leapfrog = first.n_leapfrog + second.n_leapfrog;
        if second.divergent || second.turned {
            return Subtree {
                accept_sum,
                n_leapfrog,
                divergent: second.divergent,
                turned: second.turned,
                ..first
            };
        }
        let log_weight = log_sum_exp(first.log_weight, second.log_weight);
        let take_second = rng.random::<f64>().ln() < second.log_weight - log_weight;
        let (minus, plus) = if direction > 0.0 {
            (first.minus, second.plus)
        } else {
            (second.minus, first.plus)
        };
        let turned = is_u_turn(&minus, &plus, self.inv_mass);
        let candidate = if take_second {
            second.candidate
        } else {
            first.candidate
        };
        Subtree {
            minus,
            plus,
            candidate,
            log_weight,
            accept_sum,
            n_leapfrog,
            divergent: false,
            turned,
        }
    }

    fn single_step(&self, start: &Leaf, direction: f64) -> Subtree {
        let out = integrate(
            self.target,
            &start.state,
            &start.momentum,
            direction * self.eps,
            1,
            self.inv_mass,
        );
        let h = -out.log_density + kinetic_energy(&out.momentum, self.inv_mass);
        let energy_error = h - self.h0;
        let divergent =
            out.divergent || !energy_error.is_finite() || energy_error > DIVERGENCE_THRESHOLD;
        let leaf = Leaf {
            state: ChainState {
                position: out.position,
                log_density: out.log_density,
                grad: out.grad,
            },
            momentum: out.momentum,
        };
        let (log_weight, accept_sum) = if divergent {
            (f64::NEG_INFINITY, 0.0)
        } else {
            (-energy_error, (-energy_error).min(0.0).exp())
        };
        Subtree {
            minus: leaf.clone(),
            plus: leaf.clone(),
            candidate: leaf,
            log_weight,
            accept_sum,
            n_leapfrog: 1,
            divergent,
            turned: false,
        }
    }
}

/// One NUTS transition. With `max_tree_depth = 0` this is a single leapfrog step
/// followed by a Metropolis accept/reject.
pub fn nuts_step<T: TargetDensity + ?Sized, R: Rng + ?Sized>(
    target: &T,
    state: &ChainState,
    eps: f64,
    max_tree_depth: usize,
    inv_mass: &[f64],
    rng: &mut R,
) -> (ChainState, StepInfo) {
    let r0 = draw_momentum(inv_mass, rng);
    let h0 = -state.log_density + kinetic_energy(&r0, inv_mass);
    let builder = TreeBuilder {
        target,
        eps,
        inv_mass,
        h0,
    };
    let root = Leaf {
        state: state.clone(),
        momentum: r0,
    };
    let mut minus = root.clone();
    let mut plus = root.clone();
    let mut candidate = root.state.clone();
    let mut moved = false;
    let mut log_weight = 0.0;
    let mut accept_sum = 0.0;
    let mut n_leapfrog = 0;
    let mut divergent = false;
    let mut depth = 0;

    while depth <= max_tree_depth {
        let direction = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let edge = if direction > 0.0 { &plus } else { &minus };
        let sub = builder.build(edge, direction, depth, rng);
        accept_sum += sub.accept_sum;
        n_leapfrog += sub.n_leapfrog;
        depth += 1;
        if sub.divergent {
            divergent = true;
            break;
        }
        if sub.turned {
            break;
        }
        if rng.random::<f64>().ln() < sub.log_weight - log_weight {
            candidate = sub.candidate.state;
            moved = true;
        }
        log_weight = log_sum_exp(log_weight, sub.log_weight);
        if direction > 0.0 {
            plus = sub.plus;
        } else {
            minus = sub.minus;
        }
        if is_u_turn(&minus, &plus, inv_mass) {
            break;
        }
    }

    let info = StepInfo {
        accept_stat: if n_leapfrog > 0 {
            accept_sum / n_leapfrog as f64
        } else {
            0.0
        },
        accepted: moved,
        divergent,
        n_steps: n_leapfrog,
        tree_depth: depth,
    };
    (candidate, info)
}
