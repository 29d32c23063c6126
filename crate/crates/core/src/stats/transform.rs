//! Bijection between the parameter supports and ℝ⁶.

use super::{ModelParams, UnconstrainedParams};

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln σ(x)` without underflow for large negative `x`.
fn ln_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

pub fn to_unconstrained(p: &ModelParams) -> UnconstrainedParams {
    UnconstrainedParams([
        p.r0.ln(),
        logit(p.gamma),
        logit(p.a),
        logit(p.b),
        p.phi1.ln(),
        p.phi2.ln(),
    ])
}

pub fn to_constrained(u: &UnconstrainedParams) -> ModelParams {
    let u = &u.0;
    ModelParams::new(
        u[0].exp(),
        sigmoid(u[1]),
        sigmoid(u[2]),
        sigmoid(u[3]),
        u[4].exp(),
        u[5].exp(),
    )
}

/// `ln |det ∂to_constrained/∂u|`.
pub fn log_jacobian(u: &UnconstrainedParams) -> f64 {
    let u = &u.0;
    let unit = |x: f64| ln_sigmoid(x) + ln_sigmoid(-x);
    u[0] + unit(u[1]) + unit(u[2]) + unit(u[3]) + u[4] + u[5]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::chain_rng;
    use crate::stats::sample_prior;
    use proptest::prelude::*;

    #[test]
    fn logit_of_half_is_zero() {
        assert_eq!(logit(0.5), 0.0);
        assert_eq!(sigmoid(0.0), 0.5);
    }

    #[test]
    fn jacobian_matches_numerical_determinant() {
        let u = UnconstrainedParams([0.3, -0.7, 1.1, -2.0, 0.5, 3.0]);
        let mut det = 1.0;
        for i in 0..6 {
            let h = 1e-6;
            let mut up = u;
            let mut down = u;
            up.0[i] += h;
            down.0[i] -= h;
            let d = (to_constrained(&up).to_array()[i] - to_constrained(&down).to_array()[i])
                / (2.0 * h);
            det *= d;
        }
        assert!((det.ln() - log_jacobian(&u)).abs() < 1e-8);
    }

    #[test]
    fn pushforward_of_prior_keeps_moments() {
        let mut rng = chain_rng(3, 0);
        let n = 50_000;
        let mean_a = (0..n)
            .map(|_| to_constrained(&to_unconstrained(&sample_prior(&mut rng))).a)
            .sum::<f64>()
            / n as f64;
        assert!((mean_a - 1.0 / 6.0).abs() < 4.0 * (5.0f64 / 252.0 / n as f64).sqrt());
    }

    #[test]
    fn stable_in_the_tails() {
        let u = UnconstrainedParams([0.0, -800.0, 800.0, 0.0, 0.0, 0.0]);
        assert!(log_jacobian(&u).is_finite());
    }

    proptest! {
        #[test]
        fn round_trip(r0 in 1e-3f64..50.0, g in 1e-4f64..0.9999, a in 1e-4f64..0.9999, b in 1e-4f64..0.9999,
                      p1 in 1e-3f64..1e6, p2 in 1e-3f64..1e6) {
            let p = ModelParams::new(r0, g, a, b, p1, p2);
            let back = to_constrained(&to_unconstrained(&p)).to_array();
            for (x, y) in back.iter().zip(p.to_array()) {
                prop_assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0));
            }
        }
    }
}
