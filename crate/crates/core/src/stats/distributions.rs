//! Prior and observation densities.

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, LogNormal, Open01};
use statrs::function::gamma::ln_gamma;

use super::transform::sigmoid;
use super::{ModelParams, N_PARAMS};

/// Observed and modelled mobility fractions are kept inside `[ε, 1 − ε]`.
pub const MOBILITY_CLAMP: f64 = 1e-6;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const INV_GAMMA_SHAPE: f64 = 0.1;
const INV_GAMMA_SCALE: f64 = 0.1;
const A_PRIOR_BETA: f64 = 5.0;

fn lognormal_logpdf(x: f64) -> f64 {
    let z = x.ln();
    -z - LN_SQRT_2PI - 0.5 * z * z
}

fn inv_gamma_logpdf(x: f64, shape: f64, scale: f64) -> f64 {
    shape * scale.ln() - ln_gamma(shape) - (shape + 1.0) * x.ln() - scale / x
}

/// Beta(1, 5) log density: `ln 5 + 4 ln(1 − a)`.
fn a_prior_logpdf(a: f64) -> f64 {
    A_PRIOR_BETA.ln() + (A_PRIOR_BETA - 1.0) * (-a).ln_1p()
}

/// Joint log prior density. Outside the support this is `−∞`.
pub fn log_prior(p: &ModelParams) -> f64 {
    if !p.in_support() {
        return f64::NEG_INFINITY;
    }
    lognormal_logpdf(p.r0)
        + a_prior_logpdf(p.a)
        + inv_gamma_logpdf(p.phi1, INV_GAMMA_SHAPE, INV_GAMMA_SCALE)
        + inv_gamma_logpdf(p.phi2, INV_GAMMA_SHAPE, INV_GAMMA_SCALE)
}

/// Analytic gradient of `log_prior(to_constrained(u)) + log_jacobian(u)` with respect to `u`.
pub fn log_prior_gradient_unconstrained(u: &[f64; N_PARAMS]) -> [f64; N_PARAMS] {
    let unit = |v: f64| 1.0 - 2.0 * sigmoid(v);
    let dispersion = |v: f64| -INV_GAMMA_SHAPE + INV_GAMMA_SCALE * (-v).exp();
    [
        -u[0],
        unit(u[1]),
        1.0 - (A_PRIOR_BETA + 1.0) * sigmoid(u[2]),
        unit(u[3]),
        dispersion(u[4]),
        dispersion(u[5]),
    ]
}

/// `log Beta(y | φ·m, φ·(1 − m))` with `m = L/N` clamped into `[ε, 1 − ε]`.
pub fn beta_obs_logpdf(y: f64, lockdown: f64, population: f64, phi1: f64) -> f64 {
    if !(y > 0.0 && y < 1.0 && phi1 > 0.0 && phi1.is_finite() && population > 0.0) {
        return f64::NEG_INFINITY;
    }
    let m = (lockdown / population).clamp(MOBILITY_CLAMP, 1.0 - MOBILITY_CLAMP);
    if !m.is_finite() {
        return f64::NEG_INFINITY;
    }
    let alpha = phi1 * m;
    let beta = phi1 * (1.0 - m);
    let value = ln_gamma(phi1) - ln_gamma(alpha) - ln_gamma(beta)
        + (alpha - 1.0) * y.ln()
        + (beta - 1.0) * (-y).ln_1p();
    if value.is_nan() {
        f64::NEG_INFINITY
    } else {
        value
    }
}

/// Counts below this use the exact product form of `Γ(y+φ)/Γ(φ)`.
const NEGBIN_PRODUCT_LIMIT: u64 = 64;

/// Mean-dispersion negative binomial: mean `μ`, variance `μ + μ²/φ`.
pub fn negbin_obs_logpmf(y: u64, mu: f64, phi2: f64) -> f64 {
    if !(mu > 0.0 && mu.is_finite() && phi2 > 0.0 && phi2.is_finite()) {
        return f64::NEG_INFINITY;
    }
    let yf = y as f64;
    // −φ ln(1 + μ/φ) stays accurate as φ → ∞, where it tends to −μ.
    let tail = -phi2 * (mu / phi2).ln_1p();
    let value = if y < NEGBIN_PRODUCT_LIMIT {
        // Σ_k ln((φ+k)/(φ+μ)) + y ln μ − ln y! + tail
        let denom = phi2 + mu;
        let ratio: f64 = (0..y).map(|k| ((k as f64 - mu) / denom).ln_1p()).sum();
        ratio + yf * mu.ln() - ln_gamma(yf + 1.0) + tail
    } else {
        ln_gamma(yf + phi2) - ln_gamma(phi2) - ln_gamma(yf + 1.0)
            + yf * (mu.ln() - (phi2 + mu).ln())
            + tail
    };
    if value.is_nan() {
        f64::NEG_INFINITY
    } else {
        value
    }
}

/// One independent draw from each prior.
pub fn sample_prior<R: Rng + ?Sized>(rng: &mut R) -> ModelParams {
    let r0 = LogNormal::new(0.0, 1.0)
        .expect("valid lognormal")
        .sample(rng);
    let a = Beta::new(1.0, A_PRIOR_BETA)
        .expect("valid beta")
        .sample(rng);
    let unit = |rng: &mut R| -> f64 { rng.sample(Open01) };
    let gamma = unit(rng);
    let b = unit(rng);
    let phi1 = sample_inv_gamma(rng);
    let phi2 = sample_inv_gamma(rng);
    ModelParams::new(r0, gamma, a, b, phi1, phi2)
}

fn sample_inv_gamma<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let gamma = Gamma::new(INV_GAMMA_SHAPE, 1.0 / INV_GAMMA_SCALE).expect("valid gamma");
    loop {
        // Shape 0.1 occasionally underflows to zero; such draws are redrawn.
        let x = 1.0 / gamma.sample(rng);
        if x.is_finite() {
            return x;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::chain_rng;
    use crate::stats::{log_jacobian, to_constrained, UnconstrainedParams};
    use approx::assert_relative_eq;
    use statrs::distribution::{Continuous, Discrete, Poisson};

    fn base() -> ModelParams {
        ModelParams::new(1.0, 0.3, 0.1, 0.4, 2.0, 3.0)
    }

    #[test]
    fn prior_terms_match_closed_forms() {
        // R0 = 1 leaves only −ln √(2π) from the lognormal.
        let p = base();
        let rest =
            a_prior_logpdf(p.a) + inv_gamma_logpdf(2.0, 0.1, 0.1) + inv_gamma_logpdf(3.0, 0.1, 0.1);
        assert_relative_eq!(
            log_prior(&p) - rest,
            -(2.0 * std::f64::consts::PI).sqrt().ln(),
            epsilon = 1e-14
        );
        assert_relative_eq!(a_prior_logpdf(1e-15), 5f64.ln(), epsilon = 1e-12);
        assert_eq!(
            log_prior(&ModelParams { gamma: 1.5, ..p }),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn prior_terms_match_statrs() {
        use statrs::distribution::{Beta as SBeta, InverseGamma, LogNormal as SLogNormal};
        let p = ModelParams::new(3.7, 0.2, 0.31, 0.9, 0.7, 42.0);
        let ig = InverseGamma::new(0.1, 0.1).unwrap();
        let expected = SLogNormal::new(0.0, 1.0).unwrap().ln_pdf(3.7)
            + SBeta::new(1.0, 5.0).unwrap().ln_pdf(0.31)
            + ig.ln_pdf(0.7)
            + ig.ln_pdf(42.0);
        assert_relative_eq!(log_prior(&p), expected, epsilon = 1e-10);
    }

    #[test]
    fn prior_gradient_matches_finite_differences() {
        let target = |u: &[f64; 6]| {
            let uc = UnconstrainedParams(*u);
            log_prior(&to_constrained(&uc)) + log_jacobian(&uc)
        };
        let u = [0.4, -1.2, 0.3, 2.0, -0.5, 1.5];
        let g = log_prior_gradient_unconstrained(&u);
        for i in 0..6 {
            let h = 1e-6;
            let mut up = u;
            let mut down = u;
            up[i] += h;
            down[i] -= h;
            let fd = (target(&up) - target(&down)) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-6, "coordinate {i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn uniform_beta_case() {
        for y in [0.01, 0.3, 0.77, 0.999] {
            assert!(beta_obs_logpdf(y, 50.0, 100.0, 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn beta_matches_log_gamma_oracle() {
        use statrs::distribution::Beta as SBeta;
        let expected = SBeta::new(15.0, 35.0).unwrap().ln_pdf(0.3);
        assert_relative_eq!(
            beta_obs_logpdf(0.3, 0.3, 1.0, 50.0),
            expected,
            epsilon = 1e-8
        );
        assert_eq!(beta_obs_logpdf(1.0, 0.3, 1.0, 50.0), f64::NEG_INFINITY);
        assert_eq!(beta_obs_logpdf(0.3, 0.3, 1.0, -1.0), f64::NEG_INFINITY);
    }

    /// Simpson's rule on the Beta layer density.
    fn beta_moments(m: f64, phi: f64) -> (f64, f64, f64) {
        let n = 200_000;
        let h = 1.0 / n as f64;
        let (mut z, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for k in 1..n {
            let y = k as f64 * h;
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            let d = beta_obs_logpdf(y, m, 1.0, phi).exp();
            z += w * d;
            m1 += w * d * y;
            m2 += w * d * y * y;
        }
        let (z, m1, m2) = (z * h / 3.0, m1 * h / 3.0, m2 * h / 3.0);
        (z, m1, m2 - m1 * m1)
    }

    #[test]
    fn beta_layer_moments() {
        for (m, phi) in [(0.3, 50.0), (0.6, 8.0), (0.45, 120.0)] {
            let (z, mean, var) = beta_moments(m, phi);
            assert!((z - 1.0).abs() < 1e-6, "mass {z}");
            assert!((mean - m).abs() < 1e-6, "mean {mean}");
            assert!(
                (var - m * (1.0 - m) / (phi + 1.0)).abs() < 1e-6,
                "var {var}"
            );
        }
    }

    #[test]
    fn negbin_geometric_case() {
        assert_relative_eq!(negbin_obs_logpmf(0, 1.0, 1.0), 0.5f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn negbin_poisson_limit() {
        for mu in [0.5, 3.0, 10.0] {
            let pois = Poisson::new(mu).unwrap();
            // Counts within three standard deviations; the exact gap is ((y−μ)² − y)/2φ to first order.
            let lo = (mu - 3.0 * mu.sqrt()).max(0.0).floor() as u64;
            let hi = (mu + 3.0 * mu.sqrt()).ceil() as u64 + 3;
            for y in lo..=hi {
                let d = (negbin_obs_logpmf(y, mu, 1e8) - pois.ln_pmf(y)).abs();
                assert!(d < 1e-6, "mu {mu} y {y}: {d}");
            }
        }
    }

    #[test]
    #[allow(clippy::excessive_precision)]
    fn negbin_precision_at_large_counts_and_dispersion() {
        // Reference values from 50-digit arithmetic.
        let cases = [
            (2500u64, 5000.0, -771.931_807_273_974_5),
            (7500, 5000.0, -546.337_378_926_714_0),
            (125, 250.0, -41.690_286_997_269_50),
        ];
        for (y, mu, expected) in cases {
            let d = negbin_obs_logpmf(y, mu, 1e8) - expected;
            assert!(d.abs() < 1e-6, "mu {mu} y {y}: {d}");
        }
    }

    #[test]
    fn negbin_branches_agree_with_statrs() {
        use statrs::distribution::NegativeBinomial;
        for (mu, phi) in [(10.0, 5.0), (200.0, 0.7), (3.0, 40.0)] {
            let nb = NegativeBinomial::new(phi, phi / (phi + mu)).unwrap();
            for y in [0u64, 7, 63, 64, 65, 500] {
                assert_relative_eq!(
                    negbin_obs_logpmf(y, mu, phi),
                    nb.ln_pmf(y),
                    epsilon = 1e-9,
                    max_relative = 1e-11
                );
            }
        }
    }

    #[test]
    fn negbin_moments_by_simulation() {
        use rand_distr::Poisson as RPoisson;
        let mut rng = chain_rng(5, 0);
        let (mu, phi) = (10.0, 5.0);
        let gamma = Gamma::new(phi, mu / phi).unwrap();
        let n = 200_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| {
                RPoisson::new(gamma.sample(&mut rng))
                    .unwrap()
                    .sample(&mut rng)
            })
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        assert!((mean - 10.0).abs() < 0.05, "mean {mean}");
        assert!((var - 30.0).abs() < 0.6, "var {var}");
        // The pmf sums to one and reproduces the same moments.
        let pmf: Vec<f64> = (0..2000u64)
            .map(|y| negbin_obs_logpmf(y, mu, phi).exp())
            .collect();
        let total: f64 = pmf.iter().sum();
        let m1: f64 = pmf.iter().enumerate().map(|(y, p)| y as f64 * p).sum();
        let m2: f64 = pmf
            .iter()
            .enumerate()
            .map(|(y, p)| (y as f64).powi(2) * p)
            .sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-10);
        assert_relative_eq!(m1, 10.0, epsilon = 1e-8);
        assert_relative_eq!(m2 - m1 * m1, 30.0, epsilon = 1e-6);
    }

    #[test]
    fn negbin_rejects_invalid() {
        assert_eq!(negbin_obs_logpmf(3, 0.0, 1.0), f64::NEG_INFINITY);
        assert_eq!(negbin_obs_logpmf(3, 1.0, 0.0), f64::NEG_INFINITY);
        assert_eq!(negbin_obs_logpmf(3, f64::NAN, 1.0), f64::NEG_INFINITY);
    }

    #[test]
    fn prior_draw_moments() {
        let mut rng = chain_rng(11, 0);
        let draws: Vec<ModelParams> = (0..100_000).map(|_| sample_prior(&mut rng)).collect();
        let n = draws.len() as f64;
        let mean_a = draws.iter().map(|p| p.a).sum::<f64>() / n;
        // sd of Beta(1,5) is sqrt(5/252)
        assert!(
            (mean_a - 1.0 / 6.0).abs() < 4.0 * (5.0f64 / 252.0 / n).sqrt(),
            "mean a {mean_a}"
        );
        assert!(draws
            .iter()
            .all(|p| p.gamma > 0.0 && p.gamma < 1.0 && p.b > 0.0 && p.b < 1.0));
        assert!(draws.iter().all(|p| p.in_support()));
        let mut r0: Vec<f64> = draws.iter().map(|p| p.r0).collect();
        r0.sort_by(f64::total_cmp);
        let median = r0[r0.len() / 2];
        assert!((median - 1.0).abs() < 0.02, "median R0 {median}");
    }
}
