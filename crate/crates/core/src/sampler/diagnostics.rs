//! Convergence diagnostics: split-chain R̂, autocorrelation-based effective
//! sample size and per-parameter summaries.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("need at least {needed} chains, got {got}")]
    TooFewChains { needed: usize, got: usize },
    #[error("need at least {needed} draws per chain, got {got}")]
    TooFewDraws { needed: usize, got: usize },
    #[error("chains have unequal lengths")]
    RaggedChains,
    #[error("within-chain variance is zero")]
    Degenerate,
}

const MIN_DRAWS: usize = 10;

fn check_chains(chains: &[Vec<f64>], min_chains: usize) -> Result<usize, DiagnosticsError> {
    if chains.len() < min_chains {
        return Err(DiagnosticsError::TooFewChains {
            needed: min_chains,
            got: chains.len(),
        });
    }
    let n = chains[0].len();
    if chains.iter().any(|c| c.len() != n) {
        return Err(DiagnosticsError::RaggedChains);
    }
    if n < MIN_DRAWS {
        return Err(DiagnosticsError::TooFewDraws {
            needed: MIN_DRAWS,
            got: n,
        });
    }
    Ok(n)
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sample_variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Split-chain potential scale reduction factor `sqrt(V̂ / W)`.
///
/// Every chain is cut into two halves (dropping the middle draw of odd-length
/// chains) before comparing between-half and within-half variance.
pub fn gelman_rubin(chains: &[Vec<f64>]) -> Result<f64, DiagnosticsError> {
    let n = check_chains(chains, 2)?;
    let half = n / 2;
    let halves: Vec<&[f64]> = chains
        .iter()
        .flat_map(|c| [&c[..half], &c[n - half..]])
        .collect();
    let len = half as f64;
    let means: Vec<f64> = halves.iter().map(|h| mean(h)).collect();
    let within = halves.iter().map(|h| sample_variance(h)).sum::<f64>() / halves.len() as f64;
    if !(within > 0.0) {
        return Err(DiagnosticsError::Degenerate);
    }
    let between_over_n = sample_variance(&means);
    let var_plus = (len - 1.0) / len * within + between_over_n;
    Ok((var_plus / within).sqrt())
}

/// Autocovariance of `x` at `lag` (biased, divided by `n`).
fn autocovariance(x: &[f64], m: f64, lag: usize) -> f64 {
    let n = x.len();
    x[..n - lag]
        .iter()
        .zip(&x[lag..])
        .map(|(a, b)| (a - m) * (b - m))
        .sum::<f64>()
        / n as f64
}

/// Sample autocorrelation of one chain at lags `0..=max_lag`.
pub fn autocorrelation(x: &[f64], max_lag: usize) -> Vec<f64> {
    let m = mean(x);
    let c0 = autocovariance(x, m, 0);
    (0..=max_lag.min(x.len().saturating_sub(1)))
        .map(|k| autocovariance(x, m, k) / c0)
        .collect()
}

/// Multi-chain effective sample size with Geyer's initial monotone positive-sequence
/// truncation of the combined autocorrelation estimate.
pub fn effective_sample_size(chains: &[Vec<f64>]) -> Result<f64, DiagnosticsError> {
    let n = check_chains(chains, 1)?;
    let m = chains.len();
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let nf = n as f64;
    let chain_vars: Vec<f64> = chains
        .iter()
        .zip(&means)
        .map(|(c, &mu)| autocovariance(c, mu, 0) * nf / (nf - 1.0))
        .collect();
    let mean_var = mean(&chain_vars);
    let mut var_plus = mean_var * (nf - 1.0) / nf;
    if m > 1 {
        var_plus += sample_variance(&means);
    }
    if !(var_plus > 0.0) {
        return Err(DiagnosticsError::Degenerate);
    }
    let rho = |lag: usize| {
        let acov = chains
            .iter()
            .zip(&means)
            .map(|(c, &mu)| autocovariance(c, mu, lag))
            .sum::<f64>()
            / m as f64;
        1.0 - (mean_var - acov) / var_plus
    };

    let mut rho_hat = vec![1.0, rho(1)];
    let mut t = 1;
    while t + 2 < n {
        let even = rho(t + 1);
        let odd = rho(t + 2);
        if even + odd < 0.0 {
            break;
        }
        rho_hat.push(even);
        rho_hat.push(odd);
        t += 2;
    }
    // Pairs (ρ_{2k}, ρ_{2k+1}) must be positive and non-increasing.
    let mut pairs: Vec<f64> = rho_hat.chunks(2).map(|p| p.iter().sum()).collect();
    let mut last_positive = pairs.len();
    for (k, p) in pairs.iter().enumerate() {
        if *p <= 0.0 {
            last_positive = k;
            break;
        }
    }
    pairs.truncate(last_positive);
    for k in 1..pairs.len() {
        if pairs[k] > pairs[k - 1] {
            pairs[k] = pairs[k - 1];
        }
    }
    let tau = -1.0 + 2.0 * pairs.iter().sum::<f64>();
    let total = (m * n) as f64;
    let tau = tau.max(1.0 / total.log10().max(1.0));
    Ok(total / tau)
}

/// Monte Carlo standard error of the mean.
pub fn mcse_mean(chains: &[Vec<f64>]) -> Result<f64, DiagnosticsError> {
    let all: Vec<f64> = chains.iter().flatten().copied().collect();
    let ess = effective_sample_size(chains)?;
    Ok((sample_variance(&all) / ess).sqrt())
}

/// Empirical quantile with linear interpolation between order statistics (type 7).
pub fn quantile(x: &[f64], p: f64) -> f64 {
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile_sorted(&sorted, p)
}

pub(crate) fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub median: f64,
    pub q2_5: f64,
    pub q97_5: f64,
    pub rhat: f64,
    pub ess: f64,
}

/// Median, central 95% interval, R̂ and ESS for each named parameter.
///
/// `draws[p][c]` holds the post-warmup draws of parameter `p` in chain `c`.
pub fn summarize(
    names: &[&str],
    draws: &[Vec<Vec<f64>>],
) -> Result<Vec<ParameterSummary>, DiagnosticsError> {
    names
        .iter()
        .zip(draws)
        .map(|(name, chains)| {
            let mut all: Vec<f64> = chains.iter().flatten().copied().collect();
            check_chains(chains, 1)?;
            let rhat = if chains.len() >= 2 {
                gelman_rubin(chains)?
            } else {
                f64::NAN
            };
            let ess = effective_sample_size(chains)?;
            let mean_value = mean(&all);
            let sd = sample_variance(&all).sqrt();
            all.sort_by(f64::total_cmp);
            Ok(ParameterSummary {
                name: name.to_string(),
                mean: mean_value,
                sd,
                median: quantile_sorted(&all, 0.5),
                q2_5: quantile_sorted(&all, 0.025),
                q97_5: quantile_sorted(&all, 0.975),
                rhat,
                ess,
            })
        })
        .collect()
}
