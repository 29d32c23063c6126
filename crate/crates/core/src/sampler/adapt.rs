//! Warmup adaptation: dual-averaging step size and windowed diagonal mass estimates.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualAveragingOptions {
    pub gamma: f64,
    pub t0: f64,
    pub kappa: f64,
}

impl Default for DualAveragingOptions {
    fn default() -> Self {
        Self {
            gamma: 0.05,
            t0: 10.0,
            kappa: 0.75,
        }
    }
}

/// Nesterov dual averaging on `log ε`, driving the mean acceptance statistic to `target`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualAveraging {
    opts: DualAveragingOptions,
    target: f64,
    mu: f64,
    h_bar: f64,
    log_step: f64,
    log_step_bar: f64,
    count: f64,
}

impl DualAveraging {
    pub fn new(initial_step: f64, target: f64, opts: DualAveragingOptions) -> Self {
        Self {
            opts,
            target,
            mu: (10.0 * initial_step).ln(),
            h_bar: 0.0,
            log_step: initial_step.ln(),
            log_step_bar: 0.0,
            count: 0.0,
        }
    }

    /// Restarts around a new initial step (used after a mass-matrix update).
    pub fn restart(&mut self, initial_step: f64) {
        *self = Self::new(initial_step, self.target, self.opts);
    }

    pub fn update(&mut self, accept_stat: f64) {
        let accept_stat = if accept_stat.is_finite() {
            accept_stat.clamp(0.0, 1.0)
        } else {
            0.0
        };
        self.count += 1.0;
        let w = 1.0 / (self.count + self.opts.t0);
        self.h_bar = (1.0 - w) * self.h_bar + w * (self.target - accept_stat);
        self.log_step = self.mu - self.count.sqrt() / self.opts.gamma * self.h_bar;
        let m = self.count.powf(-self.opts.kappa);
        self.log_step_bar = m * self.log_step + (1.0 - m) * self.log_step_bar;
    }

    /// Step size to use for the next warmup iteration.
    pub fn current(&self) -> f64 {
        self.log_step.exp()
    }

    /// Averaged step size to freeze after warmup.
    pub fn final_step(&self) -> f64 {
        if self.count == 0.0 {
            self.current()
        } else {
            self.log_step_bar.exp()
        }
    }
}

/// Welford running variance per coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceEstimator {
    count: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl VarianceEstimator {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0.0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    pub fn add(&mut self, x: &[f64]) {
        self.count += 1.0;
        for ((m, s), &v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(x) {
            let delta = v - *m;
            *m += delta / self.count;
            *s += delta * (v - *m);
        }
    }

    pub fn count(&self) -> usize {
        self.count as usize
    }

    /// Variance shrunk towards `1e-3` as in common HMC warmup schemes.
    pub fn regularized_variance(&self) -> Vec<f64> {
        let n = self.count;
        self.m2
            .iter()
            .map(|s| {
                let var = if n > 1.0 { s / (n - 1.0) } else { 1.0 };
                (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0))
            })
            .collect()
    }
}

/// End iterations (exclusive) of the slow mass-adaptation windows within warmup.
///
/// Warmup is split into a fast initial buffer (15%), doubling slow windows and a
/// terminal fast buffer (10%); each returned index closes one slow window.
pub(crate) fn mass_windows(n_warmup: usize) -> Vec<usize> {
    if n_warmup < 20 {
        return Vec::new();
    }
    let init = (n_warmup as f64 * 0.15).ceil() as usize;
    let term = (n_warmup as f64 * 0.1).ceil() as usize;
    let end = n_warmup.saturating_sub(term);
    let mut windows = Vec::new();
    let mut start = init;
    let mut size = 25.min(end.saturating_sub(init)).max(1);
    while start < end {
        let mut stop = start + size;
        if stop + 2 * size > end {
            stop = end;
        }
        windows.push(stop);
        start = stop;
        size *= 2;
    }
    windows
}
