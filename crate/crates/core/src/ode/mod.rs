//! Explicit Runge–Kutta integrators for first-order systems `x' = f(x, t)`.
//!
//! Fixed-step schemes (Euler, trapezoidal, modified Euler, RK2, RK4 and any
//! user-supplied explicit tableau) plus an embedded Dormand–Prince 4(5) pair
//! with error control. Every integrator is generic over [`Scalar`].

mod adaptive;
mod tableau;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

pub use adaptive::{integrate_adaptive, AdaptiveOptions};
pub use tableau::ButcherTableau;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("non-finite state or derivative at t = {t}")]
    NonFinite { t: f64 },
    #[error("invalid Butcher tableau: {0}")]
    InvalidTableau(String),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("output times must be strictly increasing (violated at index {index})")]
    UnsortedTimes { index: usize },
    #[error("maximum step count {max_steps} exceeded at t = {t}")]
    MaxStepsExceeded { max_steps: usize, t: f64 },
    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },
}

/// Right-hand side of an autonomous or time-dependent ODE system.
///
/// Implementations write `f(x, t)` into `dx`; `dx.len() == x.len()`.
pub trait OdeRhs<T> {
    fn eval(&self, t: T, x: &[T], dx: &mut [T]);
}

impl<T, F> OdeRhs<T> for F
where
    F: Fn(T, &[T], &mut [T]),
{
    #[inline]
    fn eval(&self, t: T, x: &[T], dx: &mut [T]) {
        self(t, x, dx)
    }
}

/// Evaluates the right-hand side and checks the result is finite.
pub(crate) fn eval_checked<T: Scalar, F: OdeRhs<T> + ?Sized>(
    rhs: &F,
    t: T,
    x: &[T],
    dx: &mut [T],
) -> Result<(), OdeError> {
    rhs.eval(t, x, dx);
    if dx.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(OdeError::NonFinite {
            t: t.to_f64_lossy(),
        })
    }
}

fn check_dt<T: Scalar>(dt: T) -> Result<(), OdeError> {
    if dt > T::zero() && dt.is_finite() {
        Ok(())
    } else {
        Err(OdeError::InvalidConfig(format!(
            "step size must be positive and finite, got {dt}"
        )))
    }
}

fn axpy<T: Scalar>(x: &[T], h: T, k: &[T]) -> Vec<T> {
    x.iter().zip(k).map(|(&xi, &ki)| xi + h * ki).collect()
}

/// One forward Euler step: `x + dt·f(x, t)`.
pub fn step_euler<T: Scalar, F: OdeRhs<T> + ?Sized>(
    rhs: &F,
    x: &[T],
    t: T,
    dt: T,
) -> Result<Vec<T>, OdeError> {
    check_dt(dt)?;
    let mut k = vec![T::zero(); x.len()];
    eval_checked(rhs, t, x, &mut k)?;
    Ok(axpy(x, dt, &k))
}

/// Trapezoidal (Heun) step: averages the slope at `x` and at the Euler predictor.
pub fn step_trapezoidal<T: Scalar, F: OdeRhs<T> + ?Sized>(
    rhs: &F,
    x: &[T],
    t: T,
    dt: T,
) -> Result<Vec<T>, OdeError> {
    check_dt(dt)?;
    let mut a = vec![T::zero(); x.len()];
    eval_checked(rhs, t, x, &mut a)?;
    let predictor = axpy(x, dt, &a);
    let mut b = vec![T::zero(); x.len()];
    eval_checked(rhs, t + dt, &predictor, &mut b)?;
    let half = T::lit(0.5);
    Ok(x.iter()
        .zip(a.iter().zip(&b))
        .map(|(&xi, (&ai, &bi))| xi + dt * (half * ai + half * bi))
        .collect())
}

/// Modified Euler (midpoint) step: slope evaluated at the half-step predictor.
pub fn step_modified_euler<T: Scalar, F: OdeRhs<T> + ?Sized>(
    rhs: &F,
    x: &[T],
    t: T,
    dt: T,
) -> Result<Vec<T>, OdeError> {
    check_dt(dt)?;
    let half_dt = dt * T::lit(0.5);
    let mut a = vec![T::zero(); x.len()];
    eval_checked(rhs, t, x, &mut a)?;
    let mid = axpy(x, half_dt, &a);
    let mut c = vec![T::zero(); x.len()];
    eval_checked(rhs, t + half_dt, &mid, &mut c)?;
    Ok(axpy(x, dt, &c))
}

/// One step of an arbitrary explicit scheme described by `tableau`.
pub fn step_general_rk<T: Scalar, F: OdeRhs<T> + ?Sized>(
    tableau: &ButcherTableau<T>,
    rhs: &F,
    x: &[T],
    t: T,
    dt: T,
) -> Result<Vec<T>, OdeError> {
    check_dt(dt)?;
    let d = x.len();
    let s = tableau.stages();
    let mut ks: Vec<Vec<T>> = Vec::with_capacity(s);
    let mut stage_x = vec![T::zero(); d];
    for i in 0..s {
        for (n, slot) in stage_x.iter_mut().enumerate() {
            let mut incr = T::zero();
            for (j, &beta) in tableau.coupling()[i].iter().enumerate() {
                if beta != T::zero() {
                    incr = incr + beta * ks[j][n];
                }
            }
            *slot = x[n] + dt * incr;
        }
        let mut k = vec![T::zero(); d];
        eval_checked(rhs, t + dt * tableau.nodes()[i], &stage_x, &mut k)?;
        ks.push(k);
    }
    let out = (0..d)
        .map(|n| {
            let mut acc = T::zero();
            for (i, &w) in tableau.weights().iter().enumerate() {
                if w != T::zero() {
                    acc = acc + w * ks[i][n];
                }
            }
            x[n] + dt * acc
        })
        .collect();
    Ok(out)
}

/// Classical RK4 with hard-coded coefficients.
pub fn step_rk4<T: Scalar, F: OdeRhs<T> + ?Sized>(
    rhs: &F,
    x: &[T],
    t: T,
    dt: T,
) -> Result<Vec<T>, OdeError> {
    check_dt(dt)?;
    let d = x.len();
    let half = T::lit(0.5);
    let h2 = dt * half;
    let mut k1 = vec![T::zero(); d];
    let mut k2 = vec![T::zero(); d];
    let mut k3 = vec![T::zero(); d];
    let mut k4 = vec![T::zero(); d];
    eval_checked(rhs, t, x, &mut k1)?;
    let x2 = axpy(x, h2, &k1);
    eval_checked(rhs, t + h2, &x2, &mut k2)?;
    let x3 = axpy(x, h2, &k2);
    eval_checked(rhs, t + h2, &x3, &mut k3)?;
    let x4 = axpy(x, dt, &k3);
    eval_checked(rhs, t + dt, &x4, &mut k4)?;
    let two = T::lit(2.0);
    let sixth = dt / T::lit(6.0);
    Ok((0..d)
        .map(|n| x[n] + sixth * (k1[n] + two * k2[n] + two * k3[n] + k4[n]))
        .collect())
}

/// Integration scheme selector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method<T> {
    Euler,
    Trapezoidal,
    ModifiedEuler,
    Rk2,
    Rk4,
    GeneralRk(GeneralRkSpec<T>),
    Adaptive45,
}

/// Serializable description of a user tableau; validated on use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralRkSpec<T> {
    pub weights: Vec<T>,
    pub nodes: Vec<T>,
    pub coupling: Vec<Vec<T>>,
}

impl<T: Scalar> GeneralRkSpec<T> {
    pub fn tableau(&self) -> Result<ButcherTableau<T>, OdeError> {
        ButcherTableau::new(
            self.weights.clone(),
            self.nodes.clone(),
            self.coupling.clone(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig<T> {
    pub method: Method<T>,
    /// Maximum fixed step; each output interval is split into equal steps no larger than this.
    pub dt: T,
    pub rel_tol: T,
    pub abs_tol: T,
    pub max_steps: usize,
}

impl<T: Scalar> SolverConfig<T> {
    pub fn fixed(method: Method<T>, dt: T) -> Self {
        Self {
            method,
            dt,
            rel_tol: T::lit(1e-6),
            abs_tol: T::lit(1e-6),
            max_steps: 10_000_000,
        }
    }

    pub fn adaptive(rel_tol: T, abs_tol: T) -> Self {
        Self {
            method: Method::Adaptive45,
            dt: T::one(),
            rel_tol,
            abs_tol,
            max_steps: 100_000,
        }
    }

    pub fn validate(&self) -> Result<(), OdeError> {
        check_dt(self.dt)?;
        if !(self.rel_tol > T::zero() && self.abs_tol > T::zero()) {
            return Err(OdeError::InvalidConfig(
                "tolerances must be positive".into(),
            ));
        }
        if self.max_steps == 0 {
            return Err(OdeError::InvalidConfig(
                "max_steps must be at least 1".into(),
            ));
        }
        if let Method::GeneralRk(spec) = &self.method {
            spec.tableau()?;
        }
        Ok(())
    }
}

impl Default for SolverConfig<f64> {
    /// Adaptive 4(5) at `rel_tol = abs_tol = 1e-6`.
    fn default() -> Self {
        Self::adaptive(1e-6, 1e-6)
    }
}

/// States at the requested output times.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub times: Vec<T>,
    pub states: Vec<Vec<T>>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Values of one state component across all output times.
    pub fn component(&self, index: usize) -> Vec<T> {
        self.states.iter().map(|s| s[index]).collect()
    }
}

pub(crate) fn check_times<T: Scalar>(times: &[T]) -> Result<(), OdeError> {
    if times.is_empty() {
        return Err(OdeError::InvalidConfig("empty time grid".into()));
    }
    for (i, w) in times.windows(2).enumerate() {
        if !(w[1] > w[0]) {
            return Err(OdeError::UnsortedTimes { index: i + 1 });
        }
    }
    Ok(())
}

/// Integrates from `x0` at `times[0]`, returning the state at every entry of `times`.
///
/// Fixed-step methods split each output interval into the smallest number of
/// equal steps not exceeding `config.dt`, so every output time is hit exactly.
pub fn integrate<T: Scalar, F: OdeRhs<T> + ?Sized>(
    rhs: &F,
    x0: &[T],
    times: &[T],
    config: &SolverConfig<T>,
) -> Result<Trajectory<T>, OdeError> {
    config.validate()?;
    check_times(times)?;
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(OdeError::NonFinite {
            t: times[0].to_f64_lossy(),
        });
    }
    if let Method::Adaptive45 = config.method {
        let opts = AdaptiveOptions {
            rel_tol: config.rel_tol,
            abs_tol: config.abs_tol,
            max_steps: config.max_steps,
        };
        return integrate_adaptive(rhs, x0, times, &opts);
    }

    let general = match &config.method {
        Method::GeneralRk(spec) => Some(spec.tableau()?),
        Method::Rk2 => Some(ButcherTableau::rk2()),
        _ => None,
    };
    let step = |x: &[T], t: T, h: T| -> Result<Vec<T>, OdeError> {
        match &config.method {
            Method::Euler => step_euler(rhs, x, t, h),
            Method::Trapezoidal => step_trapezoidal(rhs, x, t, h),
            Method::ModifiedEuler => step_modified_euler(rhs, x, t, h),
            Method::Rk4 => step_rk4(rhs, x, t, h),
            Method::Rk2 | Method::GeneralRk(_) => {
                step_general_rk(general.as_ref().expect("tableau built above"), rhs, x, t, h)
            }
            Method::Adaptive45 => unreachable!("handled above"),
        }
    };

    let mut states = Vec::with_capacity(times.len());
    states.push(x0.to_vec());
    let mut x = x0.to_vec();
    let mut total_steps = 0usize;
    // Slack so that intervals that are an exact multiple of dt do not round up an extra step.
    let slack = T::lit(1e-9);
    for w in times.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let span = t1 - t0;
        let n = ((span / config.dt) - slack).ceil().max(T::one());
        let n_steps = n.to_usize().unwrap_or(usize::MAX);
        total_steps = total_steps.saturating_add(n_steps);
        if total_steps > config.max_steps {
            return Err(OdeError::MaxStepsExceeded {
                max_steps: config.max_steps,
                t: t0.to_f64_lossy(),
            });
        }
        let h = span / n;
        for k in 0..n_steps {
            let t = t0 + h * T::from_usize(k).expect("step index fits scalar");
            x = step(&x, t, h)?;
            if x.iter().any(|v| !v.is_finite()) {
                return Err(OdeError::NonFinite {
                    t: (t + h).to_f64_lossy(),
                });
            }
        }
        states.push(x.clone());
    }
    Ok(Trajectory {
        times: times.to_vec(),
        states,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn decay(_t: f64, x: &[f64], dx: &mut [f64]) {
        dx[0] = -x[0];
    }

    fn zero(_t: f64, _x: &[f64], dx: &mut [f64]) {
        dx.iter_mut().for_each(|v| *v = 0.0);
    }

    fn ramp(t: f64, _x: &[f64], dx: &mut [f64]) {
        dx[0] = t;
    }

    #[test]
    fn euler_single_step() {
        let x = step_euler(&decay, &[1.0], 0.0, 0.1).unwrap();
        assert_abs_diff_eq!(x[0], 0.9, epsilon = 1e-15);
        assert_eq!(
            step_euler(&zero, &[3.0, -2.0], 0.0, 0.5).unwrap(),
            vec![3.0, -2.0]
        );
    }

    #[test]
    fn trapezoidal_and_midpoint_steps() {
        assert_abs_diff_eq!(
            step_trapezoidal(&decay, &[1.0], 0.0, 0.1).unwrap()[0],
            0.905,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            step_modified_euler(&decay, &[1.0], 0.0, 0.1).unwrap()[0],
            0.905,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            step_trapezoidal(&ramp, &[0.0], 0.0, 1.0).unwrap()[0],
            0.5,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            step_modified_euler(&ramp, &[0.0], 0.0, 1.0).unwrap()[0],
            0.5,
            epsilon = 1e-15
        );
        assert_eq!(
            step_modified_euler(&zero, &[1.5], 0.0, 0.3).unwrap(),
            vec![1.5]
        );
        let constant = |_t: f64, _x: &[f64], dx: &mut [f64]| dx[0] = 2.5;
        assert_abs_diff_eq!(
            step_trapezoidal(&constant, &[1.0], 0.0, 0.2).unwrap()[0],
            1.5,
            epsilon = 1e-15
        );
    }

    #[test]
    fn rk4_step_matches_exponential() {
        let x = step_rk4(&decay, &[1.0], 0.0, 0.1).unwrap();
        assert_abs_diff_eq!(x[0], 0.904_837_5, epsilon = 1e-7);
        assert_abs_diff_eq!(x[0], (-0.1f64).exp(), epsilon = 1e-7);
        let g = step_general_rk(&ButcherTableau::rk4(), &decay, &[1.0], 0.0, 0.1).unwrap();
        assert_abs_diff_eq!(g[0], x[0], epsilon = 1e-15);
    }

    #[test]
    fn degenerate_tableaus_match_named_steps() {
        let x = [0.7, -0.2];
        let rhs = |t: f64, x: &[f64], dx: &mut [f64]| {
            dx[0] = x[1] * t.cos() - x[0] * x[0];
            dx[1] = -x[0] + 0.3 * t;
        };
        let euler = step_general_rk(&ButcherTableau::euler(), &rhs, &x, 0.4, 0.05).unwrap();
        assert_eq!(euler, step_euler(&rhs, &x, 0.4, 0.05).unwrap());
        let rk2 = step_general_rk(&ButcherTableau::rk2(), &rhs, &x, 0.4, 0.05).unwrap();
        assert_eq!(rk2, step_trapezoidal(&rhs, &x, 0.4, 0.05).unwrap());
    }

    #[test]
    fn non_positive_step_is_rejected() {
        assert!(matches!(
            step_euler(&decay, &[1.0], 0.0, 0.0),
            Err(OdeError::InvalidConfig(_))
        ));
        assert!(matches!(
            step_rk4(&decay, &[1.0], 0.0, -0.1),
            Err(OdeError::InvalidConfig(_))
        ));
    }

    #[test]
    fn non_finite_rhs_is_reported() {
        let bad = |_t: f64, _x: &[f64], dx: &mut [f64]| dx[0] = f64::NAN;
        assert!(matches!(
            step_euler(&bad, &[1.0], 0.0, 0.1),
            Err(OdeError::NonFinite { .. })
        ));
    }

    #[test]
    fn integrate_rk4_exponential() {
        let traj = integrate(
            &decay,
            &[1.0],
            &[0.0, 1.0, 2.0],
            &SolverConfig::fixed(Method::Rk4, 0.01),
        )
        .unwrap();
        assert_eq!(traj.states[0], vec![1.0]);
        assert_abs_diff_eq!(traj.states[1][0], 0.367_879, epsilon = 1e-6);
        assert_abs_diff_eq!(traj.states[2][0], 0.135_335, epsilon = 1e-6);
    }

    #[test]
    fn integrate_zero_rhs_is_constant() {
        for method in [
            Method::Euler,
            Method::Trapezoidal,
            Method::ModifiedEuler,
            Method::Rk2,
            Method::Rk4,
        ] {
            let traj = integrate(
                &zero,
                &[4.0, 1.0],
                &[0.0, 0.5, 3.0],
                &SolverConfig::fixed(method, 0.1),
            )
            .unwrap();
            assert!(traj.states.iter().all(|s| s == &vec![4.0, 1.0]));
        }
    }

    #[test]
    fn integrate_rejects_unsorted_times() {
        let err = integrate(
            &decay,
            &[1.0],
            &[0.0, 1.0, 1.0],
            &SolverConfig::fixed(Method::Euler, 0.1),
        )
        .unwrap_err();
        assert_eq!(err, OdeError::UnsortedTimes { index: 2 });
    }

    #[test]
    fn integrate_reports_blowup_time() {
        let blowup = |_t: f64, x: &[f64], dx: &mut [f64]| dx[0] = x[0] * x[0];
        let err = integrate(
            &blowup,
            &[1.0],
            &[0.0, 5.0],
            &SolverConfig::fixed(Method::Euler, 0.1),
        )
        .unwrap_err();
        assert!(matches!(err, OdeError::NonFinite { .. }));
    }

    #[test]
    fn general_rk_config_validates_tableau() {
        let spec = GeneralRkSpec {
            weights: vec![0.3, 0.3],
            nodes: vec![0.0, 1.0],
            coupling: vec![vec![], vec![1.0]],
        };
        let cfg = SolverConfig::fixed(Method::GeneralRk(spec), 0.1);
        assert!(matches!(
            integrate(&decay, &[1.0], &[0.0, 1.0], &cfg),
            Err(OdeError::InvalidTableau(_))
        ));
    }

    #[test]
    fn works_in_single_precision() {
        let decay32 = |_t: f32, x: &[f32], dx: &mut [f32]| dx[0] = -x[0];
        let traj = integrate(
            &decay32,
            &[1.0f32],
            &[0.0, 1.0],
            &SolverConfig::fixed(Method::Rk4, 0.05),
        )
        .unwrap();
        assert!((traj.states[1][0] - (-1.0f32).exp()).abs() < 1e-5);
    }
}
