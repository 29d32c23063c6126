//! SIR and SLIR compartmental models.
//!
//! The SLIR model moves susceptibles into a lockdown compartment `L` at rate `a`
//! and returns them at rate `b`:
//!
//! ```text
//! S' = -β S I / N - a S + b L
//! L' =  a S - b L
//! I' =  β S I / N - γ I
//! R' =  γ I
//! ```
//!
//! with `β = γ R0`. Setting `a = b = 0` recovers the classical SIR model.

mod ngm;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ode::{integrate, OdeError, SolverConfig, Trajectory};
use crate::scalar::Scalar;

pub use ngm::{
    jacobian_fd, next_generation_from_flows, r0_next_generation, sir_next_generation,
    slir_disease_free_state, slir_next_generation, DiseaseFreeEquilibrium,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("population must be positive, got {0}")]
    NonPositivePopulation(f64),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("initial infected {i0} must lie strictly between 0 and N = {n}")]
    InvalidInitial { i0: f64, n: f64 },
    #[error("matrix is singular: {0}")]
    Singular(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Ode(#[from] OdeError),
}

/// One point of an (S, L, I, R) trajectory, in persons. For SIR, `l` is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompartmentState<T> {
    pub s: T,
    pub l: T,
    pub i: T,
    pub r: T,
}

impl<T: Scalar> CompartmentState<T> {
    pub fn new(s: T, l: T, i: T, r: T) -> Self {
        Self { s, l, i, r }
    }

    /// Initial condition `(N - i0, 0, i0, 0)`.
    pub fn initial(n: T, i0: T) -> Self {
        Self {
            s: n - i0,
            l: T::zero(),
            i: i0,
            r: T::zero(),
        }
    }

    pub fn total(&self) -> T {
        self.s + self.l + self.i + self.r
    }

    pub fn to_array(&self) -> [T; 4] {
        [self.s, self.l, self.i, self.r]
    }

    pub fn from_slice(x: &[T]) -> Self {
        Self {
            s: x[0],
            l: x[1],
            i: x[2],
            r: x[3],
        }
    }

    /// Copy with components in `[-eps·N, 0)` clamped to zero. Larger undershoots are kept so
    /// callers can detect them.
    pub fn clamp_undershoot(&self, n: T) -> Self {
        let floor = -T::lit(1e-9) * n;
        let fix = |v: T| {
            if v < T::zero() && v >= floor {
                T::zero()
            } else {
                v
            }
        };
        Self {
            s: fix(self.s),
            l: fix(self.l),
            i: fix(self.i),
            r: fix(self.r),
        }
    }
}

/// Structural SLIR parameters. Transmission rate is derived as `β = γ·R0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlirParams<T> {
    pub r0: T,
    pub gamma: T,
    pub a: T,
    pub b: T,
}

impl<T: Scalar> SlirParams<T> {
    pub fn new(r0: T, gamma: T, a: T, b: T) -> Self {
        Self { r0, gamma, a, b }
    }

    pub fn beta(&self) -> T {
        self.gamma * self.r0
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let all_finite = [self.r0, self.gamma, self.a, self.b]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(ModelError::InvalidParams("non-finite parameter".into()));
        }
        if self.r0 < T::zero()
            || self.gamma <= T::zero()
            || self.a < T::zero()
            || self.b < T::zero()
        {
            return Err(ModelError::InvalidParams(format!(
                "require R0 >= 0, gamma > 0, a >= 0, b >= 0; got R0={}, gamma={}, a={}, b={}",
                self.r0, self.gamma, self.a, self.b
            )));
        }
        Ok(())
    }
}

fn check_population<T: Scalar>(n: T) -> Result<(), ModelError> {
    if n > T::zero() && n.is_finite() {
        Ok(())
    } else {
        Err(ModelError::NonPositivePopulation(n.to_f64_lossy()))
    }
}

/// SIR derivative `(−βSI/N, 0, βSI/N − γI, γI)`; the `l` slot is ignored and returned as zero.
pub fn sir_rhs<T: Scalar>(
    state: &CompartmentState<T>,
    _t: T,
    beta: T,
    gamma: T,
    n: T,
) -> Result<CompartmentState<T>, ModelError> {
    check_population(n)?;
    let infection = beta * state.s * state.i / n;
    let removal = gamma * state.i;
    Ok(CompartmentState {
        s: -infection,
        l: T::zero(),
        i: infection - removal,
        r: removal,
    })
}

/// SLIR derivative. Components sum to zero up to rounding.
pub fn slir_rhs<T: Scalar>(
    state: &CompartmentState<T>,
    _t: T,
    params: &SlirParams<T>,
    n: T,
) -> Result<CompartmentState<T>, ModelError> {
    check_population(n)?;
    Ok(slir_derivative(state, params, n))
}

#[inline]
fn slir_derivative<T: Scalar>(
    x: &CompartmentState<T>,
    p: &SlirParams<T>,
    n: T,
) -> CompartmentState<T> {
    let infection = p.beta() * x.s * x.i / n;
    let to_lockdown = p.a * x.s;
    let from_lockdown = p.b * x.l;
    let removal = p.gamma * x.i;
    CompartmentState {
        s: -infection - to_lockdown + from_lockdown,
        l: to_lockdown - from_lockdown,
        i: infection - removal,
        r: removal,
    }
}

/// Jacobian of the SIR system in (S, I, R) ordering.
pub fn sir_jacobian<T: Scalar>(
    state: &CompartmentState<T>,
    beta: T,
    gamma: T,
    n: T,
) -> Result<[[T; 3]; 3], ModelError> {
    check_population(n)?;
    let z = T::zero();
    Ok([
        [-beta * state.i / n, -beta * state.s / n, z],
        [beta * state.i / n, beta * state.s / n - gamma, z],
        [z, gamma, z],
    ])
}

/// Effective reproduction number `R0·S(t)/N` along a trajectory.
pub fn effective_reproduction_series<T: Scalar>(
    r0: T,
    states: &[CompartmentState<T>],
    n: T,
) -> Vec<T> {
    states.iter().map(|x| r0 * x.s / n).collect()
}

/// Daily-resolution SLIR solution.
#[derive(Debug, Clone, PartialEq)]
pub struct SlirTrajectory<T> {
    pub days: Vec<T>,
    pub states: Vec<CompartmentState<T>>,
    pub population: T,
}

impl<T: Scalar> SlirTrajectory<T> {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn final_state(&self) -> &CompartmentState<T> {
        self.states
            .last()
            .expect("trajectory always holds the initial state")
    }

    /// `max_t L(t)/N` over the output grid.
    pub fn peak_lockdown_fraction(&self) -> T {
        self.states
            .iter()
            .map(|x| x.l / self.population)
            .fold(T::zero(), T::max)
    }

    /// Largest conservation residual `|S+L+I+R − N|`.
    pub fn max_conservation_error(&self) -> T {
        self.states
            .iter()
            .map(|x| (x.total() - self.population).abs())
            .fold(T::zero(), T::max)
    }

    fn from_raw(raw: Trajectory<T>, n: T) -> Self {
        Self {
            days: raw.times,
            states: raw
                .states
                .iter()
                .map(|x| CompartmentState::from_slice(x))
                .collect(),
            population: n,
        }
    }
}

fn day_grid<T: Scalar>(horizon_days: usize) -> Vec<T> {
    (0..=horizon_days)
        .map(|d| T::from_usize(d).expect("day index fits scalar"))
        .collect()
}

/// Solves the SLIR system from `(N − i0, 0, i0, 0)` and reports days `0..=horizon_days`.
pub fn simulate_slir<T: Scalar>(
    params: &SlirParams<T>,
    n: T,
    i0: T,
    horizon_days: usize,
    solver: &SolverConfig<T>,
) -> Result<SlirTrajectory<T>, ModelError> {
    check_population(n)?;
    params.validate()?;
    if !(i0 > T::zero() && i0 < n) {
        return Err(ModelError::InvalidInitial {
            i0: i0.to_f64_lossy(),
            n: n.to_f64_lossy(),
        });
    }
    let p = *params;
    let rhs = move |_t: T, x: &[T], dx: &mut [T]| {
        let d = slir_derivative(&CompartmentState::from_slice(x), &p, n);
        dx.copy_from_slice(&d.to_array());
    };
    let x0 = CompartmentState::initial(n, i0).to_array();
    let raw = integrate(&rhs, &x0, &day_grid::<T>(horizon_days), solver)?;
    Ok(SlirTrajectory::from_raw(raw, n))
}

/// Solves the plain SIR system on its own three-dimensional state; `l` is reported as zero.
pub fn simulate_sir<T: Scalar>(
    beta: T,
    gamma: T,
    n: T,
    i0: T,
    horizon_days: usize,
    solver: &SolverConfig<T>,
) -> Result<SlirTrajectory<T>, ModelError> {
    check_population(n)?;
    if !(i0 > T::zero() && i0 < n) {
        return Err(ModelError::InvalidInitial {
            i0: i0.to_f64_lossy(),
            n: n.to_f64_lossy(),
        });
    }
    let rhs = move |_t: T, x: &[T], dx: &mut [T]| {
        let infection = beta * x[0] * x[1] / n;
        let removal = gamma * x[1];
        dx[0] = -infection;
        dx[1] = infection - removal;
        dx[2] = removal;
    };
    let raw = integrate(
        &rhs,
        &[n - i0, i0, T::zero()],
        &day_grid::<T>(horizon_days),
        solver,
    )?;
    Ok(SlirTrajectory {
        days: raw.times,
        states: raw
            .states
            .iter()
            .map(|x| CompartmentState::new(x[0], T::zero(), x[1], x[2]))
            .collect(),
        population: n,
    })
}
