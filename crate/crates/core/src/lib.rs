//! Simulation and Bayesian calibration of the SLIR epidemic model, in which
//! susceptibles move in and out of a lockdown compartment `L` while infection
//! proceeds as in SIR.
//!
//! The crate is layered: [`ode`] integrates initial value problems,
//! [`compartmental`] defines the SIR/SLIR systems and next-generation `R0`,
//! [`stats`] holds the observation model and log-posterior, [`sampler`] runs
//! Metropolis, HMC and NUTS chains with diagnostics, [`analysis`] drives the
//! fitting, forecasting and sensitivity workflows, and [`io`] reads and writes
//! the data files.

// NaN-rejecting guards are written as `!(x > 0.0)`, and the numeric kernels
// index several parallel arrays per loop.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod compartmental;
pub mod io;
pub mod ode;
pub mod sampler;
pub mod scalar;
pub mod stats;

pub use scalar::Scalar;

/// Double-precision aliases for the generic numeric types.
pub type CompartmentState = compartmental::CompartmentState<f64>;
pub type SlirParams = compartmental::SlirParams<f64>;
pub type SlirTrajectory = compartmental::SlirTrajectory<f64>;
pub type SolverConfig = ode::SolverConfig<f64>;
pub type ButcherTableau = ode::ButcherTableau<f64>;

/// Any error raised by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Ode(#[from] ode::OdeError),
    #[error(transparent)]
    Model(#[from] compartmental::ModelError),
    #[error(transparent)]
    Stats(#[from] stats::StatsError),
    #[error(transparent)]
    Sampler(#[from] sampler::SamplerError),
    #[error(transparent)]
    Diagnostics(#[from] sampler::DiagnosticsError),
    #[error(transparent)]
    Analysis(#[from] analysis::AnalysisError),
    #[error(transparent)]
    Io(#[from] io::IoError),
}

impl Error {
    /// Stable machine-readable category.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Ode(_) => "ode",
            Error::Model(_) => "model",
            Error::Stats(_) => "stats",
            Error::Sampler(_) => "sampler",
            Error::Diagnostics(_) => "diagnostics",
            Error::Analysis(_) => "analysis",
            Error::Io(_) => "io",
        }
    }
}
