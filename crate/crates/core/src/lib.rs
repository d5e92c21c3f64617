//! Simulation and limit-theorem diagnostics for nonlinear Hawkes processes.
//!
//! A nonlinear Hawkes process has intensity `λ_t = λ(Σ_{τ<t} h(t − τ))`.
//! When `h` is non-increasing with a finite first moment and `λ` is positive,
//! non-decreasing and `α`-Lipschitz with `α‖h‖₁ < 1`, the stationary process
//! obeys a functional central limit theorem with variance constant
//! `σ² = Var N[0,1] + 2 Σ_{j≥1} Cov(N[0,1], N[j,j+1])` and a Strassen-type
//! functional law of the iterated logarithm.
//!
//! Modules:
//! - [`model`]: kernels, rate functions, stability validation;
//! - [`simulate`]: exact thinning, compensators, the Poisson-embedding coupler;
//! - [`estimate`]: unit-bin counts, `μ`/`σ²` estimators, closed forms, tail diagnostics;
//! - [`fclt`]: rescaled and compensated paths with Gaussian-limit tests;
//! - [`lil`]: Strassen interpolation and finite-`n` checks.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod estimate;
pub mod fclt;
pub mod lil;
pub mod model;
pub mod quadrature;
pub mod rng;
pub mod simulate;
pub mod stats;

pub use estimate::{CountSeries, EstimateError, PathStatistics, TailDiagnostic, TruncationPolicy};
pub use fclt::{CompensatedPath, FcltError, GaussianTestReport, RescaledPath};
pub use lil::{LilError, LilPath, LilSequence, S2Profile, StrassenReport};
pub use model::{
    validate_model, HawkesModel, History, Kernel, KernelFamily, ModelError, ModelSpec, RateFamily, RateFunction,
};
pub use simulate::{
    simulate, simulate_coupled, stationary_burnin, thinning_bound, CoupledPair, EventSequence, SimulationError,
    SimulationOptions, SimulationOutput,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Simulation(#[from] SimulationError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error(transparent)]
    Fclt(#[from] FcltError),
    #[error(transparent)]
    Lil(#[from] LilError),
}
