//! Conservative finite-volume solver for the kinetic equation in one space
//! and one momentum dimension, on `T¹ x [-P, P]`.
//!
//! One step is a Strang splitting: half a step of conservative transport in
//! `x`, a full backward-Euler step of the momentum diffusion `L` in each
//! `x`-column, and another half step of transport. Both pieces are positive,
//! mass preserving and contractive in `L¹(dx dμ)`; `L` is symmetric in
//! `L²(dμ)` with zero flux through `p = ±P`.
//!
//! The entropy functionals are evaluated on momentum faces with logarithmic
//! means, which makes `D` decrease by exactly the discrete `Ipp` under the
//! semi-discrete diffusion and keeps `Ixp² <= Ipp Ixx` exact.

mod diagnostics;
mod functionals;
mod grid;
mod operator;
mod run;
mod step;

pub use diagnostics::{entropy_production_diagnostics, DiagnosticsReport, IdentityResidual};
pub use functionals::{functionals, log_mean, FunctionalRow, FunctionalSeries, CSV_HEADER};
pub use grid::{build_grid, initial_state, parse_initial_data, PhaseGrid};
pub use operator::DiffusionOperator;
pub use run::{fit_decay_rate, fit_rate, run, DecayCheck, RateFit, RunOptions, RunOutcome};
pub use step::{step, transport, State, TransportScheme};

use crate::expr::{EvalError, ParseError};
use crate::geometry::GeometryError;
use thiserror::Error;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum SolverError {
    #[error("the solver needs one momentum dimension and one velocity component, got M = {dim}")]
    UnsupportedDimension { dim: usize },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("weight e^-E sqrt|g| is not positive at p = {p}")]
    NonpositiveWeight { p: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("initial data: {0}")]
    InitialData(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("evaluation failed: {0}")]
    Eval(#[from] EvalError),
    #[error("time step {dt} violates the transport CFL bound dx/max|v| = {limit}")]
    CflViolation { dt: f64, limit: f64 },
    #[error("tridiagonal solve failed in column {column}")]
    LinearSolveFailure { column: usize },
    #[error("invalid run options: {0}")]
    InvalidOptions(String),
    #[error("step failed at t = {t}: {source}")]
    AtTime { t: f64, source: Box<SolverError> },
    #[error("rate fit needs at least 10 samples in the window, got {0}")]
    InsufficientData(usize),
    #[error("rate fit needs positive values; found {value} at t = {t}")]
    NonpositiveValues { t: f64, value: f64 },
}
