//! Two-dimensional TM_z finite-difference time-domain solver.
//!
//! Only `E_z`, `H_x` and `H_y` are carried. The grid is a Yee lattice with
//! `E_z` at integer nodes `(i, j)`, `H_x` at `(i, j + ½)` and `H_y` at
//! `(i + ½, j)`. Outer edges are perfect electric conductors backed by a
//! convolutional PML of configurable depth; the y axis can instead be made
//! periodic, which reduces the solver to a one-dimensional plane-wave line.

mod analytic;
mod grid;
mod pml;
mod solver;
mod source;

pub use analytic::analytic_slab_reflection;
pub use grid::{courant_dt, FieldState, GridSpec, MaterialGrid};
pub use pml::{PmlConfig, PmlProfile};
pub use solver::{run_simulation, run_simulation_with, ProbeRecord, Simulation, YBoundary};
pub use source::{SourceSpec, Waveform};

use thiserror::Error;

/// Speed of light in vacuum, m/s.
pub const C0: f64 = 299_792_458.0;
/// Vacuum permeability, H/m.
pub const MU0: f64 = 1.256_637_062_12e-6;
/// Vacuum permittivity, F/m.
pub const EPS0: f64 = 1.0 / (MU0 * C0 * C0);

/// Safety factor applied to the Courant limit when picking a time step.
pub const COURANT_SAFETY: f64 = 0.99;

/// The instability guard scans the fields once per this many steps.
pub const FINITE_CHECK_INTERVAL: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FdtdError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("numerical instability: non-finite field at step {step}")]
    Unstable { step: usize },
}

pub type Result<T> = std::result::Result<T, FdtdError>;
