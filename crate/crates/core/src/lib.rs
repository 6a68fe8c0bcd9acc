//! Simulation of 1-D driven oscillator chains with hysteretic damping.
//!
//! * [`lattice`]: equations of motion for the local (Model I) and
//!   bond-based (Model II) damping laws, boundary drives, site energies.
//! * [`integrate`]: adaptive Tsitouras 5(4) and fixed-step Euler-Heun.
//! * [`analysis`]: the displacement criterion `D_f`, threshold detection,
//!   least-squares fits, ensemble classification, empirical CDFs.
//! * [`experiments`]: amplitude sweeps, threshold curves, wave packets,
//!   impulsive breathers and stochastic ensembles.

pub mod analysis;
pub mod error;
pub mod experiments;
pub mod integrate;
pub mod lattice;

pub use error::{Error, Result};
pub use integrate::{integrate_ode, integrate_sde, IntegratorConfig, SdeConfig, Trajectory};
pub use lattice::{BoundaryDrive, LatticeParams, LatticeState, ModelKind};
