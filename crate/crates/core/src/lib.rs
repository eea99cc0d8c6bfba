//! Stationary multichannel scattering of atoms on laser "diode"
//! configurations at oblique incidence, with classification of the result
//! and phase-diagram sweeps over speed and angle.

pub mod config;
pub mod diode;
pub mod fields;
pub mod params;
pub mod presets;
pub mod scheme;
pub mod solver;
pub mod sweep;

pub use config::RunConfig;
pub use scheme::{Incidence, SchemeConfig};
pub use solver::{solve, solve_with, ScatteringResult, SolveError, SolverSettings};
