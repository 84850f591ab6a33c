//! Desk-scale simulation engine for a weakly coupled cavity-optomechanical
//! system: exact and effective Hamiltonians, Casimir-Rabi spectra, closed and
//! dissipative dynamics, Monte Carlo wave-function (quantum-jump)
//! trajectories, emission/bundle statistics, and quantum Fisher information.
//!
//! Units: all frequencies and rates are multiples of the mechanical frequency
//! ω_m ≡ 1; times are in 1/ω_m.

pub mod checks;
pub mod dynamics;
pub mod emission;
pub mod error;
pub mod fock;
pub mod linalg;
pub mod mcwf;
pub mod model;
pub mod qfi;
pub mod spectra;
pub mod stats;

pub use error::{Error, Result};
pub use fock::{FockSpace, OperatorMatrix, StateVector};
pub use model::ModelParams;
