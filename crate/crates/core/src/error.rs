//! Error type shared by all engine modules.

use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error(
        "invalid Fock space: cutoffs must satisfy n_cav >= 1, n_mech >= 1 (got {n_cav}, {n_mech})"
    )]
    InvalidSpace { n_cav: usize, n_mech: usize },

    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("matrix is not Hermitian: max |M - M^dag| = {max_asymmetry:.3e} exceeds {tol:.3e}")]
    NonHermitian { max_asymmetry: f64, tol: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("weak-coupling regime violated: g = {g} exceeds {limit} (effective model invalid)")]
    WeakCouplingViolated { g: f64, limit: f64 },

    #[error(
        "propagator step too large: |H|*dt = {norm_dt:.3e} > 0.1; use dt <= {suggested_dt:.3e}"
    )]
    StepTooLarge { norm_dt: f64, suggested_dt: f64 },

    #[error(
        "eigensolver failed to converge after {sweeps} sweeps (off-diagonal norm {off_norm:.3e})"
    )]
    EigNotConverged { sweeps: usize, off_norm: f64 },

    #[error(
        "branch tracking ambiguous at ratio {ratio}: best eigenvector overlap {overlap:.3} < 0.5; \
         use a denser ratio sampling"
    )]
    TrackingAmbiguous { ratio: f64, overlap: f64 },

    #[error("no interior minimum of the splitting inside the sweep window")]
    NoInteriorMinimum,

    #[error("density-matrix trace drifted by {drift:.3e} (> {tol:.3e}); retry with n_steps >= {suggested_steps}")]
    TraceDrift {
        drift: f64,
        tol: f64,
        suggested_steps: usize,
    },

    #[error("dt too large: per-step jump probability {dp:.3e} exceeds 0.1")]
    DpTooLarge { dp: f64 },

    #[error("propagator defect: state norm increased by {delta:.3e} under dissipative evolution")]
    NormIncreased { delta: f64 },

    #[error("finite-difference step delta ill-conditioned: Richardson check disagrees by {rel:.3e} (> {tol:.3e})")]
    RichardsonMismatch { rel: f64, tol: f64 },

    #[error("trajectory {index} failed: {source}")]
    Trajectory { index: usize, source: Box<Error> },

    #[error("ensemble mixes parameters: {0}")]
    MixedEnsemble(String),

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
