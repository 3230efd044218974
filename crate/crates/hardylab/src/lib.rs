//! Numerical laboratory for the Schrödinger operator `-Δ - λ/|x|²` with the
//! singularity sitting on the boundary of the domain.
//!
//! The domain is the unit half-disk (dimension 2) or the axisymmetric
//! half-ball reduced to its meridian quarter-disk (dimension 3), discretized
//! on a uniform polar tensor grid with a conservative flux-form stencil.
//! On top of the assembled quadratic forms the crate provides
//!
//! - generalized eigenvalue machinery for the boundary Hardy constant
//!   `λ(N) = N²/4`, its logarithmic refinement, and the weighted-gradient
//!   constant of the radial inequality,
//! - elliptic solves with Pohozaev-identity and trace-regularity reports,
//!   plus nonlinear ground states with the existence/nonexistence balance,
//! - conservative wave and Schrödinger evolution (implicit midpoint /
//!   Crank-Nicolson) with hidden-regularity, multiplier and observability
//!   reports,
//! - HUM boundary controls computed by conjugate gradient on the exact
//!   discrete control Gramian, verified by forward runs.

pub mod bessel;
pub mod control;
pub mod eigen;
pub mod elliptic;
pub mod error;
pub mod evolution;
pub mod field;
pub mod grid;
pub mod linalg;
pub mod operators;
pub mod spectral;

mod gramian;

pub use control::{
    hum_operator, hum_solve, schrodinger_hum_solve, verify_control, ControlResult,
    SchrodingerControlResult,
};
pub use elliptic::{
    ground_state, nonlinear_balance, pohozaev_report, solve_dirichlet, trace_inequality_ratio,
    DirichletSolve, GroundState, GroundStateMode, NonlinearBalance, PohozaevReport,
};
pub use error::Error;
pub use evolution::{
    hidden_regularity_ratio, multiplier_report, observability_scan, schrodinger_evolve,
    wave_evolve, MultiplierReport, ObservabilityScan, RecordOptions, SampleSpec, SchrodingerTrace,
    WaveTrace,
};
pub use field::{BoundaryField, CxField, Field};
pub use grid::{build_grid, BoundaryFace, FaceKind, Grid};
pub use operators::{
    assemble, boundary_quadrature, normal_derivative, quadratic_form, regularized_hardy_form,
    BoundaryWeight, OperatorSet, QuadraticKind,
};
pub use spectral::{
    best_hardy_constant, critical_profile_diagnostic, refined_log_constant,
    smallest_generalized_eigenpairs, tu8_constant, ConstantEstimate, CriticalProfilePoint,
    EigenResult,
};

/// The critical boundary Hardy constant `λ(N) = N²/4`.
pub fn critical_lambda(dimension: usize) -> f64 {
    (dimension * dimension) as f64 / 4.0
}

pub type Result<T> = std::result::Result<T, Error>;
