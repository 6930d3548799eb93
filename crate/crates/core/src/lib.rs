//! Negative-curvature primal-dual interior-point method for nonlinear
//! semidefinite programs
//!
//! ```text
//!   minimize f(x)  subject to  X(x) ⪰ 0,   x ∈ ℝⁿ, X(x) ∈ 𝕊ᵐ,
//! ```
//!
//! computing approximate second-order stationary points of a primal-dual
//! log-barrier merit function with scaled gradient steps and
//! negative-curvature steps.

pub mod benchmarks;
pub mod certificates;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod inner;
pub mod linalg;
pub mod merit;
pub mod outer;
pub mod primal;
pub mod problem;
pub mod scaling;
pub mod verify;

pub use error::{Result, SolverError};
pub use exec::Execution;
pub use experiment::{compare_psf, run_method, run_method_observed, CompareRun, Method, PlotPoint};
pub use inner::{
    check_eps_sosp, run_inner, run_inner_observed, InnerOutcome, InnerStatus, IpmParams,
    Procedure, Residuals, StepMode, StepRecord,
};
pub use linalg::{Spectrum, SymMat};
pub use merit::MeritParams;
pub use outer::{
    default_schedule, run_outer, run_outer_observed, OuterOutcome, OuterRecord, OuterStatus,
    Schedule, StopReason,
};
pub use primal::{run_inner_primal, run_outer_primal, run_outer_primal_observed};
pub use problem::{Iterate, Lipschitz, NsdpProblem, Vector};
pub use scaling::{IdentityScaling, Scaling};
