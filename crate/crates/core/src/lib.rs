//! Numerical laboratory for positive solutions of `−Δu = f(u)` in the upper
//! half-space with `u = 0` on the boundary and `f` singular at zero.
//!
//! The crate provides one-dimensional profiles, a strip solver, a battery of
//! numerical checks on computed solutions, and comparison-principle tools.

pub mod compare;
pub mod error;
pub mod interp;
pub mod io;
pub mod nonlinearity;
pub mod profile;
pub mod quad;
pub mod report;
pub mod strip;
pub mod verifier;

pub use error::{Error, Result};
pub use nonlinearity::{ConditionFlags, CustomFn, Envelope, FlagState, Kind, NonlinearitySpec};
pub use compare::{lambda_star, poincare_eigenvalue, ComparisonOptions};
pub use profile::{pure_constant, pure_exact, scaled_family, ProfileParams, ProfileTable};
pub use strip::{
    assemble_residual, build_mesh, newton_solve, newton_solve_from, BoundaryData, Field, Mesh, SolverConfig,
    StripDomain, VerticalStencil,
};
pub use verifier::{CheckReport, DirectionVector, RigidityOptions, Samples};
