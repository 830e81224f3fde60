//! Numerical building blocks: Lambert W, Jacobians and spectral radii, and a
//! constrained multi-objective search.

pub mod lambert;
pub mod linalg;
pub mod moo;

pub use lambert::{lambert_w0, lambert_wm1};
pub use linalg::{finite_diff_jacobian, finite_diff_jacobian_clamped, spectral_radius};
pub use moo::{pareto_solve, Feasibility, MooProblem, MooSettings, ParetoFront, Sense};
