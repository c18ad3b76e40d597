//! Simulation and cross-validation toolkit for stochastic Volterra
//! differential equations with additive noise,
//!
//! ```text
//! X_t = x + int_0^t b(t, s, X_s) ds + B_t,   b(t, s, x) = sum_m (t - s)^m g_m(s, x).
//! ```
//!
//! The crate provides
//!
//! * [`kernel`]: power-series kernels, including truncated `sin(t - s)` and
//!   `(t - s)^alpha` expansions, and the repeated-integration machinery;
//! * [`solver`]: Euler and Picard schemes with an `O(N M^2)` drift sum;
//! * [`girsanov`]: the collapsed drift functional and the change-of-measure
//!   estimator of `E[phi(X_t)]`, an oracle independent of the Euler solver;
//! * [`sensitivity`]: Malliavin and flow derivatives, Hölder and `L^2`
//!   statistics;
//! * [`mollify`]: smooth approximations of singular fields and the
//!   weak-convergence study;
//! * [`cli`]: the batch experiment runner behind the `svde` binary.
//!
//! Every Monte Carlo routine is a deterministic function of its seed and
//! configuration, whatever the number of worker threads.

// `!(v > 0.0)` is used on purpose so NaN parameters are rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod girsanov;
pub mod grid;
pub mod kernel;
pub mod mollify;
pub mod montecarlo;
pub mod phi;
pub mod sensitivity;
pub mod solver;
mod volterra;

pub use error::{Result, SvdeError};
pub use grid::{make_grid, sample_brownian, BrownianPath, TimeGrid};
pub use kernel::{eval_kernel, fractional_kernel, sin_kernel, CoefficientField, Field, KernelSeries};
pub use montecarlo::Estimate;
pub use phi::TestFunction;
pub use solver::{picard_solve, solve_deterministic, solve_euler, solve_euler_naive, SolutionPath};
pub use volterra::{VolterraPlan, VolterraSum};
