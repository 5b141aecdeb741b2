//! Group lasso and sparse group lasso by exact block coordinate descent.
//!
//! Each block update solves a one-dimensional secular equation in the
//! rotated basis of the block Gram matrix (`sls`); the sparse variant
//! enumerates sign patterns over cached sub-Gram spectra (`ssls`).
//! `diagnostics` provides optimality certificates and a-posteriori error
//! bounds, `oracle` independent reference solvers, and `simgen` simulated
//! benchmark problems.

// `!(x > 0.0)` guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod linesearch;
pub mod model;
pub mod oracle;
pub mod simgen;
pub mod sls;
pub mod spectral;
pub mod ssls;

pub use diagnostics::{
    accuracy_bounds, certificate, certificate_tolerance, AccuracyBounds, LsQuantities,
    OptimalityCertificate,
};
pub use error::{Error, Result};
pub use model::{
    objective, partial_residual, Coefficients, GroupedProblem, PartialResidual, Penalty,
};
pub use sls::{lambda_max, solve, Solution, SolveOptions, SolveTrace};
pub use spectral::SpectralCache;
pub use ssls::solve_sgl;

/// Solve with the exact block solver matching the penalty: `sls` for the
/// group lasso, `ssls` for the sparse group lasso.
pub fn fit(
    problem: &GroupedProblem,
    penalty: &Penalty,
    options: &SolveOptions,
) -> Result<Solution> {
    match penalty {
        Penalty::GroupLasso { .. } => sls::solve(problem, penalty, options),
        Penalty::SparseGroupLasso { .. } => ssls::solve_sgl(problem, penalty, options),
    }
}
