//! Most-likely nonnegative matrices and tensors given row, column, total and
//! element information.
//!
//! The most likely matrix is the one with the most realizations
//! `(sum X)! / prod x_ij!`, which in the continuum limit maximizes entropy.
//! For the constraint patterns listed in [`SolverCase`] it has a closed form
//! (up to one scalar root in the symmetric cases); [`solve`] picks the case
//! and returns it. The [`oracle`] module holds slow reference solvers.

mod constraints;
mod counting;
mod error;
mod matrix;
pub mod oracle;
mod rect;
mod solution;
mod solve;
mod sym;
mod vector;

pub use constraints::{
    classify, consistency_check_blocks, validate_spec, Axis, Bound, ConsistencyReport, ElementBound, FixedBlock,
    MarginalConstraint, ProblemSpec, Shape, SolverCase, SumKind, TotalConstraint, ValidatedProblem,
    FEASIBILITY_RTOL,
};
pub use counting::{
    binomial, count_feasible_row_bounded, exact_realizations, exact_realizations_of, likelihood_ratio,
    log10_likelihood_ratio, log10_realizations, log10_realizations_of, row_composition_count, ExactCount, LogCount,
};
pub use error::{Error, Result};
pub use matrix::Matrix;
pub use rect::{
    solve_bounded_total_row_bounds, solve_gravity_partial_cols, solve_row_bounds, solve_row_bounds_elem_bounds,
    solve_row_col_bounds, solve_total_row_bounds,
};
pub use solution::{Multipliers, RootDiagnostics, Solution, TensorSolution};
pub use solve::{root_problems, solve, Solved};
pub use sym::{
    series_approx_xi, solve_root_lambda, solve_sym_3d_fixed_diagonal, solve_sym_block_diagonal,
    solve_sym_fixed_diagonal, solve_sym_fixed_diagonal_upper, solve_sym_total_row_col_bounds, RootProblem,
    RootSolution, SeriesState, DEFAULT_TOL,
};
pub use vector::{find_k_vector, waterfill_bounded_sum, waterfill_equal_sum, BoundedVectorProblem, WaterfillResult};
