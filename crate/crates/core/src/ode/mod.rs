//! Explicit Runge-Kutta solvers with evaluation accounting.

mod regularized;
mod solve;
mod tableau;

pub use regularized::{
    augmented_rhs, regularized_fixed, solve_with_regularizer, Integrand, RegularizedSolution,
    SolveMode,
};
pub use solve::{
    adaptive_solve, adaptive_solve_rhs, error_norm, fixed_solve, fixed_solve_rhs, rk_step,
    uniform_grid, Solution, SolveConfig, SolveStats, Step, Trajectory, DEFAULT_TOL,
};
pub use tableau::{builtin_tableaus, rooted_trees, ButcherTableau, TableauId, Tree};
