//! Self-contained numerical kernel: matrix inversion, a 2-D Newton solver,
//! the standard normal distribution and reproducible normal variates.

pub mod matrix;
pub mod normal;
pub mod rng;
pub mod solver;

pub use matrix::{invert, Matrix, DEFAULT_CONDITION_GUARD};
pub use normal::{std_normal_cdf, std_normal_pdf, std_normal_quantile, std_normal_sf, two_sided_z};
pub use rng::{draw_normal, mix64, NormalStream};
pub use solver::{
    solve_newton_2d, FailureKind, FnSystem, NewtonFailure, NewtonSolution, NonlinearSystem2,
    SolverConfig,
};
