//! Numerical solvers for multiple Volterra integral equations of the second
//! kind, the reduction of first-kind equations to second kind, a priori
//! error bounds, and a small expression language for problem files.

// NaN must fail the range checks, so they are written as `!(x > 0.0)`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod dsl;
pub mod error;
pub mod grid;
pub mod harness;
pub mod kernel;
pub mod marching;
pub mod picard;
pub mod problem;
pub mod reduction;

pub use bounds::{a_priori_bound, problem_constants, scheme_constants, tail_bound, ErrorConstants};
pub use error::{Error, Result};
pub use grid::{make_grid, Grid, GridFunction};
pub use kernel::{eval_kernel, FactorFn, Kernel, KernelBounds, KernelFn, ScalarFn, SeparableForm};
pub use marching::{solve, solve_second_kind, solve_truncated_infinite, SolveOptions, SolveReport};
pub use picard::{picard_solve, Mu, PicardOptions, PicardReport};
pub use problem::{
    build_feedback_problem, FirstKindProblem, InfiniteFamily, KernelFamily, MultilinearKernel,
    ProductForm, SecondKindProblem, SeriesKernel, Truncation,
};
pub use reduction::{first_kind_residual, reduce, ReducedKernel};
