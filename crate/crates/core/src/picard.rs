//! Successive approximations `x^(k) = S x^(k-1)` for the discretized
//! integral operator, with convergence measured in the weighted norm
//! `max_i e^(-mu t_i) |x_i|`.
//!
//! The discrete operator uses the same left-rectangle sums as the marching
//! scheme, so its fixed point is the marching solution. Iterate `k` is exact
//! on nodes `0..=k`, which bounds the iteration count by `M + 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::marching::{check_grid, Scheme, SolveOptions};
use crate::problem::SecondKindProblem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Mu {
    /// `mu = 2 M^(N)` from the Lipschitz bounds, or `1` without them.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardOptions {
    pub mu: Mu,
    /// Stop once the weighted increment is at most `tol`.
    pub tol: f64,
    pub max_iter: usize,
    pub solve: SolveOptions,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self {
            mu: Mu::Auto,
            tol: 1e-14,
            max_iter: 100_000,
            solve: SolveOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardReport {
    pub solution: GridFunction,
    pub iterations: usize,
    pub final_increment: f64,
    pub mu: f64,
    /// Contraction factor, when the kernels carry Lipschitz bounds.
    pub q: Option<f64>,
    pub converged: bool,
    /// Weighted increment after each iteration.
    pub increments: Vec<f64>,
    pub truncation_used: usize,
}

/// `max_i e^(-mu t_i) |x_i|`.
pub fn weighted_norm(x: &GridFunction, mu: f64) -> f64 {
    x.grid()
        .nodes()
        .zip(x.values())
        .fold(0.0_f64, |m, (t, v)| m.max((-mu * t).exp() * v.abs()))
}

/// `(1 - e^(-mu T)) M / mu`.
pub fn contraction_factor(lipschitz_sum: f64, mu: f64, horizon: f64) -> f64 {
    (1.0 - (-mu * horizon).exp()) * lipschitz_sum / mu
}

/// `M^(N) = sum L_n T^(n-1)/(n-1)!`.
pub fn lipschitz_sum(problem: &SecondKindProblem) -> Result<f64> {
    let t = problem.horizon();
    let mut w = 1.0;
    let mut m = 0.0;
    for (idx, b) in problem.kernel_bounds()?.iter().enumerate() {
        if idx > 0 {
            w *= t / idx as f64;
        }
        m += b.lipschitz * w;
    }
    Ok(m)
}

/// `mu = 2 M^(N)` (or `1` when `M^(N) = 0`) and the resulting contraction
/// factor `q <= 1/2`.
pub fn select_mu(problem: &SecondKindProblem) -> Result<(f64, f64)> {
    let m = lipschitz_sum(problem)?;
    let mu = if m == 0.0 { 1.0 } else { 2.0 * m };
    Ok((mu, contraction_factor(m, mu, problem.horizon())))
}

/// One application of the discrete operator to the whole grid function.
pub fn apply_operator(
    problem: &SecondKindProblem,
    grid: &Grid,
    x: &GridFunction,
) -> Result<GridFunction> {
    apply_with(problem, grid, x, &SolveOptions::default())
}

fn apply_with(
    problem: &SecondKindProblem,
    grid: &Grid,
    x: &GridFunction,
    opts: &SolveOptions,
) -> Result<GridFunction> {
    check_grid(problem, grid)?;
    if x.grid() != grid {
        return Err(Error::invalid("iterate lives on a different grid"));
    }
    let scheme = Scheme::new(problem.kernels()?, *grid, opts)?;
    let values = grid
        .nodes()
        .enumerate()
        .map(|(i, t)| scheme.node_value(problem.forcing(t)?, i, x.values()))
        .collect::<Result<Vec<_>>>()?;
    GridFunction::new(*grid, values)
}

/// Iterates from `x^(0) = x0` sampled on the grid. Infinite families are
/// truncated first per `opts.solve.truncation`.
pub fn picard_solve(
    problem: &SecondKindProblem,
    grid: &Grid,
    opts: &PicardOptions,
) -> Result<PicardReport> {
    if !(opts.tol > 0.0) {
        return Err(Error::invalid("tol must be positive"));
    }
    if opts.max_iter == 0 {
        return Err(Error::invalid("max_iter must be at least 1"));
    }
    check_grid(problem, grid)?;
    let truncated = problem.truncate(opts.solve.truncation)?;
    let problem = &truncated.problem;

    let (mu, q) = match opts.mu {
        Mu::Fixed(mu) if !(mu > 0.0) => return Err(Error::invalid("mu must be positive")),
        Mu::Fixed(mu) => match lipschitz_sum(problem) {
            Ok(m) => (mu, Some(contraction_factor(m, mu, problem.horizon()))),
            Err(Error::MissingMetadata(_)) => (mu, None),
            Err(e) => return Err(e),
        },
        Mu::Auto => match select_mu(problem) {
            Ok((mu, q)) => (mu, Some(q)),
            Err(Error::MissingMetadata(_)) => (1.0, None),
            Err(e) => return Err(e),
        },
    };

    let mut x = GridFunction::from_fn(*grid, |t| problem.forcing(t))?;
    let mut increments = Vec::new();
    let mut converged = false;
    for _ in 0..opts.max_iter {
        let next = apply_with(problem, grid, &x, &opts.solve)?;
        let diff: Vec<f64> = next
            .values()
            .iter()
            .zip(x.values())
            .map(|(a, b)| a - b)
            .collect();
        let inc = weighted_norm(&GridFunction::new(*grid, diff)?, mu);
        increments.push(inc);
        x = next;
        if inc <= opts.tol {
            converged = true;
            break;
        }
    }
    Ok(PicardReport {
        iterations: increments.len(),
        final_increment: *increments.last().unwrap_or(&0.0),
        solution: x,
        mu,
        q,
        converged,
        increments,
        truncation_used: truncated.order,
    })
}
