//! Explicit left-rectangle marching scheme
//!
//! `x_i = x0(t_i) + sum_n (h^n / n!) sum_{(j) in I_n(i)} f_n(t_i; t_j..; x_j..)`
//!
//! with `I_n(i) = {0..i-1}^n`. Every node depends only on earlier nodes, so
//! the march is a single forward pass.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::kernel::Kernel;
use crate::problem::{KernelFamily, SecondKindProblem, Truncation};

/// Below this many outer indices the parallel paths run sequentially.
const PAR_THRESHOLD: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Highest order summed by brute-force enumeration.
    pub generic_order_cap: usize,
    /// Truncation rule for infinite families.
    pub truncation: Truncation,
    pub parallel_inner_sums: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            generic_order_cap: 4,
            truncation: Truncation::default(),
            parallel_inner_sums: false,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if self.generic_order_cap == 0 {
            return Err(Error::invalid("generic_order_cap must be at least 1"));
        }
        match self.truncation {
            Truncation::Tolerance(eps) if !(eps > 0.0) => {
                Err(Error::invalid("truncation tolerance must be positive"))
            }
            Truncation::Fixed(0) => Err(Error::invalid("truncation order must be at least 1")),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SumPath {
    Separable,
    Generic,
}

/// Work done for one kernel order over the whole march.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderWork {
    pub order: usize,
    pub path: SumPath,
    pub evaluations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub solution: GridFunction,
    pub truncation_used: usize,
    /// Tail estimate `c_N` when an infinite family was truncated.
    pub tail_estimate: Option<f64>,
    pub kernel_eval_count: u64,
    pub per_order: Vec<OrderWork>,
}

/// `|I_n(i)| = i^n`, saturating.
pub fn index_set_size(n: usize, i: usize) -> u128 {
    (i as u128).saturating_pow(n as u32)
}

fn check_state(grid: &Grid, i: usize, state: &[f64]) -> Result<()> {
    if i > grid.intervals() {
        return Err(Error::invalid(format!(
            "node {i} beyond grid with M = {}",
            grid.intervals()
        )));
    }
    if state.len() < i {
        return Err(Error::invalid(format!(
            "state holds {} values, node {i} needs {i}",
            state.len()
        )));
    }
    Ok(())
}

/// Sum over `I_n(i)` for a fixed first index `j1`, odometer order on the rest.
fn generic_partial(
    k: &Kernel,
    grid: &Grid,
    t: f64,
    i: usize,
    j1: usize,
    state: &[f64],
) -> Result<f64> {
    let n = k.order();
    let mut idx = vec![0usize; n];
    idx[0] = j1;
    let mut s: Vec<f64> = idx.iter().map(|&j| grid.node(j)).collect();
    let mut x: Vec<f64> = idx.iter().map(|&j| state[j]).collect();
    let mut sum = 0.0;
    loop {
        sum += k.eval_unchecked(t, &s, &x)?;
        let mut pos = n;
        loop {
            if pos == 1 {
                return Ok(sum);
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < i {
                s[pos] = grid.node(idx[pos]);
                x[pos] = state[idx[pos]];
                break;
            }
            idx[pos] = 0;
            s[pos] = grid.node(0);
            x[pos] = state[0];
        }
    }
}

fn generic_sum(k: &Kernel, grid: &Grid, i: usize, state: &[f64], parallel: bool) -> Result<f64> {
    if i == 0 {
        return Ok(0.0);
    }
    let t = grid.node(i);
    if parallel && i >= PAR_THRESHOLD {
        let partials = (0..i)
            .into_par_iter()
            .map(|j1| generic_partial(k, grid, t, i, j1, state))
            .collect::<Result<Vec<f64>>>()?;
        Ok(partials.into_iter().sum())
    } else {
        let mut sum = 0.0;
        for j1 in 0..i {
            sum += generic_partial(k, grid, t, i, j1, state)?;
        }
        Ok(sum)
    }
}

fn separable_sum(k: &Kernel, grid: &Grid, i: usize, state: &[f64], parallel: bool) -> Result<f64> {
    let form = k.separable().ok_or_else(|| {
        Error::invalid(format!(
            "kernel of order {} has no separable form",
            k.order()
        ))
    })?;
    if i == 0 {
        return Ok(0.0);
    }
    let t = grid.node(i);
    let inner = if parallel && i >= PAR_THRESHOLD {
        let parts = (0..i)
            .into_par_iter()
            .map(|j| form.factor(t, grid.node(j), state[j]))
            .collect::<Result<Vec<f64>>>()?;
        parts.into_iter().sum::<f64>()
    } else {
        let mut acc = 0.0;
        for (j, &xj) in state[..i].iter().enumerate() {
            acc += form.factor(t, grid.node(j), xj)?;
        }
        acc
    };
    Ok(form.prefactor(t)? * inner.powi(k.order() as i32))
}

/// `sum_{(j) in I_n(i)} f_n(t_i; t_j..; x_j..)` by enumerating all `i^n`
/// tuples in odometer order.
pub fn inner_sum_generic(
    k: &Kernel,
    grid: &Grid,
    i: usize,
    state: &[f64],
    order_cap: usize,
) -> Result<f64> {
    check_state(grid, i, state)?;
    if k.order() > order_cap {
        return Err(Error::Capacity {
            what: format!("generic enumeration of order {}", k.order()),
            limit: order_cap,
        });
    }
    generic_sum(k, grid, i, state, false)
}

/// `a(t_i) (sum_{j<i} phi(t_i, t_j, x_j))^n`, the collapsed form of the
/// inner sum for a separable kernel.
pub fn inner_sum_separable(k: &Kernel, grid: &Grid, i: usize, state: &[f64]) -> Result<f64> {
    check_state(grid, i, state)?;
    separable_sum(k, grid, i, state, false)
}

/// Kernels prepared for repeated node evaluation.
pub(crate) struct Scheme<'a> {
    kernels: &'a [Kernel],
    grid: Grid,
    weights: Vec<f64>,
    paths: Vec<SumPath>,
    parallel: bool,
}

impl<'a> Scheme<'a> {
    pub(crate) fn new(kernels: &'a [Kernel], grid: Grid, opts: &SolveOptions) -> Result<Self> {
        opts.validate()?;
        let h = grid.step();
        let mut w = 1.0;
        let mut weights = Vec::with_capacity(kernels.len());
        let mut paths = Vec::with_capacity(kernels.len());
        for (idx, k) in kernels.iter().enumerate() {
            w *= h / (idx + 1) as f64;
            weights.push(w);
            let path = if k.separable().is_some() {
                SumPath::Separable
            } else if k.order() <= opts.generic_order_cap {
                SumPath::Generic
            } else {
                return Err(Error::Capacity {
                    what: format!("generic enumeration of order {}", k.order()),
                    limit: opts.generic_order_cap,
                });
            };
            paths.push(path);
        }
        Ok(Self {
            kernels,
            grid,
            weights,
            paths,
            parallel: opts.parallel_inner_sums,
        })
    }

    /// Right-hand side of the scheme at node `i`, reading `state[..i]`.
    pub(crate) fn node_value(&self, forcing: f64, i: usize, state: &[f64]) -> Result<f64> {
        let mut value = forcing;
        for ((k, &w), &path) in self.kernels.iter().zip(&self.weights).zip(&self.paths) {
            let s = match path {
                SumPath::Separable => separable_sum(k, &self.grid, i, state, self.parallel)?,
                SumPath::Generic => generic_sum(k, &self.grid, i, state, self.parallel)?,
            };
            value += w * s;
        }
        if !value.is_finite() {
            return Err(Error::NumericBlowup { node: i });
        }
        Ok(value)
    }

    fn work(&self) -> Vec<OrderWork> {
        let m = self.grid.intervals();
        self.kernels
            .iter()
            .zip(&self.paths)
            .map(|(k, &path)| {
                let evaluations = (1..=m)
                    .map(|i| match path {
                        SumPath::Separable => i as u64 + 1,
                        SumPath::Generic => {
                            index_set_size(k.order(), i).min(u64::MAX as u128) as u64
                        }
                    })
                    .fold(0u64, u64::saturating_add);
                OrderWork {
                    order: k.order(),
                    path,
                    evaluations,
                }
            })
            .collect()
    }
}

pub(crate) fn check_grid(problem: &SecondKindProblem, grid: &Grid) -> Result<()> {
    let (a, b) = (problem.horizon(), grid.horizon());
    if (a - b).abs() > 1e-12 * a.abs().max(b.abs()) {
        return Err(Error::invalid(format!(
            "grid horizon {b} differs from problem horizon {a}"
        )));
    }
    Ok(())
}

/// Marches the scheme over a finite kernel family.
pub fn solve_second_kind(
    problem: &SecondKindProblem,
    grid: &Grid,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    check_grid(problem, grid)?;
    let kernels = problem.kernels()?;
    let scheme = Scheme::new(kernels, *grid, opts)?;
    let mut values = Vec::with_capacity(grid.len());
    for (i, t) in grid.nodes().enumerate() {
        let forcing = problem.forcing(t)?;
        let v = scheme.node_value(forcing, i, &values)?;
        values.push(v);
    }
    let per_order = scheme.work();
    Ok(SolveReport {
        solution: GridFunction::new(*grid, values)?,
        truncation_used: kernels.len(),
        tail_estimate: None,
        kernel_eval_count: per_order
            .iter()
            .map(|w| w.evaluations)
            .fold(0, u64::saturating_add),
        per_order,
    })
}

/// Truncates an infinite family per `opts.truncation`, then marches.
pub fn solve_truncated_infinite(
    problem: &SecondKindProblem,
    grid: &Grid,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    if !matches!(problem.family(), KernelFamily::Infinite(_)) {
        return Err(Error::invalid(
            "solve_truncated_infinite needs an infinite kernel family",
        ));
    }
    opts.validate()?;
    check_grid(problem, grid)?;
    let truncated = problem.truncate(opts.truncation)?;
    let mut report = solve_second_kind(&truncated.problem, grid, opts)?;
    report.truncation_used = truncated.order;
    report.tail_estimate = truncated.tail;
    Ok(report)
}

/// Dispatches on the kernel family.
pub fn solve(problem: &SecondKindProblem, grid: &Grid, opts: &SolveOptions) -> Result<SolveReport> {
    match problem.family() {
        KernelFamily::Finite(_) => solve_second_kind(problem, grid, opts),
        KernelFamily::Infinite(_) => solve_truncated_infinite(problem, grid, opts),
    }
}
