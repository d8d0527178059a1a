//! Convergence studies and first-kind round trips.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::problem_file::{ExactSolution, ProblemFile};
use super::report::{fill_orders, ConvergenceReport, ConvergenceRow, HasRows, ReferenceSource};
use crate::bounds::{a_priori_bound, problem_constants, truncation_error_bound};
use crate::error::{Error, Result};
use crate::grid::{make_grid, Grid, GridFunction};
use crate::marching::{solve_second_kind, SolveOptions};
use crate::problem::SecondKindProblem;
use crate::reduction::{check_expansion_validity, first_kind_residual, reduce};

/// Smallest ratio between the fine reference grid and the coarsest study grid.
pub const MIN_REFERENCE_RATIO: usize = 8;

/// Values the study errors are measured against.
#[derive(Debug, Clone)]
pub enum Reference {
    Exact(ExactSolution),
    FineGrid(GridFunction),
}

impl Reference {
    pub fn source(&self) -> ReferenceSource {
        match self {
            Reference::Exact(e) => ReferenceSource::Exact {
                expression: e.source.clone(),
            },
            Reference::FineGrid(g) => ReferenceSource::FineGrid {
                intervals: g.grid().intervals(),
            },
        }
    }

    /// Reference values on the nodes of `grid`.
    pub fn sample(&self, grid: &Grid) -> Result<GridFunction> {
        match self {
            Reference::Exact(e) => GridFunction::from_fn(*grid, |t| (e.eval)(t)),
            Reference::FineGrid(g) => g.restrict_to(grid),
        }
    }
}

/// The exact solution when the file has one, else a marching solve with
/// `fine_m` intervals. `fine_m` must be at least eight times `coarsest_m`.
pub fn reference_solution(
    pf: &ProblemFile,
    fine_m: usize,
    coarsest_m: usize,
    opts: &SolveOptions,
) -> Result<Reference> {
    if coarsest_m == 0 || fine_m < MIN_REFERENCE_RATIO * coarsest_m {
        return Err(Error::invalid(format!(
            "reference grid M = {fine_m} must be at least {MIN_REFERENCE_RATIO} x the coarsest study grid M = {coarsest_m}"
        )));
    }
    if let Some(exact) = &pf.exact_solution {
        return Ok(Reference::Exact(exact.clone()));
    }
    let p = pf.second_kind()?;
    let truncated = p.truncate(opts.truncation)?;
    let grid = make_grid(p.horizon(), fine_m)?;
    let fine = solve_second_kind(&truncated.problem, &grid, opts)?;
    Ok(Reference::FineGrid(fine.solution))
}

fn check_m_list(m_list: &[usize]) -> Result<()> {
    if m_list.is_empty() {
        return Err(Error::invalid("study needs at least one grid"));
    }
    if m_list[0] == 0 {
        return Err(Error::invalid("grid sizes must be positive"));
    }
    for w in m_list.windows(2) {
        if w[1] <= w[0] || w[1] % w[0] != 0 {
            return Err(Error::invalid(format!(
                "grid sizes must be strictly increasing and each divide the next; got {} then {}",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

/// A priori error bound as a function of `h`, when bound metadata exists.
fn bound_fn(p: &SecondKindProblem, opts: &SolveOptions) -> Result<Option<impl Fn(f64) -> f64>> {
    let truncated = p.truncate(opts.truncation)?;
    let c = match problem_constants(&truncated.problem) {
        Ok(c) => c,
        Err(Error::MissingMetadata(what)) => {
            log::debug!("no a priori bound: missing {what}");
            return Ok(None);
        }
        Err(e) => return Err(e),
    };
    let horizon = p.horizon();
    let tail = truncated
        .tail
        .map(|tail| truncation_error_bound(tail, c.d_n, horizon))
        .unwrap_or(0.0);
    Ok(Some(move |h| a_priori_bound(&c, h, horizon) + tail))
}

/// Solves on every grid of `m_list` and measures the max-node error against
/// `reference`. Rows come out in order of decreasing `h`.
pub fn run_convergence_study(
    pf: &ProblemFile,
    m_list: &[usize],
    reference: &Reference,
    opts: &SolveOptions,
) -> Result<ConvergenceReport> {
    check_m_list(m_list)?;
    let p = pf.second_kind()?;
    if let Reference::FineGrid(g) = reference {
        let coarsest = make_grid(p.horizon(), m_list[0])?;
        if coarsest.refinement_factor(g.grid()).is_none() {
            return Err(Error::invalid(format!(
                "reference grid M = {} is not aligned with study grid M = {}",
                g.grid().intervals(),
                m_list[0]
            )));
        }
    }
    let truncated = p.truncate(opts.truncation)?;
    let bound = bound_fn(p, opts)?;
    let errors = m_list
        .par_iter()
        .map(|&m| {
            let grid = make_grid(p.horizon(), m)?;
            let x = solve_second_kind(&truncated.problem, &grid, opts)?.solution;
            x.max_abs_diff(&reference.sample(&grid)?)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut report = ConvergenceReport::new(pf.name.clone(), reference.source());
    report.rows = m_list
        .iter()
        .zip(errors)
        .map(|(&m, error)| {
            let h = p.horizon() / m as f64;
            ConvergenceRow {
                m,
                h,
                error,
                order: None,
                bound: bound.as_ref().map(|b| b(h)),
            }
        })
        .collect();
    fill_orders(&mut report.rows);
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeMargin {
    pub t: f64,
    pub margin: f64,
}

/// Outcome of reducing a first-kind problem and solving the result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    pub schema_version: u32,
    pub problem: String,
    pub n_max: usize,
    /// Errors against the exact solution, when the file supplies one.
    pub solution: Option<ConvergenceReport>,
    /// Max-node first-kind residuals of the recovered solutions.
    pub residual: ConvergenceReport,
    /// Expansion validity margins on the finest grid.
    pub margins: Vec<NodeMargin>,
    /// Set when some margin is not positive.
    pub formal: bool,
}

/// CSV output carries the solution errors when known, else the residuals.
impl HasRows for ReductionReport {
    fn rows(&self) -> &[ConvergenceRow] {
        match &self.solution {
            Some(s) => &s.rows,
            None => &self.residual.rows,
        }
    }
}

/// Reduces to second kind with orders up to `n_max`, solves on every grid,
/// and reports residuals, solution errors and validity margins.
pub fn run_reduction_study(
    pf: &ProblemFile,
    m_list: &[usize],
    n_max: usize,
    opts: &SolveOptions,
) -> Result<ReductionReport> {
    check_m_list(m_list)?;
    let p = pf.first_kind()?;
    let reduced = reduce(p, n_max)?;
    let solutions = m_list
        .par_iter()
        .map(|&m| {
            let grid = make_grid(p.horizon(), m)?;
            let x = solve_second_kind(&reduced, &grid, opts)?.solution;
            let residual = first_kind_residual(p, &x)?.max_abs();
            Ok((x, residual))
        })
        .collect::<Result<Vec<_>>>()?;

    let row = |m: usize, error: f64| ConvergenceRow {
        m,
        h: p.horizon() / m as f64,
        error,
        order: None,
        bound: None,
    };
    let mut residual = ConvergenceReport::new(pf.name.clone(), ReferenceSource::Residual);
    residual.rows = m_list
        .iter()
        .zip(&solutions)
        .map(|(&m, (_, r))| row(m, *r))
        .collect();
    fill_orders(&mut residual.rows);

    let solution = match &pf.exact_solution {
        None => None,
        Some(exact) => {
            let reference = Reference::Exact(exact.clone());
            let mut report = ConvergenceReport::new(pf.name.clone(), reference.source());
            report.rows = m_list
                .iter()
                .zip(&solutions)
                .map(|(&m, (x, _))| Ok(row(m, x.max_abs_diff(&reference.sample(x.grid())?)?)))
                .collect::<Result<Vec<_>>>()?;
            fill_orders(&mut report.rows);
            Some(report)
        }
    };

    let (finest, _) = solutions.last().expect("m_list is nonempty");
    let margins: Vec<NodeMargin> = check_expansion_validity(p, finest, n_max)?
        .into_iter()
        .zip(finest.grid().nodes())
        .map(|(margin, t)| NodeMargin { t, margin })
        .collect();
    let formal = margins.iter().any(|m| !(m.margin > 0.0));
    if formal {
        let worst = margins
            .iter()
            .map(|m| m.margin)
            .fold(f64::INFINITY, f64::min);
        log::warn!(
            "{}: expansion validity margin drops to {worst:.3e}; the reduced equation is only formal there",
            pf.name
        );
    }
    Ok(ReductionReport {
        schema_version: super::report::REPORT_SCHEMA_VERSION,
        problem: pf.name.clone(),
        n_max,
        solution,
        residual,
        margins,
        formal,
    })
}
