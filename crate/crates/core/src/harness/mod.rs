//! Problem files, the built-in catalog, convergence studies and reports.

pub mod catalog;
pub mod problem_file;
pub mod report;
pub mod study;

pub use catalog::{catalog_names, catalog_source, load_catalog, resolve};
pub use problem_file::{load_problem, parse_problem, ExactSolution, LoadedProblem, ProblemFile};
pub use report::{
    emit_report, fill_orders, observed_order, parse_csv, render_report, to_csv, ConvergenceReport,
    ConvergenceRow, HasRows, ReferenceSource, ReportFormat, CSV_HEADER, REPORT_SCHEMA_VERSION,
};
pub use study::{
    reference_solution, run_convergence_study, run_reduction_study, NodeMargin, ReductionReport,
    Reference, MIN_REFERENCE_RATIO,
};
