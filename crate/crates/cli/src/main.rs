use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::json;

use volterra_core::bounds::{
    a_priori_bound, problem_constants, truncation_error_bound, verify_lemma41_integer,
};
use volterra_core::harness::{
    reference_solution, render_report, resolve, run_convergence_study, run_reduction_study,
    LoadedProblem, ProblemFile, ReportFormat,
};
use volterra_core::{
    make_grid, picard_solve, solve, GridFunction, Mu, PicardOptions, SolveOptions, Truncation,
};

#[derive(Parser)]
#[command(
    name = "volterra",
    version,
    about = "Solvers and studies for multiple Volterra integral equations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// March a second-kind problem forward on a uniform grid.
    Solve(Common),
    /// Solve by successive approximations.
    Picard {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1e-14)]
        tol: f64,
        #[arg(long, default_value_t = 100_000)]
        max_iter: usize,
        /// Weight in the norm `max e^(-mu t)|x|`: `auto` or a positive number.
        #[arg(long, default_value = "auto")]
        mu: String,
    },
    /// Convergence study over several grids.
    Converge {
        #[command(flatten)]
        common: Common,
        /// Intervals of the fine reference grid when no exact solution is
        /// known; defaults to 8 x the finest study grid.
        #[arg(long)]
        reference: Option<usize>,
    },
    /// Reduce a first-kind problem, solve it, and report residuals.
    Reduce {
        #[command(flatten)]
        common: Common,
        /// Highest order kept in the reduced equation.
        #[arg(long)]
        n_max: Option<usize>,
    },
    /// Check the counting identity over I_n(i) by brute force.
    #[command(name = "verify-lemma41")]
    VerifyLemma41 {
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, default_value_t = 6)]
        i: usize,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: Output,
    },
    /// Aggregate error constants and the a priori bound.
    Bounds(Common),
}

#[derive(Args)]
struct Common {
    /// Problem file path or catalog name.
    #[arg(long)]
    problem: String,
    /// Grid intervals M; studies take a comma-separated list.
    #[arg(long, value_delimiter = ',')]
    steps: Vec<usize>,
    /// Override the horizon T.
    #[arg(long)]
    horizon: Option<f64>,
    /// `N` or `tol=EPS` for infinite families.
    #[arg(long)]
    truncation: Option<Truncation>,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct Output {
    /// Write here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: ReportFormat,
}

impl Output {
    fn write(&self, text: &str) -> Result<()> {
        match &self.output {
            Some(path) => std::fs::write(path, text)
                .with_context(|| format!("cannot write {}", path.display())),
            None => std::io::stdout()
                .write_all(text.as_bytes())
                .context("cannot write to stdout"),
        }
    }
}

struct Loaded {
    file: ProblemFile,
    opts: SolveOptions,
}

impl Common {
    fn load(&self) -> Result<Loaded> {
        let mut file = resolve(&self.problem)?;
        if let Some(t) = self.horizon {
            file = file.with_horizon(t)?;
        }
        let truncation = self.truncation.or(file.truncation).unwrap_or_default();
        Ok(Loaded {
            file,
            opts: SolveOptions {
                truncation,
                ..SolveOptions::default()
            },
        })
    }

    fn single_step(&self) -> Result<usize> {
        match self.steps[..] {
            [] => Ok(100),
            [m] => Ok(m),
            _ => bail!("this command takes a single --steps value"),
        }
    }

    fn step_list(&self, default: &[usize]) -> Vec<usize> {
        if self.steps.is_empty() {
            default.to_vec()
        } else {
            self.steps.clone()
        }
    }
}

fn table(x: &GridFunction) -> String {
    let mut out = String::from("i,t,x\n");
    for (i, (t, v)) in x.grid().nodes().zip(x.values()).enumerate() {
        let _ = writeln!(out, "{i},{t:.11e},{v:.11e}");
    }
    out
}

fn json_text(value: &impl serde::Serialize) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Solve(c) => {
            let Loaded { file, opts } = c.load()?;
            let p = file.second_kind()?;
            let grid = make_grid(p.horizon(), c.single_step()?)?;
            let report = solve(p, &grid, &opts)?;
            log::info!(
                "{}: {} kernel evaluations",
                file.name,
                report.kernel_eval_count
            );
            c.out.write(&match c.out.format {
                ReportFormat::Csv => table(&report.solution),
                ReportFormat::Json => json_text(&report)?,
            })
        }
        Command::Picard {
            common: c,
            tol,
            max_iter,
            mu,
        } => {
            let Loaded { file, opts } = c.load()?;
            let p = file.second_kind()?;
            let grid = make_grid(p.horizon(), c.single_step()?)?;
            let mu = match mu.as_str() {
                "auto" => Mu::Auto,
                v => Mu::Fixed(v.parse().with_context(|| format!("bad --mu `{v}`"))?),
            };
            let report = picard_solve(
                p,
                &grid,
                &PicardOptions {
                    mu,
                    tol,
                    max_iter,
                    solve: opts,
                },
            )?;
            if !report.converged {
                log::warn!(
                    "{}: no convergence after {} iterations (increment {:.3e})",
                    file.name,
                    report.iterations,
                    report.final_increment
                );
            }
            c.out.write(&match c.out.format {
                ReportFormat::Csv => table(&report.solution),
                ReportFormat::Json => json_text(&report)?,
            })
        }
        Command::Converge {
            common: c,
            reference,
        } => {
            let Loaded { file, opts } = c.load()?;
            let steps = c.step_list(&[25, 50, 100, 200]);
            let (coarsest, finest) = (steps[0], *steps.last().expect("nonempty"));
            let fine = reference.unwrap_or(8 * finest);
            let reference = reference_solution(&file, fine, coarsest, &opts)?;
            let report = run_convergence_study(&file, &steps, &reference, &opts)?;
            c.out.write(&render_report(&report, c.out.format)?)
        }
        Command::Reduce { common: c, n_max } => {
            let Loaded { file, opts } = c.load()?;
            let n_max = n_max.unwrap_or(file.first_kind()?.max_order());
            let steps = c.step_list(&[50, 100, 200]);
            let report = run_reduction_study(&file, &steps, n_max, &opts)?;
            c.out.write(&render_report(&report, c.out.format)?)
        }
        Command::VerifyLemma41 {
            n,
            i,
            trials,
            seed,
            out,
        } => {
            let mut rng = StdRng::seed_from_u64(seed);
            let mut rows = Vec::with_capacity(trials);
            let mut mismatches = 0;
            for trial in 0..trials {
                let delta: Vec<i64> = (0..i).map(|_| rng.gen_range(-1000..=1000)).collect();
                let (lhs, rhs) = verify_lemma41_integer(n, i, &delta)?;
                if lhs != rhs {
                    mismatches += 1;
                }
                rows.push((trial, lhs, rhs));
            }
            out.write(&match out.format {
                ReportFormat::Csv => {
                    let mut s = String::from("trial,lhs,rhs\n");
                    for (k, l, r) in &rows {
                        let _ = writeln!(s, "{k},{l},{r}");
                    }
                    s
                }
                ReportFormat::Json => json_text(&json!({
                    "n": n,
                    "i": i,
                    "trials": rows.iter().map(|(k, l, r)| json!({"trial": k, "lhs": l.to_string(), "rhs": r.to_string()})).collect::<Vec<_>>(),
                    "mismatches": mismatches,
                }))?,
            })?;
            if mismatches > 0 {
                bail!("{mismatches} of {trials} trials disagree");
            }
            Ok(())
        }
        Command::Bounds(c) => {
            let Loaded { file, opts } = c.load()?;
            let p = match &file.problem {
                LoadedProblem::SecondKind(p) => p,
                LoadedProblem::FirstKind(_) => bail!("bounds apply to second-kind problems"),
            };
            let m = c.single_step()?;
            let truncated = p.truncate(opts.truncation)?;
            let constants = problem_constants(&truncated.problem)?;
            let h = p.horizon() / m as f64;
            let bound = a_priori_bound(&constants, h, p.horizon());
            let tail = truncated.tail.map(|tail| {
                (
                    tail,
                    truncation_error_bound(tail, constants.d_n, p.horizon()),
                )
            });
            c.out.write(&match c.out.format {
                ReportFormat::Csv => {
                    let mut s = String::from("quantity,value\n");
                    let mut row = |k: &str, v: f64| {
                        let _ = writeln!(s, "{k},{v:.11e}");
                    };
                    row("T", p.horizon());
                    row("M", m as f64);
                    row("h", h);
                    row("N", truncated.order as f64);
                    row("M0", constants.forcing_dt_bound);
                    row("D", constants.d_n);
                    row("E", constants.e_n);
                    row("B", constants.b_n);
                    row("C", constants.c_n);
                    row("F", constants.f_n);
                    row("a_priori_bound", bound);
                    if let Some((c_n, e)) = tail {
                        row("tail", c_n);
                        row("truncation_bound", e);
                    }
                    s
                }
                ReportFormat::Json => json_text(&json!({
                    "problem": file.name,
                    "horizon": p.horizon(),
                    "M": m,
                    "h": h,
                    "truncation_order": truncated.order,
                    "constants": constants,
                    "a_priori_bound": bound,
                    "tail": tail.map(|t| t.0),
                    "truncation_bound": tail.map(|t| t.1),
                }))?,
            })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
