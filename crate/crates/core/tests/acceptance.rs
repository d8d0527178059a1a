//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use volterra_core::bounds::{
    discrete_gronwall, problem_constants, truncation_error_bound, verify_lemma41_integer,
};
use volterra_core::dsl::{self, bind_kernel, eval_expr, Env};
use volterra_core::harness::{
    catalog_names, load_catalog, reference_solution, run_convergence_study, run_reduction_study,
    LoadedProblem,
};
use volterra_core::kernel::{constant_fn, scalar_fn};
use volterra_core::marching::{inner_sum_generic, inner_sum_separable};
use volterra_core::reduction::{inverse_series_kernel_m, ordered_compositions, reduced_kernel_l};
use volterra_core::{
    make_grid, picard_solve, solve_second_kind, FirstKindProblem, InfiniteFamily, Kernel,
    MultilinearKernel, PicardOptions, SolveOptions, Truncation,
};

type Check = Result<(bool, String), volterra_core::Error>;
type Criterion = (&'static str, fn() -> Check);

const EXP_GROWTH_STEPS: [usize; 4] = [25, 50, 100, 200];
const QUADRATIC_STEPS: [usize; 5] = [25, 50, 100, 200, 400];
const QUADRATIC_REFERENCE: usize = 3200;

fn within(v: f64, lo: f64, hi: f64) -> bool {
    v >= lo && v <= hi
}

fn fmt_list(v: impl IntoIterator<Item = f64>) -> String {
    v.into_iter()
        .map(|x| format!("{x:.4}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn c1_first_order() -> Check {
    let start = Instant::now();
    let pf = load_catalog("exp_growth")?;
    let opts = SolveOptions::default();
    let reference = reference_solution(&pf, 8 * EXP_GROWTH_STEPS[0], EXP_GROWTH_STEPS[0], &opts)?;
    let r = run_convergence_study(&pf, &EXP_GROWTH_STEPS, &reference, &opts)?;
    let elapsed = start.elapsed();
    let orders: Vec<f64> = r.orders().collect();
    let last = r.rows.last().map(|row| row.error).unwrap_or(f64::NAN);
    let ok = orders.len() == 3
        && orders.iter().all(|&p| within(p, 0.9, 1.1))
        && last <= 0.01
        && elapsed < Duration::from_secs(1);
    Ok((
        ok,
        format!(
            "orders [{}], e(M=200) = {last:.3e}, {:.3} s",
            fmt_list(orders),
            elapsed.as_secs_f64()
        ),
    ))
}

fn c2_quadratic() -> Check {
    let start = Instant::now();
    let pf = load_catalog("quadratic")?;
    let opts = SolveOptions::default();
    let reference = reference_solution(&pf, QUADRATIC_REFERENCE, QUADRATIC_STEPS[0], &opts)?;
    let r = run_convergence_study(&pf, &QUADRATIC_STEPS, &reference, &opts)?;
    let elapsed = start.elapsed();
    let orders: Vec<f64> = r.orders().collect();
    let ok = orders.len() == QUADRATIC_STEPS.len() - 1
        && orders.iter().all(|&p| within(p, 0.8, 1.2))
        && elapsed < Duration::from_secs(5);
    Ok((
        ok,
        format!(
            "orders [{}], {:.3} s",
            fmt_list(orders),
            elapsed.as_secs_f64()
        ),
    ))
}

fn c3_picard_matches_marching() -> Check {
    let m = 100;
    let mut ok = true;
    let mut notes = Vec::new();
    for name in catalog_names() {
        let pf = load_catalog(name)?;
        let LoadedProblem::SecondKind(p) = &pf.problem else {
            continue;
        };
        let solve = SolveOptions {
            truncation: pf.truncation.unwrap_or_default(),
            ..SolveOptions::default()
        };
        let grid = make_grid(p.horizon(), m)?;
        let truncated = p.truncate(solve.truncation)?;
        let marching = solve_second_kind(&truncated.problem, &grid, &solve)?.solution;
        let picard = picard_solve(
            p,
            &grid,
            &PicardOptions {
                solve,
                ..PicardOptions::default()
            },
        )?;
        let diff = picard.solution.max_abs_diff(&marching)?;
        let tol = 1e-12 * (1.0 + marching.max_abs());
        let this = picard.converged && diff <= tol && picard.iterations <= m + 1;
        ok &= this;
        notes.push(format!("{name}: {diff:.1e} in {} it", picard.iterations));
    }
    Ok((ok, notes.join("; ")))
}

fn c4_lemma41() -> Check {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(41);
    let mut cases = 0;
    let mut ok = true;
    for n in 1..=3 {
        for i in 1..=6 {
            for _ in 0..20 {
                let delta: Vec<i64> = (0..i)
                    .map(|_| rng.gen_range(-1_000_000..=1_000_000))
                    .collect();
                let (lhs, rhs) = verify_lemma41_integer(n, i, &delta)?;
                ok &= lhs == rhs;
                cases += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(1);
    Ok((
        ok,
        format!(
            "{cases} exact integer cases, {:.3} s",
            elapsed.as_secs_f64()
        ),
    ))
}

fn c5_gronwall() -> Check {
    let mut rng = StdRng::seed_from_u64(42);
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for _ in 0..100 {
        let a: f64 = rng.gen_range(0.0..10.0);
        let b: f64 = rng.gen_range(0.0..0.5);
        let bound = discrete_gronwall(a, b, 100)?;
        let mut y = vec![0.0_f64];
        let mut sum = 0.0;
        for i in 1..=100 {
            sum += y[i - 1];
            y.push(a + b * sum);
            // equality holds in exact arithmetic; allow rounding only
            let slack = 1e-12 * bound[i];
            ok &= y[i] <= bound[i] + slack;
            if bound[i] > 0.0 {
                worst = worst.max(y[i] / bound[i]);
            }
        }
    }
    Ok((ok, format!("max y_i / bound_i = {worst:.15}")))
}

fn c6_a_priori_bound() -> Check {
    let opts = SolveOptions::default();
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, steps, fine) in [
        ("exp_growth", &EXP_GROWTH_STEPS[..], 8 * EXP_GROWTH_STEPS[0]),
        ("quadratic", &QUADRATIC_STEPS[..], QUADRATIC_REFERENCE),
    ] {
        let pf = load_catalog(name)?;
        let c = problem_constants(pf.second_kind()?)?;
        let reference = reference_solution(&pf, fine, steps[0], &opts)?;
        let r = run_convergence_study(&pf, steps, &reference, &opts)?;
        let mut worst: f64 = 0.0;
        for row in &r.rows {
            let Some(bound) = row.bound else {
                ok = false;
                continue;
            };
            ok &= bound >= row.error;
            worst = worst.max(row.error / bound);
        }
        notes.push(format!(
            "{name}: F = {:.4}, max error/bound = {worst:.3}",
            c.f_n
        ));
    }
    Ok((ok, notes.join("; ")))
}

fn c7_truncation() -> Check {
    let pf = load_catalog("factorial_infinite")?;
    let p = pf.second_kind()?;
    let grid = make_grid(p.horizon(), 100)?;
    let mut ok = true;
    let mut ratios = Vec::new();
    for n in 2..=6 {
        let lo = p.truncate(Truncation::Fixed(n))?;
        let hi = p.truncate(Truncation::Fixed(n + 1))?;
        let opts = SolveOptions::default();
        let x_lo = solve_second_kind(&lo.problem, &grid, &opts)?.solution;
        let x_hi = solve_second_kind(&hi.problem, &grid, &opts)?.solution;
        let diff = x_hi.max_abs_diff(&x_lo)?;
        let d_n = problem_constants(&lo.problem)?.d_n;
        let bound = truncation_error_bound(lo.tail.unwrap_or(f64::NAN), d_n, p.horizon());
        ok &= diff <= bound;
        ratios.push(diff / bound);
    }
    let unit = InfiniteFamily::new(Kernel::zero, |_| 1.0);
    let (selected, tail) = unit.select_order(1.0, 1e-6)?;
    ok &= selected == 9;
    Ok((
        ok,
        format!(
            "diff/bound for N = 2..6: [{}]; C_n = 1 selects N = {selected} (c_N = {tail:.4e})",
            fmt_list(ratios)
        ),
    ))
}

fn c8_first_kind_round_trip() -> Check {
    let pf = load_catalog("bilinear_first_kind")?;
    let n_max = pf.first_kind()?.max_order();
    let r = run_reduction_study(&pf, &[50, 100, 200], n_max, &SolveOptions::default())?;
    let sol = r
        .solution
        .as_ref()
        .ok_or_else(|| volterra_core::Error::MissingMetadata("exact solution".into()))?;
    let errors_ok = sol.rows.iter().all(|row| row.error <= 5.0 * row.h);
    let residual_orders: Vec<f64> = r.residual.orders().collect();
    let residual_ok =
        residual_orders.len() == 2 && residual_orders.iter().all(|&p| within(p, 0.8, 1.2));
    Ok((
        errors_ok && residual_ok,
        format!(
            "error/h = [{}] ({}); residual = [{}], residual orders [{}] ({})",
            fmt_list(sol.rows.iter().map(|row| row.error / row.h)),
            if errors_ok { "ok" } else { "exceeds 5h" },
            r.residual
                .rows
                .iter()
                .map(|row| format!("{:.3e}", row.error))
                .collect::<Vec<_>>()
                .join(", "),
            fmt_list(residual_orders.iter().copied()),
            if residual_ok {
                "ok"
            } else {
                "outside [0.8, 1.2]"
            },
        ),
    ))
}

fn c9_series_inversion() -> Check {
    // K_1 = 1 and K_{n+1} = c^n, so L_n = c^n and G = e^(c z) with z = int x.
    let c: f64 = 0.5;
    let n_max = 12;
    let mut kernels = vec![MultilinearKernel::from_fns(1, |_, _| 1.0, |_, _| 0.0)?];
    for n in 1..=n_max {
        let v = c.powi(n as i32);
        kernels.push(MultilinearKernel::from_fns(
            n + 1,
            move |_, _| v,
            |_, _| 0.0,
        )?);
    }
    let p = FirstKindProblem::new(kernels, scalar_fn(|t| t), constant_fn(1.0), 1.0)?;
    let l: Vec<_> = (1..=n_max)
        .map(|n| reduced_kernel_l(&p, n))
        .collect::<Result<_, _>>()?;
    let m: Vec<_> = (1..=n_max)
        .map(|n| inverse_series_kernel_m(&p, n))
        .collect::<Result<_, _>>()?;
    let mut rng = StdRng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let t: f64 = rng.gen_range(0.0..=1.0);
        // x = 1 gives z = t
        let mut g = 1.0;
        let mut inv = 1.0;
        let mut fact = 1.0;
        for n in 1..=n_max {
            fact *= n as f64;
            let s: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=t)).collect();
            g += l[n - 1].eval(t, &s)? / fact * t.powi(n as i32);
            inv += m[n - 1].eval(t, &s)? * t.powi(n as i32);
        }
        worst = worst.max((g * inv - 1.0).abs());
    }
    Ok((
        worst <= 1e-10,
        format!("max |G (1/G) - 1| = {worst:.3e} over 20 t"),
    ))
}

fn c10_separable_vs_generic() -> Check {
    let sources = [
        (1, "exp(-t) * sin(s1) * x1"),
        (2, "exp(-t) * (cos(s1) * x1) * (cos(s2) * x2)"),
        (3, "(1 + t^2) * (s1 + x1^2) * (s2 + x2^2) * (s3 + x3^2)"),
    ];
    let mut rng = StdRng::seed_from_u64(10);
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for (n, src) in sources {
        let k = bind_kernel(&dsl::parse(src, n)?, n, None)?;
        ok &= k.separable().is_some();
        let grid = make_grid(1.0, 12)?;
        for i in 1..=12 {
            for _ in 0..50 {
                let state: Vec<f64> = (0..i).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let a = inner_sum_generic(&k, &grid, i, &state, 3)?;
                let b = inner_sum_separable(&k, &grid, i, &state)?;
                // relative to 1 + |value|, as in the fast-path equivalence invariant
                let rel = (a - b).abs() / (1.0 + a.abs());
                ok &= rel <= 1e-12;
                worst = worst.max(rel);
            }
        }
    }
    Ok((
        ok,
        format!("max |separable - generic| / (1 + |generic|) = {worst:.3e}"),
    ))
}

type Oracle = fn(f64, &[f64], &[f64]) -> f64;

fn c11_dsl_and_compositions() -> Check {
    let cases: [(&str, usize, Oracle); 20] = [
        ("1 + 2 * t", 0, |t, _, _| 1.0 + 2.0 * t),
        ("t^2 - 3*t + 1", 0, |t, _, _| t * t - 3.0 * t + 1.0),
        ("exp(-t)", 0, |t, _, _| (-t).exp()),
        ("sin(t) * cos(t)", 0, |t, _, _| t.sin() * t.cos()),
        ("sqrt(1 + t)", 0, |t, _, _| (1.0 + t).sqrt()),
        ("log(2 + t) / (1 + t)", 0, |t, _, _| {
            (2.0 + t).ln() / (1.0 + t)
        }),
        ("-t^2", 0, |t, _, _| -(t * t)),
        ("2^t^2", 0, |t, _, _| 2f64.powf(t * t)),
        ("abs(t - 0.5)", 0, |t, _, _| (t - 0.5).abs()),
        ("1 / (1 - 0.5 * t)", 0, |t, _, _| 1.0 / (1.0 - 0.5 * t)),
        ("x1", 1, |_, _, x| x[0]),
        ("exp(s1 - t) * x1", 1, |t, s, x| (s[0] - t).exp() * x[0]),
        ("sin(x1) + t * s1", 1, |t, s, x| x[0].sin() + t * s[0]),
        ("x1 / (1 + x1^2)", 1, |_, _, x| x[0] / (1.0 + x[0] * x[0])),
        ("x1 * x2", 2, |_, _, x| x[0] * x[1]),
        ("cos(t - s1) * cos(t - s2) * x1 * x2", 2, |t, s, x| {
            (t - s[0]).cos() * (t - s[1]).cos() * x[0] * x[1]
        }),
        ("(s1 + s2) * exp(-(x1^2 + x2^2))", 2, |_, s, x| {
            (s[0] + s[1]) * (-(x[0] * x[0] + x[1] * x[1])).exp()
        }),
        ("x1 * x2 * x3 - t", 3, |t, _, x| x[0] * x[1] * x[2] - t),
        ("sqrt(abs(x1 * x2)) + s3^3", 3, |_, s, x| {
            (x[0] * x[1]).abs().sqrt() + s[2].powi(3)
        }),
        ("-(-x1) - -x2 + 3 * x3 / 2", 3, |_, _, x| {
            x[0] + x[1] + 3.0 * x[2] / 2.0
        }),
    ];
    let mut rng = StdRng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for (src, arity, oracle) in cases {
        let e = dsl::parse(src, arity)?;
        for _ in 0..100 {
            let t: f64 = rng.gen_range(0.0..1.0);
            let s: Vec<f64> = (0..arity).map(|_| rng.gen_range(0.0..=t)).collect();
            let x: Vec<f64> = (0..arity).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let got = eval_expr(&e, &Env::at(t).with_s(&s).with_x(&x))?;
            let want = oracle(t, &s, &x);
            let scale = got.abs().max(want.abs());
            let rel = if scale == 0.0 {
                0.0
            } else {
                (got - want).abs() / scale
            };
            ok &= rel <= 1e-12;
            worst = worst.max(rel);
        }
    }
    let mut counts_ok = true;
    for n in 1..=12 {
        counts_ok &= ordered_compositions(n)?.len() == 1 << (n - 1);
    }
    Ok((
        ok && counts_ok,
        format!(
            "2000 evaluations, max relative difference {worst:.3e}; composition counts {}",
            if counts_ok {
                "match 2^(N-1) for N <= 12"
            } else {
                "wrong"
            }
        ),
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("first-order convergence on exp_growth", c1_first_order),
        ("second-order kernel convergence on quadratic", c2_quadratic),
        ("Picard agrees with marching", c3_picard_matches_marching),
        ("counting identity over I_n(i)", c4_lemma41),
        ("discrete Gronwall domination", c5_gronwall),
        ("a priori bound dominates observed error", c6_a_priori_bound),
        ("truncation bound and order selection", c7_truncation),
        ("first-kind reduction round trip", c8_first_kind_round_trip),
        ("series inversion identity", c9_series_inversion),
        (
            "separable and generic inner sums agree",
            c10_separable_vs_generic,
        ),
        (
            "DSL oracle agreement and composition counts",
            c11_dsl_and_compositions,
        ),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let (pass, detail) = match check() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{} [{:>2}] {name}: {detail}",
            if pass { "PASS" } else { "FAIL" },
            k + 1
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
