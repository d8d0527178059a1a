//! A priori error bounds for the marching scheme: aggregate constants,
//! Gronwall lemmas, the continuity estimate, tail and truncation bounds, and
//! the counting identity behind the Lipschitz step of the error recursion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelBounds;
use crate::problem::SecondKindProblem;

/// Largest `n * i^n` that [`verify_lemma41`] will enumerate.
pub const LEMMA41_BUDGET: u64 = 50_000_000;

/// Aggregate constants of an order-`N` problem on `[0, T]`.
///
/// * `contraction = sum L_n T^(n-1)/(n-1)!` (contraction constant of the
///   integral operator);
/// * `e_n = sum M_n sqrt(n) T^n / n!`;
/// * `d_n = sum L_n T^(n-1)/(n-1)!`;
/// * `b_n = sum B_n T^n / n!`;
/// * `c_n = sum C_n T^(n-1)/(n-1)!`;
/// * `f_n = d_n T (M0 + b_n + c_n)/2 + e_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorConstants {
    pub contraction: f64,
    pub e_n: f64,
    pub d_n: f64,
    pub b_n: f64,
    pub c_n: f64,
    pub f_n: f64,
    pub forcing_dt_bound: f64,
}

/// `T^k / k!` for `k = 0..=n`.
fn scaled_powers(t: f64, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut w = 1.0;
    out.push(w);
    for k in 1..=n {
        w *= t / k as f64;
        out.push(w);
    }
    out
}

/// Aggregate constants from per-order bounds `bounds[n-1]` for `n = 1..=N`.
pub fn scheme_constants(bounds: &[KernelBounds], horizon: f64, m0: f64) -> Result<ErrorConstants> {
    if !(horizon > 0.0) {
        return Err(Error::invalid("horizon must be positive"));
    }
    if !(m0.is_finite() && m0 >= 0.0) {
        return Err(Error::invalid(
            "forcing derivative bound must be nonnegative",
        ));
    }
    for b in bounds {
        b.validate()?;
    }
    let w = scaled_powers(horizon, bounds.len());
    let (mut e, mut d, mut bsum, mut c) = (0.0, 0.0, 0.0, 0.0);
    for (idx, b) in bounds.iter().enumerate() {
        let n = idx + 1;
        e += b.grad_s_bound * (n as f64).sqrt() * w[n];
        d += b.lipschitz * w[n - 1];
        bsum += b.dt_bound * w[n];
        c += b.sup_bound * w[n - 1];
    }
    Ok(ErrorConstants {
        contraction: d,
        e_n: e,
        d_n: d,
        b_n: bsum,
        c_n: c,
        f_n: d * horizon * (m0 + bsum + c) / 2.0 + e,
        forcing_dt_bound: m0,
    })
}

/// [`scheme_constants`] for a finite problem whose kernels and forcing carry
/// bound metadata.
pub fn problem_constants(problem: &SecondKindProblem) -> Result<ErrorConstants> {
    let bounds = problem.kernel_bounds()?;
    let m0 = problem
        .forcing_dt_bound()
        .ok_or_else(|| Error::MissingMetadata("forcing derivative bound M0".into()))?;
    scheme_constants(&bounds, problem.horizon(), m0)
}

/// `F h exp(T D)`: bound on the max-node error of the marching scheme.
pub fn a_priori_bound(c: &ErrorConstants, h: f64, horizon: f64) -> f64 {
    c.f_n * h * (horizon * c.d_n).exp()
}

/// Bounds `a (1 + b)^(i-1)` for `i = 1..=M` (index 0 holds the initial 0)
/// on any sequence with `y_0 = 0` and `y_i <= a + b sum_{j<i} y_j`.
pub fn discrete_gronwall(a: f64, b: f64, steps: usize) -> Result<Vec<f64>> {
    if !(a >= 0.0 && b >= 0.0) {
        return Err(Error::invalid(format!(
            "Gronwall coefficients must be nonnegative, got a = {a}, b = {b}"
        )));
    }
    let mut out = Vec::with_capacity(steps + 1);
    out.push(0.0);
    let mut bound = a;
    for _ in 1..=steps {
        out.push(bound);
        bound *= 1.0 + b;
    }
    Ok(out)
}

/// `a e^(b t)`, the bound on `y(t) <= a + b int_0^t y`.
pub fn continuous_gronwall(a: f64, b: f64, t: f64) -> f64 {
    a * (b * t).exp()
}

/// Bound on `|x(t2) - x(t1)|` for the exact solution:
/// `M0 (t2 - t1) + sum (1/n!) [B_n (t2 - t1) t1^n + C_n (t2^n - t1^n)]`.
pub fn continuity_bound(bounds: &[KernelBounds], m0: f64, t1: f64, t2: f64) -> Result<f64> {
    if !(t1 >= 0.0 && t2 >= t1) {
        return Err(Error::invalid(format!(
            "need 0 <= t1 <= t2, got t1 = {t1}, t2 = {t2}"
        )));
    }
    let dt = t2 - t1;
    let mut total = m0 * dt;
    let mut fact = 1.0;
    for (idx, b) in bounds.iter().enumerate() {
        let n = idx + 1;
        fact *= n as f64;
        let p1 = t1.powi(n as i32);
        let p2 = t2.powi(n as i32);
        total += (b.dt_bound * dt * p1 + b.sup_bound * (p2 - p1)) / fact;
    }
    Ok(total)
}

/// `c_N = sum_{n > N} C_n T^n / n!`: the partial sum up to `order_limit`
/// plus a geometric remainder `r * last / (1 - r)` from the last term ratio.
pub fn tail_bound(
    sup_bound: impl Fn(usize) -> f64,
    horizon: f64,
    truncation_order: usize,
    order_limit: usize,
) -> Result<f64> {
    if order_limit <= truncation_order || order_limit < 2 {
        return Err(Error::invalid(format!(
            "order limit {order_limit} must exceed truncation order {truncation_order} and be at least 2"
        )));
    }
    let w = scaled_powers(horizon, order_limit);
    let term = |n: usize| -> Result<f64> {
        let c = sup_bound(n);
        if !(c.is_finite() && c >= 0.0) {
            return Err(Error::invalid(format!(
                "sup bound C_{n} = {c} must be finite and nonnegative"
            )));
        }
        Ok(c * w[n])
    };
    let mut sum = 0.0;
    for n in truncation_order + 1..=order_limit {
        sum += term(n)?;
    }
    let last = term(order_limit)?;
    if last == 0.0 {
        return Ok(sum);
    }
    let prev = term(order_limit - 1)?;
    let ratio = last / prev;
    if !(ratio.is_finite() && ratio < 1.0) {
        return Err(Error::TailDivergence { order_limit });
    }
    let total = sum + ratio * last / (1.0 - ratio);
    if !total.is_finite() {
        return Err(Error::TailDivergence { order_limit });
    }
    Ok(total)
}

/// `c_N e^(D T)`: bound on `max_i |x_i - x_i^(N)|` between the full and the
/// order-`N` discrete solutions.
pub fn truncation_error_bound(tail: f64, d_n: f64, horizon: f64) -> f64 {
    tail * (d_n * horizon).exp()
}

/// Uniform caps on the aggregate constants of an infinite family.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UniformCaps {
    pub forcing_dt_bound: f64,
    pub b_bar: f64,
    pub c_bar: f64,
    pub d_bar: f64,
    pub e_bar: f64,
}

/// `h (T D/2 (B + C + M0) + E) exp(T D)`.
pub fn infinite_a_priori_bound(caps: &UniformCaps, horizon: f64, h: f64) -> f64 {
    let UniformCaps {
        forcing_dt_bound: m0,
        b_bar,
        c_bar,
        d_bar,
        e_bar,
    } = *caps;
    h * (horizon * d_bar / 2.0 * (b_bar + c_bar + m0) + e_bar) * (horizon * d_bar).exp()
}

fn lemma41_budget(n: usize, i: usize) -> Result<()> {
    let work = (i as u64)
        .checked_pow(n as u32)
        .and_then(|p| p.checked_mul(n as u64));
    match work {
        Some(w) if w <= LEMMA41_BUDGET => Ok(()),
        _ => Err(Error::Capacity {
            what: format!("enumerating I_{n}({i})"),
            limit: LEMMA41_BUDGET as usize,
        }),
    }
}

/// Calls `visit` on every tuple of `{0..i-1}^n` in odometer order (last index
/// fastest).
fn for_each_tuple(n: usize, i: usize, mut visit: impl FnMut(&[usize])) {
    if i == 0 {
        return;
    }
    let mut idx = vec![0usize; n];
    loop {
        visit(&idx);
        let mut k = n;
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < i {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// Brute-force check of `sum_{(j) in I_n(i)} sum_k delta_{j_k} = n i^(n-1) sum_l delta_l`.
/// Returns `(lhs, rhs)`. Integral `delta` is accumulated exactly.
pub fn verify_lemma41(n: usize, i: usize, delta: &[f64]) -> Result<(f64, f64)> {
    if n == 0 || i == 0 {
        return Err(Error::invalid("n and i must be at least 1"));
    }
    if delta.len() != i {
        return Err(Error::invalid(format!(
            "delta must have length {i}, got {}",
            delta.len()
        )));
    }
    let integral = delta
        .iter()
        .all(|d| d.fract() == 0.0 && d.abs() < (1u64 << 53) as f64);
    if integral {
        let ints: Vec<i64> = delta.iter().map(|&d| d as i64).collect();
        let (l, r) = verify_lemma41_integer(n, i, &ints)?;
        return Ok((l as f64, r as f64));
    }
    lemma41_budget(n, i)?;
    let mut lhs = 0.0;
    for_each_tuple(n, i, |tuple| {
        lhs += tuple.iter().map(|&j| delta[j]).sum::<f64>();
    });
    let rhs = n as f64 * (i as f64).powi(n as i32 - 1) * delta.iter().sum::<f64>();
    Ok((lhs, rhs))
}

/// [`verify_lemma41`] over the integers.
pub fn verify_lemma41_integer(n: usize, i: usize, delta: &[i64]) -> Result<(i128, i128)> {
    if n == 0 || i == 0 {
        return Err(Error::invalid("n and i must be at least 1"));
    }
    if delta.len() != i {
        return Err(Error::invalid(format!(
            "delta must have length {i}, got {}",
            delta.len()
        )));
    }
    lemma41_budget(n, i)?;
    let mut lhs: i128 = 0;
    for_each_tuple(n, i, |tuple| {
        lhs += tuple.iter().map(|&j| delta[j] as i128).sum::<i128>();
    });
    let rhs =
        n as i128 * (i as i128).pow(n as u32 - 1) * delta.iter().map(|&d| d as i128).sum::<i128>();
    Ok((lhs, rhs))
}
