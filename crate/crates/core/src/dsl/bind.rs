use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::kernel::{FactorFn, Kernel, KernelBounds, ScalarFn, SeparableForm};
use crate::problem::{
    FeedbackFn, MultilinearKernel, PairFn, ProductForm, SeriesKernel, SeriesShape,
};

use super::{eval_expr, print, BinOp, Env, Expr, ExprKind, Var};

/// `e = prefactor(t) * prod_k factor[s1 -> s_k, x1 -> x_k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Separated {
    pub prefactor: Expr,
    /// Written in `t`, `s1` and `x1`.
    pub factor: Expr,
}

/// Factors of a flattened product, with their position in the fraction.
#[derive(Default)]
struct Factors {
    negate: bool,
    items: Vec<(bool, Expr)>,
}

fn flatten(e: &Expr, denominator: bool, out: &mut Factors) {
    match &e.kind {
        ExprKind::Binary(BinOp::Mul, a, b) => {
            flatten(a, denominator, out);
            flatten(b, denominator, out);
        }
        ExprKind::Binary(BinOp::Div, a, b) => {
            flatten(a, denominator, out);
            flatten(b, !denominator, out);
        }
        ExprKind::Neg(a) => {
            out.negate = !out.negate;
            flatten(a, denominator, out);
        }
        _ => out.items.push((denominator, e.clone())),
    }
}

fn indices(e: &Expr) -> Vec<usize> {
    let mut ks = Vec::new();
    e.for_each_var(&mut |v| {
        if let Var::S(k) | Var::X(k) = v {
            if !ks.contains(&k) {
                ks.push(k);
            }
        }
    });
    ks
}

fn rename_to_first(e: &Expr) -> Expr {
    e.map_vars(&|v| match v {
        Var::S(_) => Var::S(1),
        Var::X(_) => Var::X(1),
        other => other,
    })
}

fn product(items: &[(bool, Expr)], negate: bool) -> Expr {
    let mut num: Option<Expr> = None;
    let mut den: Option<Expr> = None;
    for (is_den, e) in items {
        let slot = if *is_den { &mut den } else { &mut num };
        *slot = Some(match slot.take() {
            None => e.clone(),
            Some(acc) => Expr::binary(BinOp::Mul, acc, e.clone()),
        });
    }
    let mut out = num.unwrap_or_else(|| Expr::num(1.0));
    if let Some(d) = den {
        out = Expr::binary(BinOp::Div, out, d);
    }
    if negate {
        out = Expr::negate(out);
    }
    out
}

/// Recognizes `g(t) * prod_k phi(t, s_k, x_k)` with identical `phi` up to
/// index renaming. Purely syntactic: top-level products and quotients are
/// flattened, each factor must mention a single index, and the factor
/// groups must print identically after renaming.
pub fn detect_separable(e: &Expr, order: usize) -> Option<Separated> {
    if order == 0 || e.max_index() > order {
        return None;
    }
    let mut fs = Factors::default();
    flatten(e, false, &mut fs);
    let mut pre = Vec::new();
    let mut groups: Vec<Vec<(bool, Expr)>> = vec![Vec::new(); order];
    for (den, f) in fs.items {
        match indices(&f)[..] {
            [] => pre.push((den, f)),
            [k] => groups[k - 1].push((den, rename_to_first(&f))),
            _ => return None,
        }
    }
    let keyed: Vec<Vec<(bool, String)>> = groups
        .iter()
        .map(|g| {
            let mut keys: Vec<(bool, String)> = g.iter().map(|(d, f)| (*d, print(f))).collect();
            keys.sort();
            keys
        })
        .collect();
    if keyed.iter().any(|k| *k != keyed[0]) {
        return None;
    }
    let mut first = groups.swap_remove(0);
    first.sort_by_key(|(d, f)| (*d, print(f)));
    Some(Separated {
        prefactor: product(&pre, fs.negate),
        factor: product(&first, false),
    })
}

fn first_offending<'a>(e: &'a Expr, ok: &impl Fn(Var) -> bool) -> Option<(Var, &'a Expr)> {
    match &e.kind {
        ExprKind::Var(v) if !ok(*v) => Some((*v, e)),
        ExprKind::Num(_) | ExprKind::Var(_) => None,
        ExprKind::Neg(a) | ExprKind::Call(_, a) => first_offending(a, ok),
        ExprKind::Binary(_, a, b) => first_offending(a, ok).or_else(|| first_offending(b, ok)),
    }
}

/// Rejects references outside `t`, `s1..s_arity`, `x1..x_arity` (and the
/// extras allowed by `extra`).
fn check_vars(e: &Expr, arity: usize, allow_x: bool, extra: &impl Fn(Var) -> bool) -> Result<()> {
    let ok = |v: Var| match v {
        Var::T => true,
        Var::S(k) => k <= arity,
        Var::X(k) => allow_x && k <= arity,
        other => extra(other),
    };
    match first_offending(e, &ok) {
        None => Ok(()),
        Some((v @ (Var::S(_) | Var::X(_)), node)) if allow_x || matches!(v, Var::S(_)) => {
            Err(Error::Arity {
                token: v.to_string(),
                arity,
                line: node.span.line,
                column: node.span.column,
            })
        }
        Some((v, _)) => Err(Error::Unbound(v.to_string())),
    }
}

/// Deduplicates factor closures by printed form, so that kernels with the
/// same `phi` share one handle.
#[derive(Default)]
pub struct FactorCache {
    state: HashMap<String, FactorFn>,
    pair: HashMap<String, PairFn>,
}

impl FactorCache {
    fn state_factor(&mut self, phi: &Expr) -> FactorFn {
        self.state
            .entry(print(phi))
            .or_insert_with(|| {
                let phi = phi.clone();
                Arc::new(move |t, s, x| eval_expr(&phi, &Env::at(t).with_s(&[s]).with_x(&[x])))
            })
            .clone()
    }

    fn pair_factor(&mut self, phi: &Expr) -> PairFn {
        self.pair
            .entry(print(phi))
            .or_insert_with(|| {
                let phi = phi.clone();
                Arc::new(move |t, s| eval_expr(&phi, &Env::at(t).with_s(&[s])))
            })
            .clone()
    }

    /// See [`bind_kernel`].
    pub fn kernel(
        &mut self,
        e: &Expr,
        order: usize,
        bounds: Option<KernelBounds>,
    ) -> Result<Kernel> {
        check_vars(e, order, true, &|_| false)?;
        let body = e.clone();
        let mut k = Kernel::fallible(
            order,
            Arc::new(move |t, s, x| eval_expr(&body, &Env::at(t).with_s(s).with_x(x))),
        )?;
        if let Some(sep) = detect_separable(e, order) {
            k = k.with_separable(SeparableForm::new(
                scalar(&sep.prefactor),
                self.state_factor(&sep.factor),
            ));
        }
        if let Some(b) = bounds {
            b.validate()?;
            k = k.with_bounds(b);
        }
        Ok(k)
    }

    /// `K_n` in `t, s..` and its time derivative `K_{n,t}`. The product
    /// structure is kept when both factor as `a(t) prod beta(s_k)` with the
    /// same time-independent `beta`.
    pub fn first_kind(&mut self, k: &Expr, k_t: &Expr, order: usize) -> Result<MultilinearKernel> {
        check_vars(k, order, false, &|_| false)?;
        check_vars(k_t, order, false, &|_| false)?;
        let (kv, kd) = (k.clone(), k_t.clone());
        let mut out = MultilinearKernel::new(
            order,
            Arc::new(move |t, s| eval_expr(&kv, &Env::at(t).with_s(s))),
            Arc::new(move |t, s| eval_expr(&kd, &Env::at(t).with_s(s))),
        )?;
        if let (Some(a), Some(b)) = (detect_separable(k, order), detect_separable(k_t, order)) {
            let time_free = !a.factor.mentions(|v| v == Var::T);
            if time_free && print(&a.factor) == print(&b.factor) {
                let beta = self.pair_factor(&a.factor);
                out = out
                    .with_value_form(ProductForm::new(scalar(&a.prefactor), beta.clone()))
                    .with_dt_form(ProductForm::new(scalar(&b.prefactor), beta));
            }
        }
        Ok(out)
    }

    /// Open-loop series kernel `K_n(t, s..)` for the feedback builder.
    pub fn series(
        &mut self,
        k: &Expr,
        order: usize,
        bounds: Option<KernelBounds>,
    ) -> Result<SeriesKernel> {
        check_vars(k, order, false, &|_| false)?;
        let shape = match detect_separable(k, order) {
            Some(sep) => SeriesShape::Factorized(ProductForm::new(
                scalar(&sep.prefactor),
                self.pair_factor(&sep.factor),
            )),
            None => {
                let body = k.clone();
                SeriesShape::General(Arc::new(move |t, s| {
                    eval_expr(&body, &Env::at(t).with_s(s))
                }))
            }
        };
        let mut sk = SeriesKernel {
            order,
            shape,
            bounds: None,
        };
        if let Some(b) = bounds {
            sk = sk.with_bounds(b);
        }
        Ok(sk)
    }

    /// `a(t) prod_k phi(t, s_k, x_k)` from its two parts; `phi` is written
    /// in `t, s1, x1`.
    pub fn product_kernel(&mut self, prefactor: &Expr, phi: &Expr, order: usize) -> Result<Kernel> {
        check_vars(prefactor, 0, false, &|_| false)?;
        check_vars(phi, 1, true, &|_| false)?;
        let form = SeparableForm::new(scalar(prefactor), self.state_factor(phi));
        Kernel::from_separable(order, form)
    }
}

fn scalar(e: &Expr) -> ScalarFn {
    let e = e.clone();
    Arc::new(move |t| eval_expr(&e, &Env::at(t)))
}

/// Binds an expression in `t, s1..s_n, x1..x_n` as an order-`n` kernel,
/// attaching a product form when [`detect_separable`] finds one.
pub fn bind_kernel(e: &Expr, order: usize, bounds: Option<KernelBounds>) -> Result<Kernel> {
    FactorCache::default().kernel(e, order, bounds)
}

/// Binds an expression in `t` alone.
pub fn bind_scalar(e: &Expr) -> Result<ScalarFn> {
    check_vars(e, 0, false, &|_| false)?;
    Ok(scalar(e))
}

/// Binds a feedback gain `g(t, y)` written in `t`, `x1` (for `y`) and
/// optionally `u` (the control at `t`).
pub fn bind_gain(e: &Expr, control: ScalarFn) -> Result<FeedbackFn> {
    check_vars(e, 1, true, &|v| v == Var::U)?;
    if e.mentions(|v| matches!(v, Var::S(_))) {
        return Err(Error::invalid("feedback gain depends on t and x1 only"));
    }
    let e = e.clone();
    let uses_u = e.mentions(|v| v == Var::U);
    Ok(Arc::new(move |t, y| {
        let mut env = Env::at(t).with_x(std::slice::from_ref(&y));
        if uses_u {
            env = env.with_u(control(t)?);
        }
        eval_expr(&e, &env)
    }))
}

/// First-kind kernel pair without a shared cache.
pub fn bind_first_kind_kernel(k: &Expr, k_t: &Expr, order: usize) -> Result<MultilinearKernel> {
    FactorCache::default().first_kind(k, k_t, order)
}
