//! Reduction of a first-kind multi-linear equation
//!
//! `sum_n (1/n!) int..int K_n(t, s..) x(s_1)..x(s_n) ds = f(t)`
//!
//! to a second-kind equation by differentiating in `t`, dividing by
//! `K_1(t, t)` and inverting the resulting series through ordered
//! compositions.

mod compositions;

use std::fmt;
use std::sync::{Arc, OnceLock};

use rand::{rngs::StdRng, Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::kernel::{Kernel, SeparableForm};
use crate::marching::{Scheme, SolveOptions};
use crate::problem::{
    FirstKindProblem, MultiFn, MultilinearKernel, PairFn, ProductForm, SecondKindProblem,
};

pub use compositions::{
    ordered_compositions, ordered_compositions_with_limit, Composition, COMPOSITION_LIMIT,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelRole {
    /// `K_{n+1}(t, s.., t) / K_1(t, t)`.
    L,
    /// Coefficients of the inverted series `1/G`.
    M,
    /// Kernels of the second-kind equation.
    Q,
}

/// A kernel `(t, s_1..s_n) -> value` produced by the reduction.
#[derive(Clone)]
pub struct ReducedKernel {
    order: usize,
    role: KernelRole,
    eval: MultiFn,
    form: Option<ProductForm>,
}

impl ReducedKernel {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn role(&self) -> KernelRole {
        self.role
    }

    pub fn eval(&self, t: f64, s: &[f64]) -> Result<f64> {
        if s.len() != self.order {
            return Err(Error::invalid(format!(
                "{:?} kernel of order {} called with {} arguments",
                self.role,
                self.order,
                s.len()
            )));
        }
        (self.eval)(t, s)
    }

    /// `c(t) prod beta(s_k)` when every input kernel shares one factor.
    pub fn form(&self) -> Option<&ProductForm> {
        self.form.as_ref()
    }
}

impl fmt::Debug for ReducedKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ReducedKernel")
            .field("order", &self.order)
            .field("role", &self.role)
            .field("form", &self.form.is_some())
            .finish()
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `K_n = a_n(t) prod beta(s_k)` for every present order, one `beta`.
struct Product {
    beta: PairFn,
    value: Vec<Option<ProductForm>>,
    dt: Vec<Option<ProductForm>>,
}

/// Input kernels `K_1..K_top` and lazily built compositions.
struct Pieces {
    problem: FirstKindProblem,
    kernels: Vec<Option<MultilinearKernel>>,
    compositions: Vec<OnceLock<Vec<Composition>>>,
    product: Option<Product>,
}

impl Pieces {
    /// Loads what is needed for orders up to `n`, i.e. `K_1..K_{n+1}`.
    fn build(problem: &FirstKindProblem, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("reduction order must be at least 1"));
        }
        if n > COMPOSITION_LIMIT {
            return Err(Error::Capacity {
                what: format!("reduction to order {n}"),
                limit: COMPOSITION_LIMIT,
            });
        }
        let kernels = (1..=n + 1)
            .map(|k| problem.kernel(k))
            .collect::<Result<Vec<_>>>()?;
        if kernels[0].is_none() {
            return Err(Error::invalid("first-kind problem has no K_1"));
        }
        let product = Self::product(&kernels);
        Ok(Self {
            problem: problem.clone(),
            kernels,
            compositions: (0..=n).map(|_| OnceLock::new()).collect(),
            product,
        })
    }

    fn product(kernels: &[Option<MultilinearKernel>]) -> Option<Product> {
        let base = kernels[0].as_ref()?.value_form()?.clone();
        let mut value = Vec::with_capacity(kernels.len());
        let mut dt = Vec::with_capacity(kernels.len());
        for k in kernels {
            match k {
                None => {
                    value.push(None);
                    dt.push(None);
                }
                Some(k) => {
                    let (v, d) = (k.value_form()?, k.dt_form()?);
                    if !(v.shares_factor(&base) && d.shares_factor(&base)) {
                        return None;
                    }
                    value.push(Some(v.clone()));
                    dt.push(Some(d.clone()));
                }
            }
        }
        Some(Product {
            beta: base.factor_fn().clone(),
            value,
            dt,
        })
    }

    fn kernel(&self, n: usize) -> Option<&MultilinearKernel> {
        self.kernels.get(n - 1).and_then(Option::as_ref)
    }

    fn pivot(&self, t: f64) -> Result<f64> {
        let k1 = self.kernel(1).expect("K_1 checked at build");
        let v = k1.value(t, &[t])?;
        if v.abs() < f64::MIN_POSITIVE {
            return Err(Error::PivotVanishes { t });
        }
        Ok(v)
    }

    fn l(&self, n: usize, t: f64, s: &[f64]) -> Result<f64> {
        let Some(k) = self.kernel(n + 1) else {
            return Ok(0.0);
        };
        let pivot = self.pivot(t)?;
        let mut args = Vec::with_capacity(n + 1);
        args.extend_from_slice(s);
        args.push(t);
        Ok(k.value(t, &args)? / pivot)
    }

    fn compositions(&self, n: usize) -> Result<&[Composition]> {
        if let Some(c) = self.compositions[n].get() {
            return Ok(c);
        }
        let built = ordered_compositions(n)?;
        Ok(self.compositions[n].get_or_init(|| built))
    }

    /// Inverse-series kernel with `M_0 = 0`.
    fn m(&self, n: usize, t: f64, s: &[f64]) -> Result<f64> {
        if n == 0 {
            return Ok(0.0);
        }
        let mut total = 0.0;
        for c in self.compositions(n)? {
            let mut term = if c.len() % 2 == 0 { 1.0 } else { -1.0 };
            for (part, block) in c.parts().iter().zip(c.blocks()) {
                term *= self.l(*part, t, &s[block])? / factorial(*part);
                if term == 0.0 {
                    break;
                }
            }
            total += term;
        }
        Ok(total)
    }

    fn k_dt(&self, n: usize, t: f64, s: &[f64]) -> Result<f64> {
        match self.kernel(n) {
            None => Ok(0.0),
            Some(k) => k.dt(t, s),
        }
    }

    fn q(&self, n: usize, t: f64, s: &[f64]) -> Result<f64> {
        let pivot = self.pivot(t)?;
        let ft = self.problem.rhs_dt(t)?;
        let mut v = ft / pivot * self.m(n, t, s)? - self.k_dt(n, t, s)? / (factorial(n) * pivot);
        for k in 1..n {
            let kd = self.k_dt(k, t, &s[..k])?;
            if kd != 0.0 {
                v -= kd / (factorial(k) * pivot) * self.m(n - k, t, &s[k..])?;
            }
        }
        Ok(v)
    }

    fn product_ref(&self) -> &Product {
        self.product
            .as_ref()
            .expect("product structure checked by caller")
    }

    /// `lambda_n(t)` with `L_n = lambda_n(t) prod beta(s_k)`.
    fn lambda(&self, n: usize, t: f64) -> Result<f64> {
        let p = self.product_ref();
        match &p.value[n] {
            None => Ok(0.0),
            Some(form) => Ok(form.prefactor(t)? * (p.beta)(t, t)? / self.pivot(t)?),
        }
    }

    /// `mu_0..mu_n` with `M_n = mu_n(t) prod beta(s_k)`, from
    /// `mu_0 = 1`, `mu_n = -sum_{k=1..n} lambda_k / k! * mu_{n-k}`.
    fn mu(&self, n: usize, t: f64) -> Result<Vec<f64>> {
        let lambda = (1..=n)
            .map(|k| self.lambda(k, t))
            .collect::<Result<Vec<_>>>()?;
        let mut mu = vec![1.0];
        for m in 1..=n {
            let v: f64 = (1..=m)
                .map(|k| lambda[k - 1] / factorial(k) * mu[m - k])
                .sum();
            mu.push(-v);
        }
        Ok(mu)
    }

    fn a_dt(&self, n: usize, t: f64) -> Result<f64> {
        match &self.product_ref().dt[n - 1] {
            None => Ok(0.0),
            Some(form) => form.prefactor(t),
        }
    }

    /// `q_n(t)` with `Q_n = q_n(t) prod beta(s_k)`.
    fn q_coefficient(&self, n: usize, t: f64) -> Result<f64> {
        let pivot = self.pivot(t)?;
        let mu = self.mu(n, t)?;
        let mut v =
            self.problem.rhs_dt(t)? / pivot * mu[n] - self.a_dt(n, t)? / (factorial(n) * pivot);
        for k in 1..n {
            v -= self.a_dt(k, t)? / (factorial(k) * pivot) * mu[n - k];
        }
        Ok(v)
    }

    fn beta(&self) -> Option<PairFn> {
        self.product.as_ref().map(|p| p.beta.clone())
    }
}

fn reduced(pieces: Arc<Pieces>, n: usize, role: KernelRole) -> ReducedKernel {
    let form = pieces.beta().map(|beta| {
        let p = pieces.clone();
        let coefficient: crate::kernel::ScalarFn = match role {
            KernelRole::L => Arc::new(move |t| p.lambda(n, t)),
            KernelRole::M => Arc::new(move |t| Ok(p.mu(n, t)?[n])),
            KernelRole::Q => Arc::new(move |t| p.q_coefficient(n, t)),
        };
        ProductForm::new(coefficient, beta)
    });
    let eval: MultiFn = match role {
        KernelRole::L => Arc::new(move |t, s| pieces.l(n, t, s)),
        KernelRole::M => Arc::new(move |t, s| pieces.m(n, t, s)),
        KernelRole::Q => Arc::new(move |t, s| pieces.q(n, t, s)),
    };
    ReducedKernel {
        order: n,
        role,
        eval,
        form,
    }
}

/// `L_n(t, s..) = K_{n+1}(t, s.., t) / K_1(t, t)`.
pub fn reduced_kernel_l(p: &FirstKindProblem, n: usize) -> Result<ReducedKernel> {
    Ok(reduced(Arc::new(Pieces::build(p, n)?), n, KernelRole::L))
}

/// `M_n = sum_P (-1)^|P| prod (1/n_i!) L_{n_i}(t, block_i)` over the
/// compositions `P` of `n`, blocks of `s` taken consecutively.
pub fn inverse_series_kernel_m(p: &FirstKindProblem, n: usize) -> Result<ReducedKernel> {
    Ok(reduced(Arc::new(Pieces::build(p, n)?), n, KernelRole::M))
}

/// `Q_n = (f_t/K_1) M_n - (1/n!) K_{n,t}/K_1 - sum_{k<n} (1/k!) (K_{k,t}/K_1) M_{n-k}`.
pub fn second_kind_kernel_q(p: &FirstKindProblem, n: usize) -> Result<ReducedKernel> {
    Ok(reduced(Arc::new(Pieces::build(p, n)?), n, KernelRole::Q))
}

/// Samples each `K_n`, `n >= 2`, against its reversed arguments and warns
/// when they differ; the derivation assumes symmetric kernels.
fn warn_if_asymmetric(pieces: &Pieces) {
    let horizon = pieces.problem.horizon();
    let mut rng = StdRng::seed_from_u64(0x5eed);
    for (idx, k) in pieces.kernels.iter().enumerate().skip(1) {
        let Some(k) = k else { continue };
        let n = idx + 1;
        for _ in 0..8 {
            let t = rng.gen_range(0.0..=horizon);
            let s: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=t)).collect();
            let r: Vec<f64> = s.iter().rev().copied().collect();
            if let (Ok(a), Ok(b)) = (k.value(t, &s), k.value(t, &r)) {
                if (a - b).abs() > 1e-10 * (1.0 + a.abs()) {
                    log::warn!(
                        "K_{n} is not symmetric in its s-arguments; the reduction assumes it is"
                    );
                    break;
                }
            }
        }
    }
}

/// The equivalent second-kind problem
/// `x(t) = f_t/K_1(t,t) + sum_{n<=N} (1/n!) int..int n! Q_n(t, s..) x(s_1)..x(s_n) ds`.
pub fn reduce(p: &FirstKindProblem, n_max: usize) -> Result<SecondKindProblem> {
    let pieces = Arc::new(Pieces::build(p, n_max)?);
    warn_if_asymmetric(&pieces);
    let forcing = {
        let pieces = pieces.clone();
        Arc::new(move |t| Ok(pieces.problem.rhs_dt(t)? / pieces.pivot(t)?))
    };
    let beta = pieces.beta();
    let mut kernels = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let scale = factorial(n);
        let q = pieces.clone();
        let mut k = Kernel::fallible(
            n,
            Arc::new(move |t, s, x| Ok(scale * q.q(n, t, s)? * x.iter().product::<f64>())),
        )?;
        if let Some(beta) = &beta {
            let (q, beta) = (pieces.clone(), beta.clone());
            k = k.with_separable(SeparableForm::new(
                Arc::new(move |t| Ok(scale * q.q_coefficient(n, t)?)),
                Arc::new(move |t, s, x| Ok(beta(t, s)? * x)),
            ));
        }
        kernels.push(k);
    }
    SecondKindProblem::finite(forcing, kernels, p.horizon())
}

/// Wraps `g(t, s..)` as the state kernel `g(t, s..) x_1..x_n`.
fn state_kernel(n: usize, g: MultiFn, form: Option<ProductForm>) -> Result<Kernel> {
    let k = Kernel::fallible(
        n,
        Arc::new(move |t, s, x| Ok(g(t, s)? * x.iter().product::<f64>())),
    )?;
    Ok(match form {
        None => k,
        Some(form) => {
            let (a, b) = (form.clone(), form);
            k.with_separable(SeparableForm::new(
                Arc::new(move |t| a.prefactor(t)),
                Arc::new(move |t, s, x| Ok(b.factor(t, s)? * x)),
            ))
        }
    })
}

/// `sum_n (h^n/n!) sum_{I_n(i)} g_n(t_i, t_j..) x_j..` at every node.
fn quadrature(kernels: &[Kernel], x: &GridFunction) -> Result<Vec<f64>> {
    let grid = *x.grid();
    let scheme = Scheme::new(kernels, grid, &SolveOptions::default())?;
    (0..grid.len())
        .map(|i| scheme.node_value(0.0, i, x.values()))
        .collect()
}

/// Per-node `1 - |sum_n (1/n!) int..int L_n x..x|` by left-rectangle
/// quadrature, with `L_1..L_{n_max}`. Nonpositive entries mark nodes where
/// the geometric expansion of `1/G` is not justified.
pub fn check_expansion_validity(
    p: &FirstKindProblem,
    x: &GridFunction,
    n_max: usize,
) -> Result<Vec<f64>> {
    let pieces = Arc::new(Pieces::build(p, n_max)?);
    let kernels = (1..=n_max)
        .map(|n| {
            if pieces.kernel(n + 1).is_none() {
                return Kernel::zero(n);
            }
            let l = reduced(pieces.clone(), n, KernelRole::L);
            state_kernel(n, l.eval.clone(), l.form.clone())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(quadrature(&kernels, x)?
        .into_iter()
        .map(|v| 1.0 - v.abs())
        .collect())
}

/// `sum_n (1/n!) h^n sum_{I_n(i)} K_n(t_i, t_j..) x_j.. - f(t_i)` over the
/// orders `1..=max_order` of the problem.
pub fn first_kind_residual(p: &FirstKindProblem, x: &GridFunction) -> Result<GridFunction> {
    first_kind_residual_with(p, x, |t| p.rhs(t))
}

/// [`first_kind_residual`] against an arbitrary right-hand side.
pub fn first_kind_residual_with(
    p: &FirstKindProblem,
    x: &GridFunction,
    rhs: impl Fn(f64) -> Result<f64>,
) -> Result<GridFunction> {
    let mut kernels = Vec::with_capacity(p.max_order());
    for n in 1..=p.max_order() {
        let k = match p.kernel(n)? {
            None => Kernel::zero(n)?,
            Some(k) => {
                let form = k.value_form().cloned();
                let k = Arc::new(k);
                state_kernel(n, Arc::new(move |t, s| k.value(t, s)), form)?
            }
        };
        kernels.push(k);
    }
    let sums = quadrature(&kernels, x)?;
    let grid = *x.grid();
    let values = sums
        .into_iter()
        .zip(grid.nodes())
        .map(|(v, t)| Ok(v - rhs(t)?))
        .collect::<Result<Vec<_>>>()?;
    GridFunction::new(grid, values)
}
