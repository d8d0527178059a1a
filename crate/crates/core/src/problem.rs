//! Equation data: second-kind problems with finite or generated kernel
//! families, multi-linear first-kind problems, and the feedback builder.

use std::fmt;
use std::sync::Arc;

use crate::bounds::tail_bound;
use crate::error::{Error, Result};
use crate::kernel::{FactorFn, Kernel, KernelBounds, ScalarFn, SeparableForm};

/// Fallible contract `(t, s) -> value` for kernels that do not see `x`.
pub type MultiFn = Arc<dyn Fn(f64, &[f64]) -> Result<f64> + Send + Sync>;
/// Fallible per-coordinate contract `(t, s) -> value`.
pub type PairFn = Arc<dyn Fn(f64, f64) -> Result<f64> + Send + Sync>;
/// Fallible feedback law `(t, y) -> g(t, y)`.
pub type FeedbackFn = Arc<dyn Fn(f64, f64) -> Result<f64> + Send + Sync>;

/// Default hard limit on the truncation order of generated families.
pub const DEFAULT_ORDER_LIMIT: usize = 30;

/// How many orders of an infinite family to keep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truncation {
    /// Keep exactly orders `1..=N`.
    Fixed(usize),
    /// Keep the smallest `N` whose tail bound drops below the tolerance.
    Tolerance(f64),
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation::Tolerance(1e-12)
    }
}

impl std::str::FromStr for Truncation {
    type Err = Error;

    /// Accepts `N` or `tol=EPS`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(eps) = s.strip_prefix("tol=") {
            let eps: f64 = eps
                .parse()
                .map_err(|_| Error::invalid(format!("bad tolerance `{eps}`")))?;
            if !(eps > 0.0) {
                return Err(Error::invalid("truncation tolerance must be positive"));
            }
            Ok(Truncation::Tolerance(eps))
        } else {
            let n: usize = s.parse().map_err(|_| {
                Error::invalid(format!("bad truncation `{s}`, expected N or tol=EPS"))
            })?;
            if n == 0 {
                return Err(Error::invalid("truncation order must be at least 1"));
            }
            Ok(Truncation::Fixed(n))
        }
    }
}

/// Kernels of every order, produced on demand, with the sup bounds `C_n`
/// that control the tail.
#[derive(Clone)]
pub struct InfiniteFamily {
    generator: Arc<dyn Fn(usize) -> Result<Kernel> + Send + Sync>,
    sup_bound: Arc<dyn Fn(usize) -> f64 + Send + Sync>,
    order_limit: usize,
}

impl InfiniteFamily {
    pub fn new(
        generator: impl Fn(usize) -> Result<Kernel> + Send + Sync + 'static,
        sup_bound: impl Fn(usize) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            generator: Arc::new(generator),
            sup_bound: Arc::new(sup_bound),
            order_limit: DEFAULT_ORDER_LIMIT,
        }
    }

    pub fn with_order_limit(mut self, order_limit: usize) -> Self {
        self.order_limit = order_limit;
        self
    }

    pub fn order_limit(&self) -> usize {
        self.order_limit
    }

    pub fn kernel(&self, order: usize) -> Result<Kernel> {
        let k = (self.generator)(order)?;
        if k.order() != order {
            return Err(Error::invalid(format!(
                "generator returned a kernel of order {} for order {order}",
                k.order()
            )));
        }
        Ok(k)
    }

    pub fn sup_bound(&self, order: usize) -> f64 {
        (self.sup_bound)(order)
    }

    /// Tail estimate `c_N = sum_{n > N} C_n T^n / n!`.
    pub fn tail(&self, horizon: f64, truncation_order: usize) -> Result<f64> {
        tail_bound(
            |n| self.sup_bound(n),
            horizon,
            truncation_order,
            self.order_limit,
        )
    }

    /// Smallest `N >= 1` with tail below `eps`, together with that tail.
    pub fn select_order(&self, horizon: f64, eps: f64) -> Result<(usize, f64)> {
        if !(eps > 0.0) {
            return Err(Error::invalid("truncation tolerance must be positive"));
        }
        for n in 1..self.order_limit {
            let tail = self.tail(horizon, n)?;
            if tail < eps {
                return Ok((n, tail));
            }
        }
        Err(Error::TailDivergence {
            order_limit: self.order_limit,
        })
    }
}

impl fmt::Debug for InfiniteFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InfiniteFamily")
            .field("order_limit", &self.order_limit)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum KernelFamily {
    /// Kernels of orders `1..=N`, sorted by order.
    Finite(Vec<Kernel>),
    Infinite(InfiniteFamily),
}

/// `x(t) = x0(t) + sum_n (1/n!) int..int f_n(t, s.., x(s_1)..x(s_n)) ds`.
#[derive(Clone)]
pub struct SecondKindProblem {
    forcing: ScalarFn,
    forcing_dt_bound: Option<f64>,
    family: KernelFamily,
    horizon: f64,
}

/// A finite problem obtained by truncating a (possibly infinite) family.
#[derive(Debug, Clone)]
pub struct Truncated {
    pub problem: SecondKindProblem,
    pub order: usize,
    /// Tail estimate `c_N`; `None` for problems that were already finite.
    pub tail: Option<f64>,
}

fn check_horizon(horizon: f64) -> Result<()> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::invalid(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    Ok(())
}

impl SecondKindProblem {
    /// Finite family; orders must be distinct and cover `1..=N`.
    pub fn finite(forcing: ScalarFn, mut kernels: Vec<Kernel>, horizon: f64) -> Result<Self> {
        check_horizon(horizon)?;
        kernels.sort_by_key(Kernel::order);
        for (idx, k) in kernels.iter().enumerate() {
            if k.order() != idx + 1 {
                return Err(Error::invalid(format!(
                    "kernel orders must be distinct and contiguous from 1; found order {} at position {}",
                    k.order(),
                    idx + 1
                )));
            }
        }
        Ok(Self {
            forcing,
            forcing_dt_bound: None,
            family: KernelFamily::Finite(kernels),
            horizon,
        })
    }

    /// Generated family; the series `sum C_n T^n / n!` must converge.
    pub fn infinite(forcing: ScalarFn, family: InfiniteFamily, horizon: f64) -> Result<Self> {
        check_horizon(horizon)?;
        family.tail(horizon, 0)?;
        Ok(Self {
            forcing,
            forcing_dt_bound: None,
            family: KernelFamily::Infinite(family),
            horizon,
        })
    }

    /// Sets `M0 = max |x0'(t)|`.
    pub fn with_forcing_dt_bound(mut self, m0: f64) -> Result<Self> {
        if !(m0.is_finite() && m0 >= 0.0) {
            return Err(Error::invalid(format!(
                "forcing derivative bound must be nonnegative, got {m0}"
            )));
        }
        self.forcing_dt_bound = Some(m0);
        Ok(self)
    }

    /// Same data on a different horizon.
    pub fn with_horizon(&self, horizon: f64) -> Result<Self> {
        check_horizon(horizon)?;
        if let KernelFamily::Infinite(f) = &self.family {
            f.tail(horizon, 0)?;
        }
        let mut p = self.clone();
        p.horizon = horizon;
        Ok(p)
    }

    pub fn forcing(&self, t: f64) -> Result<f64> {
        (self.forcing)(t)
    }

    pub fn forcing_fn(&self) -> &ScalarFn {
        &self.forcing
    }

    pub fn forcing_dt_bound(&self) -> Option<f64> {
        self.forcing_dt_bound
    }

    pub fn family(&self) -> &KernelFamily {
        &self.family
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Kernels of a finite problem.
    pub fn kernels(&self) -> Result<&[Kernel]> {
        match &self.family {
            KernelFamily::Finite(k) => Ok(k),
            KernelFamily::Infinite(_) => Err(Error::invalid(
                "problem has an infinite kernel family; truncate it first",
            )),
        }
    }

    /// Bound metadata for every kernel of a finite problem.
    pub fn kernel_bounds(&self) -> Result<Vec<KernelBounds>> {
        self.kernels()?
            .iter()
            .map(|k| {
                k.bounds().copied().ok_or_else(|| {
                    Error::MissingMetadata(format!("kernel of order {} has no bounds", k.order()))
                })
            })
            .collect()
    }

    /// Finite problem keeping the orders selected by `truncation`. Finite
    /// families are returned unchanged.
    pub fn truncate(&self, truncation: Truncation) -> Result<Truncated> {
        let family = match &self.family {
            KernelFamily::Finite(k) => {
                return Ok(Truncated {
                    problem: self.clone(),
                    order: k.len(),
                    tail: None,
                })
            }
            KernelFamily::Infinite(f) => f,
        };
        let (order, tail) = match truncation {
            Truncation::Fixed(n) => {
                if n == 0 {
                    return Err(Error::invalid("truncation order must be at least 1"));
                }
                if n >= family.order_limit() {
                    return Err(Error::Capacity {
                        what: format!("truncation order {n}"),
                        limit: family.order_limit() - 1,
                    });
                }
                (n, family.tail(self.horizon, n)?)
            }
            Truncation::Tolerance(eps) => family.select_order(self.horizon, eps)?,
        };
        let kernels = (1..=order)
            .map(|n| family.kernel(n))
            .collect::<Result<Vec<_>>>()?;
        let mut problem = SecondKindProblem::finite(self.forcing.clone(), kernels, self.horizon)?;
        problem.forcing_dt_bound = self.forcing_dt_bound;
        Ok(Truncated {
            problem,
            order,
            tail: Some(tail),
        })
    }
}

impl fmt::Debug for SecondKindProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SecondKindProblem")
            .field("horizon", &self.horizon)
            .field("forcing_dt_bound", &self.forcing_dt_bound)
            .field("family", &self.family)
            .finish_non_exhaustive()
    }
}

/// `a(t) * prod_k phi(t, s_k)`. Two forms share a factor when their factor
/// handles are the same `Arc`.
#[derive(Clone)]
pub struct ProductForm {
    prefactor: ScalarFn,
    factor: PairFn,
}

impl ProductForm {
    pub fn new(prefactor: ScalarFn, factor: PairFn) -> Self {
        Self { prefactor, factor }
    }

    pub fn prefactor(&self, t: f64) -> Result<f64> {
        (self.prefactor)(t)
    }

    pub fn factor(&self, t: f64, s: f64) -> Result<f64> {
        (self.factor)(t, s)
    }

    pub fn factor_fn(&self) -> &PairFn {
        &self.factor
    }

    pub fn shares_factor(&self, other: &ProductForm) -> bool {
        Arc::ptr_eq(&self.factor, &other.factor)
    }

    pub fn eval(&self, t: f64, s: &[f64]) -> Result<f64> {
        let mut acc = self.prefactor(t)?;
        for &sk in s {
            acc *= self.factor(t, sk)?;
        }
        Ok(acc)
    }
}

impl fmt::Debug for ProductForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ProductForm { .. }")
    }
}

/// One term `K_n(t, s_1..s_n)` of a multi-linear equation together with its
/// time derivative `K_{n,t}`.
#[derive(Clone)]
pub struct MultilinearKernel {
    order: usize,
    value: MultiFn,
    dt: MultiFn,
    value_form: Option<ProductForm>,
    dt_form: Option<ProductForm>,
}

impl MultilinearKernel {
    pub fn new(order: usize, value: MultiFn, dt: MultiFn) -> Result<Self> {
        if order == 0 {
            return Err(Error::invalid("kernel order must be at least 1"));
        }
        Ok(Self {
            order,
            value,
            dt,
            value_form: None,
            dt_form: None,
        })
    }

    pub fn from_fns(
        order: usize,
        value: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
        dt: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        Self::new(
            order,
            Arc::new(move |t, s| Ok(value(t, s))),
            Arc::new(move |t, s| Ok(dt(t, s))),
        )
    }

    /// `K_n = a(t) prod beta(s_k)` with a time-independent factor, so that
    /// `K_{n,t} = a'(t) prod beta(s_k)`. Passing the same `beta` handle to
    /// several kernels lets the reduction keep the product structure.
    pub fn factorized(
        order: usize,
        prefactor: ScalarFn,
        prefactor_dt: ScalarFn,
        beta: PairFn,
    ) -> Result<Self> {
        let value_form = ProductForm::new(prefactor, beta.clone());
        let dt_form = ProductForm::new(prefactor_dt, beta);
        let (v, d) = (value_form.clone(), dt_form.clone());
        let mut k = Self::new(
            order,
            Arc::new(move |t, s| v.eval(t, s)),
            Arc::new(move |t, s| d.eval(t, s)),
        )?;
        k.value_form = Some(value_form);
        k.dt_form = Some(dt_form);
        Ok(k)
    }

    pub fn with_value_form(mut self, form: ProductForm) -> Self {
        self.value_form = Some(form);
        self
    }

    pub fn with_dt_form(mut self, form: ProductForm) -> Self {
        self.dt_form = Some(form);
        self
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self, t: f64, s: &[f64]) -> Result<f64> {
        (self.value)(t, s)
    }

    pub fn dt(&self, t: f64, s: &[f64]) -> Result<f64> {
        (self.dt)(t, s)
    }

    pub fn value_form(&self) -> Option<&ProductForm> {
        self.value_form.as_ref()
    }

    pub fn dt_form(&self) -> Option<&ProductForm> {
        self.dt_form.as_ref()
    }
}

impl fmt::Debug for MultilinearKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MultilinearKernel")
            .field("order", &self.order)
            .field("value_form", &self.value_form.is_some())
            .field("dt_form", &self.dt_form.is_some())
            .finish()
    }
}

#[derive(Clone)]
pub enum FirstKindKernels {
    /// `K_1..K_N`; higher orders vanish.
    Finite(Vec<MultilinearKernel>),
    /// `K_n` for every `n`.
    Generated(Arc<dyn Fn(usize) -> Result<MultilinearKernel> + Send + Sync>),
}

/// `sum_n (1/n!) int..int K_n(t, s..) x(s_1)..x(s_n) ds = f(t)`.
#[derive(Clone)]
pub struct FirstKindProblem {
    kernels: FirstKindKernels,
    rhs: ScalarFn,
    rhs_dt: ScalarFn,
    horizon: f64,
    max_order: usize,
}

impl FirstKindProblem {
    pub fn new(
        kernels: Vec<MultilinearKernel>,
        rhs: ScalarFn,
        rhs_dt: ScalarFn,
        horizon: f64,
    ) -> Result<Self> {
        check_horizon(horizon)?;
        let mut kernels = kernels;
        kernels.sort_by_key(MultilinearKernel::order);
        for (idx, k) in kernels.iter().enumerate() {
            if k.order() != idx + 1 {
                return Err(Error::invalid(format!(
                    "first-kind kernel orders must be contiguous from 1; found order {} at position {}",
                    k.order(),
                    idx + 1
                )));
            }
        }
        if kernels.is_empty() {
            return Err(Error::invalid("first-kind problem needs at least K_1"));
        }
        let max_order = kernels.len();
        Self::checked(
            FirstKindKernels::Finite(kernels),
            rhs,
            rhs_dt,
            horizon,
            max_order,
        )
    }

    /// Unbounded family; `max_order` is the default reduction order.
    pub fn generated(
        generator: impl Fn(usize) -> Result<MultilinearKernel> + Send + Sync + 'static,
        rhs: ScalarFn,
        rhs_dt: ScalarFn,
        horizon: f64,
        max_order: usize,
    ) -> Result<Self> {
        check_horizon(horizon)?;
        if max_order == 0 {
            return Err(Error::invalid("max_order must be at least 1"));
        }
        Self::checked(
            FirstKindKernels::Generated(Arc::new(generator)),
            rhs,
            rhs_dt,
            horizon,
            max_order,
        )
    }

    fn checked(
        kernels: FirstKindKernels,
        rhs: ScalarFn,
        rhs_dt: ScalarFn,
        horizon: f64,
        max_order: usize,
    ) -> Result<Self> {
        let f0 = rhs(0.0)?;
        if f0.abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "first-kind right-hand side must vanish at t = 0, got f(0) = {f0}"
            )));
        }
        Ok(Self {
            kernels,
            rhs,
            rhs_dt,
            horizon,
            max_order,
        })
    }

    /// `K_n`, or `None` when the term vanishes.
    pub fn kernel(&self, order: usize) -> Result<Option<MultilinearKernel>> {
        match &self.kernels {
            FirstKindKernels::Finite(k) => Ok(k.get(order.wrapping_sub(1)).cloned()),
            FirstKindKernels::Generated(g) => {
                let k = g(order)?;
                if k.order() != order {
                    return Err(Error::invalid(format!(
                        "generator returned a kernel of order {} for order {order}",
                        k.order()
                    )));
                }
                Ok(Some(k))
            }
        }
    }

    pub fn rhs(&self, t: f64) -> Result<f64> {
        (self.rhs)(t)
    }

    pub fn rhs_dt(&self, t: f64) -> Result<f64> {
        (self.rhs_dt)(t)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn with_horizon(&self, horizon: f64) -> Result<Self> {
        check_horizon(horizon)?;
        let mut p = self.clone();
        p.horizon = horizon;
        Ok(p)
    }

    pub fn with_max_order(mut self, max_order: usize) -> Result<Self> {
        if max_order == 0 {
            return Err(Error::invalid("max_order must be at least 1"));
        }
        self.max_order = max_order;
        Ok(self)
    }
}

impl fmt::Debug for FirstKindProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FirstKindProblem")
            .field("horizon", &self.horizon)
            .field("max_order", &self.max_order)
            .finish_non_exhaustive()
    }
}

/// A Volterra-series kernel `K_n(t, s_1..s_n)` of the open-loop block.
#[derive(Clone)]
pub enum SeriesShape {
    General(MultiFn),
    /// `a(t) prod k(t, s_i)`.
    Factorized(ProductForm),
}

#[derive(Clone)]
pub struct SeriesKernel {
    pub order: usize,
    pub shape: SeriesShape,
    /// Bounds for the closed-loop integrand `f_n`, if known.
    pub bounds: Option<KernelBounds>,
}

impl SeriesKernel {
    pub fn general(order: usize, k: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            order,
            shape: SeriesShape::General(Arc::new(move |t, s| Ok(k(t, s)))),
            bounds: None,
        }
    }

    pub fn factorized(order: usize, form: ProductForm) -> Self {
        Self {
            order,
            shape: SeriesShape::Factorized(form),
            bounds: None,
        }
    }

    pub fn with_bounds(mut self, bounds: KernelBounds) -> Self {
        self.bounds = Some(bounds);
        self
    }
}

/// Closes the loop `x = u - g(t, y)` around the series `y = V(x)`:
/// `f_n(t, s.., y..) = K_n(t, s..) prod_k (u(s_k) - g(s_k, y_k))`.
pub fn build_feedback_problem(
    series_kernels: Vec<SeriesKernel>,
    control: ScalarFn,
    feedback: FeedbackFn,
    forcing: ScalarFn,
    horizon: f64,
) -> Result<SecondKindProblem> {
    let mut seen = vec![false; series_kernels.len() + 1];
    for sk in &series_kernels {
        if sk.order == 0 || sk.order > series_kernels.len() {
            return Err(Error::invalid(format!(
                "series kernel orders must be 1..={}; found {}",
                series_kernels.len(),
                sk.order
            )));
        }
        if std::mem::replace(&mut seen[sk.order], true) {
            return Err(Error::invalid(format!(
                "duplicate series kernel order {}",
                sk.order
            )));
        }
    }

    let input = {
        let (u, g) = (control.clone(), feedback.clone());
        move |s: f64, y: f64| -> Result<f64> { Ok(u(s)? - g(s, y)?) }
    };

    let kernels = series_kernels
        .into_iter()
        .map(|sk| {
            let n = sk.order;
            let mut kernel = match sk.shape {
                SeriesShape::General(kn) => {
                    let input = input.clone();
                    Kernel::fallible(
                        n,
                        Arc::new(move |t, s, y| {
                            let mut acc = kn(t, s)?;
                            for (&sk, &yk) in s.iter().zip(y) {
                                acc *= input(sk, yk)?;
                            }
                            Ok(acc)
                        }),
                    )?
                }
                SeriesShape::Factorized(form) => {
                    let input = input.clone();
                    let f = form.clone();
                    let factor: FactorFn =
                        Arc::new(move |t, s, y| Ok(f.factor(t, s)? * input(s, y)?));
                    let prefactor = form.prefactor.clone();
                    Kernel::from_separable(n, SeparableForm::new(prefactor, factor))?
                }
            };
            if let Some(b) = sk.bounds {
                b.validate()?;
                kernel = kernel.with_bounds(b);
            }
            Ok(kernel)
        })
        .collect::<Result<Vec<_>>>()?;

    SecondKindProblem::finite(forcing, kernels, horizon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{constant_fn, eval_kernel, scalar_fn};
    use rand::{rngs::StdRng, Rng, SeedableRng};

    fn g_fn(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> FeedbackFn {
        Arc::new(move |t, y| Ok(f(t, y)))
    }

    #[test]
    fn no_feedback_unit_control_gives_series_kernels() {
        let p = build_feedback_problem(
            vec![
                SeriesKernel::general(1, |t, s| t + s[0]),
                SeriesKernel::general(2, |t, s| t * s[0] * s[1]),
            ],
            constant_fn(1.0),
            g_fn(|_, _| 0.0),
            constant_fn(0.0),
            1.0,
        )
        .unwrap();
        let k = p.kernels().unwrap();
        assert_eq!(eval_kernel(&k[0], 0.8, &[0.3], &[5.0]).unwrap(), 0.8 + 0.3);
        assert_eq!(
            eval_kernel(&k[1], 0.8, &[0.3, 0.5], &[5.0, -1.0]).unwrap(),
            0.8 * 0.3 * 0.5
        );
    }

    #[test]
    fn unit_feedback_gives_one_minus_y() {
        let p = build_feedback_problem(
            vec![SeriesKernel::general(1, |_, _| 1.0)],
            constant_fn(1.0),
            g_fn(|_, y| y),
            constant_fn(0.0),
            1.0,
        )
        .unwrap();
        let k = &p.kernels().unwrap()[0];
        for y in [-2.0, 0.0, 0.5, 3.0] {
            assert_eq!(eval_kernel(k, 1.0, &[0.5], &[y]).unwrap(), 1.0 - y);
        }
    }

    #[test]
    fn negative_feedback_zero_control_gives_y() {
        let p = build_feedback_problem(
            vec![SeriesKernel::general(1, |_, _| 1.0)],
            constant_fn(0.0),
            g_fn(|_, y| -y),
            constant_fn(0.0),
            1.0,
        )
        .unwrap();
        let k = &p.kernels().unwrap()[0];
        for y in [-2.0, 0.0, 0.5, 3.0] {
            assert_eq!(eval_kernel(k, 1.0, &[0.5], &[y]).unwrap(), y);
        }
    }

    #[test]
    fn duplicate_orders_rejected() {
        let r = build_feedback_problem(
            vec![
                SeriesKernel::general(1, |_, _| 1.0),
                SeriesKernel::general(1, |_, _| 2.0),
            ],
            constant_fn(0.0),
            g_fn(|_, _| 0.0),
            constant_fn(0.0),
            1.0,
        );
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn zero_feedback_matches_series_times_control_product() {
        let u = |s: f64| 1.0 + s.sin();
        let p = build_feedback_problem(
            vec![
                SeriesKernel::general(1, |t, s| (-(t - s[0])).exp()),
                SeriesKernel::factorized(
                    2,
                    ProductForm::new(scalar_fn(|t| t.cos()), Arc::new(|_, s| Ok(1.0 + s))),
                ),
            ],
            scalar_fn(u),
            g_fn(|_, _| 0.0),
            constant_fn(0.0),
            2.0,
        )
        .unwrap();
        let k = p.kernels().unwrap();
        assert!(k[1].separable().is_some());
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..200 {
            let t: f64 = rng.gen_range(0.0..2.0);
            let s1: f64 = rng.gen_range(0.0..=t);
            let s2: f64 = rng.gen_range(0.0..=t);
            let y = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let v1 = eval_kernel(&k[0], t, &[s1], &y[..1]).unwrap();
            assert!((v1 - (-(t - s1)).exp() * u(s1)).abs() <= 1e-14);
            let v2 = eval_kernel(&k[1], t, &[s1, s2], &y).unwrap();
            let want = t.cos() * (1.0 + s1) * (1.0 + s2) * u(s1) * u(s2);
            assert!((v2 - want).abs() <= 1e-13 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn finite_family_order_checks() {
        let ks = vec![Kernel::zero(1).unwrap(), Kernel::zero(3).unwrap()];
        assert!(SecondKindProblem::finite(constant_fn(1.0), ks, 1.0).is_err());
        let ks = vec![Kernel::zero(2).unwrap(), Kernel::zero(1).unwrap()];
        let p = SecondKindProblem::finite(constant_fn(1.0), ks, 1.0).unwrap();
        assert_eq!(p.kernels().unwrap()[1].order(), 2);
    }

    #[test]
    fn divergent_infinite_family_rejected() {
        let fam = InfiniteFamily::new(Kernel::zero, |n| {
            (1..=n).map(|k| k as f64).product::<f64>() * 2f64.powi(n as i32)
        });
        assert!(matches!(
            SecondKindProblem::infinite(constant_fn(1.0), fam, 1.0),
            Err(Error::TailDivergence { .. })
        ));
    }

    #[test]
    fn truncation_parses() {
        assert_eq!("3".parse::<Truncation>().unwrap(), Truncation::Fixed(3));
        assert_eq!(
            "tol=1e-6".parse::<Truncation>().unwrap(),
            Truncation::Tolerance(1e-6)
        );
        assert!("0".parse::<Truncation>().is_err());
        assert!("tol=-1".parse::<Truncation>().is_err());
        assert!("abc".parse::<Truncation>().is_err());
    }

    #[test]
    fn first_kind_rhs_must_vanish_at_zero() {
        let k1 = MultilinearKernel::from_fns(1, |_, _| 1.0, |_, _| 0.0).unwrap();
        assert!(FirstKindProblem::new(
            vec![k1.clone()],
            scalar_fn(|t| t + 1.0),
            constant_fn(1.0),
            1.0
        )
        .is_err());
        assert!(FirstKindProblem::new(vec![k1], scalar_fn(|t| t), constant_fn(1.0), 1.0).is_ok());
    }
}
