//! Order-`n` integrands `f_n(t, s_1..s_n, x_1..x_n)` and their bound metadata.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fallible scalar contract `t -> value`.
pub type ScalarFn = Arc<dyn Fn(f64) -> Result<f64> + Send + Sync>;
/// Fallible kernel contract `(t, s, x) -> value` with `|s| = |x| = order`.
pub type KernelFn = Arc<dyn Fn(f64, &[f64], &[f64]) -> Result<f64> + Send + Sync>;
/// Fallible per-coordinate factor `(t, s, x) -> value`.
pub type FactorFn = Arc<dyn Fn(f64, f64, f64) -> Result<f64> + Send + Sync>;

/// Wraps an infallible closure as a [`ScalarFn`].
pub fn scalar_fn(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> ScalarFn {
    Arc::new(move |t| Ok(f(t)))
}

/// Constant [`ScalarFn`].
pub fn constant_fn(c: f64) -> ScalarFn {
    Arc::new(move |_| Ok(c))
}

/// Per-order constants used by the error analysis.
///
/// `lipschitz` is the global Lipschitz constant in the `x` arguments (sum
/// norm), `sup_bound` bounds `|f_n|`, `grad_s_bound` bounds the Euclidean
/// norm of the `s`-gradient and `dt_bound` bounds `|df_n/dt|`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KernelBounds {
    pub lipschitz: f64,
    pub sup_bound: f64,
    pub grad_s_bound: f64,
    pub dt_bound: f64,
}

impl KernelBounds {
    pub fn new(lipschitz: f64, sup_bound: f64, grad_s_bound: f64, dt_bound: f64) -> Result<Self> {
        let b = Self {
            lipschitz,
            sup_bound,
            grad_s_bound,
            dt_bound,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            ("lipschitz", self.lipschitz),
            ("sup_bound", self.sup_bound),
            ("grad_s_bound", self.grad_s_bound),
            ("dt_bound", self.dt_bound),
        ];
        for (name, v) in all {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!(
                    "kernel bound {name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Product form `a(t) * prod_k phi(t, s_k, x_k)`.
#[derive(Clone)]
pub struct SeparableForm {
    prefactor: ScalarFn,
    factor: FactorFn,
}

impl SeparableForm {
    pub fn new(prefactor: ScalarFn, factor: FactorFn) -> Self {
        Self { prefactor, factor }
    }

    pub fn from_fns(
        prefactor: impl Fn(f64) -> f64 + Send + Sync + 'static,
        factor: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            prefactor: scalar_fn(prefactor),
            factor: Arc::new(move |t, s, x| Ok(factor(t, s, x))),
        }
    }

    pub fn prefactor(&self, t: f64) -> Result<f64> {
        (self.prefactor)(t)
    }

    pub fn factor(&self, t: f64, s: f64, x: f64) -> Result<f64> {
        (self.factor)(t, s, x)
    }

    /// Evaluates the full product at one point.
    pub fn eval(&self, t: f64, s: &[f64], x: &[f64]) -> Result<f64> {
        let mut acc = self.prefactor(t)?;
        for (&sk, &xk) in s.iter().zip(x) {
            acc *= self.factor(t, sk, xk)?;
        }
        Ok(acc)
    }
}

impl fmt::Debug for SeparableForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SeparableForm { .. }")
    }
}

/// An order-`n` kernel: an evaluation contract plus optional separable
/// fast path and bound metadata.
#[derive(Clone)]
pub struct Kernel {
    order: usize,
    eval: KernelFn,
    separable: Option<SeparableForm>,
    bounds: Option<KernelBounds>,
}

impl Kernel {
    /// Kernel from an infallible closure.
    pub fn new(
        order: usize,
        f: impl Fn(f64, &[f64], &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        Self::fallible(order, Arc::new(move |t, s, x| Ok(f(t, s, x))))
    }

    pub fn fallible(order: usize, eval: KernelFn) -> Result<Self> {
        if order == 0 {
            return Err(Error::invalid("kernel order must be at least 1"));
        }
        Ok(Self {
            order,
            eval,
            separable: None,
            bounds: None,
        })
    }

    /// Kernel defined by its product form; the evaluation contract is the
    /// product itself.
    pub fn from_separable(order: usize, form: SeparableForm) -> Result<Self> {
        let f = form.clone();
        let mut k = Self::fallible(order, Arc::new(move |t, s, x| f.eval(t, s, x)))?;
        k.separable = Some(form);
        Ok(k)
    }

    /// The identically zero kernel of the given order.
    pub fn zero(order: usize) -> Result<Self> {
        Self::from_separable(order, SeparableForm::from_fns(|_| 0.0, |_, _, _| 1.0))
    }

    /// Attaches a product form. The caller asserts it agrees with `eval`;
    /// [`Kernel::separable_discrepancy`] can sample the claim.
    pub fn with_separable(mut self, form: SeparableForm) -> Self {
        self.separable = Some(form);
        self
    }

    pub fn with_bounds(mut self, bounds: KernelBounds) -> Self {
        self.bounds = Some(bounds);
        self
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn separable(&self) -> Option<&SeparableForm> {
        self.separable.as_ref()
    }

    pub fn bounds(&self) -> Option<&KernelBounds> {
        self.bounds.as_ref()
    }

    /// Evaluation without arity or domain checks; solvers only call this on
    /// grid points, which are admissible by construction.
    #[inline]
    pub(crate) fn eval_unchecked(&self, t: f64, s: &[f64], x: &[f64]) -> Result<f64> {
        (self.eval)(t, s, x)
    }

    /// `|eval - product form|` at one point, or `None` without a product form.
    pub fn separable_discrepancy(&self, t: f64, s: &[f64], x: &[f64]) -> Result<Option<f64>> {
        match &self.separable {
            None => Ok(None),
            Some(form) => {
                let full = eval_kernel(self, t, s, x)?;
                Ok(Some((full - form.eval(t, s, x)?).abs()))
            }
        }
    }
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Kernel")
            .field("order", &self.order)
            .field("separable", &self.separable.is_some())
            .field("bounds", &self.bounds)
            .finish()
    }
}

/// Evaluates `f_n(t, s, x)` after checking arity and `0 <= s_k <= t`.
pub fn eval_kernel(k: &Kernel, t: f64, s: &[f64], x: &[f64]) -> Result<f64> {
    if s.len() != k.order || x.len() != k.order {
        return Err(Error::invalid(format!(
            "kernel of order {} called with {} s-values and {} x-values",
            k.order,
            s.len(),
            x.len()
        )));
    }
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("t = {t} is negative")));
    }
    if let Some(bad) = s.iter().find(|&&sk| !(sk >= 0.0 && sk <= t)) {
        return Err(Error::Domain(format!("s = {bad} not in [0, {t}]")));
    }
    k.eval_unchecked(t, s, x)
}
