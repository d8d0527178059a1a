//! TOML problem files.
//!
//! ```toml
//! kind = "second-kind"
//! horizon = 1.0
//! exact_solution = "exp(t)"
//!
//! [forcing]
//! expr = "1"
//! dt_bound = 0.0
//!
//! [[kernels]]
//! order = 1
//! expr = "x1"
//! lipschitz = 1.0
//! sup_bound = 2.718281828459045
//! grad_s_bound = 0.0
//! dt_bound = 0.0
//! ```

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::dsl::{self, parse_in, Expr, FactorCache, Scope};
use crate::error::{Error, Result};
use crate::kernel::{KernelBounds, ScalarFn};
use crate::problem::{
    build_feedback_problem, FirstKindProblem, InfiniteFamily, SecondKindProblem, Truncation,
    DEFAULT_ORDER_LIMIT,
};

/// A closed-form solution used as the reference in studies.
#[derive(Clone)]
pub struct ExactSolution {
    pub source: String,
    pub eval: ScalarFn,
}

impl fmt::Debug for ExactSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExactSolution")
            .field("source", &self.source)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub enum LoadedProblem {
    SecondKind(SecondKindProblem),
    FirstKind(FirstKindProblem),
}

#[derive(Debug, Clone)]
pub struct ProblemFile {
    pub name: String,
    pub problem: LoadedProblem,
    pub exact_solution: Option<ExactSolution>,
    /// Default truncation for infinite families.
    pub truncation: Option<Truncation>,
}

impl ProblemFile {
    pub fn second_kind(&self) -> Result<&SecondKindProblem> {
        match &self.problem {
            LoadedProblem::SecondKind(p) => Ok(p),
            LoadedProblem::FirstKind(_) => Err(Error::invalid(format!(
                "`{}` is a first-kind problem",
                self.name
            ))),
        }
    }

    pub fn first_kind(&self) -> Result<&FirstKindProblem> {
        match &self.problem {
            LoadedProblem::FirstKind(p) => Ok(p),
            LoadedProblem::SecondKind(_) => Err(Error::invalid(format!(
                "`{}` is a second-kind problem",
                self.name
            ))),
        }
    }

    pub fn horizon(&self) -> f64 {
        match &self.problem {
            LoadedProblem::SecondKind(p) => p.horizon(),
            LoadedProblem::FirstKind(p) => p.horizon(),
        }
    }

    /// Same problem on another horizon.
    pub fn with_horizon(&self, horizon: f64) -> Result<Self> {
        let problem = match &self.problem {
            LoadedProblem::SecondKind(p) => LoadedProblem::SecondKind(p.with_horizon(horizon)?),
            LoadedProblem::FirstKind(p) => LoadedProblem::FirstKind(p.with_horizon(horizon)?),
        };
        Ok(Self {
            problem,
            ..self.clone()
        })
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ForcingDoc {
    expr: String,
    dt_bound: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelDoc {
    order: usize,
    expr: String,
    lipschitz: Option<f64>,
    sup_bound: Option<f64>,
    grad_s_bound: Option<f64>,
    dt_bound: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InfiniteDoc {
    prefactor: String,
    factor: String,
    sup_bound: String,
    lipschitz: Option<String>,
    grad_s_bound: Option<String>,
    dt_bound: Option<String>,
    order_limit: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FeedbackDoc {
    control: String,
    gain: String,
    kernels: Vec<KernelDoc>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SecondKindDoc {
    #[allow(dead_code)]
    kind: String,
    horizon: f64,
    exact_solution: Option<String>,
    truncation: Option<String>,
    forcing: ForcingDoc,
    kernels: Option<Vec<KernelDoc>>,
    infinite: Option<InfiniteDoc>,
    feedback: Option<FeedbackDoc>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RhsDoc {
    f: String,
    f_t: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FirstKindKernelDoc {
    order: usize,
    k: String,
    k_t: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FirstKindDoc {
    #[allow(dead_code)]
    kind: String,
    horizon: f64,
    exact_solution: Option<String>,
    max_order: Option<usize>,
    rhs: RhsDoc,
    kernels: Vec<FirstKindKernelDoc>,
}

fn typed<T: DeserializeOwned>(src: &str) -> Result<T> {
    let de = toml::Deserializer::parse(src).map_err(|e| Error::schema("", e.message()))?;
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::schema(
            if path == "." { String::new() } else { path },
            e.into_inner().message(),
        )
    })
}

/// Parses a DSL field, reporting failures against the field path.
fn expr(src: &str, scope: Scope, path: &str) -> Result<Expr> {
    parse_in(src, &scope).map_err(|e| Error::schema(path, e.to_string()))
}

fn scalar(src: &str, path: &str) -> Result<ScalarFn> {
    dsl::bind_scalar(&expr(src, Scope::scalar(), path)?)
}

fn bounds(doc: &KernelDoc, path: &str) -> Result<Option<KernelBounds>> {
    let fields = [
        ("lipschitz", doc.lipschitz),
        ("sup_bound", doc.sup_bound),
        ("grad_s_bound", doc.grad_s_bound),
        ("dt_bound", doc.dt_bound),
    ];
    if fields.iter().all(|(_, v)| v.is_none()) {
        return Ok(None);
    }
    if let Some((name, _)) = fields.iter().find(|(_, v)| v.is_none()) {
        return Err(Error::schema(
            format!("{path}.{name}"),
            "kernel bounds must be given all together or not at all",
        ));
    }
    KernelBounds::new(
        doc.lipschitz.unwrap_or_default(),
        doc.sup_bound.unwrap_or_default(),
        doc.grad_s_bound.unwrap_or_default(),
        doc.dt_bound.unwrap_or_default(),
    )
    .map(Some)
    .map_err(|e| Error::schema(path, e.to_string()))
}

/// Orders must be exactly `1..=N` after sorting.
fn check_orders(orders: &[usize], path: &str) -> Result<()> {
    let mut sorted = orders.to_vec();
    sorted.sort_unstable();
    for (idx, &n) in sorted.iter().enumerate() {
        if n != idx + 1 {
            return Err(Error::schema(
                path,
                format!("kernel orders must be contiguous from 1; got {sorted:?}"),
            ));
        }
    }
    if sorted.is_empty() {
        return Err(Error::schema(path, "at least one kernel is required"));
    }
    Ok(())
}

fn exact(src: Option<&str>) -> Result<Option<ExactSolution>> {
    src.map(|s| {
        Ok(ExactSolution {
            source: s.to_string(),
            eval: scalar(s, "exact_solution")?,
        })
    })
    .transpose()
}

/// Reads and binds a problem file.
pub fn load_problem(path: impl AsRef<Path>) -> Result<ProblemFile> {
    let path = path.as_ref();
    let src = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    parse_problem(&src, &name)
}

/// Parses a problem document held in memory.
pub fn parse_problem(src: &str, name: &str) -> Result<ProblemFile> {
    let table: toml::Table = src
        .parse()
        .map_err(|e: toml::de::Error| Error::schema("", e.message()))?;
    let kind = match table.get("kind") {
        None => return Err(Error::schema("kind", "missing field `kind`")),
        Some(toml::Value::String(s)) => s.clone(),
        Some(_) => return Err(Error::schema("kind", "expected a string")),
    };
    match kind.as_str() {
        "second-kind" => second_kind(typed(src)?, name),
        "first-kind" => first_kind(typed(src)?, name),
        other => Err(Error::schema(
            "kind",
            format!("unknown kind `{other}`, expected `second-kind` or `first-kind`"),
        )),
    }
}

fn second_kind(doc: SecondKindDoc, name: &str) -> Result<ProblemFile> {
    let forcing = scalar(&doc.forcing.expr, "forcing.expr")?;
    let sources = [
        doc.kernels.is_some(),
        doc.infinite.is_some(),
        doc.feedback.is_some(),
    ];
    if sources.iter().filter(|&&b| b).count() != 1 {
        return Err(Error::schema(
            "",
            "exactly one of `kernels`, `infinite` or `feedback` must be present",
        ));
    }
    let mut cache = FactorCache::default();
    let mut problem = if let Some(kernels) = &doc.kernels {
        check_orders(
            &kernels.iter().map(|k| k.order).collect::<Vec<_>>(),
            "kernels",
        )?;
        let bound = kernels
            .iter()
            .enumerate()
            .map(|(i, k)| {
                let path = format!("kernels[{i}]");
                let e = expr(&k.expr, Scope::kernel(k.order), &format!("{path}.expr"))?;
                cache.kernel(&e, k.order, bounds(k, &path)?)
            })
            .collect::<Result<Vec<_>>>()?;
        SecondKindProblem::finite(forcing, bound, doc.horizon)
            .map_err(|e| Error::schema("horizon", e.to_string()))?
    } else if let Some(inf) = &doc.infinite {
        SecondKindProblem::infinite(forcing, infinite(inf)?, doc.horizon)?
    } else {
        let fb = doc.feedback.as_ref().expect("checked above");
        check_orders(
            &fb.kernels.iter().map(|k| k.order).collect::<Vec<_>>(),
            "feedback.kernels",
        )?;
        let control = scalar(&fb.control, "feedback.control")?;
        let gain = dsl::bind_gain(
            &expr(&fb.gain, Scope::kernel(1).with_control(), "feedback.gain")?,
            control.clone(),
        )
        .map_err(|e| Error::schema("feedback.gain", e.to_string()))?;
        let series = fb
            .kernels
            .iter()
            .enumerate()
            .map(|(i, k)| {
                let path = format!("feedback.kernels[{i}]");
                let e = expr(&k.expr, Scope::kernel(k.order), &format!("{path}.expr"))?;
                cache.series(&e, k.order, bounds(k, &path)?)
            })
            .collect::<Result<Vec<_>>>()?;
        build_feedback_problem(series, control, gain, forcing, doc.horizon)?
    };
    if let Some(m0) = doc.forcing.dt_bound {
        problem = problem
            .with_forcing_dt_bound(m0)
            .map_err(|e| Error::schema("forcing.dt_bound", e.to_string()))?;
    }
    let truncation = doc
        .truncation
        .as_deref()
        .map(|s| {
            s.parse::<Truncation>()
                .map_err(|e| Error::schema("truncation", e.to_string()))
        })
        .transpose()?;
    Ok(ProblemFile {
        name: name.to_string(),
        problem: LoadedProblem::SecondKind(problem),
        exact_solution: exact(doc.exact_solution.as_deref())?,
        truncation,
    })
}

type OrderFn = Arc<dyn Fn(usize) -> Result<f64> + Send + Sync>;

/// Expression in the order index `n` alone.
fn order_fn(src: &str, path: &str) -> Result<OrderFn> {
    let e = expr(src, Scope::scalar().with_order(), path)?;
    if e.mentions(|v| v == dsl::Var::T) {
        return Err(Error::schema(path, "may depend on `n` only"));
    }
    Ok(Arc::new(move |n| {
        dsl::eval_expr(&e, &dsl::Env::at(0.0).with_n(n as f64))
    }))
}

fn infinite(doc: &InfiniteDoc) -> Result<InfiniteFamily> {
    let prefactor = expr(
        &doc.prefactor,
        Scope::scalar().with_order(),
        "infinite.prefactor",
    )?;
    let phi = expr(&doc.factor, Scope::kernel(1), "infinite.factor")?;
    let sup = order_fn(&doc.sup_bound, "infinite.sup_bound")?;
    let optional =
        |src: &Option<String>, path: &str| src.as_deref().map(|s| order_fn(s, path)).transpose();
    let lipschitz = optional(&doc.lipschitz, "infinite.lipschitz")?;
    let grad = optional(&doc.grad_s_bound, "infinite.grad_s_bound")?;
    let dt = optional(&doc.dt_bound, "infinite.dt_bound")?;
    let given = [lipschitz.is_some(), grad.is_some(), dt.is_some()];
    if given.iter().any(|&b| b) && !given.iter().all(|&b| b) {
        return Err(Error::schema(
            "infinite",
            "lipschitz, grad_s_bound and dt_bound must be given together",
        ));
    }
    let metadata = lipschitz.zip(grad).zip(dt).map(|((l, g), d)| (l, g, d));
    let sup_for_bounds = sup.clone();
    let mut cache = FactorCache::default();
    // warm the cache so every order shares the factor handle
    cache.product_kernel(&prefactor.fix_order(1), &phi, 1)?;
    let cache = Arc::new(std::sync::Mutex::new(cache));
    let generator = move |n: usize| {
        let k = cache
            .lock()
            .expect("factor cache poisoned")
            .product_kernel(&prefactor.fix_order(n), &phi, n)?;
        match &metadata {
            None => Ok(k),
            Some((l, g, d)) => {
                Ok(k.with_bounds(KernelBounds::new(l(n)?, sup_for_bounds(n)?, g(n)?, d(n)?)?))
            }
        }
    };
    let family = InfiniteFamily::new(generator, move |n| sup(n).unwrap_or(f64::NAN));
    Ok(family.with_order_limit(doc.order_limit.unwrap_or(DEFAULT_ORDER_LIMIT)))
}

fn first_kind(doc: FirstKindDoc, name: &str) -> Result<ProblemFile> {
    let rhs = scalar(&doc.rhs.f, "rhs.f")?;
    let rhs_dt = scalar(&doc.rhs.f_t, "rhs.f_t")?;
    check_orders(
        &doc.kernels.iter().map(|k| k.order).collect::<Vec<_>>(),
        "kernels",
    )?;
    let mut cache = FactorCache::default();
    let kernels = doc
        .kernels
        .iter()
        .enumerate()
        .map(|(i, k)| {
            let path = format!("kernels[{i}]");
            let scope = Scope::kernel(k.order);
            let value = expr(&k.k, scope, &format!("{path}.k"))?;
            let dt = expr(&k.k_t, scope, &format!("{path}.k_t"))?;
            cache
                .first_kind(&value, &dt, k.order)
                .map_err(|e| Error::schema(path, e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut problem = FirstKindProblem::new(kernels, rhs, rhs_dt, doc.horizon)
        .map_err(|e| Error::schema("rhs.f", e.to_string()))?;
    if let Some(n) = doc.max_order {
        problem = problem
            .with_max_order(n)
            .map_err(|e| Error::schema("max_order", e.to_string()))?;
    }
    Ok(ProblemFile {
        name: name.to_string(),
        problem: LoadedProblem::FirstKind(problem),
        exact_solution: exact(doc.exact_solution.as_deref())?,
        truncation: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::eval_kernel;

    const EXP: &str = r#"
kind = "second-kind"
horizon = 1.0
exact_solution = "exp(t)"

[forcing]
expr = "1"
dt_bound = 0.0

[[kernels]]
order = 1
expr = "x1"
"#;

    #[test]
    fn loads_second_kind() {
        let pf = parse_problem(EXP, "exp").unwrap();
        let p = pf.second_kind().unwrap();
        assert_eq!(p.kernels().unwrap().len(), 1);
        assert_eq!(
            eval_kernel(&p.kernels().unwrap()[0], 1.0, &[0.5], &[3.0]).unwrap(),
            3.0
        );
        assert_eq!(pf.exact_solution.as_ref().unwrap().source, "exp(t)");
        assert_eq!(p.forcing_dt_bound(), Some(0.0));
    }

    #[test]
    fn order_gap_is_schema_error() {
        let src = EXP.replace(
            "order = 1\nexpr = \"x1\"",
            "order = 1\nexpr = \"x1\"\n\n[[kernels]]\norder = 3\nexpr = \"x1*x2*x3\"",
        );
        match parse_problem(&src, "gap") {
            Err(Error::Schema { path, .. }) => assert_eq!(path, "kernels"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_f_t_is_named() {
        let src = r#"
kind = "first-kind"
horizon = 0.5
[rhs]
f = "t"
[[kernels]]
order = 1
k = "1"
k_t = "0"
"#;
        let err = parse_problem(src, "fk").unwrap_err();
        assert!(err.to_string().contains("f_t"), "{err}");
    }

    #[test]
    fn parse_errors_carry_field_and_location() {
        let src = EXP.replace("expr = \"x1\"", "expr = \"x1 +\"");
        match parse_problem(&src, "bad") {
            Err(Error::Schema { path, message }) => {
                assert_eq!(path, "kernels[0].expr");
                assert!(message.contains("1:5"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        let src = EXP.replace("expr = \"x1\"", "expr = \"x2\"");
        assert!(parse_problem(&src, "arity")
            .unwrap_err()
            .to_string()
            .contains("x2"));
    }

    #[test]
    fn schema_paths() {
        let src = EXP.replace("horizon = 1.0", "horizon = \"one\"");
        assert!(
            matches!(parse_problem(&src, "h"), Err(Error::Schema { path, .. }) if path == "horizon")
        );
        let src = EXP.replace("dt_bound = 0.0", "dt_bound = 0.0\nextra = 1");
        assert!(
            matches!(parse_problem(&src, "x"), Err(Error::Schema { path, .. }) if path.starts_with("forcing"))
        );
        let src = EXP.replace("expr = \"x1\"", "expr = \"x1\"\nlipschitz = 1.0");
        assert!(
            matches!(parse_problem(&src, "b"), Err(Error::Schema { path, .. }) if path == "kernels[0].sup_bound")
        );
        assert!(
            matches!(parse_problem("horizon = 1", "k"), Err(Error::Schema { path, .. }) if path == "kind")
        );
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_problem("/nonexistent/p.toml"),
            Err(Error::Io { .. })
        ));
    }
}
