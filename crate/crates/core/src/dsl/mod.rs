//! Expression language for kernels, forcing terms and their derivatives.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?
//! primary := number | variable | func '(' expr ')' | '(' expr ')'
//! ```
//!
//! `^` binds tighter than unary minus and associates to the right, so
//! `-2^2 = -4` and `2^3^2 = 512`.

mod bind;
mod eval;
mod lexer;
mod parser;
mod print;

use std::fmt;

pub use bind::{
    bind_first_kind_kernel, bind_gain, bind_kernel, bind_scalar, detect_separable, FactorCache,
    Separated,
};
pub use eval::{eval_expr, Env};
pub use parser::{parse, parse_in, Scope};
pub use print::print;

/// Source location of a node: byte range plus 1-based line and column of
/// its first character.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub line: usize,
    pub column: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    T,
    S(usize),
    X(usize),
    /// Control input in feedback gains.
    U,
    /// Order index in generated kernel families.
    N,
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::T => f.write_str("t"),
            Var::S(k) => write!(f, "s{k}"),
            Var::X(k) => write!(f, "x{k}"),
            Var::U => f.write_str("u"),
            Var::N => f.write_str("n"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Sqrt,
    Abs,
}

impl Func {
    pub const ALL: [Func; 6] = [
        Func::Exp,
        Func::Log,
        Func::Sin,
        Func::Cos,
        Func::Sqrt,
        Func::Abs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// Syntax tree node. Equality is structural and ignores spans.
#[derive(Debug, Clone)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl Expr {
    pub fn new(kind: ExprKind) -> Self {
        Self {
            kind,
            span: Span::default(),
        }
    }

    pub fn num(v: f64) -> Self {
        Self::new(ExprKind::Num(v))
    }

    pub fn var(v: Var) -> Self {
        Self::new(ExprKind::Var(v))
    }

    pub fn negate(e: Expr) -> Self {
        Self::new(ExprKind::Neg(Box::new(e)))
    }

    pub fn binary(op: BinOp, a: Expr, b: Expr) -> Self {
        Self::new(ExprKind::Binary(op, Box::new(a), Box::new(b)))
    }

    pub fn call(f: Func, e: Expr) -> Self {
        Self::new(ExprKind::Call(f, Box::new(e)))
    }

    /// Visits every variable reference.
    pub fn for_each_var(&self, f: &mut impl FnMut(Var)) {
        match &self.kind {
            ExprKind::Num(_) => {}
            ExprKind::Var(v) => f(*v),
            ExprKind::Neg(e) | ExprKind::Call(_, e) => e.for_each_var(f),
            ExprKind::Binary(_, a, b) => {
                a.for_each_var(f);
                b.for_each_var(f);
            }
        }
    }

    /// Largest `k` among the `s_k` and `x_k` references, 0 if none.
    pub fn max_index(&self) -> usize {
        let mut m = 0;
        self.for_each_var(&mut |v| {
            if let Var::S(k) | Var::X(k) = v {
                m = m.max(k);
            }
        });
        m
    }

    pub fn mentions(&self, pred: impl Fn(Var) -> bool) -> bool {
        let mut hit = false;
        self.for_each_var(&mut |v| hit |= pred(v));
        hit
    }

    /// Copy with the order index `n` replaced by a literal.
    pub fn fix_order(&self, n: usize) -> Expr {
        match &self.kind {
            ExprKind::Var(Var::N) => Expr {
                kind: ExprKind::Num(n as f64),
                span: self.span,
            },
            ExprKind::Num(_) | ExprKind::Var(_) => self.clone(),
            ExprKind::Neg(e) => Expr {
                kind: ExprKind::Neg(Box::new(e.fix_order(n))),
                span: self.span,
            },
            ExprKind::Call(f, e) => Expr {
                kind: ExprKind::Call(*f, Box::new(e.fix_order(n))),
                span: self.span,
            },
            ExprKind::Binary(op, a, b) => Expr {
                kind: ExprKind::Binary(*op, Box::new(a.fix_order(n)), Box::new(b.fix_order(n))),
                span: self.span,
            },
        }
    }

    /// Copy with every variable mapped through `f`.
    pub fn map_vars(&self, f: &impl Fn(Var) -> Var) -> Expr {
        let kind = match &self.kind {
            ExprKind::Num(v) => ExprKind::Num(*v),
            ExprKind::Var(v) => ExprKind::Var(f(*v)),
            ExprKind::Neg(e) => ExprKind::Neg(Box::new(e.map_vars(f))),
            ExprKind::Call(func, e) => ExprKind::Call(*func, Box::new(e.map_vars(f))),
            ExprKind::Binary(op, a, b) => {
                ExprKind::Binary(*op, Box::new(a.map_vars(f)), Box::new(b.map_vars(f)))
            }
        };
        Expr {
            kind,
            span: self.span,
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print(self))
    }
}
