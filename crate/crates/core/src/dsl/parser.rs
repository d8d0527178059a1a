use crate::error::{Error, Result};

use super::lexer::{syntax, tokenize, Tok, Token};
use super::{BinOp, Expr, ExprKind, Func, Span, Var};

/// Variables an expression may reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Scope {
    /// `s1..s_arity` and `x1..x_arity` are in scope.
    pub arity: usize,
    /// Allow the control input `u`.
    pub control: bool,
    /// Allow the order index `n`.
    pub order: bool,
}

impl Scope {
    pub fn kernel(arity: usize) -> Self {
        Self {
            arity,
            ..Self::default()
        }
    }

    /// Only `t`.
    pub fn scalar() -> Self {
        Self::default()
    }

    pub fn with_control(mut self) -> Self {
        self.control = true;
        self
    }

    pub fn with_order(mut self) -> Self {
        self.order = true;
        self
    }
}

/// Parses `src` with `t`, `s1..s_arity` and `x1..x_arity` in scope.
pub fn parse(src: &str, arity: usize) -> Result<Expr> {
    parse_in(src, &Scope::kernel(arity))
}

pub fn parse_in(src: &str, scope: &Scope) -> Result<Expr> {
    let tokens = tokenize(src)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        scope: *scope,
    };
    if matches!(p.peek().tok, Tok::End) {
        return Err(syntax(p.peek().span, "empty expression"));
    }
    let e = p.expr()?;
    match p.peek() {
        t if t.tok == Tok::End => Ok(e),
        t => Err(syntax(t.span, format!("unexpected `{}`", t.text))),
    }
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    scope: Scope,
}

fn join(a: Span, b: Span) -> Span {
    Span {
        start: a.start,
        end: b.end,
        line: a.line,
        column: a.column,
    }
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if t.tok != Tok::End {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<Token> {
        let t = self.next();
        if t.tok == want {
            Ok(t)
        } else if t.tok == Tok::End {
            Err(syntax(
                t.span,
                format!("expected {what}, found end of input"),
            ))
        } else {
            Err(syntax(
                t.span,
                format!("expected {what}, found `{}`", t.text),
            ))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().tok {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.next();
            let rhs = self.term()?;
            lhs = binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().tok {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.next();
            let rhs = self.unary()?;
            lhs = binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek().tok == Tok::Minus {
            let minus = self.next();
            let inner = self.unary()?;
            let span = join(minus.span, inner.span);
            return Ok(Expr {
                kind: ExprKind::Neg(Box::new(inner)),
                span,
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.primary()?;
        if self.peek().tok == Tok::Caret {
            self.next();
            let exponent = self.unary()?;
            return Ok(binary(BinOp::Pow, base, exponent));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr> {
        let t = self.next();
        match &t.tok {
            Tok::Num(v) => Ok(Expr {
                kind: ExprKind::Num(*v),
                span: t.span,
            }),
            Tok::LParen => {
                let inner = self.expr()?;
                let close = self.expect(Tok::RParen, "`)`")?;
                Ok(Expr {
                    kind: inner.kind,
                    span: join(t.span, close.span),
                })
            }
            Tok::Ident(name) => {
                if let Some(func) = Func::from_name(name) {
                    self.expect(Tok::LParen, &format!("`(` after `{name}`"))?;
                    let arg = self.expr()?;
                    let close = self.expect(Tok::RParen, "`)`")?;
                    return Ok(Expr {
                        kind: ExprKind::Call(func, Box::new(arg)),
                        span: join(t.span, close.span),
                    });
                }
                let var = self.variable(&t, name)?;
                Ok(Expr {
                    kind: ExprKind::Var(var),
                    span: t.span,
                })
            }
            Tok::End => Err(syntax(t.span, "unexpected end of input")),
            _ => Err(syntax(t.span, format!("unexpected `{}`", t.text))),
        }
    }

    fn variable(&self, t: &Token, name: &str) -> Result<Var> {
        match name {
            "t" => return Ok(Var::T),
            "u" if self.scope.control => return Ok(Var::U),
            "u" => return Err(syntax(t.span, "`u` is only available in feedback gains")),
            "n" if self.scope.order => return Ok(Var::N),
            "n" => {
                return Err(syntax(
                    t.span,
                    "`n` is only available in generated kernel families",
                ))
            }
            _ => {}
        }
        let indexed = name
            .strip_prefix('s')
            .map(|d| (true, d))
            .or_else(|| name.strip_prefix('x').map(|d| (false, d)));
        if let Some((is_s, digits)) = indexed {
            if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
                let k: usize = digits
                    .parse()
                    .map_err(|_| syntax(t.span, format!("index too large in `{name}`")))?;
                if k == 0 {
                    return Err(syntax(
                        t.span,
                        format!("indices start at 1, found `{name}`"),
                    ));
                }
                if k > self.scope.arity {
                    return Err(Error::Arity {
                        token: name.to_string(),
                        arity: self.scope.arity,
                        line: t.span.line,
                        column: t.span.column,
                    });
                }
                return Ok(if is_s { Var::S(k) } else { Var::X(k) });
            }
        }
        Err(syntax(t.span, format!("unknown identifier `{name}`")))
    }
}

fn binary(op: BinOp, a: Expr, b: Expr) -> Expr {
    let span = join(a.span, b.span);
    Expr {
        kind: ExprKind::Binary(op, Box::new(a), Box::new(b)),
        span,
    }
}
