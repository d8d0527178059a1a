use crate::error::{Error, Result};

use super::{BinOp, Expr, ExprKind, Func, Var};

/// Variable bindings for [`eval_expr`].
#[derive(Debug, Clone, Copy, Default)]
pub struct Env<'a> {
    pub t: f64,
    pub s: &'a [f64],
    pub x: &'a [f64],
    pub u: Option<f64>,
    pub n: Option<f64>,
}

impl<'a> Env<'a> {
    pub fn at(t: f64) -> Self {
        Env {
            t,
            ..Env::default()
        }
    }

    pub fn with_s(mut self, s: &'a [f64]) -> Self {
        self.s = s;
        self
    }

    pub fn with_x(mut self, x: &'a [f64]) -> Self {
        self.x = x;
        self
    }

    pub fn with_u(mut self, u: f64) -> Self {
        self.u = Some(u);
        self
    }

    pub fn with_n(mut self, n: f64) -> Self {
        self.n = Some(n);
        self
    }

    fn lookup(&self, v: Var) -> Result<f64> {
        let found = match v {
            Var::T => Some(self.t),
            Var::S(k) => self.s.get(k - 1).copied(),
            Var::X(k) => self.x.get(k - 1).copied(),
            Var::U => self.u,
            Var::N => self.n,
        };
        found.ok_or_else(|| Error::Unbound(v.to_string()))
    }
}

fn fault(op: &'static str, operand: f64) -> Error {
    Error::EvalFault { op, operand }
}

fn checked(v: f64, op: &'static str, operand: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(fault(op, operand))
    }
}

/// Evaluates `e` under `env`. Domain faults and non-finite intermediate
/// results are errors.
pub fn eval_expr(e: &Expr, env: &Env) -> Result<f64> {
    match &e.kind {
        ExprKind::Num(v) => Ok(*v),
        ExprKind::Var(v) => env.lookup(*v),
        ExprKind::Neg(a) => Ok(-eval_expr(a, env)?),
        ExprKind::Binary(op, a, b) => {
            let l = eval_expr(a, env)?;
            let r = eval_expr(b, env)?;
            match op {
                BinOp::Add => checked(l + r, "+", l),
                BinOp::Sub => checked(l - r, "-", l),
                BinOp::Mul => checked(l * r, "*", l),
                BinOp::Div if r == 0.0 => Err(fault("/", r)),
                BinOp::Div => checked(l / r, "/", r),
                BinOp::Pow if l == 0.0 && r < 0.0 => Err(fault("^", l)),
                BinOp::Pow => checked(pow(l, r), "^", l),
            }
        }
        ExprKind::Call(f, a) => {
            let x = eval_expr(a, env)?;
            match f {
                Func::Exp => checked(x.exp(), "exp", x),
                Func::Log if x <= 0.0 => Err(fault("log", x)),
                Func::Log => Ok(x.ln()),
                Func::Sin => Ok(x.sin()),
                Func::Cos => Ok(x.cos()),
                Func::Sqrt if x < 0.0 => Err(fault("sqrt", x)),
                Func::Sqrt => Ok(x.sqrt()),
                Func::Abs => Ok(x.abs()),
            }
        }
    }
}

fn pow(base: f64, exponent: f64) -> f64 {
    if exponent.fract() == 0.0 && exponent.abs() <= i32::MAX as f64 {
        base.powi(exponent as i32)
    } else {
        base.powf(exponent)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse, parse_in, Scope};
    use approx::assert_relative_eq;
    use rand::{rngs::StdRng, Rng, SeedableRng};

    fn ev(src: &str, env: &Env) -> Result<f64> {
        eval_expr(
            &parse_in(src, &Scope::kernel(3).with_control().with_order()).unwrap(),
            env,
        )
    }

    #[test]
    fn basic_values() {
        let env = Env::at(1.0).with_s(&[2.0]).with_x(&[3.0]);
        assert_eq!(ev("t + s1*x1", &env).unwrap(), 7.0);
        assert_relative_eq!(
            ev(
                "exp(-(t-s1))*x1",
                &Env::at(1.0).with_s(&[0.0]).with_x(&[2.0])
            )
            .unwrap(),
            0.7357588823428847,
            max_relative = 1e-15
        );
    }

    #[test]
    fn domain_faults() {
        let env = Env::at(1.0);
        assert!(matches!(
            ev("1/0", &env),
            Err(Error::EvalFault { op: "/", .. })
        ));
        assert!(matches!(
            ev("log(0)", &env),
            Err(Error::EvalFault { op: "log", .. })
        ));
        match ev("log(t - 3)", &env) {
            Err(Error::EvalFault { op, operand }) => assert_eq!((op, operand), ("log", -2.0)),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            ev("sqrt(-1)", &env),
            Err(Error::EvalFault { op: "sqrt", .. })
        ));
        assert!(matches!(
            ev("exp(1000)", &env),
            Err(Error::EvalFault { op: "exp", .. })
        ));
        assert!(matches!(
            ev("(-8) ^ 0.5", &env),
            Err(Error::EvalFault { op: "^", .. })
        ));
        assert!(matches!(
            ev("0 ^ -1", &env),
            Err(Error::EvalFault { op: "^", .. })
        ));
        assert_eq!(ev("(-2) ^ 3", &env).unwrap(), -8.0);
    }

    #[test]
    fn unbound_variables() {
        let env = Env::at(1.0).with_s(&[0.5]);
        assert!(matches!(ev("s2", &env), Err(Error::Unbound(v)) if v == "s2"));
        assert!(matches!(ev("u", &env), Err(Error::Unbound(v)) if v == "u"));
        assert_eq!(ev("u * n", &env.with_u(2.0).with_n(3.0)).unwrap(), 6.0);
    }

    type Oracle = fn(f64, &[f64], &[f64]) -> f64;

    // Independent closed forms for catalog-style expressions.
    #[test]
    fn matches_hand_coded_oracles() {
        let cases: [(&str, Oracle); 20] = [
            ("x1", |_, _, x| x[0]),
            ("x1 * x2", |_, _, x| x[0] * x[1]),
            ("exp(-(t - s1)) * x1", |t, s, x| (s[0] - t).exp() * x[0]),
            ("sin(t) * x1 * x2", |t, _, x| t.sin() * x[0] * x[1]),
            ("0.5 * x1 * x2 * x3", |_, _, x| 0.5 * x[0] * x[1] * x[2]),
            ("1 + t + t^2/2", |t, _, _| 1.0 + t + t * t / 2.0),
            ("exp(2*t)", |t, _, _| (2.0 * t).exp()),
            ("(exp(2*t) - 1)/2", |t, _, _| ((2.0 * t).exp() - 1.0) / 2.0),
            ("1/(1 - 0.5*t)", |t, _, _| 1.0 / (1.0 - 0.5 * t)),
            ("1/cos(t/sqrt(2))^2", |t, _, _| {
                1.0 / (t / 2f64.sqrt()).cos().powi(2)
            }),
            ("t * exp(t - s1) * x1", |t, s, x| {
                t * (t - s[0]).exp() * x[0]
            }),
            ("cos(t - s1) * sin(x1)", |t, s, x| {
                (t - s[0]).cos() * x[0].sin()
            }),
            ("sqrt(1 + x1^2)", |_, _, x| (1.0 + x[0] * x[0]).sqrt()),
            ("abs(x1 - x2) + s1 * s2", |_, s, x| {
                (x[0] - x[1]).abs() + s[0] * s[1]
            }),
            ("log(1 + t) * x1", |t, _, x| (1.0 + t).ln() * x[0]),
            ("-x1^2 + 3*x2", |_, _, x| -(x[0] * x[0]) + 3.0 * x[1]),
            ("(t - s1) * (t - s2) * x1 * x2", |t, s, x| {
                (t - s[0]) * (t - s[1]) * x[0] * x[1]
            }),
            ("exp(-s1 - s2 - s3) * x1 * x2 * x3", |_, s, x| {
                (-s[0] - s[1] - s[2]).exp() * x[0] * x[1] * x[2]
            }),
            ("2^t / (1 + s1)", |t, s, _| 2f64.powf(t) / (1.0 + s[0])),
            ("x1 / (1 + x1^2) - t/3", |t, _, x| {
                x[0] / (1.0 + x[0] * x[0]) - t / 3.0
            }),
        ];
        let mut rng = StdRng::seed_from_u64(11);
        for (src, oracle) in cases {
            let e = parse(src, 3).unwrap();
            for _ in 0..100 {
                let t: f64 = rng.gen_range(0.0..1.0);
                let s: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..=t)).collect();
                let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let got = eval_expr(&e, &Env::at(t).with_s(&s).with_x(&x)).unwrap();
                let want = oracle(t, &s, &x);
                assert!(
                    (got - want).abs() <= 1e-12 * want.abs().max(1e-300) || got == want,
                    "{src}: {got} vs {want}"
                );
            }
        }
    }
}
