use super::{Expr, ExprKind};

/// Fully parenthesized source text; parsing it gives back an equal tree.
pub fn print(e: &Expr) -> String {
    let mut out = String::new();
    write(e, &mut out);
    out
}

fn write(e: &Expr, out: &mut String) {
    match &e.kind {
        // `{:?}` keeps enough digits to round-trip and always shows a point
        // or exponent; negative literals only arise from hand-built trees.
        ExprKind::Num(v) if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) => {
            out.push_str(&format!("(-{:?})", -v));
        }
        ExprKind::Num(v) => out.push_str(&format!("{v:?}")),
        ExprKind::Var(v) => out.push_str(&v.to_string()),
        ExprKind::Neg(a) => {
            out.push_str("(-");
            write(a, out);
            out.push(')');
        }
        ExprKind::Binary(op, a, b) => {
            out.push('(');
            write(a, out);
            out.push(' ');
            out.push_str(op.symbol());
            out.push(' ');
            write(b, out);
            out.push(')');
        }
        ExprKind::Call(f, a) => {
            out.push_str(f.name());
            out.push('(');
            write(a, out);
            out.push(')');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_in, BinOp, Func, Scope, Var};
    use proptest::prelude::*;

    fn leaf() -> impl Strategy<Value = Expr> {
        prop_oneof![
            (0u32..1000).prop_map(|v| Expr::num(v as f64 / 8.0)),
            (1e-3f64..1e6).prop_map(Expr::num),
            Just(Expr::var(Var::T)),
            Just(Expr::var(Var::U)),
            Just(Expr::var(Var::N)),
            (1usize..=3).prop_map(|k| Expr::var(Var::S(k))),
            (1usize..=3).prop_map(|k| Expr::var(Var::X(k))),
        ]
    }

    fn tree() -> impl Strategy<Value = Expr> {
        leaf().prop_recursive(6, 64, 2, |inner| {
            let ops = prop_oneof![
                Just(BinOp::Add),
                Just(BinOp::Sub),
                Just(BinOp::Mul),
                Just(BinOp::Div),
                Just(BinOp::Pow),
            ];
            prop_oneof![
                inner.clone().prop_map(Expr::negate),
                (0usize..Func::ALL.len(), inner.clone())
                    .prop_map(|(i, e)| Expr::call(Func::ALL[i], e)),
                (ops, inner.clone(), inner).prop_map(|(op, a, b)| Expr::binary(op, a, b)),
            ]
        })
    }

    fn scope() -> Scope {
        Scope::kernel(3).with_control().with_order()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]

        #[test]
        fn print_then_parse_round_trips(e in tree()) {
            let printed = print(&e);
            let back = parse_in(&printed, &scope()).unwrap();
            prop_assert_eq!(&back, &e);
            // and the printed form is a fixed point
            prop_assert_eq!(print(&back), printed);
        }
    }

    #[test]
    fn parse_print_parse_on_sources() {
        for src in [
            "exp(-(t - s1)) * x1",
            "2 ^ 3 ^ 2",
            "-x1^2 + 3*x2",
            "1e-3 * t / (1 + 2.5E2)",
            "sin(t) * x1 * x2 - -u",
        ] {
            let a = parse_in(src, &scope()).unwrap();
            let b = parse_in(&print(&a), &scope()).unwrap();
            assert_eq!(a, b, "{src}");
        }
    }

    #[test]
    fn printed_shape() {
        let e = parse_in("-2^2 + x1", &scope()).unwrap();
        assert_eq!(print(&e), "((-(2.0 ^ 2.0)) + x1)");
        assert_eq!(print(&Expr::num(-1.5)), "(-1.5)");
        assert_eq!(print(&Expr::num(1e20)), "1e20");
    }
}
