use kfp_core::expr::{diff_expr, parse_expr, Expr, ParseContext, ParseError, Var, Vars};
use proptest::prelude::*;

const DIM: usize = 3;

fn ctx() -> ParseContext {
    ParseContext::momentum(DIM).with_x().with_theta()
}

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (-40i32..40).prop_map(|k| Expr::Const(k as f64 / 8.0)),
        (0..DIM).prop_map(Expr::p),
        Just(Expr::Var(Var::X)),
        Just(Expr::Var(Var::Theta)),
    ]
}

fn bx(e: Expr) -> Box<Expr> {
    Box::new(e)
}

/// Unrestricted trees, for the printer and parser.
fn any_expr() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(5, 48, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|a| Expr::Neg(bx(a))),
            inner.clone().prop_map(|a| Expr::Sqrt(bx(a))),
            inner.clone().prop_map(|a| Expr::Exp(bx(a))),
            inner.clone().prop_map(|a| Expr::Log(bx(a))),
            inner.clone().prop_map(|a| Expr::Sin(bx(a))),
            inner.clone().prop_map(|a| Expr::Cos(bx(a))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Add(bx(a), bx(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Sub(bx(a), bx(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Mul(bx(a), bx(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Div(bx(a), bx(b))),
            (inner.clone(), inner).prop_map(|(a, b)| Expr::Pow(bx(a), bx(b))),
        ]
    })
}

fn c(v: f64) -> Box<Expr> {
    bx(Expr::Const(v))
}

fn sq(a: &Expr) -> Box<Expr> {
    bx(Expr::Mul(bx(a.clone()), bx(a.clone())))
}

/// Trees whose functions are kept inside their domains and away from
/// singularities, so that difference quotients are a reliable reference.
fn smooth_expr() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(4, 32, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|a| Expr::Neg(bx(a))),
            inner
                .clone()
                .prop_map(|a| Expr::Sqrt(bx(Expr::Add(c(1.0), sq(&a))))),
            inner.clone().prop_map(|a| Expr::Exp(bx(Expr::Sin(bx(a))))),
            inner
                .clone()
                .prop_map(|a| Expr::Log(bx(Expr::Add(c(0.5), sq(&a))))),
            inner.clone().prop_map(|a| Expr::Sin(bx(a))),
            inner.clone().prop_map(|a| Expr::Cos(bx(a))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Add(bx(a), bx(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Sub(bx(a), bx(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Mul(bx(a), bx(b))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| Expr::Div(bx(a), bx(Expr::Add(c(1.0), sq(&b))))),
            (inner.clone(), 0u8..4).prop_map(|(a, k)| Expr::Pow(bx(a), c(k as f64))),
            (inner.clone(), inner)
                .prop_map(|(a, b)| Expr::Pow(bx(Expr::Add(c(1.5), sq(&a))), bx(Expr::Sin(bx(b))))),
        ]
    })
}

fn eval_at(e: &Expr, p: &[f64; DIM], x: f64, theta: f64) -> Option<f64> {
    e.eval(&Vars {
        p,
        x: Some(x),
        theta: Some(theta),
    })
    .ok()
}

/// Fourth-order central difference.
fn fd(e: &Expr, var: Var, p: [f64; DIM], x: f64, theta: f64) -> Option<f64> {
    let h = 2e-5;
    let at = |s: f64| {
        let mut q = p;
        let (mut xx, mut tt) = (x, theta);
        match var {
            Var::P(i) => q[i] += s,
            Var::X => xx += s,
            Var::Theta => tt += s,
        }
        eval_at(e, &q, xx, tt)
    };
    Some((8.0 * (at(h)? - at(-h)?) - (at(2.0 * h)? - at(-2.0 * h)?)) / (12.0 * h))
}

fn points(seed: u64) -> Vec<([f64; DIM], f64, f64)> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..20)
        .map(|_| {
            let p = [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ];
            (p, rng.gen_range(0.0..1.0), rng.gen_range(0.5..2.0))
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn print_then_parse_is_identity(e in any_expr()) {
        let printed = e.to_string();
        let parsed = parse_expr(&printed, &ctx()).unwrap();
        prop_assert_eq!(&parsed, &e, "printed as {}", printed);
        prop_assert_eq!(parsed.to_string(), printed);
    }

    #[test]
    fn derivative_matches_differences(e in smooth_expr(), seed in any::<u64>(), vi in 0usize..5) {
        let var = match vi {
            0..=2 => Var::P(vi),
            3 => Var::X,
            _ => Var::Theta,
        };
        let d = diff_expr(&e, var);
        for (p, x, theta) in points(seed) {
            let exact = eval_at(&d, &p, x, theta).expect("smooth derivative evaluates");
            let approx = fd(&e, var, p, x, theta).expect("smooth expression evaluates");
            prop_assert!(
                (exact - approx).abs() <= 1e-6 * exact.abs().max(1.0),
                "d/d{:?} of {} at {:?}: {} vs {}", var, e, p, exact, approx
            );
        }
    }

    #[test]
    fn mixed_partials_commute(e in smooth_expr(), seed in any::<u64>()) {
        let d12 = diff_expr(&diff_expr(&e, Var::P(0)), Var::P(1));
        let d21 = diff_expr(&diff_expr(&e, Var::P(1)), Var::P(0));
        for (p, x, theta) in points(seed) {
            let a = eval_at(&d12, &p, x, theta).unwrap();
            let b = eval_at(&d21, &p, x, theta).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{}: {} vs {}", e, a, b);
        }
    }

    #[test]
    fn garbage_never_panics(src in "[p1-3x+*/^()., a-z0-9\n-]{0,40}") {
        if let Err(err) = parse_expr(&src, &ctx()) {
            let (line, column) = err.position();
            let lines: Vec<&str> = src.split('\n').collect();
            prop_assert!(line >= 1 && line <= lines.len());
            prop_assert!(column >= 1 && column <= lines[line - 1].chars().count() + 1);
        }
    }
}

#[test]
fn malformed_inputs_report_positions() {
    let cases = [
        ("", (1, 1)),
        ("p1 +", (1, 5)),
        ("(p1 + p2", (1, 9)),
        ("p1 p2", (1, 4)),
        ("sqrt(p1", (1, 8)),
        ("p1 * * p2", (1, 6)),
        ("2 +\n)", (2, 1)),
        ("p1 # 3", (1, 4)),
        ("1.2.3", (1, 1)),
    ];
    for (src, pos) in cases {
        let err = parse_expr(src, &ctx()).unwrap_err();
        assert!(matches!(err, ParseError::Syntax { .. }), "{src:?}: {err}");
        assert_eq!(err.position(), pos, "{src:?}: {err}");
    }
    let err = parse_expr("p1 + p4", &ctx()).unwrap_err();
    assert_eq!(
        err,
        ParseError::UnknownIdentifier {
            name: "p4".into(),
            line: 1,
            column: 6
        }
    );
}
