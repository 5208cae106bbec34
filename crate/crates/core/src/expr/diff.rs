use super::{add, div, mul, neg, pow, sub, Expr, Var};

/// Symbolic partial derivative of `e` with respect to `var`.
pub fn diff_expr(e: &Expr, var: Var) -> Expr {
    use Expr::*;
    if !e.depends_on(var) {
        return Const(0.0);
    }
    match e {
        Const(_) => Const(0.0),
        Var(v) => Const(if *v == var { 1.0 } else { 0.0 }),
        Neg(a) => neg(diff_expr(a, var)),
        Add(a, b) => add(diff_expr(a, var), diff_expr(b, var)),
        Sub(a, b) => sub(diff_expr(a, var), diff_expr(b, var)),
        Mul(a, b) => add(
            mul(diff_expr(a, var), (**b).clone()),
            mul((**a).clone(), diff_expr(b, var)),
        ),
        Div(a, b) => {
            let da = diff_expr(a, var);
            let db = diff_expr(b, var);
            let first = div(da, (**b).clone());
            if db.is_const(0.0) {
                return first;
            }
            let second = div(mul((**a).clone(), db), pow((**b).clone(), Const(2.0)));
            sub(first, second)
        }
        Pow(a, b) => {
            let da = diff_expr(a, var);
            if !b.depends_on(var) {
                // d(a^b) = b a^(b-1) da
                let reduced = match b.as_const() {
                    Some(n) => pow((**a).clone(), Const(n - 1.0)),
                    None => pow((**a).clone(), sub((**b).clone(), Const(1.0))),
                };
                return mul(mul((**b).clone(), reduced), da);
            }
            let db = diff_expr(b, var);
            // d(a^b) = a^b (db log a + b da / a)
            mul(
                e.clone(),
                add(
                    mul(db, Log(Box::new((**a).clone()))),
                    div(mul((**b).clone(), da), (**a).clone()),
                ),
            )
        }
        Sqrt(a) => div(diff_expr(a, var), mul(Const(2.0), e.clone())),
        Exp(a) => mul(e.clone(), diff_expr(a, var)),
        Log(a) => div(diff_expr(a, var), (**a).clone()),
        Sin(a) => mul(Cos(a.clone()), diff_expr(a, var)),
        Cos(a) => neg(mul(Sin(a.clone()), diff_expr(a, var))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_expr, ParseContext, Vars};

    fn check(src: &str, expected: &str, p: &[f64]) {
        let ctx = ParseContext::momentum(p.len());
        let d = diff_expr(&parse_expr(src, &ctx).unwrap(), Var::P(0));
        let want = parse_expr(expected, &ctx).unwrap();
        let vars = Vars::momentum(p);
        let (a, b) = (d.eval(&vars).unwrap(), want.eval(&vars).unwrap());
        assert!(
            (a - b).abs() < 1e-13 * (1.0 + b.abs()),
            "{src}: {a} vs {b} ({d})"
        );
    }

    #[test]
    fn test_rules() {
        let p = [0.7, -0.3];
        check("p1*p1", "2*p1", &p);
        check("p1^3", "3*p1^2", &p);
        check("sqrt(1 + p1^2 + p2^2)", "p1/sqrt(1 + p1^2 + p2^2)", &p);
        check("exp(-p1^2/2)", "-p1*exp(-p1^2/2)", &p);
        check("log(1 + p1^2)", "2*p1/(1 + p1^2)", &p);
        check("p2/p1", "-p2/p1^2", &p);
        check("p1^p1", "p1^p1*(log(p1) + 1)", &p);
        check("2^p1", "2^p1*log(2)", &p);
        check("sin(p1)*cos(p2)", "cos(p1)*cos(p2)", &p);
        check("cos(3*p1)", "-3*sin(3*p1)", &p);
        check("p1^p2", "p2*p1^(p2 - 1)", &p);
    }

    #[test]
    fn test_independent_is_zero() {
        let ctx = ParseContext::momentum(2);
        let e = parse_expr("exp(p2)*log(p2)", &ctx).unwrap();
        assert_eq!(diff_expr(&e, Var::P(0)), Expr::Const(0.0));
    }
}
