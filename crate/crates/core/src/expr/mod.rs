//! Scalar expressions in the momentum coordinates `p1..pM`, the space
//! coordinate `x` and the parameter `theta`.
//!
//! Models are written as text, parsed into [`Expr`], differentiated
//! symbolically with [`diff_expr`] and evaluated pointwise. Evaluation never
//! lets a NaN escape: a bad logarithm, square root, division or overflow is
//! reported as an [`EvalError`].

mod diff;
mod parse;

pub use diff::diff_expr;
pub use parse::{parse_expr, ParseContext, ParseError};

use std::fmt;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Var {
    /// Momentum coordinate, zero-based (`p1` is `P(0)`).
    P(usize),
    X,
    Theta,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Sqrt(Box<Expr>),
    Exp(Box<Expr>),
    Log(Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("{op} evaluated outside its domain at argument {arg}")]
    Domain { op: &'static str, arg: f64 },
    #[error("division by zero")]
    DivisionByZero,
    #[error("{op} produced a non-finite value")]
    NonFinite { op: &'static str },
    #[error("variable `{0}` has no value in this context")]
    Unbound(String),
}

/// Values of the variables an expression may reference.
#[derive(Clone, Copy, Debug)]
pub struct Vars<'a> {
    pub p: &'a [f64],
    pub x: Option<f64>,
    pub theta: Option<f64>,
}

impl<'a> Vars<'a> {
    pub fn momentum(p: &'a [f64]) -> Self {
        Vars {
            p,
            x: None,
            theta: None,
        }
    }
}

#[inline]
fn finite(op: &'static str, v: f64) -> Result<f64, EvalError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::NonFinite { op })
    }
}

impl Expr {
    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn p(i: usize) -> Expr {
        Expr::Var(Var::P(i))
    }

    pub fn is_const(&self, c: f64) -> bool {
        matches!(self, Expr::Const(v) if *v == c)
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(v) => Some(*v),
            _ => None,
        }
    }

    pub fn eval(&self, vars: &Vars) -> Result<f64, EvalError> {
        use Expr::*;
        match self {
            Const(c) => Ok(*c),
            Var(v) => match v {
                self::Var::P(i) => vars
                    .p
                    .get(*i)
                    .copied()
                    .ok_or_else(|| EvalError::Unbound(format!("p{}", i + 1))),
                self::Var::X => vars.x.ok_or_else(|| EvalError::Unbound("x".into())),
                self::Var::Theta => vars.theta.ok_or_else(|| EvalError::Unbound("theta".into())),
            },
            Neg(a) => Ok(-a.eval(vars)?),
            Add(a, b) => finite("+", a.eval(vars)? + b.eval(vars)?),
            Sub(a, b) => finite("-", a.eval(vars)? - b.eval(vars)?),
            Mul(a, b) => finite("*", a.eval(vars)? * b.eval(vars)?),
            Div(a, b) => {
                let d = b.eval(vars)?;
                if d == 0.0 {
                    return Err(EvalError::DivisionByZero);
                }
                finite("/", a.eval(vars)? / d)
            }
            Pow(a, b) => {
                let base = a.eval(vars)?;
                let e = b.eval(vars)?;
                let v = if e.fract() == 0.0 && e.abs() < 1024.0 {
                    if base == 0.0 && e < 0.0 {
                        return Err(EvalError::DivisionByZero);
                    }
                    base.powi(e as i32)
                } else {
                    if base < 0.0 {
                        return Err(EvalError::Domain { op: "^", arg: base });
                    }
                    base.powf(e)
                };
                finite("^", v)
            }
            Sqrt(a) => {
                let v = a.eval(vars)?;
                if v < 0.0 {
                    return Err(EvalError::Domain { op: "sqrt", arg: v });
                }
                Ok(v.sqrt())
            }
            Exp(a) => finite("exp", a.eval(vars)?.exp()),
            Log(a) => {
                let v = a.eval(vars)?;
                if v <= 0.0 {
                    return Err(EvalError::Domain { op: "log", arg: v });
                }
                Ok(v.ln())
            }
            Sin(a) => Ok(a.eval(vars)?.sin()),
            Cos(a) => Ok(a.eval(vars)?.cos()),
        }
    }

    /// Whether the expression references `var` anywhere.
    pub fn depends_on(&self, var: Var) -> bool {
        use Expr::*;
        match self {
            Const(_) => false,
            Var(v) => *v == var,
            Neg(a) | Sqrt(a) | Exp(a) | Log(a) | Sin(a) | Cos(a) => a.depends_on(var),
            Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) | Pow(a, b) => {
                a.depends_on(var) || b.depends_on(var)
            }
        }
    }

    /// Replace every occurrence of `var` by the constant `value`.
    pub fn substitute(&self, var: Var, value: f64) -> Expr {
        use Expr::*;
        let s = |e: &Expr| Box::new(e.substitute(var, value));
        match self {
            Const(c) => Const(*c),
            Var(v) if *v == var => Const(value),
            Var(v) => Var(*v),
            Neg(a) => Neg(s(a)),
            Add(a, b) => Add(s(a), s(b)),
            Sub(a, b) => Sub(s(a), s(b)),
            Mul(a, b) => Mul(s(a), s(b)),
            Div(a, b) => Div(s(a), s(b)),
            Pow(a, b) => Pow(s(a), s(b)),
            Sqrt(a) => Sqrt(s(a)),
            Exp(a) => Exp(s(a)),
            Log(a) => Log(s(a)),
            Sin(a) => Sin(s(a)),
            Cos(a) => Cos(s(a)),
        }
    }

    pub fn node_count(&self) -> usize {
        use Expr::*;
        match self {
            Const(_) | Var(_) => 1,
            Neg(a) | Sqrt(a) | Exp(a) | Log(a) | Sin(a) | Cos(a) => 1 + a.node_count(),
            Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) | Pow(a, b) => {
                1 + a.node_count() + b.node_count()
            }
        }
    }
}

// Constructors that fold constants and drop neutral elements. They keep
// symbolic derivatives small; they are not a general simplifier.

pub fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(c) => Expr::Const(-c),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

pub fn add(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Expr::Const(x + y),
        (Some(x), _) if x == 0.0 => b,
        (_, Some(y)) if y == 0.0 => a,
        _ => match b {
            Expr::Neg(nb) => Expr::Sub(Box::new(a), nb),
            b => Expr::Add(Box::new(a), Box::new(b)),
        },
    }
}

pub fn sub(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Expr::Const(x - y),
        (Some(x), _) if x == 0.0 => neg(b),
        (_, Some(y)) if y == 0.0 => a,
        _ => match b {
            Expr::Neg(nb) => Expr::Add(Box::new(a), nb),
            b => Expr::Sub(Box::new(a), Box::new(b)),
        },
    }
}

pub fn mul(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Expr::Const(x * y),
        (Some(x), _) if x == 0.0 => Expr::Const(0.0),
        (_, Some(y)) if y == 0.0 => Expr::Const(0.0),
        (Some(x), _) if x == 1.0 => b,
        (_, Some(y)) if y == 1.0 => a,
        (Some(x), _) if x == -1.0 => neg(b),
        (_, Some(y)) if y == -1.0 => neg(a),
        _ => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

pub fn div(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), _) if x == 0.0 => Expr::Const(0.0),
        (_, Some(y)) if y == 1.0 => a,
        (Some(x), Some(y)) if y != 0.0 => Expr::Const(x / y),
        _ => Expr::Div(Box::new(a), Box::new(b)),
    }
}

pub fn pow(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (_, Some(y)) if y == 1.0 => a,
        (_, Some(y)) if y == 0.0 => Expr::Const(1.0),
        _ => Expr::Pow(Box::new(a), Box::new(b)),
    }
}

// Printing. Precedence levels: 1 additive, 2 multiplicative, 3 unary minus,
// 4 power, 5 atom. Operands are parenthesised exactly when re-parsing would
// otherwise build a different tree, so `parse(print(e)) == e`.

const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_NEG: u8 = 3;
const PREC_ATOM: u8 = 5;

fn own_prec(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => PREC_ADD,
        Expr::Mul(..) | Expr::Div(..) => PREC_MUL,
        Expr::Neg(_) => PREC_NEG,
        Expr::Const(c) if c.is_sign_negative() => PREC_NEG,
        Expr::Pow(..) => 4,
        _ => PREC_ATOM,
    }
}

fn write_prec(e: &Expr, min: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if own_prec(e) < min {
        write!(f, "(")?;
        write_expr(e, f)?;
        write!(f, ")")
    } else {
        write_expr(e, f)
    }
}

fn write_expr(e: &Expr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    use Expr::*;
    match e {
        Const(c) => write!(f, "{}", c),
        Var(self::Var::P(i)) => write!(f, "p{}", i + 1),
        Var(self::Var::X) => write!(f, "x"),
        Var(self::Var::Theta) => write!(f, "theta"),
        Neg(a) => {
            write!(f, "-")?;
            // A bare non-negative literal after `-` would re-parse as a
            // negative constant.
            if matches!(**a, Const(c) if !c.is_sign_negative()) {
                write!(f, "(")?;
                write_expr(a, f)?;
                write!(f, ")")
            } else {
                write_prec(a, PREC_NEG, f)
            }
        }
        Add(a, b) => {
            write_prec(a, PREC_ADD, f)?;
            write!(f, " + ")?;
            write_prec(b, PREC_MUL, f)
        }
        Sub(a, b) => {
            write_prec(a, PREC_ADD, f)?;
            write!(f, " - ")?;
            write_prec(b, PREC_MUL, f)
        }
        Mul(a, b) => {
            write_prec(a, PREC_MUL, f)?;
            write!(f, "*")?;
            write_prec(b, PREC_NEG, f)
        }
        Div(a, b) => {
            write_prec(a, PREC_MUL, f)?;
            write!(f, "/")?;
            write_prec(b, PREC_NEG, f)
        }
        Pow(a, b) => {
            write_prec(a, PREC_ATOM, f)?;
            write!(f, "^")?;
            write_prec(b, PREC_NEG, f)
        }
        Sqrt(a) => write!(f, "sqrt({})", a),
        Exp(a) => write!(f, "exp({})", a),
        Log(a) => write!(f, "log({})", a),
        Sin(a) => write!(f, "sin({})", a),
        Cos(a) => write!(f, "cos({})", a),
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(self, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> ParseContext {
        ParseContext::momentum(3).with_theta()
    }

    #[test]
    fn test_eval_basic() {
        let e = parse_expr("theta*sqrt(1 + p1^2 + p2^2 + p3^2)", &ctx()).unwrap();
        let p = [1.0, 2.0, 2.0];
        let v = e
            .eval(&Vars {
                p: &p,
                x: None,
                theta: Some(0.5),
            })
            .unwrap();
        assert!((v - 0.5 * 10.0_f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn test_domain_errors_surface() {
        let c = ctx();
        let p = [-1.0, 0.0, 0.0];
        let vars = Vars::momentum(&p);
        assert!(matches!(
            parse_expr("log(p1)", &c).unwrap().eval(&vars),
            Err(EvalError::Domain { op: "log", .. })
        ));
        assert!(matches!(
            parse_expr("sqrt(p1)", &c).unwrap().eval(&vars),
            Err(EvalError::Domain { op: "sqrt", .. })
        ));
        assert_eq!(
            parse_expr("1/p2", &c).unwrap().eval(&vars),
            Err(EvalError::DivisionByZero)
        );
        assert!(parse_expr("exp(1000*p1^2)", &c)
            .unwrap()
            .eval(&vars)
            .is_err());
        assert!(matches!(
            parse_expr("theta", &c).unwrap().eval(&vars),
            Err(EvalError::Unbound(_))
        ));
    }

    #[test]
    fn test_print_parenthesisation() {
        let c = ctx();
        for src in [
            "p1 - (p2 - p3)",
            "p1/(p2*p3)",
            "(p1^p2)^p3",
            "p1^p2^p3",
            "-(2)",
            "-2^p1",
            "(-2)^p1",
            "p1*-2",
            "p1 - -2",
            "-(p1 + p2)*p3",
            "2^-p1",
        ] {
            let e = parse_expr(src, &c).unwrap();
            let again = parse_expr(&e.to_string(), &c).unwrap();
            assert_eq!(e, again, "{src} printed as {e}");
        }
    }

    #[test]
    fn test_unary_minus_binds_below_power() {
        let e = parse_expr("-2^2", &ctx()).unwrap();
        assert_eq!(e.eval(&Vars::momentum(&[])).unwrap(), -4.0);
        let e = parse_expr("(-2)^2", &ctx()).unwrap();
        assert_eq!(e.eval(&Vars::momentum(&[])).unwrap(), 4.0);
    }
}
