//! Scalar functions of momentum and their derivative jets.
//!
//! A field is either an expression (exact derivatives by symbolic
//! differentiation, built lazily) or an opaque closure (derivatives by
//! central differences).

use crate::expr::{diff_expr, EvalError, Expr, Var, Vars};
use crate::tensor::Tensor3;
use nalgebra::{DMatrix, DVector};
use std::sync::{Arc, OnceLock};

/// How derivatives are obtained.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum DerivScheme {
    /// Exact derivatives where the field supplies them, differences otherwise.
    #[default]
    Analytic,
    /// Central differences. `None` uses the point-dependent default step.
    CentralDifference { step: Option<f64> },
}

/// Default difference step for first and second derivatives.
pub fn default_step(p: &[f64]) -> f64 {
    1e-4 * norm(p).max(1.0)
}

/// Default step for third derivatives; a larger step keeps round-off in the
/// three nested differences below truncation error.
pub fn default_step_third(p: &[f64]) -> f64 {
    2e-3 * norm(p).max(1.0)
}

pub fn norm(p: &[f64]) -> f64 {
    p.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Value and derivatives of a scalar field at a point, up to some order.
#[derive(Clone, Debug)]
pub struct ScalarJet {
    pub value: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
    /// `third.get(i, j, k)` is the derivative along `i`, `j` and `k`.
    pub third: Option<Tensor3>,
}

pub type FieldFn = dyn Fn(&[f64]) -> Result<f64, EvalError> + Send + Sync;

#[derive(Clone)]
pub enum ScalarField {
    Expr(Arc<ExprField>),
    Closure { dim: usize, f: Arc<FieldFn> },
}

impl std::fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScalarField::Expr(e) => write!(f, "ScalarField({})", e.expr),
            ScalarField::Closure { dim, .. } => write!(f, "ScalarField(<closure on R^{dim}>)"),
        }
    }
}

pub struct ExprField {
    dim: usize,
    expr: Expr,
    grad: OnceLock<Vec<Expr>>,
    hess: OnceLock<Vec<Expr>>,
    third: OnceLock<Vec<Expr>>,
}

impl ExprField {
    fn grad(&self) -> &[Expr] {
        self.grad.get_or_init(|| {
            (0..self.dim)
                .map(|i| diff_expr(&self.expr, Var::P(i)))
                .collect()
        })
    }

    // Row-major full M x M storage; only i <= j is filled and read.
    fn hess(&self) -> &[Expr] {
        self.hess.get_or_init(|| {
            let g = self.grad();
            let m = self.dim;
            let mut out = vec![Expr::Const(0.0); m * m];
            for i in 0..m {
                for j in i..m {
                    out[i * m + j] = diff_expr(&g[i], Var::P(j));
                }
            }
            out
        })
    }

    fn third(&self) -> &[Expr] {
        self.third.get_or_init(|| {
            let h = self.hess();
            let m = self.dim;
            let mut out = vec![Expr::Const(0.0); m * m * m];
            for i in 0..m {
                for j in i..m {
                    for k in j..m {
                        out[(i * m + j) * m + k] = diff_expr(&h[i * m + j], Var::P(k));
                    }
                }
            }
            out
        })
    }
}

impl ScalarField {
    /// A field given by an expression in `p1..p{dim}` only.
    pub fn from_expr(expr: Expr, dim: usize) -> Self {
        ScalarField::Expr(Arc::new(ExprField {
            dim,
            expr,
            grad: OnceLock::new(),
            hess: OnceLock::new(),
            third: OnceLock::new(),
        }))
    }

    pub fn from_fn<F>(dim: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> Result<f64, EvalError> + Send + Sync + 'static,
    {
        ScalarField::Closure {
            dim,
            f: Arc::new(f),
        }
    }

    pub fn constant(value: f64, dim: usize) -> Self {
        ScalarField::from_expr(Expr::Const(value), dim)
    }

    pub fn dim(&self) -> usize {
        match self {
            ScalarField::Expr(e) => e.dim,
            ScalarField::Closure { dim, .. } => *dim,
        }
    }

    pub fn expr(&self) -> Option<&Expr> {
        match self {
            ScalarField::Expr(e) => Some(&e.expr),
            ScalarField::Closure { .. } => None,
        }
    }

    pub fn value(&self, p: &[f64]) -> Result<f64, EvalError> {
        match self {
            ScalarField::Expr(e) => e.expr.eval(&Vars::momentum(p)),
            ScalarField::Closure { f, .. } => f(p),
        }
    }

    /// Value and derivatives up to `order` (at most 3).
    pub fn jet(
        &self,
        p: &[f64],
        order: usize,
        scheme: DerivScheme,
    ) -> Result<ScalarJet, EvalError> {
        assert!(order <= 3, "jets are available up to third order");
        match (self, scheme) {
            (ScalarField::Expr(e), DerivScheme::Analytic) => analytic_jet(e, p, order),
            (_, DerivScheme::CentralDifference { step }) => self.fd_jet(p, order, step),
            (ScalarField::Closure { .. }, DerivScheme::Analytic) => self.fd_jet(p, order, None),
        }
    }

    fn fd_jet(&self, p: &[f64], order: usize, step: Option<f64>) -> Result<ScalarJet, EvalError> {
        let f = |q: &[f64]| self.value(q);
        let m = p.len();
        let value = f(p)?;
        let mut grad = DVector::zeros(m);
        let mut hess = DMatrix::zeros(m, m);
        let h = step.unwrap_or_else(|| default_step(p));
        if order >= 1 {
            grad = fd_grad(&f, p, h)?;
        }
        if order >= 2 {
            hess = fd_hess(&f, p, h)?;
        }
        let third = if order >= 3 {
            let h3 = step.unwrap_or_else(|| default_step_third(p));
            Some(fd_third(&f, p, h3)?)
        } else {
            None
        };
        Ok(ScalarJet {
            value,
            grad,
            hess,
            third,
        })
    }
}

fn analytic_jet(e: &ExprField, p: &[f64], order: usize) -> Result<ScalarJet, EvalError> {
    let m = e.dim;
    let vars = Vars::momentum(p);
    let value = e.expr.eval(&vars)?;
    let mut grad = DVector::zeros(m);
    let mut hess = DMatrix::zeros(m, m);
    if order >= 1 {
        for (i, d) in e.grad().iter().enumerate() {
            grad[i] = d.eval(&vars)?;
        }
    }
    if order >= 2 {
        let h = e.hess();
        for i in 0..m {
            for j in i..m {
                let v = h[i * m + j].eval(&vars)?;
                hess[(i, j)] = v;
                hess[(j, i)] = v;
            }
        }
    }
    let third = if order >= 3 {
        let t = e.third();
        let mut out = Tensor3::zeros(m);
        for i in 0..m {
            for j in i..m {
                for k in j..m {
                    let v = t[(i * m + j) * m + k].eval(&vars)?;
                    for (a, b, c) in permutations(i, j, k) {
                        out.set(a, b, c, v);
                    }
                }
            }
        }
        Some(out)
    } else {
        None
    };
    Ok(ScalarJet {
        value,
        grad,
        hess,
        third,
    })
}

fn permutations(i: usize, j: usize, k: usize) -> [(usize, usize, usize); 6] {
    [
        (i, j, k),
        (i, k, j),
        (j, i, k),
        (j, k, i),
        (k, i, j),
        (k, j, i),
    ]
}

fn shifted(p: &[f64], moves: &[(usize, f64)]) -> Vec<f64> {
    let mut q = p.to_vec();
    for &(i, d) in moves {
        q[i] += d;
    }
    q
}

pub(crate) fn fd_grad<F>(f: &F, p: &[f64], h: f64) -> Result<DVector<f64>, EvalError>
where
    F: Fn(&[f64]) -> Result<f64, EvalError>,
{
    let m = p.len();
    let mut g = DVector::zeros(m);
    for i in 0..m {
        g[i] = (f(&shifted(p, &[(i, h)]))? - f(&shifted(p, &[(i, -h)]))?) / (2.0 * h);
    }
    Ok(g)
}

pub(crate) fn fd_hess<F>(f: &F, p: &[f64], h: f64) -> Result<DMatrix<f64>, EvalError>
where
    F: Fn(&[f64]) -> Result<f64, EvalError>,
{
    let m = p.len();
    let f0 = f(p)?;
    let mut out = DMatrix::zeros(m, m);
    for i in 0..m {
        let v = (f(&shifted(p, &[(i, h)]))? - 2.0 * f0 + f(&shifted(p, &[(i, -h)]))?) / (h * h);
        out[(i, i)] = v;
        for j in (i + 1)..m {
            let v = (f(&shifted(p, &[(i, h), (j, h)]))?
                - f(&shifted(p, &[(i, h), (j, -h)]))?
                - f(&shifted(p, &[(i, -h), (j, h)]))?
                + f(&shifted(p, &[(i, -h), (j, -h)]))?)
                / (4.0 * h * h);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(out)
}

pub(crate) fn fd_third<F>(f: &F, p: &[f64], h: f64) -> Result<Tensor3, EvalError>
where
    F: Fn(&[f64]) -> Result<f64, EvalError>,
{
    let m = p.len();
    let mut out = Tensor3::zeros(m);
    for k in 0..m {
        let plus = fd_hess(f, &shifted(p, &[(k, h)]), h)?;
        let minus = fd_hess(f, &shifted(p, &[(k, -h)]), h)?;
        for i in 0..m {
            for j in 0..m {
                out.set(i, j, k, (plus[(i, j)] - minus[(i, j)]) / (2.0 * h));
            }
        }
    }
    // Symmetrise over the differencing direction.
    let mut sym = Tensor3::zeros(m);
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                let avg = (out.get(i, j, k) + out.get(j, k, i) + out.get(k, i, j)) / 3.0;
                sym.set(i, j, k, avg);
            }
        }
    }
    Ok(sym)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_expr, ParseContext};

    #[test]
    fn test_analytic_matches_fd() {
        let ctx = ParseContext::momentum(3);
        let e = parse_expr("exp(-p1^2/3)*sqrt(1 + p2^2 + p3^2)*p1*p3", &ctx).unwrap();
        let f = ScalarField::from_expr(e, 3);
        let p = [0.4, -0.8, 1.1];
        let a = f.jet(&p, 3, DerivScheme::Analytic).unwrap();
        let d = f
            .jet(&p, 3, DerivScheme::CentralDifference { step: None })
            .unwrap();
        assert!((a.grad.clone() - d.grad).amax() < 1e-8);
        assert!((a.hess.clone() - d.hess).amax() < 1e-6);
        assert!(a.third.unwrap().max_abs_diff(&d.third.unwrap()) < 1e-4);
    }

    #[test]
    fn test_closure_falls_back_to_fd() {
        let f = ScalarField::from_fn(2, |p| Ok(p[0] * p[0] * p[1]));
        let j = f.jet(&[1.0, 2.0], 2, DerivScheme::Analytic).unwrap();
        assert!((j.grad[0] - 4.0).abs() < 1e-7);
        assert!((j.hess[(0, 1)] - 2.0).abs() < 1e-6);
    }
}
