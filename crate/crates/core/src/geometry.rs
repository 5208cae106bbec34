//! Riemannian calculus on momentum space in coordinates.
//!
//! Everything is computed from a [`MetricJet`]: the metric, its inverse and
//! the first and second coordinate derivatives, plus the Christoffel symbols
//! and their derivatives. Conventions:
//!
//! * `Γ^k_ij = ½ g^kl (∂_i g_jl + ∂_j g_il − ∂_l g_ij)`
//! * `R_ij = ∂_k Γ^k_ij − ∂_i Γ^k_kj + Γ^k_kl Γ^l_ij − Γ^k_il Γ^l_kj`
//!   (positive on round spheres)
//! * `(∇²f)_ij = ∂_i ∂_j f − Γ^k_ij ∂_k f`
//! * `(div T)^i = ∂_k T^ik + Γ^i_kl T^lk + Γ^k_kl T^il`

use crate::expr::EvalError;
use crate::field::{default_step, DerivScheme, ScalarJet};
use crate::tensor::{Tensor3, Tensor4};
use nalgebra::{Cholesky, DMatrix, DVector};
use thiserror::Error;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("metric is not positive definite at p = {point:?}")]
    NotPositiveDefinite { point: Vec<f64> },
    #[error("metric is not symmetric at p = {point:?}")]
    NotSymmetric { point: Vec<f64> },
    #[error("weight u is not positive at p = {point:?}")]
    NonpositiveWeight { point: Vec<f64> },
    #[error("evaluation failed at p = {point:?}: {source}")]
    Eval { point: Vec<f64>, source: EvalError },
}

impl GeometryError {
    pub fn eval(point: &[f64], source: EvalError) -> Self {
        GeometryError::Eval {
            point: point.to_vec(),
            source,
        }
    }
}

/// Index placement of a tensor's components.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variance {
    Covariant,
    Contravariant,
}

/// Metric and its first two coordinate derivatives at a point.
#[derive(Clone, Debug)]
pub struct MetricDerivs {
    pub g: DMatrix<f64>,
    /// `dg.get(a, b, c) = ∂_c g_ab`
    pub dg: Tensor3,
    /// `d2g.get(a, b, c, d) = ∂_c ∂_d g_ab`
    pub d2g: Tensor4,
}

/// Anything that can report a metric and its derivatives.
pub trait MetricSource: Sync {
    fn dim(&self) -> usize;
    fn metric_derivatives(
        &self,
        p: &[f64],
        scheme: DerivScheme,
    ) -> Result<MetricDerivs, GeometryError>;
}

#[derive(Clone, Debug)]
pub struct MetricJet {
    pub point: Vec<f64>,
    pub g: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
    pub sqrt_det: f64,
    pub dg: Tensor3,
    pub d2g: Tensor4,
    /// `dg_inv.get(i, j, k) = ∂_k g^ij`
    pub dg_inv: Tensor3,
    /// `christoffel.get(k, i, j) = Γ^k_ij`
    pub christoffel: Tensor3,
    /// `dchristoffel.get(k, i, j, l) = ∂_l Γ^k_ij`
    pub dchristoffel: Tensor4,
}

/// Relative asymmetry tolerated in a metric before it is rejected.
const SYMMETRY_TOL: f64 = 1e-10;

impl MetricJet {
    pub fn assemble(point: &[f64], d: MetricDerivs) -> Result<Self, GeometryError> {
        let n = d.g.nrows();
        let scale = d.g.amax().max(1e-300);
        if (&d.g - d.g.transpose()).amax() > SYMMETRY_TOL * scale {
            return Err(GeometryError::NotSymmetric {
                point: point.to_vec(),
            });
        }
        let chol =
            Cholesky::new(d.g.clone()).ok_or_else(|| GeometryError::NotPositiveDefinite {
                point: point.to_vec(),
            })?;
        let sqrt_det: f64 = chol.l().diagonal().iter().product();
        let g_inv = chol.inverse();

        let mut dg_inv = Tensor3::zeros(n);
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut s = 0.0;
                    for a in 0..n {
                        for b in 0..n {
                            s -= g_inv[(i, a)] * d.dg.get(a, b, k) * g_inv[(b, j)];
                        }
                    }
                    dg_inv.set(i, j, k, s);
                }
            }
        }

        // first-kind combination T_lij = ∂_i g_jl + ∂_j g_il − ∂_l g_ij
        let mut first = Tensor3::zeros(n);
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    first.set(
                        l,
                        i,
                        j,
                        d.dg.get(j, l, i) + d.dg.get(i, l, j) - d.dg.get(i, j, l),
                    );
                }
            }
        }
        let mut christoffel = Tensor3::zeros(n);
        let mut dchristoffel = Tensor4::zeros(n);
        for k in 0..n {
            for i in 0..n {
                for j in i..n {
                    let mut s = 0.0;
                    for l in 0..n {
                        s += g_inv[(k, l)] * first.get(l, i, j);
                    }
                    christoffel.set(k, i, j, 0.5 * s);
                    christoffel.set(k, j, i, 0.5 * s);
                    for m in 0..n {
                        let mut ds = 0.0;
                        for l in 0..n {
                            let dfirst = d.d2g.get(j, l, i, m) + d.d2g.get(i, l, j, m)
                                - d.d2g.get(i, j, l, m);
                            ds += dg_inv.get(k, l, m) * first.get(l, i, j) + g_inv[(k, l)] * dfirst;
                        }
                        dchristoffel.set(k, i, j, m, 0.5 * ds);
                        dchristoffel.set(k, j, i, m, 0.5 * ds);
                    }
                }
            }
        }
        Ok(MetricJet {
            point: point.to_vec(),
            g: d.g,
            g_inv,
            sqrt_det,
            dg: d.dg,
            d2g: d.d2g,
            dg_inv,
            christoffel,
            dchristoffel,
        })
    }

    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    /// `∂_k log √det g = Γ^i_ik`
    pub fn dlog_sqrt_det(&self, k: usize) -> f64 {
        (0..self.dim()).map(|i| self.christoffel.get(i, i, k)).sum()
    }

    pub fn raise(&self, form: &DVector<f64>) -> DVector<f64> {
        &self.g_inv * form
    }

    pub fn lower(&self, vector: &DVector<f64>) -> DVector<f64> {
        &self.g * vector
    }

    /// Raise both indices of a covariant 2-tensor.
    pub fn raise2(&self, t: &DMatrix<f64>) -> DMatrix<f64> {
        &self.g_inv * t * &self.g_inv
    }
}

pub fn metric_jet<S: MetricSource + ?Sized>(
    source: &S,
    p: &[f64],
    scheme: DerivScheme,
) -> Result<MetricJet, GeometryError> {
    MetricJet::assemble(p, source.metric_derivatives(p, scheme)?)
}

/// Ricci tensor (covariant).
pub fn ricci(jet: &MetricJet) -> DMatrix<f64> {
    let n = jet.dim();
    let gam = &jet.christoffel;
    let dgam = &jet.dchristoffel;
    let mut ric = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let mut s = 0.0;
            for k in 0..n {
                s += dgam.get(k, i, j, k) - dgam.get(k, k, j, i);
                for l in 0..n {
                    s += gam.get(k, k, l) * gam.get(l, i, j) - gam.get(k, i, l) * gam.get(l, k, j);
                }
            }
            ric[(i, j)] = s;
            ric[(j, i)] = s;
        }
    }
    ric
}

/// Scalar curvature `g^ij R_ij`.
pub fn scalar_curvature(jet: &MetricJet) -> f64 {
    jet.g_inv.component_mul(&ricci(jet)).sum()
}

/// Covariant Hessian of a scalar (covariant, symmetric).
pub fn covariant_hessian(jet: &MetricJet, f: &ScalarJet) -> DMatrix<f64> {
    let n = jet.dim();
    let mut h = f.hess.clone();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                h[(i, j)] -= jet.christoffel.get(k, i, j) * f.grad[k];
            }
        }
    }
    h
}

/// Riemannian gradient `g^ij ∂_j f` (contravariant).
pub fn gradient_p(jet: &MetricJet, f: &ScalarJet) -> DVector<f64> {
    &jet.g_inv * &f.grad
}

/// `Δ f = (1/√g) ∂_i (√g g^ij ∂_j f)`, expanded in coordinates.
pub fn laplace_beltrami(jet: &MetricJet, f: &ScalarJet) -> f64 {
    let n = jet.dim();
    let mut s = 0.0;
    for i in 0..n {
        let dlog = jet.dlog_sqrt_det(i);
        for j in 0..n {
            s += jet.g_inv[(i, j)] * f.hess[(i, j)]
                + (jet.dg_inv.get(i, j, i) + dlog * jet.g_inv[(i, j)]) * f.grad[j];
        }
    }
    s
}

/// Jets of `log u` with `u = e^{-E}/√det g`, from the metric jet and the
/// energy jet (order ≥ 2).
pub fn log_weight_jet(jet: &MetricJet, energy: &ScalarJet) -> ScalarJet {
    let n = jet.dim();
    let value = -energy.value - jet.sqrt_det.ln();
    let grad = DVector::from_fn(n, |k, _| -energy.grad[k] - jet.dlog_sqrt_det(k));
    let hess = DMatrix::from_fn(n, n, |k, l| {
        let dd: f64 = (0..n).map(|i| jet.dchristoffel.get(i, i, k, l)).sum();
        -energy.hess[(k, l)] - dd
    });
    ScalarJet {
        value,
        grad,
        hess,
        third: None,
    }
}

/// A contravariant vector field and its coordinate Jacobian at a point.
#[derive(Clone, Debug)]
pub struct VectorJet {
    pub value: DVector<f64>,
    /// `jacobian[(i, k)] = ∂_k Z^i`
    pub jacobian: DMatrix<f64>,
}

/// A contravariant 2-tensor field and its first derivatives at a point.
#[derive(Clone, Debug)]
pub struct Tensor2Jet {
    pub value: DMatrix<f64>,
    /// `deriv.get(i, j, k) = ∂_k T^ij`
    pub deriv: Tensor3,
}

pub fn divergence_vec(jet: &MetricJet, z: &VectorJet) -> f64 {
    let n = jet.dim();
    let mut s = 0.0;
    for i in 0..n {
        s += z.jacobian[(i, i)];
        for k in 0..n {
            s += jet.christoffel.get(i, i, k) * z.value[k];
        }
    }
    s
}

pub fn divergence_tensor2(jet: &MetricJet, t: &Tensor2Jet) -> DVector<f64> {
    let n = jet.dim();
    DVector::from_fn(n, |i, _| {
        let mut s = 0.0;
        for k in 0..n {
            s += t.deriv.get(i, k, k);
            for l in 0..n {
                s += jet.christoffel.get(i, k, l) * t.value[(l, k)]
                    + jet.christoffel.get(k, k, l) * t.value[(i, l)];
            }
        }
        s
    })
}

/// The gradient field `∂f` with its Jacobian (needs `f` to order 2).
pub fn gradient_jet(jet: &MetricJet, f: &ScalarJet) -> VectorJet {
    let n = jet.dim();
    let value = gradient_p(jet, f);
    let jacobian = DMatrix::from_fn(n, n, |i, k| {
        (0..n)
            .map(|j| jet.dg_inv.get(i, j, k) * f.grad[j] + jet.g_inv[(i, j)] * f.hess[(j, k)])
            .sum()
    });
    VectorJet { value, jacobian }
}

/// The raised Hessian `∂²f = g^ia g^jb (∇²f)_ab` with its derivatives
/// (needs `f` to order 3).
pub fn raised_hessian_jet(jet: &MetricJet, f: &ScalarJet) -> Tensor2Jet {
    let n = jet.dim();
    let third = f
        .third
        .as_ref()
        .expect("raised Hessian derivatives need a third-order jet");
    let h = covariant_hessian(jet, f);
    let value = jet.raise2(&h);
    // ∂_k h_ab = ∂_abk f − ∂_k Γ^c_ab ∂_c f − Γ^c_ab ∂_ck f
    let mut dh = Tensor3::zeros(n);
    for a in 0..n {
        for b in 0..n {
            for k in 0..n {
                let mut s = third.get(a, b, k);
                for c in 0..n {
                    s -= jet.dchristoffel.get(c, a, b, k) * f.grad[c]
                        + jet.christoffel.get(c, a, b) * f.hess[(c, k)];
                }
                dh.set(a, b, k, s);
            }
        }
    }
    let mut deriv = Tensor3::zeros(n);
    for k in 0..n {
        let dginv = DMatrix::from_fn(n, n, |i, a| jet.dg_inv.get(i, a, k));
        let dhk = DMatrix::from_fn(n, n, |a, b| dh.get(a, b, k));
        let dk =
            &dginv * &h * &jet.g_inv + &jet.g_inv * &h * &dginv + &jet.g_inv * dhk * &jet.g_inv;
        for i in 0..n {
            for j in 0..n {
                deriv.set(i, j, k, dk[(i, j)]);
            }
        }
    }
    Tensor2Jet { value, deriv }
}

/// Jacobian of a vector field given only pointwise, by central differences.
pub fn vector_jet_fd<F>(z: F, p: &[f64], step: Option<f64>) -> Result<VectorJet, EvalError>
where
    F: Fn(&[f64]) -> Result<DVector<f64>, EvalError>,
{
    let n = p.len();
    let h = step.unwrap_or_else(|| default_step(p));
    let value = z(p)?;
    let mut jacobian = DMatrix::zeros(value.len(), n);
    for k in 0..n {
        let mut q = p.to_vec();
        q[k] += h;
        let plus = z(&q)?;
        q[k] -= 2.0 * h;
        let minus = z(&q)?;
        for i in 0..value.len() {
            jacobian[(i, k)] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    Ok(VectorJet { value, jacobian })
}

/// First derivatives of a 2-tensor field given only pointwise.
pub fn tensor2_jet_fd<F>(t: F, p: &[f64], step: Option<f64>) -> Result<Tensor2Jet, EvalError>
where
    F: Fn(&[f64]) -> Result<DMatrix<f64>, EvalError>,
{
    let n = p.len();
    let h = step.unwrap_or_else(|| default_step(p));
    let value = t(p)?;
    let mut deriv = Tensor3::zeros(n);
    for k in 0..n {
        let mut q = p.to_vec();
        q[k] += h;
        let plus = t(&q)?;
        q[k] -= 2.0 * h;
        let minus = t(&q)?;
        for i in 0..n {
            for j in 0..n {
                deriv.set(i, j, k, (plus[(i, j)] - minus[(i, j)]) / (2.0 * h));
            }
        }
    }
    Ok(Tensor2Jet { value, deriv })
}

/// `g(∂a, ∂b)` for two gradients given as coordinate differentials.
pub fn inner_forms(jet: &MetricJet, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    a.dot(&(&jet.g_inv * b))
}

/// Full contraction `S^ij T_ij`-style pairing of two covariant 2-tensors
/// through the inverse metric.
pub fn inner_cov2(jet: &MetricJet, s: &DMatrix<f64>, t: &DMatrix<f64>) -> f64 {
    jet.raise2(s).component_mul(t).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Round sphere of radius r in stereographic coordinates: Ric = (n-1)/r² g.
    struct Sphere {
        n: usize,
        r: f64,
    }

    impl MetricSource for Sphere {
        fn dim(&self) -> usize {
            self.n
        }

        fn metric_derivatives(
            &self,
            p: &[f64],
            _: DerivScheme,
        ) -> Result<MetricDerivs, GeometryError> {
            // g = φ² δ with φ = 2r² / (r² + |p|²)
            let n = self.n;
            let r2 = self.r * self.r;
            let q: f64 = p.iter().map(|x| x * x).sum();
            let den = r2 + q;
            let phi2 = 4.0 * r2 * r2 / (den * den);
            let dphi2 = |k: usize| -4.0 * phi2 * p[k] / den;
            let ddphi2 = |k: usize, l: usize| {
                let delta = if k == l { 1.0 } else { 0.0 };
                -4.0 * (dphi2(l) * p[k] + phi2 * delta) / den
                    + 4.0 * phi2 * p[k] * 2.0 * p[l] / (den * den)
            };
            let mut dg = Tensor3::zeros(n);
            let mut d2g = Tensor4::zeros(n);
            for a in 0..n {
                for c in 0..n {
                    dg.set(a, a, c, dphi2(c));
                    for d in 0..n {
                        d2g.set(a, a, c, d, ddphi2(c, d));
                    }
                }
            }
            Ok(MetricDerivs {
                g: DMatrix::identity(n, n) * phi2,
                dg,
                d2g,
            })
        }
    }

    #[test]
    fn test_sphere_ricci() {
        let s = Sphere { n: 3, r: 1.7 };
        let p = [0.3, -0.5, 0.9];
        let jet = metric_jet(&s, &p, DerivScheme::Analytic).unwrap();
        let expected = &jet.g * (2.0 / (1.7 * 1.7));
        assert!((ricci(&jet) - expected).amax() < 1e-12);
    }

    #[test]
    fn test_non_pd_rejected() {
        struct Bad;
        impl MetricSource for Bad {
            fn dim(&self) -> usize {
                2
            }
            fn metric_derivatives(
                &self,
                _: &[f64],
                _: DerivScheme,
            ) -> Result<MetricDerivs, GeometryError> {
                Ok(MetricDerivs {
                    g: DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]),
                    dg: Tensor3::zeros(2),
                    d2g: Tensor4::zeros(2),
                })
            }
        }
        assert!(matches!(
            metric_jet(&Bad, &[0.0, 0.0], DerivScheme::Analytic),
            Err(GeometryError::NotPositiveDefinite { .. })
        ));
    }
}
