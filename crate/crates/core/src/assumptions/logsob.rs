//! Sufficient curvature criteria for the logarithmic Sobolev inequality on
//! torus × momentum space.
//!
//! *Product criterion.* Put the metric `G = A_IJ dx^I dx^J + g_ij dp^i dp^j`
//! on the `2N` coordinates `(x, p)` (nothing depends on `x`) and let
//! `U = u/√det A_IJ`. The inequality holds with constant `α` if
//! `Ric^G − ∇^G d log U ≥ α G`.
//!
//! *Warped criterion.* When `A_IJ = ζ² δ_IJ`, it suffices that
//! `Ric − ∇² log u − N d log ζ ⊗ d log ζ ≥ κ₁ g` and
//! `Δ log ζ + g(d log u, d log ζ) ≤ κ₂` with `κ₁ > κ₂ ≥ 0`; then `α = κ₁ − κ₂`.

use super::forms::AJet;
use super::scan::{evaluate, Extremes, PointFailure, Witness};
use super::AssumptionError;
use crate::field::{DerivScheme, ScalarJet};
use crate::geometry::{self, GeometryError, MetricDerivs, MetricJet};
use crate::linalg::generalized_eigenvalues;
use crate::models::{ModelPoint, ModelSpec};
use crate::tensor::{Tensor3, Tensor4};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

pub const ISOTROPY_TOL: f64 = 1e-8;

#[derive(Clone, Debug, Serialize)]
pub struct WarpedResult {
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa1_witness: Witness,
    pub kappa2_witness: Witness,
    /// `κ₁ − κ₂` when `κ₁ > κ₂`.
    pub alpha: Option<f64>,
    pub failures: Vec<PointFailure>,
}

struct WarpedPoint {
    kappa1: f64,
    scalar: f64,
}

/// `ζ²` and the relative anisotropy of `A_IJ`.
fn conformal_factor(lower: &DMatrix<f64>) -> (f64, f64) {
    let n = lower.nrows();
    let z2 = lower.trace() / n as f64;
    let aniso = (lower - DMatrix::identity(n, n) * z2).amax() / z2.abs();
    (z2, aniso)
}

fn warped_at(pt: &ModelPoint) -> Result<Result<WarpedPoint, f64>, GeometryError> {
    let aj = AJet::at(pt)?;
    let jet = &pt.metric;
    let m = jet.dim();
    let n = aj.lower.nrows();
    let (z2, aniso) = conformal_factor(&aj.lower);
    if aniso > ISOTROPY_TOL || z2 <= 0.0 {
        return Ok(Err(aniso));
    }
    let dz2 = DVector::from_fn(m, |c, _| aj.d_lower[c].trace() / n as f64);
    let d2z2 = DMatrix::from_fn(m, m, |c, d| aj.d2_lower[c * m + d].trace() / n as f64);
    let log_zeta = ScalarJet {
        value: 0.5 * z2.ln(),
        grad: &dz2 * (0.5 / z2),
        hess: (&d2z2 / z2 - &dz2 * dz2.transpose() / (z2 * z2)) * 0.5,
        third: None,
    };
    let s = pt.bakry_emery_ricci() - &log_zeta.grad * log_zeta.grad.transpose() * n as f64;
    let kappa1 = generalized_eigenvalues(&s, &jet.g)
        .map_err(|_| GeometryError::NotPositiveDefinite {
            point: jet.point.clone(),
        })?
        .min();
    let scalar = geometry::laplace_beltrami(jet, &log_zeta)
        + geometry::inner_forms(jet, &pt.log_u.grad, &log_zeta.grad);
    Ok(Ok(WarpedPoint { kappa1, scalar }))
}

pub fn logsob_warped(
    model: &ModelSpec,
    points: &[Vec<f64>],
    scheme: DerivScheme,
) -> Result<WarpedResult, AssumptionError> {
    let results = evaluate(points, |p| warped_at(&model.at(p, scheme, 3)?));
    let mut k1 = Extremes::new();
    let mut k2 = Extremes::new();
    let mut failures = Vec::new();
    for (p, r) in points.iter().zip(results) {
        match r {
            Ok(Ok(w)) => {
                k1.push(p, w.kappa1, w.kappa1);
                k2.push(p, w.scalar, w.scalar);
            }
            Ok(Err(anisotropy)) => {
                return Err(AssumptionError::NotIsotropic {
                    point: p.clone(),
                    anisotropy,
                })
            }
            Err(e) => failures.push(PointFailure {
                point: p.clone(),
                message: e.to_string(),
            }),
        }
    }
    let kappa1_witness = if k1.min.point.is_empty() {
        Witness {
            point: vec![],
            value: f64::NAN,
        }
    } else {
        k1.min
    };
    let kappa2_witness = if k2.max.point.is_empty() {
        Witness {
            point: vec![],
            value: f64::NAN,
        }
    } else {
        k2.max
    };
    let kappa1 = kappa1_witness.value;
    let kappa2 = kappa2_witness.value.max(0.0);
    let alpha = (kappa1 > kappa2).then_some(kappa1 - kappa2);
    Ok(WarpedResult {
        kappa1,
        kappa2,
        kappa1_witness,
        kappa2_witness,
        alpha,
        failures,
    })
}

/// Product-metric objects at one momentum point; `2N x 2N`, ordered `(x, p)`.
#[derive(Clone, Debug)]
pub struct ProductPoint {
    pub metric: DMatrix<f64>,
    pub ricci: DMatrix<f64>,
    pub hessian_log_big_u: DMatrix<f64>,
}

impl ProductPoint {
    /// `Ric^G − ∇^G d log U`.
    pub fn curvature(&self) -> DMatrix<f64> {
        &self.ricci - &self.hessian_log_big_u
    }

    pub fn alpha(&self) -> Result<f64, GeometryError> {
        Ok(generalized_eigenvalues(&self.curvature(), &self.metric)
            .map_err(|_| GeometryError::NotPositiveDefinite { point: Vec::new() })?
            .min())
    }

    /// Largest entry of the mixed `(x, p)` block.
    pub fn off_diagonal(&self) -> f64 {
        let n = self.metric.nrows() / 2;
        self.curvature()
            .view((0, n), (n, self.metric.nrows() - n))
            .amax()
    }
}

/// Needs velocity jets of order 3.
pub fn product_at(pt: &ModelPoint) -> Result<ProductPoint, GeometryError> {
    let aj = AJet::at(pt)?;
    let jet = &pt.metric;
    let m = jet.dim();
    let n = aj.lower.nrows();
    let dim = n + m;
    let mut g = DMatrix::zeros(dim, dim);
    g.view_mut((0, 0), (n, n)).copy_from(&aj.lower);
    g.view_mut((n, n), (m, m)).copy_from(&jet.g);
    let mut dg = Tensor3::zeros(dim);
    let mut d2g = Tensor4::zeros(dim);
    for c in 0..m {
        for a in 0..n {
            for b in 0..n {
                dg.set(a, b, n + c, aj.d_lower[c][(a, b)]);
                for d in 0..m {
                    d2g.set(a, b, n + c, n + d, aj.d2_lower[c * m + d][(a, b)]);
                }
            }
        }
        for a in 0..m {
            for b in 0..m {
                dg.set(n + a, n + b, n + c, jet.dg.get(a, b, c));
                for d in 0..m {
                    d2g.set(n + a, n + b, n + c, n + d, jet.d2g.get(a, b, c, d));
                }
            }
        }
    }
    let mut point = vec![0.0; n];
    point.extend_from_slice(&jet.point);
    let big = MetricJet::assemble(&point, MetricDerivs { g, dg, d2g })?;
    let (hg, hh) = aj.half_log_det_upper();
    let mut grad = DVector::zeros(dim);
    let mut hess = DMatrix::zeros(dim, dim);
    for c in 0..m {
        grad[n + c] = pt.log_u.grad[c] + hg[c];
        for d in 0..m {
            hess[(n + c, n + d)] = pt.log_u.hess[(c, d)] + hh[(c, d)];
        }
    }
    let log_big_u = ScalarJet {
        value: pt.log_u.value - 0.5 * aj.lower.determinant().ln(),
        grad,
        hess,
        third: None,
    };
    Ok(ProductPoint {
        ricci: geometry::ricci(&big),
        hessian_log_big_u: geometry::covariant_hessian(&big, &log_big_u),
        metric: big.g,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ProductResult {
    pub alpha: f64,
    pub witness: Witness,
    /// Largest mixed-block entry seen over the grid.
    pub max_off_diagonal: f64,
    pub failures: Vec<PointFailure>,
}

impl ProductResult {
    pub fn pass(&self) -> bool {
        self.alpha > 0.0
    }
}

pub fn logsob_product(
    model: &ModelSpec,
    points: &[Vec<f64>],
    scheme: DerivScheme,
) -> Result<ProductResult, AssumptionError> {
    let results = evaluate(points, |p| {
        let pp = product_at(&model.at(p, scheme, 3)?)?;
        Ok((pp.alpha()?, pp.off_diagonal()))
    });
    let mut ext = Extremes::new();
    let mut off: f64 = 0.0;
    let mut failures = Vec::new();
    for (p, r) in points.iter().zip(results) {
        match r {
            Ok((a, o)) => {
                ext.push(p, a, a);
                off = off.max(o);
            }
            Err(GeometryError::NotPositiveDefinite { .. }) => {
                return Err(AssumptionError::DegenerateA {
                    point: p.clone(),
                    min_eigenvalue: f64::NAN,
                });
            }
            Err(e) => failures.push(PointFailure {
                point: p.clone(),
                message: e.to_string(),
            }),
        }
    }
    let witness = if ext.min.point.is_empty() {
        Witness {
            point: vec![],
            value: f64::NAN,
        }
    } else {
        ext.min
    };
    Ok(ProductResult {
        alpha: witness.value,
        witness,
        max_off_diagonal: off,
        failures,
    })
}

/// Temperatures tried by the threshold scan: `4 · 2^k` up to 1024.
pub fn default_theta_ladder() -> Vec<f64> {
    (0..=8).map(|k| 4.0 * f64::powi(2.0, k)).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct ThresholdResult {
    /// Smallest tried temperature at which the product criterion holds.
    pub threshold: Option<f64>,
    /// For each tried temperature, the first grid point violating the
    /// criterion and the eigenvalue there.
    pub violations: Vec<(f64, Option<Witness>)>,
}

/// Scan temperatures upward, stopping each temperature at its first
/// violating point and the ladder at the first success.
pub fn theta_threshold<F>(
    build: F,
    thetas: &[f64],
    points: &[Vec<f64>],
    scheme: DerivScheme,
) -> ThresholdResult
where
    F: Fn(f64) -> ModelSpec,
{
    let mut violations = Vec::new();
    for &theta in thetas {
        let model = build(theta);
        let alpha_at = |p: &[f64]| -> f64 {
            model
                .at(p, scheme, 3)
                .and_then(|pt| product_at(&pt))
                .and_then(|pp| pp.alpha())
                .unwrap_or(f64::NEG_INFINITY)
        };
        match points.par_iter().position_first(|p| alpha_at(p) <= 0.0) {
            Some(i) => {
                let w = Witness {
                    point: points[i].clone(),
                    value: alpha_at(&points[i]),
                };
                violations.push((theta, Some(w)));
            }
            None => {
                violations.push((theta, None));
                return ThresholdResult {
                    threshold: Some(theta),
                    violations,
                };
            }
        }
    }
    ThresholdResult {
        threshold: None,
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assumptions::ScanGrid;
    use crate::expr::{parse_expr, ParseContext};
    use crate::field::ScalarField;
    use crate::models::{
        builtin_classical, builtin_relativistic, ModelKind, RelativisticClosedForms,
    };

    #[test]
    fn test_classical_warped_alpha_one() {
        let model = builtin_classical(2);
        let pts = ScanGrid::new(4.0, 9, 20).points(2);
        let w = logsob_warped(&model, &pts, DerivScheme::Analytic).unwrap();
        assert_eq!(w.kappa1, 1.0);
        assert_eq!(w.kappa2, 0.0);
        assert_eq!(w.alpha, Some(1.0));
    }

    #[test]
    fn test_classical_product_fails_on_torus_block() {
        let model = builtin_classical(1);
        let pts = ScanGrid::new(4.0, 9, 0).points(1);
        let r = logsob_product(&model, &pts, DerivScheme::Analytic).unwrap();
        assert_eq!(r.alpha, 0.0);
        assert!(!r.pass());
    }

    #[test]
    fn test_relativistic_is_not_isotropic() {
        let model = builtin_relativistic(4.0);
        let pts = vec![vec![0.5, 0.2, -0.1]];
        assert!(matches!(
            logsob_warped(&model, &pts, DerivScheme::Analytic),
            Err(AssumptionError::NotIsotropic { .. })
        ));
    }

    /// Diffusion matrix `Π² δ` with `Π² = 1 + |p|²/4` and `v = p`: then
    /// `A_IJ = Π⁻² δ`, so `ζ = 1/Π`.
    #[test]
    fn test_isotropic_diffusion_accepted() {
        let m = 2;
        let ctx = ParseContext::momentum(m);
        let field = |s: &str| ScalarField::from_expr(parse_expr(s, &ctx).unwrap(), m);
        let conf = "1/(1 + (p1^2 + p2^2)/4)";
        let metric = vec![field(conf), field("0"), field("0"), field(conf)];
        let velocity = vec![field("p1"), field("p2")];
        let energy = field("(p1^2 + p2^2)/2");
        let model =
            ModelSpec::from_fields("isotropic", ModelKind::User, metric, velocity, energy, None);
        let p = [0.6, -1.4];
        let pt = model.at(&p, DerivScheme::Analytic, 3).unwrap();
        let aj = AJet::at(&pt).unwrap();
        let pi2 = 1.0 + (p[0] * p[0] + p[1] * p[1]) / 4.0;
        assert!((conformal_factor(&aj.lower).0 - 1.0 / pi2).abs() < 1e-14);
        let pts = ScanGrid::new(2.0, 5, 10).points(2);
        let w = logsob_warped(&model, &pts, DerivScheme::Analytic).unwrap();
        assert!(w.kappa1.is_finite() && w.kappa2.is_finite());
    }

    #[test]
    fn test_product_against_closed_forms() {
        let theta = 4.0;
        let cf = RelativisticClosedForms::new(theta);
        let model = builtin_relativistic(theta);
        for p in [[0.0, 0.0, 0.0], [0.7, -0.2, 1.5]] {
            let pp = product_at(&model.at(&p, DerivScheme::Analytic, 3).unwrap()).unwrap();
            let scale = |m: &DMatrix<f64>| m.amax().max(1.0);
            assert!((&pp.metric - cf.product_metric(&p)).amax() < 1e-12 * scale(&pp.metric));
            assert!((&pp.ricci - cf.ricci_product(&p)).amax() < 1e-9 * scale(&pp.ricci));
            let h = cf.hessian_log_big_u(&p);
            assert!((&pp.hessian_log_big_u - &h).amax() < 1e-9 * scale(&h));
            assert!(pp.off_diagonal() < 1e-9);
        }
        // At the origin the torus block is −11/2 G for every temperature.
        let pp = product_at(
            &builtin_relativistic(1000.0)
                .at(&[0.0; 3], DerivScheme::Analytic, 3)
                .unwrap(),
        )
        .unwrap();
        assert!((pp.alpha().unwrap() + 5.5).abs() < 1e-9);
    }
}
