//! Kinetic Fokker–Planck models: a metric `g` on momentum space, velocity
//! functions `v^(I)` and an energy `E`, with the derived weight
//! `u = e^{-E}/√det g` and drift `W = ∂ log u`.

pub mod closed_forms;
mod file;

pub use closed_forms::RelativisticClosedForms;
pub use file::{load_model_file, parse_model_file, ModelFileError};

use crate::expr::{parse_expr, Expr, ParseContext, ParseError, Var};
use crate::field::{DerivScheme, ScalarField, ScalarJet};
use crate::geometry::{self, log_weight_jet, GeometryError, MetricDerivs, MetricJet, MetricSource};
use crate::tensor::{Tensor3, Tensor4};
use nalgebra::{DMatrix, DVector};
use std::sync::OnceLock;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Classical,
    Relativistic,
    User,
}

/// Normalisation of `e^{-E}` on a truncated box.
#[derive(Clone, Debug, PartialEq)]
pub struct Normalization {
    /// `Θ` with `Θ^{-1} = ∫ e^{-E} dp` over the box.
    pub theta_norm: f64,
    /// Fraction of the box integral carried by its outer shell (between 0.8
    /// and 1.0 of the half-width); a proxy for the mass outside the box.
    pub tail_fraction: f64,
    pub box_half_width: f64,
    pub points_per_axis: usize,
}

impl Normalization {
    pub const TAIL_WARNING: f64 = 1e-8;

    pub fn tail_warning(&self) -> bool {
        self.tail_fraction > Self::TAIL_WARNING
    }
}

#[derive(Clone, Debug)]
pub struct ModelSpec {
    name: String,
    kind: ModelKind,
    dim: usize,
    /// Row-major `dim x dim`; entries `(i, j)` and `(j, i)` share one field.
    metric: Vec<ScalarField>,
    velocity: Vec<ScalarField>,
    energy: ScalarField,
    theta: Option<f64>,
    normalization: OnceLock<Normalization>,
}

/// Textual definition of a model, as read from a model file.
#[derive(Clone, Debug)]
pub struct ModelExpressions {
    pub name: String,
    pub dim: usize,
    /// Upper triangle `(i, j, source)` with `i <= j`, zero-based; missing
    /// off-diagonal entries are zero.
    pub metric: Vec<(usize, usize, String)>,
    pub velocity: Vec<String>,
    pub energy: String,
    pub theta: Option<f64>,
}

/// Error while building a model from expressions.
#[derive(Clone, Debug, thiserror::Error, PartialEq)]
pub enum ModelBuildError {
    #[error("in `{field}`: {source}")]
    Parse { field: String, source: ParseError },
    #[error("`{field}` uses theta but no theta was given")]
    MissingTheta { field: String },
    #[error("model dimension must be at least 1")]
    ZeroDimension,
    #[error("expected {expected} velocity components, found {found}")]
    VelocityCount { expected: usize, found: usize },
    #[error("diagonal metric entry g{i}{i} is missing")]
    MissingDiagonal { i: usize },
}

impl ModelSpec {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn theta(&self) -> Option<f64> {
        self.theta
    }

    pub fn metric_field(&self, i: usize, j: usize) -> &ScalarField {
        &self.metric[i * self.dim + j]
    }

    pub fn velocity_field(&self, i: usize) -> &ScalarField {
        &self.velocity[i]
    }

    pub fn energy_field(&self) -> &ScalarField {
        &self.energy
    }

    /// Build a model from its defining fields. `metric` is row-major and must
    /// be symmetric as fields (the caller shares entries).
    pub fn from_fields(
        name: impl Into<String>,
        kind: ModelKind,
        metric: Vec<ScalarField>,
        velocity: Vec<ScalarField>,
        energy: ScalarField,
        theta: Option<f64>,
    ) -> Self {
        let dim = velocity.len();
        assert_eq!(metric.len(), dim * dim, "metric must have dim^2 entries");
        ModelSpec {
            name: name.into(),
            kind,
            dim,
            metric,
            velocity,
            energy,
            theta,
            normalization: OnceLock::new(),
        }
    }

    /// Build a model from expression sources; `theta` is substituted as a
    /// constant.
    pub fn from_expressions(
        def: &ModelExpressions,
        kind: ModelKind,
    ) -> Result<Self, ModelBuildError> {
        let m = def.dim;
        if m == 0 {
            return Err(ModelBuildError::ZeroDimension);
        }
        if def.velocity.len() != m {
            return Err(ModelBuildError::VelocityCount {
                expected: m,
                found: def.velocity.len(),
            });
        }
        let ctx = ParseContext::momentum(m).with_theta();
        let build = |field: String, src: &str| -> Result<ScalarField, ModelBuildError> {
            let e = parse_expr(src, &ctx).map_err(|source| ModelBuildError::Parse {
                field: field.clone(),
                source,
            })?;
            let e = match def.theta {
                Some(t) => e.substitute(Var::Theta, t),
                None if e.depends_on(Var::Theta) => {
                    return Err(ModelBuildError::MissingTheta { field })
                }
                None => e,
            };
            Ok(ScalarField::from_expr(e, m))
        };
        let zero = ScalarField::constant(0.0, m);
        let mut metric = vec![zero; m * m];
        let mut have_diag = vec![false; m];
        for (i, j, src) in &def.metric {
            let f = build(format!("g{}{}", i + 1, j + 1), src)?;
            metric[i * m + j] = f.clone();
            metric[j * m + i] = f;
            if i == j {
                have_diag[*i] = true;
            }
        }
        if let Some(i) = have_diag.iter().position(|h| !h) {
            return Err(ModelBuildError::MissingDiagonal { i: i + 1 });
        }
        let velocity = def
            .velocity
            .iter()
            .enumerate()
            .map(|(i, s)| build(format!("v{}", i + 1), s))
            .collect::<Result<Vec<_>, _>>()?;
        let energy = build("E".into(), &def.energy)?;
        Ok(ModelSpec::from_fields(
            def.name.clone(),
            kind,
            metric,
            velocity,
            energy,
            def.theta,
        ))
    }

    pub fn metric_value(&self, p: &[f64]) -> Result<DMatrix<f64>, GeometryError> {
        let m = self.dim;
        let mut g = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let v = self.metric[i * m + j]
                    .value(p)
                    .map_err(|e| GeometryError::eval(p, e))?;
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        Ok(g)
    }

    pub fn velocity_jets(
        &self,
        p: &[f64],
        order: usize,
        scheme: DerivScheme,
    ) -> Result<Vec<ScalarJet>, GeometryError> {
        self.velocity
            .iter()
            .map(|v| {
                v.jet(p, order, scheme)
                    .map_err(|e| GeometryError::eval(p, e))
            })
            .collect()
    }

    pub fn energy_jet(
        &self,
        p: &[f64],
        order: usize,
        scheme: DerivScheme,
    ) -> Result<ScalarJet, GeometryError> {
        self.energy
            .jet(p, order, scheme)
            .map_err(|e| GeometryError::eval(p, e))
    }

    pub fn metric_jet(&self, p: &[f64], scheme: DerivScheme) -> Result<MetricJet, GeometryError> {
        geometry::metric_jet(self, p, scheme)
    }

    /// Everything the pointwise checks need at `p`.
    pub fn at(
        &self,
        p: &[f64],
        scheme: DerivScheme,
        velocity_order: usize,
    ) -> Result<ModelPoint, GeometryError> {
        let metric = self.metric_jet(p, scheme)?;
        let energy = self.energy_jet(p, 2, scheme)?;
        if !energy.value.is_finite() {
            return Err(GeometryError::NonpositiveWeight { point: p.to_vec() });
        }
        let log_u = log_weight_jet(&metric, &energy);
        let velocity = self.velocity_jets(p, velocity_order, scheme)?;
        Ok(ModelPoint {
            metric,
            energy,
            log_u,
            velocity,
        })
    }

    /// `Θ` and the tail estimate on the default box `[-10, 10]^M`.
    pub fn normalization(&self) -> &Normalization {
        self.normalization.get_or_init(|| {
            let n = match self.dim {
                1 => 2001,
                2 => 401,
                3 => 81,
                _ => 21,
            };
            self.normalization_on_box(10.0, n)
        })
    }

    /// Midpoint-rule normalisation on `[-r, r]^M` with `n` cells per axis.
    /// Points where `E` cannot be evaluated contribute zero.
    pub fn normalization_on_box(&self, r: f64, n: usize) -> Normalization {
        let m = self.dim;
        let h = 2.0 * r / n as f64;
        let total_cells = n.pow(m as u32);
        let mut idx = vec![0usize; m];
        let mut p = vec![0.0; m];
        let (mut total, mut shell) = (0.0, 0.0);
        let mut min_e = f64::INFINITY;
        let mut energies = Vec::with_capacity(total_cells);
        for _ in 0..total_cells {
            for a in 0..m {
                p[a] = -r + (idx[a] as f64 + 0.5) * h;
            }
            let e = self.energy.value(&p).unwrap_or(f64::INFINITY);
            let inner = p.iter().all(|x| x.abs() <= 0.8 * r);
            min_e = min_e.min(e);
            energies.push((e, inner));
            for a in 0..m {
                idx[a] += 1;
                if idx[a] < n {
                    break;
                }
                idx[a] = 0;
            }
        }
        // Shift by the minimum energy so the sum cannot underflow.
        for (e, inner) in energies {
            let w = (-(e - min_e)).exp();
            total += w;
            if !inner {
                shell += w;
            }
        }
        let cell = h.powi(m as i32);
        let integral = total * cell * (-min_e).exp();
        Normalization {
            theta_norm: 1.0 / integral,
            tail_fraction: if total > 0.0 { shell / total } else { 1.0 },
            box_half_width: r,
            points_per_axis: n,
        }
    }
}

impl MetricSource for ModelSpec {
    fn dim(&self) -> usize {
        self.dim
    }

    fn metric_derivatives(
        &self,
        p: &[f64],
        scheme: DerivScheme,
    ) -> Result<MetricDerivs, GeometryError> {
        let m = self.dim;
        let mut g = DMatrix::zeros(m, m);
        let mut dg = Tensor3::zeros(m);
        let mut d2g = Tensor4::zeros(m);
        for a in 0..m {
            for b in a..m {
                let jet = self.metric[a * m + b]
                    .jet(p, 2, scheme)
                    .map_err(|e| GeometryError::eval(p, e))?;
                for (i, j) in [(a, b), (b, a)] {
                    g[(i, j)] = jet.value;
                    for c in 0..m {
                        dg.set(i, j, c, jet.grad[c]);
                        for d in 0..m {
                            d2g.set(i, j, c, d, jet.hess[(c, d)]);
                        }
                    }
                }
            }
        }
        Ok(MetricDerivs { g, dg, d2g })
    }
}

/// Pointwise geometric data of a model.
#[derive(Clone, Debug)]
pub struct ModelPoint {
    pub metric: MetricJet,
    /// Energy jet to second order.
    pub energy: ScalarJet,
    /// Jet of `log u` to second order.
    pub log_u: ScalarJet,
    pub velocity: Vec<ScalarJet>,
}

impl ModelPoint {
    pub fn point(&self) -> &[f64] {
        &self.metric.point
    }

    pub fn ricci(&self) -> DMatrix<f64> {
        geometry::ricci(&self.metric)
    }

    pub fn hessian_log_u(&self) -> DMatrix<f64> {
        geometry::covariant_hessian(&self.metric, &self.log_u)
    }

    /// `R̃ic = Ric − ∇² log u`.
    pub fn bakry_emery_ricci(&self) -> DMatrix<f64> {
        self.ricci() - self.hessian_log_u()
    }

    /// `W = ∂ log u` (contravariant).
    pub fn drift(&self) -> DVector<f64> {
        geometry::gradient_p(&self.metric, &self.log_u)
    }

    pub fn weight_u(&self) -> f64 {
        self.log_u.value.exp()
    }

    /// Coordinate Jacobian `∂_k v^(I)` as an `N x M` matrix.
    pub fn velocity_jacobian(&self) -> DMatrix<f64> {
        let n = self.velocity.len();
        let m = self.metric.dim();
        DMatrix::from_fn(n, m, |i, k| self.velocity[i].grad[k])
    }
}

pub fn weight_u(model: &ModelSpec, p: &[f64]) -> Result<f64, GeometryError> {
    let g = model.metric_value(p)?;
    let det = g.determinant();
    let e = model
        .energy
        .value(p)
        .map_err(|e| GeometryError::eval(p, e))?;
    let u = (-e).exp() / det.abs().sqrt();
    if det > 0.0 && u > 0.0 && u.is_finite() {
        Ok(u)
    } else {
        Err(GeometryError::NonpositiveWeight { point: p.to_vec() })
    }
}

pub fn drift_w(model: &ModelSpec, p: &[f64]) -> Result<DVector<f64>, GeometryError> {
    Ok(model.at(p, DerivScheme::Analytic, 0)?.drift())
}

fn momentum_sq(m: usize) -> String {
    (1..=m)
        .map(|i| format!("p{i}^2"))
        .collect::<Vec<_>>()
        .join(" + ")
}

fn must_parse(src: &str, m: usize) -> Expr {
    parse_expr(src, &ParseContext::momentum(m).with_theta()).expect("built-in expression parses")
}

/// `g = δ`, `v^(I) = p^I`, `E = |p|²/2`.
pub fn builtin_classical(m: usize) -> ModelSpec {
    assert!(m >= 1);
    let mut metric = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            metric.push(ScalarField::constant(if i == j { 1.0 } else { 0.0 }, m));
        }
    }
    let velocity = (0..m)
        .map(|i| ScalarField::from_expr(Expr::p(i), m))
        .collect();
    let energy = ScalarField::from_expr(must_parse(&format!("({})/2", momentum_sq(m)), m), m);
    ModelSpec::from_fields(
        format!("classical-{m}d"),
        ModelKind::Classical,
        metric,
        velocity,
        energy,
        None,
    )
}

/// The relativistic model in three dimensions.
pub fn builtin_relativistic(theta: f64) -> ModelSpec {
    relativistic_with_dim(theta, 3)
}

/// `g_ij = p0 (δ_ij − p_i p_j / p0²)`, `v = p/p0`, `E = θ p0` with
/// `p0 = √(1 + |p|²)`, in any dimension.
pub fn relativistic_with_dim(theta: f64, m: usize) -> ModelSpec {
    assert!(theta > 0.0 && m >= 1);
    let p0 = format!("sqrt(1 + {})", momentum_sq(m));
    let mut entries = Vec::new();
    for i in 0..m {
        for j in i..m {
            let src = if i == j {
                format!("{p0} - p{}^2/{p0}", i + 1)
            } else {
                format!("-p{}*p{}/{p0}", i + 1, j + 1)
            };
            entries.push((i, j, src));
        }
    }
    let def = ModelExpressions {
        name: format!("relativistic-{m}d"),
        dim: m,
        metric: entries,
        velocity: (1..=m).map(|i| format!("p{i}/{p0}")).collect(),
        energy: format!("theta*{p0}"),
        theta: Some(theta),
    };
    ModelSpec::from_expressions(&def, ModelKind::Relativistic)
        .expect("built-in model is well formed")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn test_classical_weight_and_drift() {
        let m = builtin_classical(1);
        let u = weight_u(&m, &[3.0]).unwrap();
        assert!((u - (-4.5f64).exp()).abs() < 1e-16);
        assert_eq!(drift_w(&m, &[3.0]).unwrap()[0], -3.0);
        assert_eq!(drift_w(&m, &[2.0]).unwrap()[0], -2.0);
        assert_eq!(weight_u(&builtin_classical(2), &[0.0, 0.0]).unwrap(), 1.0);
    }

    #[test]
    fn test_relativistic_basics() {
        let m = builtin_relativistic(4.0);
        assert!((weight_u(&m, &[0.0; 3]).unwrap() - (-4.0f64).exp()).abs() < 1e-16);
        let g = m.metric_value(&[0.0, 0.0, 2.0]).unwrap();
        assert!((g.determinant() - 5f64.sqrt()).abs() < 1e-14);
        let v = m.velocity_field(0).value(&[1.0, 0.0, 0.0]).unwrap();
        assert!((v - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(drift_w(&m, &[0.0; 3]).unwrap().amax(), 0.0);
        let jet = m
            .metric_jet(&[1.0, 0.0, 0.0], DerivScheme::Analytic)
            .unwrap();
        assert!((jet.sqrt_det - 2f64.powf(0.25)).abs() < 1e-14);
    }

    #[test]
    fn test_relativistic_drift_oracle() {
        // W = g^{-1} ∂(−θ p0 − ½ log p0) with ∂_i p0 = p_i/p0.
        let theta = 4.0;
        let m = builtin_relativistic(theta);
        let p = [1.0, 0.0, 0.0];
        let p0 = 2f64.sqrt();
        let dlog = -(theta + 0.5 / p0) / p0;
        let g_inv = (DMatrix::identity(3, 3)
            + DMatrix::from_row_slice(3, 3, &[1.0, 0., 0., 0., 0., 0., 0., 0., 0.]))
            / p0;
        let expected = g_inv * DVector::from_vec(vec![dlog * p[0], 0.0, 0.0]);
        assert!((drift_w(&m, &p).unwrap() - expected).amax() < 1e-10);
    }

    #[test]
    fn test_normalization_classical() {
        let m = builtin_classical(1);
        let n = m.normalization();
        assert!((n.theta_norm - 1.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
        assert!(!n.tail_warning());
        let heavy = relativistic_with_dim(0.1, 1);
        assert!(heavy.normalization().tail_warning());
    }
}
