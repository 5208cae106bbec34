//! Grid scans for the pointwise assumptions.
//!
//! Every scan evaluates points independently (in parallel) and reduces the
//! results in grid order, so the outcome does not depend on scheduling.

use super::forms::{form_a_at, form_set};
use super::AssumptionError;
use crate::field::DerivScheme;
use crate::geometry::GeometryError;
use crate::linalg::{generalized_eigenvalues, min_eigenvalue, LinalgError};
use crate::models::ModelSpec;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

/// Where an extreme value was attained.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub point: Vec<f64>,
    pub value: f64,
}

impl Witness {
    fn none() -> Self {
        Witness {
            point: Vec::new(),
            value: f64::NAN,
        }
    }
}

/// A grid point at which evaluation failed; the scan carries on without it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointFailure {
    pub point: Vec<f64>,
    pub message: String,
}

pub(crate) fn evaluate<T, F>(points: &[Vec<f64>], f: F) -> Vec<Result<T, GeometryError>>
where
    T: Send,
    F: Fn(&[f64]) -> Result<T, GeometryError> + Sync,
{
    points.par_iter().map(|p| f(p)).collect()
}

/// Running minimum and maximum with witnesses.
#[derive(Clone, Debug)]
pub(crate) struct Extremes {
    pub min: Witness,
    pub max: Witness,
}

impl Extremes {
    pub fn new() -> Self {
        Extremes {
            min: Witness {
                point: Vec::new(),
                value: f64::INFINITY,
            },
            max: Witness {
                point: Vec::new(),
                value: f64::NEG_INFINITY,
            },
        }
    }

    pub fn push(&mut self, p: &[f64], lo: f64, hi: f64) {
        if lo < self.min.value {
            self.min = Witness {
                point: p.to_vec(),
                value: lo,
            };
        }
        if hi > self.max.value {
            self.max = Witness {
                point: p.to_vec(),
                value: hi,
            };
        }
    }

    fn finish(mut self) -> Self {
        if self.min.point.is_empty() {
            self.min = Witness::none();
        }
        if self.max.point.is_empty() {
            self.max = Witness::none();
        }
        self
    }
}

fn failure(p: &[f64], e: impl std::fmt::Display) -> PointFailure {
    PointFailure {
        point: p.to_vec(),
        message: e.to_string(),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CurvatureBounds {
    pub sigma1: f64,
    pub sigma2: f64,
    pub sigma1_witness: Witness,
    pub sigma2_witness: Witness,
    pub failures: Vec<PointFailure>,
    /// Points where the metric needed the diagonal shift to factorise.
    pub shifted_points: usize,
}

impl CurvatureBounds {
    pub fn pass(&self) -> bool {
        self.sigma1 >= 0.0
    }

    pub fn partial(&self) -> bool {
        !self.failures.is_empty()
    }
}

/// Extreme generalised eigenvalues of `(R̃ic, g)` over the points.
pub fn curvature_bounds(
    model: &ModelSpec,
    points: &[Vec<f64>],
    scheme: DerivScheme,
) -> CurvatureBounds {
    let results = evaluate(points, |p| {
        let pt = model.at(p, scheme, 0)?;
        generalized_eigenvalues(&pt.bakry_emery_ricci(), &pt.metric.g)
            .map_err(|_| GeometryError::NotPositiveDefinite { point: p.to_vec() })
    });
    let mut ext = Extremes::new();
    let mut failures = Vec::new();
    let mut shifted_points = 0;
    for (p, r) in points.iter().zip(results) {
        match r {
            Ok(e) => {
                ext.push(p, e.min(), e.max());
                shifted_points += e.shifted as usize;
            }
            Err(e) => failures.push(failure(p, e)),
        }
    }
    let ext = ext.finish();
    CurvatureBounds {
        sigma1: ext.min.value,
        sigma2: ext.max.value,
        sigma1_witness: ext.min,
        sigma2_witness: ext.max,
        failures,
        shifted_points,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DominanceConstants {
    pub beta: f64,
    pub gamma: f64,
    pub omega: f64,
    pub beta_witness: Witness,
    pub gamma_witness: Witness,
    pub omega_witness: Witness,
    pub failures: Vec<PointFailure>,
    pub shifted_points: usize,
}

/// Largest generalised eigenvalues of `(B, A)`, `(C, A)` and `(R, A)`.
/// Each constant is clamped below at zero (the forms are Gram matrices).
pub fn dominance_constants(
    model: &ModelSpec,
    points: &[Vec<f64>],
    scheme: DerivScheme,
) -> Result<DominanceConstants, AssumptionError> {
    let results = evaluate(points, |p| {
        let pt = model.at(p, scheme, 3)?;
        let f = form_set(&pt);
        let a_min = min_eigenvalue(&f.a);
        if a_min <= 0.0 {
            return Ok(Err(LinalgError::NotPositiveDefinite {
                min_eigenvalue: a_min,
            }));
        }
        let eig = |s: &DMatrix<f64>| generalized_eigenvalues(s, &f.a);
        Ok(match (eig(&f.b), eig(&f.c), eig(&f.r)) {
            (Ok(b), Ok(c), Ok(r)) => Ok([b, c, r]),
            (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => Err(e),
        })
    });
    let mut ext = [Extremes::new(), Extremes::new(), Extremes::new()];
    let mut failures = Vec::new();
    let mut shifted_points = 0;
    for (p, r) in points.iter().zip(results) {
        match r {
            Ok(Ok(e)) => {
                for (x, ei) in ext.iter_mut().zip(&e) {
                    x.push(p, ei.min(), ei.max());
                }
                shifted_points += e[0].shifted as usize;
            }
            Ok(Err(LinalgError::NotPositiveDefinite { min_eigenvalue })) => {
                return Err(AssumptionError::DegenerateA {
                    point: p.clone(),
                    min_eigenvalue,
                });
            }
            Ok(Err(e)) => failures.push(failure(p, e)),
            Err(e) => failures.push(failure(p, e)),
        }
    }
    let [b, c, r] = ext.map(Extremes::finish);
    let clamp = |w: &Witness| {
        if w.value.is_nan() {
            f64::NAN
        } else {
            w.value.max(0.0)
        }
    };
    Ok(DominanceConstants {
        beta: clamp(&b.max),
        gamma: clamp(&c.max),
        omega: clamp(&r.max),
        beta_witness: b.max,
        gamma_witness: c.max,
        omega_witness: r.max,
        failures,
        shifted_points,
    })
}

/// Smallest eigenvalue of `A` over the points (positive iff `A` is
/// nondegenerate everywhere on the grid).
pub fn a_min_eigenvalue(model: &ModelSpec, points: &[Vec<f64>], scheme: DerivScheme) -> Witness {
    let results = evaluate(points, |p| {
        Ok(min_eigenvalue(&form_a_at(&model.at(p, scheme, 1)?)))
    });
    let mut ext = Extremes::new();
    for (p, r) in points.iter().zip(results) {
        if let Ok(v) = r {
            ext.push(p, v, v);
        }
    }
    ext.finish().min
}

#[derive(Clone, Debug, Serialize)]
pub struct HormanderResult {
    pub min_abs_det_f: f64,
    pub witness: Witness,
    pub ok: bool,
}

/// `min det g · |det ∂v|` over the points.
pub fn hormander_check(
    model: &ModelSpec,
    points: &[Vec<f64>],
    scheme: DerivScheme,
) -> HormanderResult {
    let results = evaluate(points, |p| {
        let pt = model.at(p, scheme, 1)?;
        let det_g = pt.metric.sqrt_det * pt.metric.sqrt_det;
        Ok(det_g * pt.velocity_jacobian().determinant().abs())
    });
    let mut ext = Extremes::new();
    let mut ok = !points.is_empty();
    for (p, r) in points.iter().zip(results) {
        match r {
            Ok(v) => ext.push(p, v, v),
            Err(_) => {
                ok = false;
                ext.push(p, 0.0, 0.0);
            }
        }
    }
    let witness = ext.finish().min;
    HormanderResult {
        min_abs_det_f: witness.value,
        ok: ok && witness.value > 0.0,
        witness,
    }
}

pub const DEFAULT_GROWTH_RADII: [f64; 7] = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0];

#[derive(Clone, Debug, Serialize)]
pub struct GrowthResult {
    /// `(radius, max |g^ij| / r²)` over the sampled directions.
    pub samples: Vec<(f64, f64)>,
    pub ok: bool,
}

/// Sample directions: the coordinate axes and the cube diagonals.
fn directions(m: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for a in 0..m {
        for s in [1.0, -1.0] {
            let mut d = vec![0.0; m];
            d[a] = s;
            out.push(d);
        }
    }
    if m > 1 {
        let scale = 1.0 / (m as f64).sqrt();
        for mask in 0..(1usize << m.min(6)) {
            out.push(
                (0..m)
                    .map(|a| if mask >> a & 1 == 1 { -scale } else { scale })
                    .collect(),
            );
        }
    }
    out
}

/// The inverse metric must grow slower than `|p|²`: the ratio has to
/// decrease along the radii and end below a tenth of its first value.
pub fn growth_check(model: &ModelSpec, radii: &[f64]) -> Result<GrowthResult, AssumptionError> {
    if radii.len() < 2
        || radii.windows(2).any(|w| w[1] <= w[0])
        || radii[radii.len() - 1] < 10.0 * radii[0]
    {
        return Err(AssumptionError::BadRadii);
    }
    let dirs = directions(model.dim());
    let mut samples = Vec::with_capacity(radii.len());
    for &r in radii {
        let mut worst: f64 = 0.0;
        for d in &dirs {
            let p: Vec<f64> = d.iter().map(|x| x * r).collect();
            let g = model.metric_value(&p)?;
            let inv = g
                .try_inverse()
                .ok_or(GeometryError::NotPositiveDefinite { point: p.clone() })?;
            worst = worst.max(inv.amax() / (r * r));
        }
        samples.push((r, worst));
    }
    let monotone = samples.windows(2).all(|w| w[1].1 <= w[0].1);
    let ok = monotone && samples[samples.len() - 1].1 < samples[0].1 / 10.0;
    Ok(GrowthResult { samples, ok })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assumptions::ScanGrid;
    use crate::field::ScalarField;
    use crate::models::{builtin_classical, builtin_relativistic, ModelKind};

    #[test]
    fn test_classical_constants_exact() {
        let model = builtin_classical(2);
        let pts = ScanGrid::new(5.0, 11, 50).points(2);
        let cb = curvature_bounds(&model, &pts, DerivScheme::Analytic);
        assert_eq!((cb.sigma1, cb.sigma2), (1.0, 1.0));
        let dc = dominance_constants(&model, &pts, DerivScheme::Analytic).unwrap();
        assert_eq!((dc.beta, dc.gamma, dc.omega), (0.0, 0.0, 0.0));
        let h = hormander_check(&model, &pts, DerivScheme::Analytic);
        assert_eq!(h.min_abs_det_f, 1.0);
    }

    #[test]
    fn test_low_temperature_curvature_witness() {
        let model = builtin_relativistic(0.1);
        let pts = ScanGrid::new(3.0, 7, 0).points(3);
        let cb = curvature_bounds(&model, &pts, DerivScheme::Analytic);
        assert!(!cb.pass());
        assert!((cb.sigma1 - (0.1 - 3.5)).abs() < 1e-12);
        assert!(cb.sigma1_witness.point.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn test_degenerate_velocity() {
        let m = 2;
        let metric = vec![
            ScalarField::constant(1.0, m),
            ScalarField::constant(0.0, m),
            ScalarField::constant(0.0, m),
            ScalarField::constant(1.0, m),
        ];
        let velocity = vec![
            ScalarField::constant(0.5, m),
            ScalarField::from_fn(m, |p| Ok(p[1])),
        ];
        let energy = ScalarField::from_fn(m, |p| Ok(0.5 * (p[0] * p[0] + p[1] * p[1])));
        let model = ModelSpec::from_fields(
            "degenerate",
            ModelKind::User,
            metric,
            velocity,
            energy,
            None,
        );
        let pts = ScanGrid::new(1.0, 3, 0).points(2);
        let h = hormander_check(&model, &pts, DerivScheme::Analytic);
        assert_eq!(h.min_abs_det_f, 0.0);
        assert!(!h.ok);
        assert!(matches!(
            dominance_constants(&model, &pts, DerivScheme::Analytic),
            Err(AssumptionError::DegenerateA { .. })
        ));
    }

    #[test]
    fn test_growth() {
        let radii = DEFAULT_GROWTH_RADII;
        assert!(growth_check(&builtin_classical(2), &radii).unwrap().ok);
        assert!(growth_check(&builtin_relativistic(4.0), &radii).unwrap().ok);
        // g^ij = (1 + |p|²)² δ grows faster than |p|².
        let m = 2;
        let conformal = |p: &[f64]| Ok((1.0 + p[0] * p[0] + p[1] * p[1]).powi(-2));
        let metric = vec![
            ScalarField::from_fn(m, conformal),
            ScalarField::constant(0.0, m),
            ScalarField::constant(0.0, m),
            ScalarField::from_fn(m, conformal),
        ];
        let velocity = (0..m)
            .map(|i| ScalarField::from_fn(m, move |p| Ok(p[i])))
            .collect();
        let energy = ScalarField::from_fn(m, |p| Ok(0.5 * (p[0] * p[0] + p[1] * p[1])));
        let model = ModelSpec::from_fields("fast", ModelKind::User, metric, velocity, energy, None);
        assert!(!growth_check(&model, &radii).unwrap().ok);
        assert!(matches!(
            growth_check(&model, &[1.0, 2.0]),
            Err(AssumptionError::BadRadii)
        ));
    }
}
