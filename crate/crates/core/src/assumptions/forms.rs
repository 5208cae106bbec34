//! The bilinear forms on the velocity index space.
//!
//! With `J_Ik = ∂_k v^(I)` and `H_I` the covariant Hessian of `v^(I)`:
//!
//! * `A^IJ = g(∂v^I, ∂v^J) = (J g⁻¹ Jᵀ)_IJ`
//! * `B^IJ = g(div ∂²v^I, div ∂²v^J)`
//! * `C^IJ = g(∇²v^I, ∇²v^J) = tr(g⁻¹ H_I g⁻¹ H_J)`
//! * `R^IJ = g(K^I, K^J)` with `K^I = ∂²v^I(d log u, ·)`

use crate::field::DerivScheme;
use crate::geometry::{self, GeometryError};
use crate::models::{ModelPoint, ModelSpec};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FormKind {
    A,
    B,
    C,
    R,
}

#[derive(Clone, Debug)]
pub struct FormNxN {
    pub entries: DMatrix<f64>,
    pub kind: FormKind,
    pub at: Vec<f64>,
}

/// All four forms at one point.
#[derive(Clone, Debug)]
pub struct FormSet {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

pub fn form_a_at(pt: &ModelPoint) -> DMatrix<f64> {
    let j = pt.velocity_jacobian();
    crate::linalg::symmetrize(&(&j * &pt.metric.g_inv * j.transpose()))
}

/// `K^I` for every velocity component (contravariant vectors).
pub fn k_vectors(pt: &ModelPoint) -> Vec<DVector<f64>> {
    let w_lower = &pt.log_u.grad;
    pt.velocity
        .iter()
        .map(|v| {
            pt.metric
                .raise2(&geometry::covariant_hessian(&pt.metric, v))
                * w_lower
        })
        .collect()
}

fn gram(vectors: &[DVector<f64>], g: &DMatrix<f64>) -> DMatrix<f64> {
    let n = vectors.len();
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        let gi = g * &vectors[i];
        for j in i..n {
            let s = vectors[j].dot(&gi);
            out[(i, j)] = s;
            out[(j, i)] = s;
        }
    }
    out
}

/// Requires velocity jets of order 3.
pub fn form_set(pt: &ModelPoint) -> FormSet {
    let jet = &pt.metric;
    let n = pt.velocity.len();
    let hess: Vec<DMatrix<f64>> = pt
        .velocity
        .iter()
        .map(|v| geometry::covariant_hessian(jet, v))
        .collect();
    let raised: Vec<DMatrix<f64>> = hess.iter().map(|h| jet.raise2(h)).collect();
    let mut c = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let s = raised[i].component_mul(&hess[j]).sum();
            c[(i, j)] = s;
            c[(j, i)] = s;
        }
    }
    let div: Vec<DVector<f64>> = pt
        .velocity
        .iter()
        .map(|v| geometry::divergence_tensor2(jet, &geometry::raised_hessian_jet(jet, v)))
        .collect();
    let w_lower = &pt.log_u.grad;
    let k: Vec<DVector<f64>> = raised.iter().map(|r| r * w_lower).collect();
    FormSet {
        a: form_a_at(pt),
        b: gram(&div, &jet.g),
        c,
        r: gram(&k, &jet.g),
    }
}

fn single(
    model: &ModelSpec,
    p: &[f64],
    scheme: DerivScheme,
    kind: FormKind,
) -> Result<FormNxN, GeometryError> {
    let order = if kind == FormKind::A { 1 } else { 3 };
    let pt = model.at(p, scheme, order)?;
    let entries = match kind {
        FormKind::A => form_a_at(&pt),
        _ => {
            let set = form_set(&pt);
            match kind {
                FormKind::B => set.b,
                FormKind::C => set.c,
                _ => set.r,
            }
        }
    };
    Ok(FormNxN {
        entries,
        kind,
        at: p.to_vec(),
    })
}

pub fn form_a(model: &ModelSpec, p: &[f64], scheme: DerivScheme) -> Result<FormNxN, GeometryError> {
    single(model, p, scheme, FormKind::A)
}

pub fn form_b(model: &ModelSpec, p: &[f64], scheme: DerivScheme) -> Result<FormNxN, GeometryError> {
    single(model, p, scheme, FormKind::B)
}

pub fn form_c(model: &ModelSpec, p: &[f64], scheme: DerivScheme) -> Result<FormNxN, GeometryError> {
    single(model, p, scheme, FormKind::C)
}

pub fn form_r(model: &ModelSpec, p: &[f64], scheme: DerivScheme) -> Result<FormNxN, GeometryError> {
    single(model, p, scheme, FormKind::R)
}

/// `A^IJ`, its lower-index inverse `A_IJ`, and their momentum derivatives
/// to second order. Needs velocity jets of order 3.
#[derive(Clone, Debug)]
pub struct AJet {
    pub upper: DMatrix<f64>,
    /// `d_upper[c] = ∂_c A^IJ`
    pub d_upper: Vec<DMatrix<f64>>,
    /// `d2_upper[c * m + d] = ∂_c ∂_d A^IJ`
    pub d2_upper: Vec<DMatrix<f64>>,
    pub lower: DMatrix<f64>,
    pub d_lower: Vec<DMatrix<f64>>,
    pub d2_lower: Vec<DMatrix<f64>>,
}

impl AJet {
    pub fn at(pt: &ModelPoint) -> Result<Self, GeometryError> {
        let jet = &pt.metric;
        let m = jet.dim();
        let n = pt.velocity.len();
        let third: Vec<_> = pt
            .velocity
            .iter()
            .map(|v| {
                v.third
                    .as_ref()
                    .expect("A derivatives need third-order velocity jets")
            })
            .collect();
        let j = pt.velocity_jacobian();
        let dj: Vec<DMatrix<f64>> = (0..m)
            .map(|c| DMatrix::from_fn(n, m, |i, k| pt.velocity[i].hess[(k, c)]))
            .collect();
        let d2j = |c: usize, d: usize| DMatrix::from_fn(n, m, |i, k| third[i].get(k, c, d));
        let gi = &jet.g_inv;
        let dgi: Vec<DMatrix<f64>> = (0..m)
            .map(|c| DMatrix::from_fn(m, m, |a, b| jet.dg_inv.get(a, b, c)))
            .collect();
        let dg: Vec<DMatrix<f64>> = (0..m)
            .map(|c| DMatrix::from_fn(m, m, |a, b| jet.dg.get(a, b, c)))
            .collect();
        // ∂_cd g⁻¹ = g⁻¹ ∂_d g g⁻¹ ∂_c g g⁻¹ + g⁻¹ ∂_c g g⁻¹ ∂_d g g⁻¹ − g⁻¹ ∂_cd g g⁻¹
        let d2gi = |c: usize, d: usize| {
            let d2g = DMatrix::from_fn(m, m, |a, b| jet.d2g.get(a, b, c, d));
            gi * &dg[d] * gi * &dg[c] * gi + gi * &dg[c] * gi * &dg[d] * gi - gi * d2g * gi
        };

        let upper = crate::linalg::symmetrize(&(&j * gi * j.transpose()));
        let d_upper: Vec<DMatrix<f64>> = (0..m)
            .map(|c| {
                let t = &dj[c] * gi * j.transpose();
                &t + t.transpose() + &j * &dgi[c] * j.transpose()
            })
            .collect();
        let mut d2_upper = Vec::with_capacity(m * m);
        for c in 0..m {
            for d in 0..m {
                let t = d2j(c, d) * gi * j.transpose()
                    + &dj[c] * &dgi[d] * j.transpose()
                    + &dj[d] * &dgi[c] * j.transpose();
                let cross = &dj[c] * gi * dj[d].transpose();
                d2_upper.push(
                    &t + t.transpose()
                        + &cross
                        + cross.transpose()
                        + &j * d2gi(c, d) * j.transpose(),
                );
            }
        }
        let lower =
            upper
                .clone()
                .try_inverse()
                .ok_or_else(|| GeometryError::NotPositiveDefinite {
                    point: jet.point.clone(),
                })?;
        let lower = crate::linalg::symmetrize(&lower);
        let d_lower: Vec<DMatrix<f64>> = d_upper.iter().map(|da| -(&lower * da * &lower)).collect();
        let mut d2_lower = Vec::with_capacity(m * m);
        for c in 0..m {
            for d in 0..m {
                let v = &lower * &d_upper[d] * &lower * &d_upper[c] * &lower
                    + &lower * &d_upper[c] * &lower * &d_upper[d] * &lower
                    - &lower * &d2_upper[c * m + d] * &lower;
                d2_lower.push(v);
            }
        }
        Ok(AJet {
            upper,
            d_upper,
            d2_upper,
            lower,
            d_lower,
            d2_lower,
        })
    }

    pub fn dim(&self) -> usize {
        self.d_upper.len()
    }

    /// Gradient and Hessian of `½ log det A^IJ`.
    pub fn half_log_det_upper(&self) -> (DVector<f64>, DMatrix<f64>) {
        let m = self.dim();
        let grad = DVector::from_fn(m, |c, _| 0.5 * (&self.lower * &self.d_upper[c]).trace());
        let hess = DMatrix::from_fn(m, m, |c, d| {
            0.5 * ((&self.lower * &self.d2_upper[c * m + d]).trace()
                - (&self.lower * &self.d_upper[d] * &self.lower * &self.d_upper[c]).trace())
        });
        (grad, crate::linalg::symmetrize(&hess))
    }
}
