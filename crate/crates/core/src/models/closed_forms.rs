//! Hand-derived closed forms for the three-dimensional relativistic model.
//!
//! These are independent of the geometry engine and serve as its oracle.
//! Two of the reference expressions (`b_form_reference`,
//! `hessian_log_big_u_reference`) do not agree with their definitions; the
//! corrected expressions are `b_form` and `hessian_log_big_u`.
//!
//! Product-metric objects are 6 x 6 with coordinates ordered `(x1, x2, x3,
//! p1, p2, p3)`.

use nalgebra::{DMatrix, DVector};

#[derive(Clone, Copy, Debug)]
pub struct RelativisticClosedForms {
    pub theta: f64,
}

fn delta() -> DMatrix<f64> {
    DMatrix::identity(3, 3)
}

fn outer(p: &[f64]) -> DMatrix<f64> {
    let v = DVector::from_column_slice(p);
    &v * v.transpose()
}

fn block(xx: DMatrix<f64>, pp: DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(6, 6);
    out.view_mut((0, 0), (3, 3)).copy_from(&xx);
    out.view_mut((3, 3), (3, 3)).copy_from(&pp);
    out
}

impl RelativisticClosedForms {
    pub fn new(theta: f64) -> Self {
        RelativisticClosedForms { theta }
    }

    pub fn p0(p: &[f64]) -> f64 {
        (1.0 + p.iter().map(|x| x * x).sum::<f64>()).sqrt()
    }

    pub fn metric(&self, p: &[f64]) -> DMatrix<f64> {
        let p0 = Self::p0(p);
        (delta() - outer(p) / (p0 * p0)) * p0
    }

    pub fn metric_inverse(&self, p: &[f64]) -> DMatrix<f64> {
        (delta() + outer(p)) / Self::p0(p)
    }

    /// `A^IJ`
    pub fn a_form(&self, p: &[f64]) -> DMatrix<f64> {
        let p0 = Self::p0(p);
        (delta() - outer(p) / (p0 * p0)) / p0.powi(3)
    }

    /// `A_IJ`, the inverse of `A^IJ`.
    pub fn a_lower(&self, p: &[f64]) -> DMatrix<f64> {
        (delta() + outer(p)) * Self::p0(p).powi(3)
    }

    pub fn b_form(&self, p: &[f64]) -> DMatrix<f64> {
        let p0 = Self::p0(p);
        let p2 = p0 * p0;
        delta() * (-(189.0 * p2 + 735.0) / (16.0 * p0.powi(9)))
            + self.a_form(p) * ((225.0 * p2 * p2 + 399.0 * p2 + 784.0) / (16.0 * p0.powi(6)))
    }

    /// Reference expression for `B^IJ`; differs from the definition.
    pub fn b_form_reference(&self, p: &[f64]) -> DMatrix<f64> {
        let p0 = Self::p0(p);
        let p2 = p0 * p0;
        let cd =
            (496.0 * p2.powi(3) - 9030.0 * p2 * p2 + 1035.0 * p2 - 25.0) / (16.0 * p0.powi(13));
        let ca =
            (25.0 - 1035.0 * p2 + 10551.0 * p2 * p2 + 1610.0 * p2.powi(3) + 729.0 * p2.powi(4))
                / (16.0 * p0.powi(10));
        delta() * cd + self.a_form(p) * ca
    }

    pub fn c_form(&self, p: &[f64]) -> DMatrix<f64> {
        let p0 = Self::p0(p);
        delta() * (9.0 / (4.0 * p0.powi(6)))
            + self.a_form(p) * (9.0 * (2.0 * p0 * p0 - 3.0) / (4.0 * p0.powi(3)))
    }

    pub fn r_form(&self, p: &[f64]) -> DMatrix<f64> {
        let p0 = Self::p0(p);
        let p2 = p0 * p0;
        let pre = (1.0 + 2.0 * self.theta * p0).powi(2) / (16.0 * p0.powi(9));
        (delta() * (16.0 * (p2 - 1.0))
            + self.a_form(p) * (p0.powi(3) * (9.0 * p2 * p2 - 34.0 * p2 + 25.0)))
            * pre
    }

    pub fn ricci(&self, p: &[f64]) -> DMatrix<f64> {
        let p0 = Self::p0(p);
        (delta() * 3.0 - self.metric(p) * ((4.0 + 15.0 * p0 * p0) / p0)) / (4.0 * p0 * p0)
    }

    pub fn hessian_log_u(&self, p: &[f64]) -> DMatrix<f64> {
        let p0 = Self::p0(p);
        let t = self.theta;
        let cg = (3.0 + 3.0 * p0 * p0 + 2.0 * t * p0 * (1.0 + 3.0 * p0 * p0)) / p0;
        (delta() * (4.0 + 4.0 * t * p0) - self.metric(p) * cg) / (4.0 * p0 * p0)
    }

    pub fn bakry_emery_ricci(&self, p: &[f64]) -> DMatrix<f64> {
        let p0 = Self::p0(p);
        let t = self.theta;
        let cg = (6.0 * t * p0.powi(3) - 12.0 * p0 * p0 + 2.0 * t * p0 - 1.0) / p0;
        (delta() * (-(1.0 + 4.0 * t * p0)) + self.metric(p) * cg) / (4.0 * p0 * p0)
    }

    /// Lower bound factor: `R̃ic ≥ factor · g`.
    pub fn bakry_emery_lower_factor(&self, p: &[f64]) -> f64 {
        let p0 = Self::p0(p);
        let t = self.theta;
        (2.0 * t * p0.powi(3) - 13.0 * p0 * p0 + 2.0 * t * p0 - 1.0) / (4.0 * p0.powi(3))
    }

    /// The block metric `A_IJ dx dx + g_ij dp dp`.
    pub fn product_metric(&self, p: &[f64]) -> DMatrix<f64> {
        block(self.a_lower(p), self.metric(p))
    }

    pub fn ricci_product(&self, p: &[f64]) -> DMatrix<f64> {
        let p0 = Self::p0(p);
        let p2 = p0 * p0;
        let xx = delta() * (6.5 * p2) - self.a_lower(p) * ((19.0 * p2 - 7.0) / p0.powi(3));
        let pp = delta() * (1.5 / p2) - self.metric(p) * ((25.0 * p2 - 3.0) / (2.0 * p0.powi(3)));
        block(xx, pp)
    }

    /// Hessian, for the product metric, of `log U` with `U = u/√det A_IJ`.
    pub fn hessian_log_big_u(&self, p: &[f64]) -> DMatrix<f64> {
        let p0 = Self::p0(p);
        let p2 = p0 * p0;
        let t = self.theta;
        let xx = (delta() * (2.0 * p2) - self.a_lower(p) * ((5.0 * p2 - 3.0) / p0.powi(3)))
            * ((t * p0 + 6.0) / 2.0);
        let pp = delta() * ((12.0 + t * p0) / p2)
            - self.metric(p)
                * ((6.0 * t * p0.powi(3) + 36.0 * p2 + 2.0 * t * p0 + 36.0) / (4.0 * p0.powi(3)));
        block(xx, pp)
    }

    /// Reference expression for the Hessian of `log U`; it corresponds to
    /// `u/det A_IJ` and has `5p0² − 2` in place of `5p0² − 3`.
    pub fn hessian_log_big_u_reference(&self, p: &[f64]) -> DMatrix<f64> {
        let p0 = Self::p0(p);
        let p2 = p0 * p0;
        let t = self.theta;
        let xx = (delta() * (2.0 * p2) - self.a_lower(p) * ((5.0 * p2 - 2.0) / p0.powi(3)))
            * ((23.0 + 2.0 * t * p0) / 4.0);
        let pp = delta() * ((23.0 + t * p0) / p2)
            - self.metric(p)
                * ((6.0 * t * p0.powi(3) + 69.0 * p2 + 2.0 * t * p0 + 69.0) / (4.0 * p0.powi(3)));
        block(xx, pp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn test_values_at_origin() {
        let cf = RelativisticClosedForms::new(4.0);
        let o = [0.0; 3];
        assert!((cf.ricci(&o) + delta() * 4.0).amax() < 1e-15);
        assert!((cf.bakry_emery_ricci(&o) - delta() * 0.5).amax() < 1e-15);
        assert!(cf.c_form(&o).amax() < 1e-15);
        assert!((cf.hessian_log_u(&o) + delta() * (18.0 / 4.0)).amax() < 1e-15);
        // Every radial function has a critical point at 0, so the x-block of
        // its product-metric Hessian vanishes there.
        assert!(cf.hessian_log_big_u(&o).view((0, 0), (3, 3)).amax() < 1e-15);
        assert!(
            cf.hessian_log_big_u_reference(&o)
                .view((0, 0), (3, 3))
                .amax()
                > 1.0
        );
    }

    #[test]
    fn test_a_form_at_unit_momentum() {
        let cf = RelativisticClosedForms::new(1.0);
        let a = cf.a_form(&[1.0, 0.0, 0.0]);
        let s = 2f64.powf(-1.5);
        let expected = DMatrix::from_diagonal(&nalgebra::dvector![s / 2.0, s, s]);
        assert!((a - expected).amax() < 1e-15);
    }

    #[test]
    fn test_lower_bound_factor_is_smallest_eigenvalue() {
        let cf = RelativisticClosedForms::new(4.0);
        let p = [0.4, -1.3, 0.8];
        let e = crate::linalg::generalized_eigenvalues(&cf.bakry_emery_ricci(&p), &cf.metric(&p))
            .unwrap();
        assert!((e.min() - cf.bakry_emery_lower_factor(&p)).abs() < 1e-12);
    }
}
