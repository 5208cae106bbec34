//! Small dense linear algebra helpers on top of nalgebra.

use nalgebra::{Cholesky, DMatrix, Dyn};
use thiserror::Error;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum LinalgError {
    #[error("reference form is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },
    #[error("tridiagonal system is singular at row {row}")]
    SingularTridiagonal { row: usize },
}

/// Relative shift added to a nearly singular reference form before factorising.
pub const CHOLESKY_SHIFT: f64 = 1e-12;

/// Eigenvalues of the pencil `(s, b)`: the values `l` with `s x = l b x`.
#[derive(Clone, Debug)]
pub struct GeneralizedEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Whether the diagonal shift had to be applied to `b`.
    pub shifted: bool,
}

impl GeneralizedEigen {
    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        *self.values.last().unwrap()
    }
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    symmetrize(m).symmetric_eigenvalues().min()
}

fn cholesky_with_shift(b: &DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, bool), LinalgError> {
    let b = symmetrize(b);
    if let Some(c) = Cholesky::new(b.clone()) {
        return Ok((c, false));
    }
    let scale = b.diagonal().amax().max(f64::MIN_POSITIVE);
    let shifted = &b + DMatrix::identity(b.nrows(), b.ncols()) * (CHOLESKY_SHIFT * scale);
    match Cholesky::new(shifted) {
        Some(c) => Ok((c, true)),
        None => Err(LinalgError::NotPositiveDefinite {
            min_eigenvalue: min_eigenvalue(&b),
        }),
    }
}

/// Solve the symmetric-definite pencil by reducing `L^-1 s L^-T` with the
/// Cholesky factor `b = L L^T`.
pub fn generalized_eigenvalues(
    s: &DMatrix<f64>,
    b: &DMatrix<f64>,
) -> Result<GeneralizedEigen, LinalgError> {
    let (chol, shifted) = cholesky_with_shift(b)?;
    let l = chol.l();
    let x = l
        .solve_lower_triangular(&symmetrize(s))
        .expect("Cholesky factor has a positive diagonal");
    let y = l
        .solve_lower_triangular(&x.transpose())
        .expect("Cholesky factor has a positive diagonal");
    let mut values: Vec<f64> = symmetrize(&y)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    values.sort_by(|a, b| a.total_cmp(b));
    Ok(GeneralizedEigen { values, shifted })
}

/// Solve a tridiagonal system `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]`
/// in place (Thomas algorithm). `lower[0]` and `upper[n-1]` are ignored.
pub fn solve_tridiagonal(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &mut [f64],
    scratch: &mut Vec<f64>,
) -> Result<(), LinalgError> {
    let n = diag.len();
    scratch.clear();
    scratch.resize(n, 0.0);
    let mut denom = diag[0];
    if denom == 0.0 {
        return Err(LinalgError::SingularTridiagonal { row: 0 });
    }
    scratch[0] = upper[0] / denom;
    rhs[0] /= denom;
    for i in 1..n {
        denom = diag[i] - lower[i] * scratch[i - 1];
        if denom == 0.0 || !denom.is_finite() {
            return Err(LinalgError::SingularTridiagonal { row: i });
        }
        scratch[i] = if i + 1 < n { upper[i] / denom } else { 0.0 };
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= scratch[i] * rhs[i + 1];
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn test_pencil_against_diagonal() {
        let s = DMatrix::from_diagonal(&nalgebra::dvector![2.0, -3.0, 8.0]);
        let b = DMatrix::from_diagonal(&nalgebra::dvector![1.0, 3.0, 4.0]);
        let e = generalized_eigenvalues(&s, &b).unwrap();
        for (got, want) in e.values.iter().zip([-1.0, 2.0, 2.0]) {
            assert!((got - want).abs() < 1e-14);
        }
        assert!(!e.shifted);
    }

    #[test]
    fn test_indefinite_reference_rejected() {
        let s = DMatrix::identity(2, 2);
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            generalized_eigenvalues(&s, &b),
            Err(LinalgError::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn test_tridiagonal() {
        let lower = [0.0, -1.0, -1.0, -1.0];
        let diag = [2.0, 2.0, 2.0, 2.0];
        let upper = [-1.0, -1.0, -1.0, 0.0];
        let x = [1.0, -2.0, 0.5, 3.0];
        let mut rhs: Vec<f64> = (0..4)
            .map(|i| {
                let mut r = diag[i] * x[i];
                if i > 0 {
                    r += lower[i] * x[i - 1];
                }
                if i < 3 {
                    r += upper[i] * x[i + 1];
                }
                r
            })
            .collect();
        solve_tridiagonal(&lower, &diag, &upper, &mut rhs, &mut Vec::new()).unwrap();
        for i in 0..4 {
            assert!((rhs[i] - x[i]).abs() < 1e-14);
        }
    }
}
