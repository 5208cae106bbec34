use super::{PhaseGrid, SolverError};
use rayon::prelude::*;

/// The momentum operator `L h = (1/ρ) ∂p(ρ g^pp ∂p h)`, `ρ = e^{-E}`, in flux
/// form with zero flux through both ends. Written with the cell weights
/// `w_j` and face couplings `κ_f`,
///
/// ```text
/// w_j (Lh)_j = κ_j (h_{j+1} - h_j) - κ_{j-1} (h_j - h_{j-1})
/// ```
///
/// so `Σ_j w_j f_j (Lh)_j = -Σ_f κ_f Δf Δh` is symmetric in `f` and `h`.
#[derive(Clone, Debug)]
pub struct DiffusionOperator {
    pub weights: Vec<f64>,
    pub kappa: Vec<f64>,
}

impl DiffusionOperator {
    pub fn new(grid: &PhaseGrid) -> Self {
        DiffusionOperator {
            weights: grid.mu_weights.clone(),
            kappa: (0..grid.np - 1).map(|f| grid.kappa(f)).collect(),
        }
    }

    pub fn np(&self) -> usize {
        self.weights.len()
    }

    /// `L` on one `x`-column.
    pub fn apply_column(&self, h: &[f64], out: &mut [f64]) {
        let n = self.np();
        for j in 0..n {
            let mut flux = 0.0;
            if j + 1 < n {
                flux += self.kappa[j] * (h[j + 1] - h[j]);
            }
            if j > 0 {
                flux -= self.kappa[j - 1] * (h[j] - h[j - 1]);
            }
            out[j] = flux / self.weights[j];
        }
    }

    /// `L` on every column of a state laid out as `h[i * np + j]`.
    pub fn apply(&self, h: &[f64]) -> Vec<f64> {
        let n = self.np();
        let mut out = vec![0.0; h.len()];
        out.par_chunks_mut(n)
            .zip(h.par_chunks(n))
            .for_each(|(o, c)| self.apply_column(c, o));
        out
    }

    /// Solves `(I - dt L) y = h` in place on one column. The matrix scaled by
    /// the weights is a symmetric, strictly diagonally dominant M-matrix, so
    /// elimination without pivoting is stable and the solution stays
    /// nonnegative.
    pub fn solve_column(&self, h: &mut [f64], dt: f64, scratch: &mut Vec<f64>) -> bool {
        let n = self.np();
        scratch.clear();
        scratch.resize(n, 0.0);
        // forward sweep: scratch holds the modified super-diagonal
        let off = |f: usize| -dt * self.kappa[f];
        let diag = |j: usize| {
            let mut d = self.weights[j];
            if j > 0 {
                d += dt * self.kappa[j - 1];
            }
            if j + 1 < n {
                d += dt * self.kappa[j];
            }
            d
        };
        let mut rhs_prev = 0.0;
        for j in 0..n {
            let mut d = diag(j);
            let mut r = self.weights[j] * h[j];
            if j > 0 {
                let l = off(j - 1);
                d -= l * scratch[j - 1];
                r -= l * rhs_prev;
            }
            if !(d > 0.0) || !d.is_finite() {
                return false;
            }
            scratch[j] = if j + 1 < n { off(j) / d } else { 0.0 };
            r /= d;
            h[j] = r;
            rhs_prev = r;
        }
        for j in (0..n - 1).rev() {
            h[j] -= scratch[j] * h[j + 1];
        }
        true
    }

    /// Backward Euler step of `∂t h = L h` on every column.
    pub fn solve(&self, h: &mut [f64], dt: f64) -> Result<(), SolverError> {
        let n = self.np();
        let failed = h
            .par_chunks_mut(n)
            .enumerate()
            .map_init(Vec::new, |scratch, (i, col)| {
                if self.solve_column(col, dt, scratch) {
                    None
                } else {
                    Some(i)
                }
            })
            .filter_map(|x| x)
            .min();
        match failed {
            Some(column) => Err(SolverError::LinearSolveFailure { column }),
            None => Ok(()),
        }
    }
}
