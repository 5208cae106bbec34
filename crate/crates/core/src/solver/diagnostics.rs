//! Discrete check of the entropy-production identities.
//!
//! The time side of each identity is the difference quotient of a functional
//! over two half steps of the scheme; the space side is the corresponding
//! integral evaluated at the middle state, with the coefficient fields
//! (`R̃ic`, `∇²v`, `div ∂²v`, `∂ log u`) taken from the geometry engine and
//! the derivatives of `log h` by central differences. In one momentum
//! dimension, with `ḡ = g^pp`, `Γ = Γ^p_pp` and `h̄ = log h`:
//!
//! ```text
//! ∇²h̄        = h̄_pp - Γ h̄_p
//! ∇(𝒜ₓh̄)_*   = h̄_xp v' + h̄_x ∇²v
//! Q²pp        = ∫ h ḡ² (∇²h̄)²
//! Q²xp        = ∫ h ḡ² (∇(𝒜ₓh̄)_*)²
//! ```

use super::{functionals, step, DiffusionOperator, PhaseGrid, SolverError, State, TransportScheme};
use crate::field::DerivScheme;
use crate::geometry::{covariant_hessian, divergence_tensor2, raised_hessian_jet};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityResidual {
    pub name: String,
    pub time_side: f64,
    pub space_side: f64,
    /// `|time - space| / max(|time|, |space|)`, zero when both vanish.
    pub residual: f64,
}

impl IdentityResidual {
    fn new(name: &str, time_side: f64, space_side: f64) -> Self {
        let scale = time_side.abs().max(space_side.abs());
        let residual = if scale > 1e-300 {
            (time_side - space_side).abs() / scale
        } else {
            0.0
        };
        IdentityResidual {
            name: name.into(),
            time_side,
            space_side,
            residual,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub dt: f64,
    pub nx: usize,
    pub np: usize,
    pub t: f64,
    pub qpp: f64,
    pub qxp: f64,
    pub identities: Vec<IdentityResidual>,
}

impl DiagnosticsReport {
    pub fn max_residual(&self) -> f64 {
        self.identities.iter().fold(0.0, |m, r| m.max(r.residual))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "entropy production identities at t = {} (Nx = {}, Np = {}, dt = {})",
            self.t, self.nx, self.np, self.dt
        );
        let _ = writeln!(
            s,
            "{:<10} {:>24} {:>24} {:>12}",
            "identity", "time side", "space side", "residual"
        );
        for r in &self.identities {
            let _ = writeln!(
                s,
                "{:<10} {:>24.15e} {:>24.15e} {:>12.3e}",
                r.name, r.time_side, r.space_side, r.residual
            );
        }
        let _ = writeln!(s, "Q2pp = {:.15e}, Q2xp = {:.15e}", self.qpp, self.qxp);
        s
    }
}

/// Coefficient fields at one momentum node.
struct NodeCoefficients {
    g_inv: f64,
    gamma: f64,
    ricci_be: f64,
    dlog_u: f64,
    dv: f64,
    hess_v: f64,
    div_hess_v: f64,
}

fn node_coefficients(grid: &PhaseGrid) -> Result<Vec<NodeCoefficients>, SolverError> {
    grid.p_nodes
        .iter()
        .map(|&p| {
            let pt = grid.model.at(&[p], DerivScheme::Analytic, 3)?;
            let v = &pt.velocity[0];
            let raised = raised_hessian_jet(&pt.metric, v);
            Ok(NodeCoefficients {
                g_inv: pt.metric.g_inv[(0, 0)],
                gamma: pt.metric.christoffel.get(0, 0, 0),
                ricci_be: pt.bakry_emery_ricci()[(0, 0)],
                dlog_u: pt.log_u.grad[0],
                dv: v.grad[0],
                hess_v: covariant_hessian(&pt.metric, v)[(0, 0)],
                div_hess_v: divergence_tensor2(&pt.metric, &raised)[0],
            })
        })
        .collect()
}

/// Space sides of the four identities and `(Q²pp, Q²xp)` at `state`.
fn space_sides(state: &State, grid: &PhaseGrid, coef: &[NodeCoefficients]) -> ([f64; 4], f64, f64) {
    let (nx, np) = (grid.nx, grid.np);
    let mass = grid.mass(&state.h);
    let floor = 1e-14 * mass;
    let hb: Vec<f64> = state.h.iter().map(|v| v.max(floor).ln()).collect();
    let at = |i: usize, j: usize| hb[grid.idx(i % nx, j)];
    let (dx, dp) = (grid.dx, grid.dp);

    let mut sums = [0.0; 4];
    let (mut qpp, mut qxp) = (0.0, 0.0);
    for i in nx..2 * nx {
        for j in 1..np - 1 {
            let c = &coef[j];
            let q = grid.mu_weights[j] * state.h[grid.idx(i % nx, j)];
            let hp = (at(i, j + 1) - at(i, j - 1)) / (2.0 * dp);
            let hpp = (at(i, j + 1) - 2.0 * at(i, j) + at(i, j - 1)) / (dp * dp);
            let hx = (at(i + 1, j) - at(i - 1, j)) / (2.0 * dx);
            let hxp = ((at(i + 1, j + 1) - at(i - 1, j + 1))
                - (at(i + 1, j - 1) - at(i - 1, j - 1)))
                / (4.0 * dx * dp);
            let gi2 = c.g_inv * c.g_inv;

            let hess_hb = hpp - c.gamma * hp;
            let nabla_ax = hxp * c.dv + hx * c.hess_v;
            let ipp = c.g_inv * hp * hp;
            let ixp = c.g_inv * c.dv * hx * hp;
            let ixx = c.g_inv * c.dv * c.dv * hx * hx;
            let q2pp = gi2 * hess_hb * hess_hb;
            let q2xp = gi2 * nabla_ax * nabla_ax;
            // terms carrying ∇²v: 𝒞ₓ, ℬₓ and the W-contraction
            let c_term = gi2 * hx * c.hess_v;

            sums[0] += q * -ipp;
            sums[1] += q * (-2.0 * ixp - 2.0 * c.ricci_be * gi2 * hp * hp - 2.0 * q2pp);
            sums[2] += q
                * (-ixx - c.ricci_be * gi2 * c.dv * hx * hp - 2.0 * gi2 * hess_hb * nabla_ax
                    + hx * c.div_hess_v * hp
                    + 2.0 * hess_hb * c_term
                    + c_term * c.dlog_u * hp);
            sums[3] += q
                * (-2.0 * q2xp
                    + 2.0 * hx * c.dv * hx * c.div_hess_v
                    + 4.0 * nabla_ax * c_term
                    + 2.0 * c_term * c.dlog_u * hx * c.dv);
            qpp += q * q2pp;
            qxp += q * q2xp;
        }
    }
    for s in &mut sums {
        *s *= dx;
    }
    (sums, qpp * dx, qxp * dx)
}

/// Compares `dD/dt`, `dIpp/dt`, `dIxp/dt` and `dIxx/dt` along one step of
/// the scheme with the integrals the identities predict.
pub fn entropy_production_diagnostics(
    state: &State,
    grid: &PhaseGrid,
    dt: f64,
    scheme: TransportScheme,
) -> Result<DiagnosticsReport, SolverError> {
    let coef = node_coefficients(grid)?;
    let op = DiffusionOperator::new(grid);
    let f0 = functionals(state, grid, None);
    let mut mid = state.clone();
    step(&mut mid, 0.5 * dt, grid, &op, scheme)?;
    let mut end = mid.clone();
    step(&mut end, 0.5 * dt, grid, &op, scheme)?;
    let f2 = functionals(&end, grid, None);
    let (space, qpp, qxp) = space_sides(&mid, grid, &coef);
    let time = [
        (f2.d - f0.d) / dt,
        (f2.ipp - f0.ipp) / dt,
        (f2.ixp - f0.ixp) / dt,
        (f2.ixx - f0.ixx) / dt,
    ];
    let names = ["dD/dt", "dIpp/dt", "dIxp/dt", "dIxx/dt"];
    let identities = (0..4)
        .map(|k| IdentityResidual::new(names[k], time[k], space[k]))
        .collect();
    Ok(DiagnosticsReport {
        dt,
        nx: grid.nx,
        np: grid.np,
        t: mid.t,
        qpp,
        qxp,
        identities,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{builtin_classical, relativistic_with_dim};
    use crate::solver::{build_grid, parse_initial_data};

    #[test]
    fn test_x_independent_state_has_trivial_mixed_identities() {
        let g = build_grid(&builtin_classical(1), 16, 64, 6.0).unwrap();
        let s = State::from_expr(&g, &parse_initial_data("1 + 0.3*sin(p)").unwrap()).unwrap();
        let r = entropy_production_diagnostics(&s, &g, 1e-3, TransportScheme::Upwind).unwrap();
        for k in [2, 3] {
            assert_eq!(r.identities[k].time_side, 0.0);
            assert_eq!(r.identities[k].space_side, 0.0);
            assert_eq!(r.identities[k].residual, 0.0);
        }
        assert!(r.identities[0].residual < 1e-2, "{}", r.to_text());
    }

    #[test]
    fn test_relativistic_coefficients() {
        // one dimension: Ric = 0, so R̃ic = -∇² log u; at p = 0 that is θ - 1/2
        let g = build_grid(&relativistic_with_dim(4.0, 1), 8, 9, 1.0).unwrap();
        let coef = node_coefficients(&g).unwrap();
        let c = &coef[4];
        assert!(g.p_nodes[4].abs() < 1e-15);
        assert!((c.ricci_be - 3.5).abs() < 1e-12);
        assert!((c.dv - 1.0).abs() < 1e-12);
    }
}
