use super::{DiffusionOperator, PhaseGrid, SolverError};

/// Solution values `h[i * np + j] ≈ h(x_i, p_j)` at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub h: Vec<f64>,
    pub t: f64,
}

/// Reconstruction used by the transport flux.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TransportScheme {
    /// First-order upwind.
    #[default]
    Upwind,
    /// Second-order flux with the van Leer limiter (TVD for CFL <= 1).
    Limited,
}

#[inline]
fn van_leer(r: f64) -> f64 {
    if r > 0.0 {
        2.0 * r / (1.0 + r)
    } else {
        0.0
    }
}

/// `∂t h + v ∂x h = 0` over `dt` on one periodic row with constant speed.
fn transport_row(
    row: &mut [f64],
    flux: &mut Vec<f64>,
    v: f64,
    dt: f64,
    dx: f64,
    scheme: TransportScheme,
) {
    let n = row.len();
    let nu = v * dt / dx;
    if nu == 0.0 {
        return;
    }
    flux.clear();
    flux.resize(n, 0.0);
    let at = |k: isize| row[k.rem_euclid(n as isize) as usize];
    // flux[i] is through the face between cells i and i+1, per unit v
    for i in 0..n as isize {
        let (up, jump) = if v > 0.0 {
            (at(i), at(i + 1) - at(i))
        } else {
            (at(i + 1), at(i) - at(i + 1))
        };
        let mut f = up;
        if scheme == TransportScheme::Limited && jump != 0.0 {
            let behind = if v > 0.0 {
                at(i) - at(i - 1)
            } else {
                at(i + 1) - at(i + 2)
            };
            f += 0.5 * (1.0 - nu.abs()) * van_leer(behind / jump) * jump;
        }
        flux[i as usize] = f;
    }
    let prev = flux[n - 1];
    let mut left = prev;
    for i in 0..n {
        let right = flux[i];
        row[i] -= nu * (right - left);
        left = right;
    }
}

/// Transport in `x` over `dt` for every momentum row.
pub fn transport(grid: &PhaseGrid, h: &mut [f64], dt: f64, scheme: TransportScheme) {
    let (nx, np) = (grid.nx, grid.np);
    let mut row = vec![0.0; nx];
    let mut flux = Vec::with_capacity(nx);
    for j in 0..np {
        for i in 0..nx {
            row[i] = h[i * np + j];
        }
        transport_row(&mut row, &mut flux, grid.velocity[j], dt, grid.dx, scheme);
        for i in 0..nx {
            h[i * np + j] = row[i];
        }
    }
}

/// Largest step allowed by the transport CFL condition.
pub fn cfl_limit(grid: &PhaseGrid) -> f64 {
    if grid.max_speed > 0.0 {
        grid.dx / grid.max_speed
    } else {
        f64::INFINITY
    }
}

/// One Strang step: transport `dt/2`, diffusion `dt` (backward Euler),
/// transport `dt/2`.
pub fn step(
    state: &mut State,
    dt: f64,
    grid: &PhaseGrid,
    op: &DiffusionOperator,
    scheme: TransportScheme,
) -> Result<(), SolverError> {
    let limit = cfl_limit(grid);
    if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
        return Err(SolverError::CflViolation { dt, limit });
    }
    transport(grid, &mut state.h, 0.5 * dt, scheme);
    op.solve(&mut state.h, dt)?;
    transport(grid, &mut state.h, 0.5 * dt, scheme);
    state.t += dt;
    Ok(())
}
