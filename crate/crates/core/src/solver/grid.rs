use super::{SolverError, State};
use crate::expr::{parse_expr, Expr, ParseContext, Vars};
use crate::field::DerivScheme;
use crate::models::ModelSpec;

/// Cell-centred grid on `[0, 1) x [-P, P]` with the model's coefficients
/// sampled where the scheme needs them.
#[derive(Clone, Debug)]
pub struct PhaseGrid {
    pub nx: usize,
    pub np: usize,
    pub p_max: f64,
    pub dx: f64,
    pub dp: f64,
    pub x_nodes: Vec<f64>,
    pub p_nodes: Vec<f64>,
    /// Normalised `e^{-E} dp` per momentum cell; sums to one.
    pub mu_weights: Vec<f64>,
    /// `v(p)` at the momentum nodes.
    pub velocity: Vec<f64>,
    pub max_speed: f64,
    /// Momentum coordinates of the `np - 1` interior faces.
    pub face_p: Vec<f64>,
    /// `e^{-E} g^pp dp / Z` at each face: the weight of a squared
    /// difference quotient in the Fisher-type functionals.
    pub face_weight: Vec<f64>,
    /// `∂p v` at each face.
    pub face_dv: Vec<f64>,
    /// Estimated fraction of the equilibrium mass outside `[-P, P]`.
    pub tail_estimate: f64,
    pub model: ModelSpec,
}

impl PhaseGrid {
    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.np + j
    }

    pub fn len(&self) -> usize {
        self.nx * self.np
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Diffusion coupling across face `f`: `face_weight / dp²`.
    #[inline]
    pub fn kappa(&self, f: usize) -> f64 {
        self.face_weight[f] / (self.dp * self.dp)
    }

    /// `∫∫ h dx dμ`.
    pub fn mass(&self, h: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.nx {
            let row = &h[i * self.np..(i + 1) * self.np];
            s += row
                .iter()
                .zip(&self.mu_weights)
                .map(|(a, w)| a * w)
                .sum::<f64>();
        }
        s * self.dx
    }

    /// `∫∫ f g dx dμ`.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.nx {
            for j in 0..self.np {
                let k = self.idx(i, j);
                s += f[k] * g[k] * self.mu_weights[j];
            }
        }
        s * self.dx
    }

    /// `∫∫ |f - g| dx dμ`.
    pub fn l1_distance(&self, f: &[f64], g: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.nx {
            for j in 0..self.np {
                let k = self.idx(i, j);
                s += (f[k] - g[k]).abs() * self.mu_weights[j];
            }
        }
        s * self.dx
    }
}

fn energy_at(model: &ModelSpec, p: f64) -> Result<f64, SolverError> {
    let e = model.energy_field().value(&[p])?;
    if e.is_finite() {
        Ok(e)
    } else {
        Err(SolverError::NonpositiveWeight { p })
    }
}

fn metric_at(model: &ModelSpec, p: f64) -> Result<f64, SolverError> {
    let g = model.metric_value(&[p])?[(0, 0)];
    if g > 0.0 && g.is_finite() {
        Ok(g)
    } else {
        Err(SolverError::NonpositiveWeight { p })
    }
}

pub fn build_grid(
    model: &ModelSpec,
    nx: usize,
    np: usize,
    p_max: f64,
) -> Result<PhaseGrid, SolverError> {
    if model.dim() != 1 {
        return Err(SolverError::UnsupportedDimension { dim: model.dim() });
    }
    if nx < 8 || np < 8 {
        return Err(SolverError::InvalidGrid(format!(
            "need Nx, Np >= 8, got Nx = {nx}, Np = {np}"
        )));
    }
    if !(p_max > 0.0 && p_max.is_finite()) {
        return Err(SolverError::InvalidGrid(format!(
            "momentum radius must be positive, got {p_max}"
        )));
    }
    let dx = 1.0 / nx as f64;
    let dp = 2.0 * p_max / np as f64;
    let x_nodes: Vec<f64> = (0..nx).map(|i| (i as f64 + 0.5) * dx).collect();
    let p_nodes: Vec<f64> = (0..np).map(|j| -p_max + (j as f64 + 0.5) * dp).collect();
    let face_p: Vec<f64> = (1..np).map(|j| -p_max + j as f64 * dp).collect();

    let e_nodes = p_nodes
        .iter()
        .map(|&p| energy_at(model, p))
        .collect::<Result<Vec<_>, _>>()?;
    let e_faces = face_p
        .iter()
        .map(|&p| energy_at(model, p))
        .collect::<Result<Vec<_>, _>>()?;
    for &p in p_nodes.iter().chain(&face_p) {
        metric_at(model, p)?;
    }
    // shift by the minimum so that e^{-E} cannot underflow everywhere
    let e_min = e_nodes
        .iter()
        .chain(&e_faces)
        .cloned()
        .fold(f64::INFINITY, f64::min);

    let rho: Vec<f64> = e_nodes.iter().map(|e| (e_min - e).exp()).collect();
    let z: f64 = rho.iter().sum::<f64>() * dp;
    let mut mu_weights: Vec<f64> = rho.iter().map(|r| r * dp / z).collect();
    let total: f64 = mu_weights.iter().sum();
    mu_weights.iter_mut().for_each(|w| *w /= total);
    if let Some(j) = mu_weights.iter().position(|&w| !(w > 0.0)) {
        return Err(SolverError::NonpositiveWeight { p: p_nodes[j] });
    }

    let mut face_weight = Vec::with_capacity(np - 1);
    let mut face_dv = Vec::with_capacity(np - 1);
    for (f, &p) in face_p.iter().enumerate() {
        let g = metric_at(model, p)?;
        let rho_f = (e_min - e_faces[f]).exp();
        face_weight.push(rho_f / g * dp / (z * total));
        let v = model.velocity_jets(&[p], 1, DerivScheme::Analytic)?;
        face_dv.push(v[0].grad[0]);
    }

    let velocity = p_nodes
        .iter()
        .map(|&p| Ok(model.velocity_field(0).value(&[p])?))
        .collect::<Result<Vec<f64>, SolverError>>()?;
    let max_speed = velocity.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let tail_estimate = tail_fraction(model, p_max, e_min, z)?;

    Ok(PhaseGrid {
        nx,
        np,
        p_max,
        dx,
        dp,
        x_nodes,
        p_nodes,
        mu_weights,
        velocity,
        max_speed,
        face_p,
        face_weight,
        face_dv,
        tail_estimate,
        model: model.clone(),
    })
}

/// Mass of `e^{-E}` on `P < |p| <= 3P` relative to the total, by the
/// midpoint rule. Stands in for the mass beyond the truncation.
fn tail_fraction(
    model: &ModelSpec,
    p_max: f64,
    e_min: f64,
    z_box: f64,
) -> Result<f64, SolverError> {
    const N: usize = 400;
    let h = 2.0 * p_max / N as f64;
    let mut tail = 0.0;
    for k in 0..N {
        let p = p_max + (k as f64 + 0.5) * h;
        for q in [p, -p] {
            let e = model.energy_field().value(&[q]).unwrap_or(f64::INFINITY);
            tail += (e_min - e).exp() * h;
        }
    }
    Ok(tail / (z_box + tail))
}

/// Parses initial data written in `x` and `p`.
pub fn parse_initial_data(src: &str) -> Result<Expr, SolverError> {
    Ok(parse_expr(src, &ParseContext::momentum(1).with_x())?)
}

/// Samples `f` at the grid nodes and rescales to unit mass.
pub fn initial_state<F>(grid: &PhaseGrid, f: F) -> Result<State, SolverError>
where
    F: Fn(f64, f64) -> Result<f64, SolverError>,
{
    let mut h = vec![0.0; grid.len()];
    for (i, &x) in grid.x_nodes.iter().enumerate() {
        for (j, &p) in grid.p_nodes.iter().enumerate() {
            let v = f(x, p)?;
            if !v.is_finite() || v < 0.0 {
                return Err(SolverError::InitialData(format!(
                    "value {v} at (x, p) = ({x}, {p}) is not a finite nonnegative number"
                )));
            }
            h[grid.idx(i, j)] = v;
        }
    }
    let mass = grid.mass(&h);
    if !(mass > 0.0) {
        return Err(SolverError::InitialData(
            "initial data has zero mass".into(),
        ));
    }
    h.iter_mut().for_each(|v| *v /= mass);
    Ok(State { h, t: 0.0 })
}

impl State {
    pub fn from_expr(grid: &PhaseGrid, expr: &Expr) -> Result<State, SolverError> {
        initial_state(grid, |x, p| {
            let pv = [p];
            Ok(expr.eval(&Vars {
                p: &pv,
                x: Some(x),
                theta: grid.model.theta(),
            })?)
        })
    }

    /// The normalised equilibrium `h ≡ 1`.
    pub fn equilibrium(grid: &PhaseGrid) -> State {
        State {
            h: vec![1.0; grid.len()],
            t: 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{builtin_classical, relativistic_with_dim};

    #[test]
    fn test_classical_weights() {
        let g = build_grid(&builtin_classical(1), 8, 128, 8.0).unwrap();
        let s: f64 = g.mu_weights.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(g.tail_estimate < 1e-10, "tail {}", g.tail_estimate);
        for j in 0..g.np / 2 {
            assert!((g.mu_weights[j] - g.mu_weights[g.np - 1 - j]).abs() < 1e-15);
        }
    }

    #[test]
    fn test_bad_grids() {
        let m = builtin_classical(1);
        assert!(matches!(
            build_grid(&m, 8, 16, 0.0),
            Err(SolverError::InvalidGrid(_))
        ));
        assert!(matches!(
            build_grid(&m, 4, 16, 1.0),
            Err(SolverError::InvalidGrid(_))
        ));
        assert!(matches!(
            build_grid(&builtin_classical(2), 8, 16, 1.0),
            Err(SolverError::UnsupportedDimension { dim: 2 })
        ));
    }

    #[test]
    fn test_relativistic_grid() {
        let g = build_grid(&relativistic_with_dim(4.0, 1), 8, 64, 10.0).unwrap();
        assert!(g.max_speed < 1.0);
        assert!(g.tail_estimate < 1e-12);
        // g^pp = p0 and ∂p v = p0^{-3}
        let f = g.np / 2 - 1;
        assert!(g.face_p[f].abs() < 1e-14);
        assert!((g.face_dv[f] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn test_initial_state_normalised() {
        let g = build_grid(&builtin_classical(1), 16, 64, 8.0).unwrap();
        let e = parse_initial_data("2 + cos(2*pi*x)*exp(-p^2/4)").unwrap();
        let s = State::from_expr(&g, &e).unwrap();
        assert!((g.mass(&s.h) - 1.0).abs() < 1e-14);
        let bad = parse_initial_data("-1").unwrap();
        assert!(State::from_expr(&g, &bad).is_err());
        assert!(parse_initial_data("x + q").is_err());
    }
}
