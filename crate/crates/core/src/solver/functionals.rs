use super::{PhaseGrid, State};
use crate::certificate::Weights;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

pub const CSV_HEADER: &str = "t,D,Ipp,Ixp,Ixx,Emod,mass,l1_dist";

/// Values below `FLOOR * mass` are raised to it inside logarithms.
const FLOOR: f64 = 1e-14;

/// Logarithmic mean `(a - b) / (log a - log b)`, the face value for which
/// `(Δh)² / L = Δh Δlog h`.
pub fn log_mean(a: f64, b: f64) -> f64 {
    let s = a + b;
    let r = (a - b) / s;
    if r.abs() < 1e-4 {
        // series in r = (a-b)/(a+b); the next term is O(r^6)
        0.5 * s * (1.0 - r * r / 3.0 - 4.0 * r.powi(4) / 45.0)
    } else {
        (a - b) / (a.ln() - b.ln())
    }
}

/// `r log r - r + 1`, nonnegative and accurate near `r = 1`. Summed against
/// the weights it gives `∫ h log(h/m)` because `∫ (h - m) = 0`, without the
/// cancellation of the plain integrand near equilibrium.
fn entropy_density(r: f64) -> f64 {
    let e = r - 1.0;
    if e.abs() < 0.5 {
        (r * e.ln_1p() - e).max(0.0)
    } else {
        r * r.ln() - e
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalRow {
    pub t: f64,
    pub d: f64,
    pub ipp: f64,
    pub ixp: f64,
    pub ixx: f64,
    /// `k D + a Ipp + 2b Ixp + c Ixx`; NaN without weights.
    pub emod: f64,
    pub mass: f64,
    pub l1_dist: f64,
}

/// Entropy, Fisher-type informations, modified entropy, mass and the `L¹`
/// distance to the equilibrium with the same mass.
pub fn functionals(state: &State, grid: &PhaseGrid, weights: Option<&Weights>) -> FunctionalRow {
    let (nx, np) = (grid.nx, grid.np);
    let h = &state.h;
    let mass = grid.mass(h);
    let floor = FLOOR * mass.abs().max(f64::MIN_POSITIVE);

    let mut d = 0.0;
    let mut l1 = 0.0;
    for i in 0..nx {
        for j in 0..np {
            let v = h[grid.idx(i, j)];
            let w = grid.mu_weights[j];
            d += w * mass * entropy_density(v.max(floor) / mass);
            l1 += w * (v - mass).abs();
        }
    }
    d *= grid.dx;
    l1 *= grid.dx;

    let (mut ipp, mut ixp, mut ixx) = (0.0, 0.0, 0.0);
    for i in 0..nx {
        let (ip, im) = ((i + 1) % nx, (i + nx - 1) % nx);
        for f in 0..np - 1 {
            let a = h[grid.idx(i, f)].max(floor);
            let b = h[grid.idx(i, f + 1)].max(floor);
            let lm = log_mean(a, b);
            let hp = (h[grid.idx(i, f + 1)] - h[grid.idx(i, f)]) / grid.dp;
            let hx = (h[grid.idx(ip, f)] - h[grid.idx(im, f)] + h[grid.idx(ip, f + 1)]
                - h[grid.idx(im, f + 1)])
                / (4.0 * grid.dx);
            let c = grid.face_weight[f] / lm;
            let ax = grid.face_dv[f] * hx;
            ipp += c * hp * hp;
            ixp += c * ax * hp;
            ixx += c * ax * ax;
        }
    }
    ipp *= grid.dx;
    ixp *= grid.dx;
    ixx *= grid.dx;

    let emod = match weights {
        Some(w) => w.k * d + w.a * ipp + 2.0 * w.b * ixp + w.c * ixx,
        None => f64::NAN,
    };
    FunctionalRow {
        t: state.t,
        d,
        ipp,
        ixp,
        ixx,
        emod,
        mass,
        l1_dist: l1,
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FunctionalSeries {
    pub times: Vec<f64>,
    pub d: Vec<f64>,
    pub ipp: Vec<f64>,
    pub ixp: Vec<f64>,
    pub ixx: Vec<f64>,
    pub emod: Vec<f64>,
    pub mass: Vec<f64>,
    pub l1_dist: Vec<f64>,
}

impl FunctionalSeries {
    pub fn push(&mut self, r: FunctionalRow) {
        self.times.push(r.t);
        self.d.push(r.d);
        self.ipp.push(r.ipp);
        self.ixp.push(r.ixp);
        self.ixx.push(r.ixx);
        self.emod.push(r.emod);
        self.mass.push(r.mass);
        self.l1_dist.push(r.l1_dist);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn row(&self, n: usize) -> FunctionalRow {
        FunctionalRow {
            t: self.times[n],
            d: self.d[n],
            ipp: self.ipp[n],
            ixp: self.ixp[n],
            ixx: self.ixx[n],
            emod: self.emod[n],
            mass: self.mass[n],
            l1_dist: self.l1_dist[n],
        }
    }

    /// Largest `|mass(t) - mass(0)|`.
    pub fn mass_drift(&self) -> f64 {
        let m0 = self.mass.first().copied().unwrap_or(0.0);
        self.mass.iter().fold(0.0, |acc, m| acc.max((m - m0).abs()))
    }

    /// Samples where the Csiszár–Kullback bound `l1 <= sqrt(2 m D)` fails by
    /// more than `tol`.
    pub fn pinsker_violations(&self, tol: f64) -> Vec<usize> {
        (0..self.len())
            .filter(|&n| self.l1_dist[n] > (2.0 * self.mass[n] * self.d[n].max(0.0)).sqrt() + tol)
            .collect()
    }

    /// Full-precision CSV; `{}` on `f64` prints the shortest decimal that
    /// reads back to the same value.
    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(64 * (self.len() + 1));
        s.push_str(CSV_HEADER);
        s.push('\n');
        for n in 0..self.len() {
            let r = self.row(n);
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                r.t, r.d, r.ipp, r.ixp, r.ixx, r.emod, r.mass, r.l1_dist
            );
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self, String> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == CSV_HEADER => {}
            other => return Err(format!("unexpected header {other:?}")),
        }
        let mut out = FunctionalSeries::default();
        for (n, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let v = line
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| format!("row {}: {e}", n + 1))?;
            if v.len() != 8 {
                return Err(format!(
                    "row {}: expected 8 columns, got {}",
                    n + 1,
                    v.len()
                ));
            }
            out.push(FunctionalRow {
                t: v[0],
                d: v[1],
                ipp: v[2],
                ixp: v[3],
                ixx: v[4],
                emod: v[5],
                mass: v[6],
                l1_dist: v[7],
            });
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::builtin_classical;
    use crate::solver::{build_grid, parse_initial_data};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn test_log_mean() {
        assert_eq!(log_mean(2.0, 2.0), 2.0);
        let exact = (3.0 - 1.0) / 3.0f64.ln();
        assert!((log_mean(3.0, 1.0) - exact).abs() < 1e-15);
        let (a, b) = (1.0 + 1e-5, 1.0f64);
        let exact = (a - b) / (a - b).ln_1p();
        assert!((log_mean(a, b) - exact).abs() < 1e-12);
    }

    #[test]
    fn test_equilibrium_is_zero() {
        let g = build_grid(&builtin_classical(1), 16, 32, 6.0).unwrap();
        let r = functionals(
            &State::equilibrium(&g),
            &g,
            Some(&Weights {
                a: 1.0,
                b: 0.5,
                c: 1.0,
                k: 2.0,
            }),
        );
        assert!((r.mass - 1.0).abs() < 1e-14);
        for v in [r.d, r.ipp, r.ixp, r.ixx, r.emod, r.l1_dist] {
            assert!(v.abs() < 1e-14, "{r:?}");
        }
    }

    #[test]
    fn test_x_only_profile() {
        let g = build_grid(&builtin_classical(1), 32, 32, 6.0).unwrap();
        let s = State::from_expr(&g, &parse_initial_data("1 + 0.1*cos(2*pi*x)").unwrap()).unwrap();
        let r = functionals(&s, &g, None);
        assert_eq!(r.ipp, 0.0);
        assert_eq!(r.ixp, 0.0);
        assert!(r.ixx > 0.0);
        assert!(r.emod.is_nan());
    }

    #[test]
    fn test_cauchy_schwarz_random() {
        let g = build_grid(&builtin_classical(1), 12, 20, 4.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let h: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(0.01..3.0)).collect();
            let r = functionals(&State { h, t: 0.0 }, &g, None);
            assert!(r.ixp * r.ixp <= r.ipp * r.ixx * (1.0 + 1e-12));
            assert!(r.l1_dist <= (2.0 * r.mass * r.d).sqrt() + 1e-12);
        }
    }

    #[test]
    fn test_csv_round_trip() {
        let mut s = FunctionalSeries::default();
        s.push(FunctionalRow {
            t: 0.1,
            d: 1.0 / 3.0,
            ipp: 2e-300,
            ixp: -0.0,
            ixx: 7.0,
            emod: f64::NAN,
            mass: 1.0,
            l1_dist: 0.2,
        });
        let csv = s.to_csv();
        assert!(csv.starts_with(CSV_HEADER));
        let back = FunctionalSeries::from_csv(&csv).unwrap();
        assert_eq!(back.d[0].to_bits(), s.d[0].to_bits());
        assert_eq!(back.ipp[0], 2e-300);
        assert!(back.emod[0].is_nan());
        assert!(FunctionalSeries::from_csv("t,D\n").is_err());
    }
}
