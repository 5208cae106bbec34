//! Grid verification of the structural assumptions and estimation of the
//! constants that enter the decay certificate.
//!
//! | constant | meaning |
//! |----------|---------|
//! | `σ₁, σ₂` | `σ₁ g ≤ R̃ic ≤ σ₂ g` |
//! | `β`      | `B ≤ β A` |
//! | `γ`      | `C ≤ γ A` |
//! | `ω`      | `R ≤ ω A` |
//! | `α`      | log-Sobolev constant of the equilibrium on torus × momentum |
//!
//! All constants are sup/inf over a finite scan grid; they are certified on
//! that grid only.

mod forms;
mod grid;
mod logsob;
mod scan;

pub use forms::{
    form_a, form_a_at, form_b, form_c, form_r, form_set, k_vectors, AJet, FormKind, FormNxN,
    FormSet,
};
pub use grid::{radical_inverse, shifted_halton, ScanGrid, DEFAULT_SEED};
pub use logsob::{
    default_theta_ladder, logsob_product, logsob_warped, product_at, theta_threshold, ProductPoint,
    ProductResult, ThresholdResult, WarpedResult, ISOTROPY_TOL,
};
pub use scan::{
    a_min_eigenvalue, curvature_bounds, dominance_constants, growth_check, hormander_check,
    CurvatureBounds, DominanceConstants, GrowthResult, HormanderResult, PointFailure, Witness,
    DEFAULT_GROWTH_RADII,
};

use crate::field::DerivScheme;
use crate::geometry::GeometryError;
use crate::models::ModelSpec;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum AssumptionError {
    #[error("A is degenerate at p = {point:?} (smallest eigenvalue {min_eigenvalue:e})")]
    DegenerateA {
        point: Vec<f64>,
        min_eigenvalue: f64,
    },
    #[error("A_IJ is not a multiple of the identity at p = {point:?} (relative anisotropy {anisotropy:e})")]
    NotIsotropic { point: Vec<f64>, anisotropy: f64 },
    #[error("growth radii must increase and span at least one decade")]
    BadRadii,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// How the log-Sobolev constant was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlphaSource {
    /// Warped-product curvature criterion held on the grid.
    Warped,
    /// Product-metric curvature criterion held on the grid.
    Product,
    /// Supplied by the user.
    Manual,
    /// No criterion held and none was supplied. This does not mean the
    /// inequality is false; the criteria are only sufficient.
    Unverified,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckOptions {
    pub grid: ScanGrid,
    pub growth_radii: Vec<f64>,
    #[serde(skip)]
    pub scheme: DerivScheme,
    pub manual_alpha: Option<f64>,
    /// Run the log-Sobolev criteria (the product criterion is the most
    /// expensive scan).
    pub logsob: bool,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            grid: ScanGrid::default(),
            growth_radii: DEFAULT_GROWTH_RADII.to_vec(),
            scheme: DerivScheme::Analytic,
            manual_alpha: None,
            logsob: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportWitnesses {
    pub sigma1: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub omega: Vec<f64>,
    pub hormander: Vec<f64>,
    /// Worst point of the log-Sobolev criterion that was tried last.
    pub logsob: Vec<f64>,
    pub logsob_value: f64,
    pub degenerate_a: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub model: String,
    pub dim: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    pub sigma1: f64,
    pub sigma2: f64,
    pub sigma: f64,
    pub beta: f64,
    pub gamma: f64,
    pub omega: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub alpha_source: AlphaSource,
    pub hormander_min: f64,
    pub hormander_ok: bool,
    pub growth_ok: bool,
    pub curvature_pass: bool,
    pub nondegenerate_pass: bool,
    pub dominance_pass: bool,
    pub logsob_pass: bool,
    pub grid_radius: f64,
    pub grid_resolution: usize,
    pub grid_quasi_random: usize,
    pub grid_points: usize,
    pub seed: u64,
    /// Points at which some evaluation failed.
    pub failed_points: usize,
    pub tail_fraction: f64,
    pub notes: Vec<String>,
    pub witnesses: ReportWitnesses,
}

impl AssumptionReport {
    /// Reasons the assumptions are definitely not met on the grid. An
    /// unverified log-Sobolev constant is not among them.
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.curvature_pass {
            out.push(format!(
                "curvature lower bound sigma1 = {} < 0 at p = {:?}",
                self.sigma1, self.witnesses.sigma1
            ));
        }
        if !self.nondegenerate_pass {
            out.push(format!(
                "A is degenerate at p = {:?}",
                self.witnesses.degenerate_a
            ));
        }
        if !self.hormander_ok {
            out.push(format!(
                "rank condition fails: min |det F| = {} at p = {:?}",
                self.hormander_min, self.witnesses.hormander
            ));
        }
        if !self.growth_ok {
            out.push("inverse metric grows at least like |p|^2".to_string());
        }
        if self.failed_points > 0 {
            out.push(format!(
                "{} grid points could not be evaluated",
                self.failed_points
            ));
        }
        out
    }

    pub fn passed(&self) -> bool {
        self.failures().is_empty()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("report serialises")
    }

    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let w = &self.witnesses;
        let _ = writeln!(s, "assumption report: {}", self.model);
        if let Some(t) = self.theta {
            let _ = writeln!(s, "  theta             {t}");
        }
        let _ = writeln!(
            s,
            "  grid              |p| <= {}, {} per axis + {} quasi-random ({} points, seed {})",
            self.grid_radius,
            self.grid_resolution,
            self.grid_quasi_random,
            self.grid_points,
            self.seed
        );
        let _ = writeln!(s, "  tail fraction     {:e}", self.tail_fraction);
        let _ = writeln!(s);
        let flag = |b: bool| if b { "pass" } else { "FAIL" };
        let _ = writeln!(
            s,
            "  sigma1            {:<24} at {:?}",
            self.sigma1, w.sigma1
        );
        let _ = writeln!(
            s,
            "  sigma2            {:<24} at {:?}",
            self.sigma2, w.sigma2
        );
        let _ = writeln!(s, "  curvature bound   {}", flag(self.curvature_pass));
        let _ = writeln!(s, "  A nondegenerate   {}", flag(self.nondegenerate_pass));
        let _ = writeln!(s, "  beta              {:<24} at {:?}", self.beta, w.beta);
        let _ = writeln!(s, "  gamma             {:<24} at {:?}", self.gamma, w.gamma);
        let _ = writeln!(s, "  omega             {:<24} at {:?}", self.omega, w.omega);
        let alpha = self.alpha.map_or("-".to_string(), |a| a.to_string());
        let _ = writeln!(
            s,
            "  alpha             {:<24} ({:?})",
            alpha, self.alpha_source
        );
        let _ = writeln!(
            s,
            "  hormander min     {:<24} {}",
            self.hormander_min,
            flag(self.hormander_ok)
        );
        let _ = writeln!(s, "  growth            {}", flag(self.growth_ok));
        if self.failed_points > 0 {
            let _ = writeln!(s, "  failed points     {}", self.failed_points);
        }
        for n in &self.notes {
            let _ = writeln!(s, "  note: {n}");
        }
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "  overall           {}",
            if self.passed() { "pass" } else { "FAIL" }
        );
        s
    }
}

/// Run every scan and assemble the report.
pub fn check(model: &ModelSpec, opts: &CheckOptions) -> AssumptionReport {
    let m = model.dim();
    let points = opts.grid.points(m);
    let scheme = opts.scheme;
    let mut notes = Vec::new();
    let mut failed = std::collections::BTreeSet::new();
    let mut record = |fs: &[PointFailure]| {
        for f in fs {
            failed.insert(format!("{:?}", f.point));
        }
    };

    let cb = curvature_bounds(model, &points, scheme);
    record(&cb.failures);
    let mut witnesses = ReportWitnesses {
        sigma1: cb.sigma1_witness.point.clone(),
        sigma2: cb.sigma2_witness.point.clone(),
        logsob_value: f64::NAN,
        ..Default::default()
    };

    let (beta, gamma, omega, nondegenerate) = match dominance_constants(model, &points, scheme) {
        Ok(dc) => {
            record(&dc.failures);
            witnesses.beta = dc.beta_witness.point;
            witnesses.gamma = dc.gamma_witness.point;
            witnesses.omega = dc.omega_witness.point;
            if dc.shifted_points > 0 {
                notes.push(format!(
                    "A needed a diagonal shift at {} points",
                    dc.shifted_points
                ));
            }
            (dc.beta, dc.gamma, dc.omega, true)
        }
        Err(AssumptionError::DegenerateA { point, .. }) => {
            witnesses.degenerate_a = point;
            (f64::NAN, f64::NAN, f64::NAN, false)
        }
        Err(e) => {
            notes.push(format!("dominance scan failed: {e}"));
            (f64::NAN, f64::NAN, f64::NAN, false)
        }
    };

    let h = hormander_check(model, &points, scheme);
    witnesses.hormander = h.witness.point.clone();

    let growth_ok = match growth_check(model, &opts.growth_radii) {
        Ok(g) => g.ok,
        Err(e) => {
            notes.push(format!("growth check failed: {e}"));
            false
        }
    };

    let mut alpha = None;
    let mut alpha_source = AlphaSource::Unverified;
    if opts.logsob && nondegenerate {
        match logsob_warped(model, &points, scheme) {
            Ok(w) => {
                record(&w.failures);
                witnesses.logsob = w.kappa1_witness.point.clone();
                witnesses.logsob_value = w.kappa1;
                match w.alpha {
                    Some(a) => {
                        alpha = Some(a);
                        alpha_source = AlphaSource::Warped;
                    }
                    None => notes.push(format!(
                        "warped criterion failed: kappa1 = {} <= kappa2 = {}",
                        w.kappa1, w.kappa2
                    )),
                }
            }
            Err(AssumptionError::NotIsotropic { .. }) => {
                match logsob_product(model, &points, scheme) {
                    Ok(pr) => {
                        record(&pr.failures);
                        witnesses.logsob = pr.witness.point.clone();
                        witnesses.logsob_value = pr.alpha;
                        if pr.pass() {
                            alpha = Some(pr.alpha);
                            alpha_source = AlphaSource::Product;
                        } else {
                            notes.push(format!(
                                "product criterion failed: smallest eigenvalue {} at p = {:?}",
                                pr.alpha, pr.witness.point
                            ));
                        }
                    }
                    Err(e) => notes.push(format!("product criterion could not be evaluated: {e}")),
                }
            }
            Err(e) => notes.push(format!("warped criterion could not be evaluated: {e}")),
        }
    }
    if alpha.is_none() {
        if let Some(a) = opts.manual_alpha {
            alpha = Some(a);
            alpha_source = AlphaSource::Manual;
        }
    }

    let norm = model.normalization();
    if norm.tail_warning() {
        notes.push(format!(
            "tail fraction {:e} exceeds {:e}",
            norm.tail_fraction,
            crate::models::Normalization::TAIL_WARNING
        ));
    }
    let failed_points = failed.len();

    AssumptionReport {
        model: model.name().to_string(),
        dim: m,
        theta: model.theta(),
        sigma1: cb.sigma1,
        sigma2: cb.sigma2,
        sigma: cb.sigma2 - cb.sigma1,
        beta,
        gamma,
        omega,
        alpha,
        alpha_source,
        hormander_min: h.min_abs_det_f,
        hormander_ok: h.ok,
        growth_ok,
        curvature_pass: cb.pass(),
        nondegenerate_pass: nondegenerate,
        dominance_pass: nondegenerate && [beta, gamma, omega].iter().all(|x| x.is_finite()),
        logsob_pass: matches!(alpha_source, AlphaSource::Warped | AlphaSource::Product),
        grid_radius: opts.grid.radius,
        grid_resolution: opts.grid.resolution,
        grid_quasi_random: opts.grid.quasi_random_count,
        grid_points: points.len(),
        seed: opts.grid.seed,
        failed_points,
        tail_fraction: norm.tail_fraction,
        notes,
        witnesses,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::builtin_classical;

    #[test]
    fn test_classical_report_round_trip() {
        let opts = CheckOptions {
            grid: ScanGrid::new(5.0, 11, 30),
            ..Default::default()
        };
        let r = check(&builtin_classical(2), &opts);
        assert!(r.passed());
        assert_eq!(
            (r.sigma1, r.sigma2, r.beta, r.gamma, r.omega),
            (1.0, 1.0, 0.0, 0.0, 0.0)
        );
        assert_eq!(r.alpha, Some(1.0));
        assert_eq!(r.alpha_source, AlphaSource::Warped);
        let back = AssumptionReport::from_toml(&r.to_toml()).unwrap();
        assert_eq!(back.sigma1, 1.0);
        assert_eq!(back.witnesses, r.witnesses);
        assert!(r.to_text().contains("overall           pass"));
    }
}
