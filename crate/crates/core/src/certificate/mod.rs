//! Explicit decay certificates.
//!
//! The modified entropy `ℰ = k𝔇 + a𝕀pp + 2b𝕀xp + c𝕀xx` satisfies
//! `dℰ/dt ≤ −d(𝕀pp + 𝕀xx)` once `(a, b, c, k)` sit in the region below, and
//! with the log-Sobolev constant `α` this yields `dℰ/dt ≤ −λℰ`.
//!
//! Rate: split `−d(𝕀pp + 𝕀xx) ≤ −(d/2)(𝕀pp + 𝕀xx) − dα𝔇` (log-Sobolev) and
//! bound `ℰ ≤ k𝔇 + M(𝕀pp + 𝕀xx)` with `M = max(a + b, b + c)` (Young on the
//! cross term, `2|𝕀xp| ≤ 𝕀pp + 𝕀xx`). Then `λ = min(d/(2M), dα/k)` works.

mod validate;

pub use validate::{validate, Check};

use crate::assumptions::AssumptionReport;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum CertificateError {
    #[error("no admissible constants: {0}")]
    InfeasibleRegion(String),
    #[error("certificate violates {condition}")]
    InvalidCertificate { condition: String },
}

/// Constants from the assumption scan.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub sigma1: f64,
    pub sigma2: f64,
    pub beta: f64,
    pub gamma: f64,
    pub omega: f64,
}

impl Constants {
    pub fn classical() -> Self {
        Constants {
            sigma1: 1.0,
            sigma2: 1.0,
            beta: 0.0,
            gamma: 0.0,
            omega: 0.0,
        }
    }

    pub fn from_report(r: &AssumptionReport) -> Self {
        Constants {
            sigma1: r.sigma1,
            sigma2: r.sigma2,
            beta: r.beta,
            gamma: r.gamma,
            omega: r.omega,
        }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2 - self.sigma1
    }

    /// `s = 2 + β + 16γ + ω`
    pub fn s(&self) -> f64 {
        2.0 + self.beta + 16.0 * self.gamma + self.omega
    }

    /// `s₁ = σ₂ + β + ω`
    pub fn s1(&self) -> f64 {
        self.sigma2 + self.beta + self.omega
    }

    /// `s₂ = 2 + σ₂`
    pub fn s2(&self) -> f64 {
        2.0 + self.sigma2
    }

    fn admissible(&self) -> Result<(), CertificateError> {
        let all = [self.sigma1, self.sigma2, self.beta, self.gamma, self.omega];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(CertificateError::InfeasibleRegion(
                "constants must be finite".into(),
            ));
        }
        if self.sigma1 < 0.0 {
            return Err(CertificateError::InfeasibleRegion(format!(
                "sigma1 = {} < 0",
                self.sigma1
            )));
        }
        if self.sigma2 < self.sigma1 {
            return Err(CertificateError::InfeasibleRegion("sigma2 < sigma1".into()));
        }
        if self.beta < 0.0 || self.gamma < 0.0 || self.omega < 0.0 {
            return Err(CertificateError::InfeasibleRegion(
                "beta, gamma, omega must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// `ε₁ … ε₁₀`. `eps5` is `None` when `γ = 0`: the term it splits is then
/// identically zero and is dropped instead.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Epsilons {
    pub eps1: f64,
    pub eps2: f64,
    pub eps3: f64,
    pub eps4: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps5: Option<f64>,
    pub eps6: f64,
    pub eps7: f64,
    pub eps8: f64,
    pub eps9: f64,
    pub eps10: f64,
}

pub fn epsilon_defaults(k: &Constants, a: f64) -> Epsilons {
    let q = 0.25 / k.s1();
    Epsilons {
        eps1: 0.5 / a,
        eps2: q,
        eps3: q,
        eps4: 8.0 * k.s() / 7.0,
        eps5: (k.gamma > 0.0).then(|| 1.0 / (8.0 * k.gamma)),
        eps6: q,
        eps7: q,
        eps8: 4.0,
        eps9: 0.5,
        eps10: 0.5,
    }
}

/// One inequality `d/dt F ≤ c_xx 𝕀xx + c_pp 𝕀pp + c_qpp Q²pp + c_qxp Q²xp`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub ixx: f64,
    pub ipp: f64,
    pub qpp: f64,
    pub qxp: f64,
}

impl BoundRow {
    fn scaled(self, f: f64) -> Self {
        BoundRow {
            ixx: f * self.ixx,
            ipp: f * self.ipp,
            qpp: f * self.qpp,
            qxp: f * self.qxp,
        }
    }

    fn plus(self, o: Self) -> Self {
        BoundRow {
            ixx: self.ixx + o.ixx,
            ipp: self.ipp + o.ipp,
            qpp: self.qpp + o.qpp,
            qxp: self.qxp + o.qxp,
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.ixx, self.ipp, self.qpp, self.qxp]
    }
}

/// Right-hand sides of the three derivative bounds for arbitrary `ε`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsTable {
    pub d_ipp: BoundRow,
    pub d_ixp: BoundRow,
    pub d_ixx: BoundRow,
}

/// `ε·x`, zero when the split term is absent. The default `ε` are infinite
/// when `s₁ = 0`, which happens only when every term they split vanishes.
fn split(eps: f64, x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        eps * x
    }
}

pub fn lemma_bounds_rhs(e: &Epsilons, k: &Constants) -> BoundsTable {
    let sigma = k.sigma();
    let (c_gamma, q_gamma) = match e.eps5 {
        Some(e5) => (2.0 * e5 * k.gamma, 0.5 / e5),
        None => (0.0, 0.0),
    };
    BoundsTable {
        d_ipp: BoundRow {
            ixx: 2.0 * e.eps1,
            ipp: 0.5 / e.eps1 - 2.0 * k.sigma1,
            qpp: -2.0,
            qxp: 0.0,
        },
        d_ixp: BoundRow {
            ixx: split(e.eps2, sigma)
                + split(e.eps3, k.sigma1)
                + c_gamma
                + split(e.eps7, k.omega)
                + split(e.eps6, k.beta)
                - 1.0,
            ipp: 0.25 * (sigma / e.eps2 + k.sigma1 / e.eps3 + 1.0 / e.eps6 + 1.0 / e.eps7),
            qpp: 2.0 * e.eps4 + q_gamma,
            qxp: 0.5 / e.eps4,
        },
        d_ixx: BoundRow {
            ixx: 4.0 * e.eps8 * k.gamma
                + 0.5 / e.eps9
                + 2.0 * e.eps9 * k.beta
                + 2.0 * e.eps10 * k.omega
                + 0.5 / e.eps10,
            ipp: 0.0,
            qpp: 0.0,
            qxp: 1.0 / e.eps8 - 2.0,
        },
    }
}

impl BoundsTable {
    /// Combine into a bound on `dℰ/dt`, using `d𝔇/dt = −𝕀pp`.
    pub fn combine(&self, a: f64, b: f64, c: f64, k: f64) -> BoundRow {
        self.d_ipp
            .scaled(a)
            .plus(self.d_ixp.scaled(2.0 * b))
            .plus(self.d_ixx.scaled(c))
            .plus(BoundRow {
                ixx: 0.0,
                ipp: -k,
                qpp: 0.0,
                qxp: 0.0,
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub k: f64,
}

pub const DEFAULT_MARGIN: f64 = 0.05;

/// Deterministic choice: `c = 2/s`, `a` the smallest integer above
/// `(1 + margin)` times every lower bound on `a`, `b` the midpoint of its
/// window, `k` one above its threshold.
pub fn choose_abck(k: &Constants, margin: f64) -> Result<Weights, CertificateError> {
    k.admissible()?;
    if !(margin > 0.0 && margin < 1.0) {
        return Err(CertificateError::InfeasibleRegion(format!(
            "margin {margin} outside (0, 1)"
        )));
    }
    let s = k.s();
    let q = 16.0 * s / 7.0 + 4.0 * k.gamma;
    let c = 2.0 / s;
    let cs = c * s;
    // a > (1+cs) q opens the b-window, a > 4s²c gives 2cs < √(ac), and
    // a > 2cs q keeps the window's upper end at 2cs.
    let lower = ((1.0 + cs) * q).max(4.0 * s * s * c).max(2.0 * cs * q);
    let a = ((1.0 + margin) * lower).ceil();
    let hi = (a / q).min(2.0 * cs);
    let lo = 1.0 + cs;
    if !(hi > lo) {
        return Err(CertificateError::InfeasibleRegion(format!(
            "empty b-window ({lo}, {hi})"
        )));
    }
    let b = 0.5 * (lo + hi);
    let kk = a * (a - 2.0 * k.sigma1) + 2.0 * b * k.s1() * k.s2() + 1.0;
    Ok(Weights { a, b, c, k: kk })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub coef_ipp: f64,
    pub coef_ixx: f64,
    pub coef_qpp: f64,
    pub coef_qxp: f64,
    pub d: f64,
}

/// The four coefficients of the `dℰ/dt` bound and `d`; errors name the
/// first sign condition that fails.
pub fn proposition_coefficients(
    k: &Constants,
    w: &Weights,
) -> Result<Coefficients, CertificateError> {
    let s = k.s();
    let coef_ipp = -w.k + w.a * (w.a - 2.0 * k.sigma1) + 2.0 * w.b * k.s1() * k.s2();
    let coef_ixx = 1.0 + w.c * s - w.b;
    let coef_qpp = 2.0 * (w.b * (16.0 * s / 7.0 + 4.0 * k.gamma) - w.a);
    let coef_qxp = 1.75 * (w.b / (2.0 * s) - w.c);
    let fail = |condition: &str| {
        Err(CertificateError::InvalidCertificate {
            condition: condition.into(),
        })
    };
    if !(coef_ipp < 0.0) {
        return fail("coefficient of Ipp < 0");
    }
    if !(coef_ixx < 0.0) {
        return fail("coefficient of Ixx < 0");
    }
    if !(coef_qpp <= 0.0) {
        return fail("coefficient of Qpp^2 <= 0");
    }
    if !(coef_qxp <= 0.0) {
        return fail("coefficient of Qxp^2 <= 0");
    }
    Ok(Coefficients {
        coef_ipp,
        coef_ixx,
        coef_qpp,
        coef_qxp,
        d: (-coef_ipp).min(-coef_ixx),
    })
}

/// `max(a + b, b + c)`
pub fn m_bound(w: &Weights) -> f64 {
    (w.a + w.b).max(w.b + w.c)
}

pub fn assemble_lambda(w: &Weights, d: f64, alpha: f64) -> f64 {
    (d / (2.0 * m_bound(w))).min(d * alpha / w.k)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub constants: Constants,
    pub alpha: f64,
    pub margin: f64,
    pub s: f64,
    pub s1: f64,
    pub s2: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub k: f64,
    pub d: f64,
    pub coef_ipp: f64,
    pub coef_ixx: f64,
    pub coef_qpp: f64,
    pub coef_qxp: f64,
    pub m_bound: f64,
    /// Certified lower bound on the decay rate of `ℰ`; not an estimate of
    /// the true rate.
    pub lambda: f64,
    pub gamma_terms_dropped: bool,
    pub eps: Epsilons,
    pub valid: bool,
    pub conditions: Vec<Check>,
}

impl Certificate {
    pub fn weights(&self) -> Weights {
        Weights {
            a: self.a,
            b: self.b,
            c: self.c,
            k: self.k,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("certificate serialises")
    }

    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let k = &self.constants;
        let _ = writeln!(s, "decay certificate");
        let _ = writeln!(
            s,
            "  inputs   sigma1 = {}, sigma2 = {}, beta = {}, gamma = {}, omega = {}, alpha = {}",
            k.sigma1, k.sigma2, k.beta, k.gamma, k.omega, self.alpha
        );
        let _ = writeln!(s, "  s = {}, s1 = {}, s2 = {}", self.s, self.s1, self.s2);
        let _ = writeln!(
            s,
            "  a = {}, b = {}, c = {}, k = {}",
            self.a, self.b, self.c, self.k
        );
        let _ = writeln!(
            s,
            "  coefficients  Ipp {}  Ixx {}  Qpp {}  Qxp {}",
            self.coef_ipp, self.coef_ixx, self.coef_qpp, self.coef_qxp
        );
        let _ = writeln!(s, "  d = {}, M = {}", self.d, self.m_bound);
        let _ = writeln!(s, "  lambda = {:e} (certified lower bound)", self.lambda);
        for c in &self.conditions {
            let _ = writeln!(s, "  [{}] {}", if c.holds { "ok" } else { "FAIL" }, c.name);
        }
        s
    }
}

/// Full pipeline: choose the weights, compute the coefficients and the
/// rate, and re-check everything with the independent validator.
pub fn certify(k: &Constants, alpha: f64, margin: f64) -> Result<Certificate, CertificateError> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(CertificateError::InfeasibleRegion(format!(
            "alpha = {alpha} must be positive"
        )));
    }
    let w = choose_abck(k, margin)?;
    let coef = proposition_coefficients(k, &w)?;
    let eps = epsilon_defaults(k, w.a);
    let mut cert = Certificate {
        constants: *k,
        alpha,
        margin,
        s: k.s(),
        s1: k.s1(),
        s2: k.s2(),
        a: w.a,
        b: w.b,
        c: w.c,
        k: w.k,
        d: coef.d,
        coef_ipp: coef.coef_ipp,
        coef_ixx: coef.coef_ixx,
        coef_qpp: coef.coef_qpp,
        coef_qxp: coef.coef_qxp,
        m_bound: m_bound(&w),
        lambda: assemble_lambda(&w, coef.d, alpha),
        gamma_terms_dropped: eps.eps5.is_none(),
        eps,
        valid: false,
        conditions: Vec::new(),
    };
    cert.conditions = validate(&cert);
    cert.valid = cert.conditions.iter().all(|c| c.holds);
    match cert.conditions.iter().find(|c| !c.holds) {
        Some(c) => Err(CertificateError::InvalidCertificate {
            condition: c.name.clone(),
        }),
        None => Ok(cert),
    }
}
