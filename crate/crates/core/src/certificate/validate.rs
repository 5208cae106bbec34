//! Independent re-verification of a certificate. Nothing here calls into
//! the chooser; every quantity is recomputed from the recorded inputs.

use super::Certificate;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
}

/// Equality up to rounding in a sum whose largest term has size `scale`.
fn same(x: f64, y: f64, scale: f64) -> bool {
    (x - y).abs() <= 1e-12 * x.abs().max(y.abs()).max(scale).max(1.0)
}

struct Checks(Vec<Check>);

impl Checks {
    fn lt(&mut self, name: &str, lhs: f64, rhs: f64) {
        self.0.push(Check {
            name: format!("{name} ({lhs} < {rhs})"),
            holds: lhs < rhs,
            lhs,
            rhs,
        });
    }

    fn le(&mut self, name: &str, lhs: f64, rhs: f64) {
        self.0.push(Check {
            name: format!("{name} ({lhs} <= {rhs})"),
            holds: lhs <= rhs,
            lhs,
            rhs,
        });
    }

    fn eq(&mut self, name: &str, recorded: f64, recomputed: f64) {
        self.eq_scaled(name, recorded, recomputed, 0.0);
    }

    fn eq_scaled(&mut self, name: &str, recorded: f64, recomputed: f64, scale: f64) {
        self.0.push(Check {
            name: format!("{name} recorded {recorded} = recomputed {recomputed}"),
            holds: same(recorded, recomputed, scale),
            lhs: recorded,
            rhs: recomputed,
        });
    }
}

/// Every inequality the certificate relies on, in order.
pub fn validate(cert: &Certificate) -> Vec<Check> {
    let k = &cert.constants;
    let (a, b, c, kk) = (cert.a, cert.b, cert.c, cert.k);
    let mut out = Checks(Vec::new());

    out.le("0 <= sigma1", 0.0, k.sigma1);
    out.le("sigma1 <= sigma2", k.sigma1, k.sigma2);
    out.le("0 <= beta", 0.0, k.beta);
    out.le("0 <= gamma", 0.0, k.gamma);
    out.le("0 <= omega", 0.0, k.omega);
    out.lt("0 < alpha", 0.0, cert.alpha);

    let s = k.omega + 16.0 * k.gamma + k.beta + 2.0;
    let s1 = k.omega + k.beta + k.sigma2;
    let s2 = k.sigma2 + 2.0;
    out.eq("s", cert.s, s);
    out.eq("s1", cert.s1, s1);
    out.eq("s2", cert.s2, s2);

    let window = s * 16.0 / 7.0 + k.gamma * 4.0;
    out.lt("1/s < c", 1.0 / s, c);
    out.lt("(1+cs)(16s/7+4gamma) < a", (c * s + 1.0) * window, a);
    out.lt("4 s^2 c < a", 4.0 * c * s * s, a);
    out.lt("1+cs < b", c * s + 1.0, b);
    out.lt("b < a/(16s/7+4gamma)", b, a / window);
    out.lt("b < 2cs", b, 2.0 * c * s);
    out.le("b <= sqrt(ac)", b, (a * c).sqrt());

    let c_ipp = a * a - 2.0 * a * k.sigma1 + 2.0 * b * s1 * s2 - kk;
    let c_ixx = c * s + 1.0 - b;
    let c_qpp = 2.0 * b * window - 2.0 * a;
    let c_qxp = 7.0 * b / (8.0 * s) - 7.0 * c / 4.0;
    out.eq_scaled("coef_Ipp", cert.coef_ipp, c_ipp, kk.abs());
    out.eq("coef_Ixx", cert.coef_ixx, c_ixx);
    out.eq_scaled("coef_Qpp", cert.coef_qpp, c_qpp, 2.0 * a);
    out.eq("coef_Qxp", cert.coef_qxp, c_qxp);
    out.lt("coef_Ipp < 0", c_ipp, 0.0);
    out.lt("coef_Ixx < 0", c_ixx, 0.0);
    out.le("coef_Qpp <= 0", c_qpp, 0.0);
    out.le("coef_Qxp <= 0", c_qxp, 0.0);

    let d = if -c_ipp < -c_ixx { -c_ipp } else { -c_ixx };
    out.eq_scaled("d", cert.d, d, kk.abs());
    out.lt("0 < d", 0.0, d);

    // The recorded ε must reproduce a bound at least as strong as the
    // coefficients above when the three derivative inequalities are combined.
    let e = &cert.eps;
    let sigma = k.sigma2 - k.sigma1;
    let (g_split, q_split) = match e.eps5 {
        Some(e5) => (2.0 * e5 * k.gamma, 1.0 / (2.0 * e5)),
        None => {
            out.le("eps5 dropped only when gamma = 0", k.gamma, 0.0);
            (0.0, 0.0)
        }
    };
    let row_pp = [
        2.0 * e.eps1,
        1.0 / (2.0 * e.eps1) - 2.0 * k.sigma1,
        -2.0,
        0.0,
    ];
    // An infinite ε multiplying a vanishing constant means the term is absent.
    let term = |eps: f64, x: f64| if x == 0.0 { 0.0 } else { eps * x };
    let row_xp = [
        term(e.eps2, sigma)
            + term(e.eps3, k.sigma1)
            + g_split
            + term(e.eps7, k.omega)
            + term(e.eps6, k.beta)
            - 1.0,
        (sigma / e.eps2 + k.sigma1 / e.eps3 + 1.0 / e.eps6 + 1.0 / e.eps7) / 4.0,
        2.0 * e.eps4 + q_split,
        1.0 / (2.0 * e.eps4),
    ];
    let row_xx = [
        4.0 * e.eps8 * k.gamma
            + 1.0 / (2.0 * e.eps9)
            + 2.0 * e.eps9 * k.beta
            + 2.0 * e.eps10 * k.omega
            + 1.0 / (2.0 * e.eps10),
        0.0,
        0.0,
        1.0 / e.eps8 - 2.0,
    ];
    let recorded = [c_ipp, c_ixx, c_qpp, c_qxp];
    let names = ["Ipp", "Ixx", "Qpp^2", "Qxp^2"];
    // table columns are (Ixx, Ipp, Qpp², Qxp²)
    let order = [1usize, 0, 2, 3];
    for (slot, &col) in order.iter().enumerate() {
        let mut combined = a * row_pp[col] + 2.0 * b * row_xp[col] + c * row_xx[col];
        if col == 1 {
            combined -= kk;
        }
        let tol = 1e-12 * kk.abs().max(1.0);
        out.le(
            &format!("combined eps bound on {} within coefficient", names[slot]),
            combined,
            recorded[slot] + tol,
        );
    }

    let m = if a + b > b + c { a + b } else { b + c };
    out.eq("M", cert.m_bound, m);
    out.lt("0 < lambda", 0.0, cert.lambda);
    out.le("lambda M <= d/2", cert.lambda * m, d / 2.0 * (1.0 + 1e-14));
    out.le(
        "lambda k <= d alpha",
        cert.lambda * kk,
        d * cert.alpha * (1.0 + 1e-14),
    );
    out.0
}
