use kfp_core::certificate::{
    certify, validate, Certificate, CertificateError, Constants, DEFAULT_MARGIN,
};
use proptest::prelude::*;

fn lambda(k: &Constants, alpha: f64) -> f64 {
    certify(k, alpha, DEFAULT_MARGIN).unwrap().lambda
}

fn assert_sound(cert: &Certificate) {
    assert!(cert.valid);
    for c in validate(cert) {
        assert!(c.holds, "{}", c.name);
    }
    assert!(cert.coef_ipp < 0.0 && cert.coef_ixx < 0.0);
    assert!(cert.coef_qpp <= 0.0 && cert.coef_qxp <= 0.0);
    assert!(cert.b <= (cert.a * cert.c).sqrt());
    assert!(cert.d > 0.0 && cert.lambda > 0.0);
}

const SIGMA2: [f64; 5] = [1.0, 1.5, 2.0, 4.0, 8.0];
const SMALL: [f64; 5] = [0.0, 0.25, 0.5, 1.0, 2.0];

/// λ on the 5⁴ lattice over (σ₂, β, γ, ω) with σ₁ = 1 and α = 1, indexed
/// in that order.
fn lattice() -> Vec<f64> {
    let mut out = Vec::with_capacity(625);
    for &sigma2 in &SIGMA2 {
        for &beta in &SMALL {
            for &gamma in &SMALL {
                for &omega in &SMALL {
                    let k = Constants {
                        sigma1: 1.0,
                        sigma2,
                        beta,
                        gamma,
                        omega,
                    };
                    let cert = certify(&k, 1.0, DEFAULT_MARGIN).unwrap();
                    assert_sound(&cert);
                    out.push(cert.lambda);
                }
            }
        }
    }
    out
}

#[test]
fn lambda_monotone_on_lattice() {
    let l = lattice();
    let at = |i: [usize; 4]| l[((i[0] * 5 + i[1]) * 5 + i[2]) * 5 + i[3]];
    for a in 0..5 {
        for b in 0..5 {
            for c in 0..5 {
                for d in 0..5 {
                    let i = [a, b, c, d];
                    for axis in 0..4 {
                        if i[axis] == 4 {
                            continue;
                        }
                        let mut j = i;
                        j[axis] += 1;
                        assert!(
                            at(j) <= at(i),
                            "lambda increases along axis {axis} at {i:?}"
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn lambda_nondecreasing_in_sigma1_and_alpha() {
    for &beta in &SMALL {
        for &gamma in &SMALL {
            let mut prev = 0.0;
            for sigma1 in [0.0, 0.5, 1.0, 2.0, 4.0] {
                let l = lambda(
                    &Constants {
                        sigma1,
                        sigma2: 4.0,
                        beta,
                        gamma,
                        omega: 0.5,
                    },
                    1.0,
                );
                assert!(l >= prev, "sigma1 = {sigma1}: {l} < {prev}");
                prev = l;
            }
            let mut prev = 0.0;
            for alpha in [0.1, 0.5, 1.0, 2.0, 10.0] {
                let l = lambda(
                    &Constants {
                        sigma1: 1.0,
                        sigma2: 2.0,
                        beta,
                        gamma,
                        omega: 0.5,
                    },
                    alpha,
                );
                assert!(l >= prev, "alpha = {alpha}: {l} < {prev}");
                prev = l;
            }
        }
    }
}

#[test]
fn classical_constants_certify() {
    let cert = certify(&Constants::classical(), 1.0, DEFAULT_MARGIN).unwrap();
    assert_sound(&cert);
    assert!(cert.gamma_terms_dropped);
}

#[test]
fn tampered_certificate_fails_validation() {
    let cert = certify(&Constants::classical(), 1.0, DEFAULT_MARGIN).unwrap();
    let mut bad = cert.clone();
    bad.b = 10.0;
    assert!(validate(&bad).iter().any(|c| !c.holds));
    let mut bad = cert.clone();
    bad.lambda *= 2.0;
    assert!(validate(&bad).iter().any(|c| !c.holds));
    let mut bad = cert;
    bad.k = 1.0;
    assert!(validate(&bad).iter().any(|c| !c.holds));
}

fn maybe_zero(hi: f64) -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), 0.0..hi]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn random_admissible_constants(
        sigma1 in 0.0..5.0f64,
        spread in maybe_zero(5.0),
        beta in maybe_zero(3.0),
        gamma in maybe_zero(3.0),
        omega in maybe_zero(3.0),
        alpha in 0.05..5.0f64,
        margin in 0.01..0.9f64,
    ) {
        let k = Constants { sigma1, sigma2: sigma1 + spread, beta, gamma, omega };
        match certify(&k, alpha, margin) {
            Ok(cert) => assert_sound(&cert),
            Err(e) => prop_assert!(matches!(e, CertificateError::InfeasibleRegion(_)), "{}", e),
        }
    }

    #[test]
    fn inadmissible_constants_rejected(sigma1 in -5.0..-1e-9f64, beta in -2.0..2.0f64) {
        let k = Constants { sigma1, sigma2: 1.0, beta, gamma: 0.0, omega: 0.0 };
        prop_assert!(matches!(certify(&k, 1.0, DEFAULT_MARGIN), Err(CertificateError::InfeasibleRegion(_))));
    }
}

#[test]
fn flat_constants_certify_and_round_trip() {
    let k = Constants {
        sigma1: 0.0,
        sigma2: 0.0,
        beta: 0.0,
        gamma: 0.0,
        omega: 0.0,
    };
    let cert = certify(&k, 0.5, DEFAULT_MARGIN).unwrap();
    assert_sound(&cert);
    let back = Certificate::from_toml(&cert.to_toml()).unwrap();
    assert_eq!(back, cert);
}
