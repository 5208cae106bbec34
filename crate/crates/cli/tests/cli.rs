use kfp_cli::SimulationSummary;
use kfp_core::assumptions::AssumptionReport;
use kfp_core::certificate::{validate, Certificate};
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL_SCAN: [&str; 6] = ["--dim", "2", "--resolution", "11", "--quasi-random", "50"];
const SMALL_RUN: [&str; 8] = [
    "--nx",
    "16",
    "--np",
    "32",
    "--tmax",
    "1",
    "--sample-dt",
    "0.05",
];

fn kfp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kfp"))
        .args(args)
        .arg("--output-dir")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn pipeline(dir: &Path) {
    let steps: [Vec<&str>; 4] = [
        [&["check"][..], &SMALL_SCAN[..]].concat(),
        vec!["certify"],
        [&["simulate"][..], &SMALL_RUN[..]].concat(),
        vec!["report"],
    ];
    for args in steps {
        let out = kfp(dir, &args);
        assert_eq!(code(&out), 0, "{args:?}: {}", stderr(&out));
    }
}

#[test]
fn classical_pipeline_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    pipeline(dir.path());
    for f in [
        "report.txt",
        "report.toml",
        "certificate.toml",
        "series.csv",
        "summary.toml",
        "bundle.txt",
    ] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
    let first = fs::read(dir.path().join("bundle.txt")).unwrap();
    let text = String::from_utf8(first.clone()).unwrap();
    assert!(
        text.contains("== assumptions ==")
            && text.contains("== certificate ==")
            && text.contains("== simulation ==")
    );

    for entry in fs::read_dir(dir.path()).unwrap() {
        fs::remove_file(entry.unwrap().path()).unwrap();
    }
    pipeline(dir.path());
    assert_eq!(fs::read(dir.path().join("bundle.txt")).unwrap(), first);

    let cert =
        Certificate::from_toml(&fs::read_to_string(dir.path().join("certificate.toml")).unwrap())
            .unwrap();
    assert!(cert.valid && cert.lambda > 0.0);
    let report =
        AssumptionReport::from_toml(&fs::read_to_string(dir.path().join("report.toml")).unwrap())
            .unwrap();
    assert_eq!((report.sigma1, report.sigma2), (1.0, 1.0));
}

#[test]
fn margin_changes_lambda_not_validity() {
    let mut lambdas = Vec::new();
    for margin in ["0.5", "0.05"] {
        let dir = tempfile::tempdir().unwrap();
        let args = [&["certify", "--margin", margin][..], &SMALL_SCAN[..]].concat();
        let out = kfp(dir.path(), &args);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        let cert = Certificate::from_toml(
            &fs::read_to_string(dir.path().join("certificate.toml")).unwrap(),
        )
        .unwrap();
        assert!(cert.valid && validate(&cert).iter().all(|c| c.holds));
        lambdas.push(cert.lambda);
    }
    assert!(lambdas[0] != lambdas[1], "{lambdas:?}");
}

#[test]
fn usage_and_missing_inputs_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let missing = d.join("nope.toml");
    let missing = missing.to_str().unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["report"],
        vec!["simulate", "--certificate", missing],
        vec!["certify", "--report", missing],
        vec!["check", "--config", missing],
        vec!["check", "--model", "relativistic"],
        vec!["check", "--model", "quantum"],
        vec!["simulate", "--initial", "1 + sin(", "--tmax", "0.1"],
        vec!["simulate", "--scheme", "spectral"],
        vec!["check", "--frobnicate"],
        vec![],
    ];
    for args in cases {
        let out = kfp(d, &args);
        assert_eq!(code(&out), 2, "{args:?}: {}", stderr(&out));
    }
    fs::write(
        d.join("bad.toml"),
        "model = \"classical\"\n[grid]\nnx = 16\ncolour = 3\n",
    )
    .unwrap();
    let bad = d.join("bad.toml");
    let out = kfp(d, &["check", "--config", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
}

#[test]
fn failing_assumptions_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = [
        "check",
        "--model",
        "relativistic",
        "--theta",
        "0.1",
        "--radius",
        "2",
        "--resolution",
        "5",
        "--quasi-random",
        "0",
        "--no-logsob",
    ];
    let out = kfp(d, &args);
    assert_eq!(code(&out), 1, "{}", stderr(&out));
    assert!(stderr(&out).contains("sigma1"));
    let report =
        AssumptionReport::from_toml(&fs::read_to_string(d.join("report.toml")).unwrap()).unwrap();
    assert!(report.sigma1 < 0.0);
    let out = kfp(
        d,
        &[
            "certify",
            "--report",
            d.join("report.toml").to_str().unwrap(),
        ],
    );
    assert_eq!(code(&out), 1, "{}", stderr(&out));
}

#[test]
fn equilibrium_datum_reports_no_fit() {
    let dir = tempfile::tempdir().unwrap();
    let args = [&["simulate", "--initial", "1"][..], &SMALL_RUN[..]].concat();
    let out = kfp(dir.path(), &args);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let summary: SimulationSummary =
        toml::from_str(&fs::read_to_string(dir.path().join("summary.toml")).unwrap()).unwrap();
    assert!(summary.lambda_emp.is_none());
    assert!(summary
        .fit_notice
        .unwrap()
        .starts_with("insufficient decay to fit a rate"));
    assert!(summary.mass_drift < 1e-12);
}

#[test]
fn config_file_then_flags() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("run.toml"),
        "model = \"classical\"\noutput_dir = \"out\"\n[grid]\nnx = 16\nnp = 32\n[time]\ntmax = 0.5\nsample_dt = 0.05\nscheme = \"limited\"\n",
    )
    .unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_kfp"))
        .args(["simulate", "--diagnostics", "--np", "40", "--config"])
        .arg(d.join("run.toml"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let summary: SimulationSummary =
        toml::from_str(&fs::read_to_string(d.join("out").join("summary.toml")).unwrap()).unwrap();
    assert_eq!(
        (summary.nx, summary.np, summary.scheme.as_str()),
        (16, 40, "limited")
    );
    let diag = summary.diagnostics.expect("diagnostics requested");
    assert_eq!(diag.identities.len(), 4);
}
