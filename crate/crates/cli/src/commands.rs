use crate::config::{scheme_name, ModelChoice, RunConfig};
use crate::CliError;
use kfp_core::assumptions::{check, AssumptionReport, CheckOptions};
use kfp_core::certificate::{certify, Certificate, Constants};
use kfp_core::solver::{
    build_grid, entropy_production_diagnostics, fit_decay_rate, parse_initial_data, run, step,
    DiagnosticsReport, DiffusionOperator, RunOptions, State, TransportScheme,
};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, text)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
}

fn load_report(path: &Path) -> Result<AssumptionReport, CliError> {
    AssumptionReport::from_toml(&read(path)?)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn load_certificate(path: &Path) -> Result<Certificate, CliError> {
    Certificate::from_toml(&read(path)?)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn load_summary(path: &Path) -> Result<SimulationSummary, CliError> {
    toml::from_str(&read(path)?).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Runs every assumption check; writes `report.txt` and `report.toml`.
pub fn cmd_check(cfg: &RunConfig) -> Result<AssumptionReport, CliError> {
    let model = cfg.check_model()?;
    let opts = CheckOptions {
        grid: cfg.scan.clone(),
        manual_alpha: cfg.alpha,
        logsob: cfg.logsob,
        ..Default::default()
    };
    let report = check(&model, &opts);
    let text = report.to_text();
    write(&cfg.out("report.txt"), &text)?;
    write(&cfg.out("report.toml"), &report.to_toml())?;
    print!("{text}");
    let failures = report.failures();
    if failures.is_empty() {
        Ok(report)
    } else {
        Err(CliError::Failure(format!(
            "assumptions fail on the scan grid:\n  {}",
            failures.join("\n  ")
        )))
    }
}

/// Builds and validates the decay certificate from a passing report.
pub fn cmd_certify(cfg: &RunConfig) -> Result<Certificate, CliError> {
    let existing = cfg
        .report
        .clone()
        .or_else(|| Some(cfg.out("report.toml")).filter(|p| p.is_file()));
    let report = match existing {
        Some(p) => load_report(&p)?,
        None => cmd_check(cfg)?,
    };
    let failures = report.failures();
    if !failures.is_empty() {
        return Err(CliError::Failure(format!(
            "cannot certify: the assumption report does not pass:\n  {}",
            failures.join("\n  ")
        )));
    }
    let alpha = report.alpha.or(cfg.alpha).ok_or_else(|| {
        CliError::Failure("no log-Sobolev constant: neither criterion verified one for this model; supply --alpha".into())
    })?;
    let cert = certify(&Constants::from_report(&report), alpha, cfg.margin)
        .map_err(|e| CliError::Failure(format!("certificate rejected: {e}")))?;
    let text = cert.to_text();
    write(&cfg.out("certificate.toml"), &cert.to_toml())?;
    write(&cfg.out("certificate.txt"), &text)?;
    print!("{text}");
    Ok(cert)
}

/// Everything `simulate` reports besides the series itself.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub model: String,
    pub nx: usize,
    pub np: usize,
    pub p_max: f64,
    pub dt: f64,
    pub tmax: f64,
    pub sample_dt: f64,
    pub scheme: String,
    pub initial_data: String,
    pub tail_estimate: f64,
    pub samples: usize,
    pub mass_drift: f64,
    pub entropy_monotone: bool,
    pub csiszar_kullback_ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_emp: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_r2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_notice: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate_source: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_cert: Option<f64>,
    /// `ℰ(t) e^{0.9 λ t}` non-increasing at every sample.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay_ok: Option<bool>,
    pub decay_violations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_emp_at_least_cert: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<DiagnosticsReport>,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:e}"))
}

fn flag(v: Option<bool>) -> &'static str {
    match v {
        Some(true) => "pass",
        Some(false) => "FAIL",
        None => "-",
    }
}

impl SimulationSummary {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "model             {}", self.model);
        let _ = writeln!(
            s,
            "grid              Nx = {}, Np = {}, P = {}",
            self.nx, self.np, self.p_max
        );
        let _ = writeln!(
            s,
            "time              tmax = {}, dt = {:e}, sample_dt = {}",
            self.tmax, self.dt, self.sample_dt
        );
        let _ = writeln!(s, "transport         {}", self.scheme);
        let _ = writeln!(s, "initial data      {}", self.initial_data);
        let _ = writeln!(s, "tail estimate     {:e}", self.tail_estimate);
        let _ = writeln!(s, "samples           {}", self.samples);
        let _ = writeln!(s, "mass drift        {:e}", self.mass_drift);
        let _ = writeln!(s, "D non-increasing  {}", flag(Some(self.entropy_monotone)));
        let _ = writeln!(
            s,
            "l1 <= sqrt(2D)    {}",
            flag(Some(self.csiszar_kullback_ok))
        );
        let _ = writeln!(s, "lambda_emp        {}", opt(self.lambda_emp));
        let _ = writeln!(s, "fit r2            {}", opt(self.fit_r2));
        if let Some(n) = &self.fit_notice {
            let _ = writeln!(s, "fit notice        {n}");
        }
        let _ = writeln!(
            s,
            "certificate       {}",
            self.certificate_source.as_deref().unwrap_or("none")
        );
        let _ = writeln!(s, "lambda_cert       {}", opt(self.lambda_cert));
        let _ = writeln!(
            s,
            "Emod e^(0.9 lambda t) non-increasing  {} ({} violations)",
            flag(self.decay_ok),
            self.decay_violations
        );
        let _ = writeln!(
            s,
            "lambda_emp >= lambda_cert             {}",
            flag(self.lambda_emp_at_least_cert)
        );
        if let Some(d) = &self.diagnostics {
            s.push('\n');
            s.push_str(&d.to_text());
        }
        s
    }
}

/// Tolerance on `D(t_{n+1}) <= D(t_n)` for round-off once `D` is tiny.
const ENTROPY_ROUNDOFF: f64 = 1e-15;

pub fn cmd_simulate(cfg: &RunConfig, diagnostics: bool) -> Result<SimulationSummary, CliError> {
    let model = cfg.model_at(1)?;
    let grid = build_grid(&model, cfg.nx, cfg.np, cfg.p_max)
        .map_err(|e| CliError::Failure(e.to_string()))?;
    let expr = parse_initial_data(&cfg.initial)
        .map_err(|e| CliError::Config(format!("initial data: {e}")))?;
    let state = State::from_expr(&grid, &expr).map_err(|e| CliError::Config(e.to_string()))?;

    let cfl = if grid.max_speed > 0.0 {
        grid.dx / grid.max_speed
    } else {
        f64::INFINITY
    };
    let dt = cfg.dt.unwrap_or((0.9 * cfl).min(cfg.sample_dt));

    let (cert, source) = if let Some(p) = &cfg.certificate {
        (Some(load_certificate(p)?), Some(p.display().to_string()))
    } else if cfg.out("certificate.toml").is_file() {
        let p = cfg.out("certificate.toml");
        (Some(load_certificate(&p)?), Some(p.display().to_string()))
    } else if cfg.model == ModelChoice::Classical {
        let c = certify(&Constants::classical(), 1.0, cfg.margin)
            .map_err(|e| CliError::Failure(e.to_string()))?;
        (Some(c), Some("classical constants, alpha = 1".to_string()))
    } else {
        (None, None)
    };

    let opts = RunOptions {
        tmax: cfg.tmax,
        dt,
        sample_dt: cfg.sample_dt,
        scheme: cfg.scheme,
    };
    let out =
        run(&grid, &state, &opts, cert.as_ref()).map_err(|e| CliError::Failure(e.to_string()))?;
    let series = &out.series;
    write(&cfg.out("series.csv"), &series.to_csv())?;

    let (lambda_emp, fit_r2, fit_notice) = match fit_decay_rate(&series.times, &series.d, 0.5) {
        Ok(f) => (Some(f.lambda), Some(f.r2), None),
        Err(e) => (
            None,
            None,
            Some(format!("insufficient decay to fit a rate: {e}")),
        ),
    };
    let lambda_cert = cert.as_ref().map(|c| c.lambda);
    let diag = if diagnostics {
        // at the first sample the state has developed momentum structure even
        // when the datum has none
        let mut s = state.clone();
        let op = DiffusionOperator::new(&grid);
        let steps = (cfg.sample_dt.min(cfg.tmax) / out.dt_used).round() as usize;
        for _ in 0..steps {
            step(&mut s, out.dt_used, &grid, &op, cfg.scheme)
                .map_err(|e| CliError::Failure(e.to_string()))?;
        }
        let d = entropy_production_diagnostics(&s, &grid, out.dt_used, TransportScheme::Limited)
            .map_err(|e| CliError::Failure(e.to_string()))?;
        Some(d)
    } else {
        None
    };
    let summary = SimulationSummary {
        model: model.name().to_string(),
        nx: cfg.nx,
        np: cfg.np,
        p_max: cfg.p_max,
        dt: out.dt_used,
        tmax: cfg.tmax,
        sample_dt: cfg.sample_dt,
        scheme: scheme_name(cfg.scheme).into(),
        initial_data: cfg.initial.clone(),
        tail_estimate: grid.tail_estimate,
        samples: series.len(),
        mass_drift: series.mass_drift(),
        entropy_monotone: series.d.windows(2).all(|w| w[1] <= w[0] + ENTROPY_ROUNDOFF),
        csiszar_kullback_ok: series.pinsker_violations(1e-10).is_empty(),
        lambda_emp,
        fit_r2,
        fit_notice,
        certificate_source: source,
        lambda_cert,
        decay_ok: out.decay.as_ref().map(|d| d.passed()),
        decay_violations: out.decay.as_ref().map_or(0, |d| d.violations.len()),
        lambda_emp_at_least_cert: lambda_emp.zip(lambda_cert).map(|(e, c)| e >= c),
        diagnostics: diag,
    };
    let text = summary.to_text();
    write(&cfg.out("summary.txt"), &text)?;
    write(
        &cfg.out("summary.toml"),
        &toml::to_string(&summary)
            .map_err(|e| CliError::Failure(format!("cannot serialise summary: {e}")))?,
    )?;
    print!("{text}");

    if !summary.entropy_monotone {
        return Err(CliError::Failure(
            "entropy increased between samples".into(),
        ));
    }
    if !summary.csiszar_kullback_ok {
        return Err(CliError::Failure(
            "L1 distance exceeded sqrt(2 D) at some sample".into(),
        ));
    }
    if summary.decay_ok == Some(false) || summary.lambda_emp_at_least_cert == Some(false) {
        return Err(CliError::Failure(
            "simulated decay is slower than the certified rate".into(),
        ));
    }
    Ok(summary)
}

/// Collates the report, certificate and simulation summary into `bundle.txt`.
pub fn cmd_report(cfg: &RunConfig) -> Result<String, CliError> {
    let report_path = cfg.report.clone().unwrap_or_else(|| cfg.out("report.toml"));
    let cert_path = cfg
        .certificate
        .clone()
        .unwrap_or_else(|| cfg.out("certificate.toml"));
    let summary_path = cfg.out("summary.toml");
    let report = load_report(&report_path)?;
    let cert = load_certificate(&cert_path)?;
    let summary = load_summary(&summary_path)?;

    let mut s = String::new();
    s.push_str("== assumptions ==\n");
    s.push_str(&report.to_text());
    s.push_str("\n== certificate ==\n");
    s.push_str(&cert.to_text());
    s.push_str("\n== simulation ==\n");
    s.push_str(&summary.to_text());
    write(&cfg.out("bundle.txt"), &s)?;
    print!("{s}");
    Ok(s)
}
