//! Run configuration: an optional TOML file, then command-line overrides,
//! then defaults.
//!
//! ```toml
//! model = "relativistic"      # classical | relativistic | path to a model file
//! theta = 4.0
//! dim = 3                     # momentum dimension of built-in models in `check`
//! output_dir = "out"
//!
//! [grid]                      # solver grid (one space, one momentum dimension)
//! nx = 64
//! np = 128
//! p_max = 8.0
//!
//! [scan]                      # assumption scan
//! radius = 10.0
//! resolution = 41
//! quasi_random_count = 2000
//! seed = 1592401956
//! logsob = true
//!
//! [time]
//! tmax = 10.0
//! dt = 0.001                  # optional; defaults to 0.9 of the CFL limit
//! sample_dt = 0.1
//! scheme = "upwind"           # upwind | limited
//!
//! [initial]
//! data = "1 + 0.5*cos(2*pi*x)"
//!
//! [certificate]
//! margin = 0.05
//! alpha = 1.0                 # manual log-Sobolev constant
//! path = "certificate.toml"   # precomputed certificate for `simulate`
//! report = "report.toml"      # precomputed report for `certify`
//! ```
//!
//! Paths in the file are relative to the file's directory.

use crate::CliError;
use kfp_core::assumptions::{ScanGrid, DEFAULT_SEED};
use kfp_core::certificate::DEFAULT_MARGIN;
use kfp_core::models::{builtin_classical, load_model_file, relativistic_with_dim};
use kfp_core::solver::TransportScheme;
use kfp_core::ModelSpec;
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub model: Option<String>,
    pub theta: Option<f64>,
    pub dim: Option<usize>,
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub scan: ScanSection,
    #[serde(default)]
    pub time: TimeSection,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub certificate: CertificateSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub nx: Option<usize>,
    pub np: Option<usize>,
    pub p_max: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    pub radius: Option<f64>,
    pub resolution: Option<usize>,
    pub quasi_random_count: Option<usize>,
    pub seed: Option<u64>,
    pub logsob: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub tmax: Option<f64>,
    pub dt: Option<f64>,
    pub sample_dt: Option<f64>,
    pub scheme: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub data: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateSection {
    pub margin: Option<f64>,
    pub alpha: Option<f64>,
    pub path: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

/// Values given on the command line; each wins over the file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub model: Option<String>,
    pub theta: Option<f64>,
    pub dim: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub nx: Option<usize>,
    pub np: Option<usize>,
    pub p_max: Option<f64>,
    pub radius: Option<f64>,
    pub resolution: Option<usize>,
    pub quasi_random_count: Option<usize>,
    pub seed: Option<u64>,
    pub no_logsob: bool,
    pub tmax: Option<f64>,
    pub dt: Option<f64>,
    pub sample_dt: Option<f64>,
    pub scheme: Option<String>,
    pub initial: Option<String>,
    pub margin: Option<f64>,
    pub alpha: Option<f64>,
    pub certificate: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelChoice {
    Classical,
    Relativistic,
    File(PathBuf),
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub model: ModelChoice,
    pub theta: Option<f64>,
    pub dim: usize,
    pub output_dir: PathBuf,
    pub nx: usize,
    pub np: usize,
    pub p_max: f64,
    pub scan: ScanGrid,
    pub logsob: bool,
    pub tmax: f64,
    pub dt: Option<f64>,
    pub sample_dt: f64,
    pub scheme: TransportScheme,
    pub initial: String,
    pub margin: f64,
    pub alpha: Option<f64>,
    pub certificate: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

pub const DEFAULT_INITIAL: &str = "1 + 0.5*cos(2*pi*x)";

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(bad(format!("{name} must be a positive number, got {v}")))
    }
}

fn at_least(name: &str, v: usize, min: usize) -> Result<usize, CliError> {
    if v >= min {
        Ok(v)
    } else {
        Err(bad(format!("{name} must be at least {min}, got {v}")))
    }
}

pub fn parse_scheme(s: &str) -> Result<TransportScheme, CliError> {
    match s {
        "upwind" => Ok(TransportScheme::Upwind),
        "limited" => Ok(TransportScheme::Limited),
        other => Err(bad(format!(
            "unknown transport scheme `{other}` (expected upwind or limited)"
        ))),
    }
}

pub fn scheme_name(s: TransportScheme) -> &'static str {
    match s {
        TransportScheme::Upwind => "upwind",
        TransportScheme::Limited => "limited",
    }
}

impl RunConfig {
    pub fn load(config_path: Option<&Path>, o: &Overrides) -> Result<Self, CliError> {
        let (file, base) = match config_path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| bad(format!("cannot read config {}: {e}", p.display())))?;
                let file: FileConfig = toml::from_str(&text)
                    .map_err(|e| bad(format!("config {}: {e}", p.display())))?;
                (file, p.parent().map(Path::to_path_buf).unwrap_or_default())
            }
            None => (FileConfig::default(), PathBuf::new()),
        };
        let from_file = |p: &Option<PathBuf>| p.as_ref().map(|p| base.join(p));

        let model_src = o
            .model
            .clone()
            .or(file.model.clone())
            .unwrap_or_else(|| "classical".into());
        let model = match model_src.as_str() {
            "classical" => ModelChoice::Classical,
            "relativistic" => ModelChoice::Relativistic,
            path => {
                let p = if o.model.is_some() {
                    PathBuf::from(path)
                } else {
                    base.join(path)
                };
                if !p.is_file() {
                    return Err(bad(format!(
                        "model `{path}` is neither a built-in name nor an existing file"
                    )));
                }
                ModelChoice::File(p)
            }
        };
        let theta = o
            .theta
            .or(file.theta)
            .map(|t| positive("theta", t))
            .transpose()?;
        if model == ModelChoice::Relativistic && theta.is_none() {
            return Err(bad("the relativistic model needs --theta"));
        }
        let dim = at_least("dim", o.dim.or(file.dim).unwrap_or(3), 1)?;

        let seed = o.seed.or(file.scan.seed).unwrap_or(DEFAULT_SEED);
        let scan = ScanGrid::new(
            positive("scan radius", o.radius.or(file.scan.radius).unwrap_or(10.0))?,
            at_least(
                "scan resolution",
                o.resolution.or(file.scan.resolution).unwrap_or(41),
                2,
            )?,
            o.quasi_random_count
                .or(file.scan.quasi_random_count)
                .unwrap_or(2000),
        )
        .with_seed(seed);

        let dt =
            o.dt.or(file.time.dt)
                .map(|d| positive("dt", d))
                .transpose()?;
        let tmax = o.tmax.or(file.time.tmax).unwrap_or(10.0);
        if !(tmax >= 0.0 && tmax.is_finite()) {
            return Err(bad(format!("tmax must be nonnegative, got {tmax}")));
        }
        let scheme = parse_scheme(
            o.scheme
                .as_deref()
                .or(file.time.scheme.as_deref())
                .unwrap_or("upwind"),
        )?;
        let margin = o
            .margin
            .or(file.certificate.margin)
            .unwrap_or(DEFAULT_MARGIN);
        if !(margin >= 0.0 && margin.is_finite()) {
            return Err(bad(format!("margin must be nonnegative, got {margin}")));
        }
        let alpha = o
            .alpha
            .or(file.certificate.alpha)
            .map(|a| positive("alpha", a))
            .transpose()?;

        let certificate = o
            .certificate
            .clone()
            .or_else(|| from_file(&file.certificate.path));
        let report = o
            .report
            .clone()
            .or_else(|| from_file(&file.certificate.report));
        for p in certificate.iter().chain(report.iter()) {
            if !p.is_file() {
                return Err(bad(format!("{} does not exist", p.display())));
            }
        }

        Ok(RunConfig {
            model,
            theta,
            dim,
            output_dir: o
                .output_dir
                .clone()
                .or_else(|| from_file(&file.output_dir))
                .unwrap_or_else(|| ".".into()),
            nx: at_least("nx", o.nx.or(file.grid.nx).unwrap_or(64), 8)?,
            np: at_least("np", o.np.or(file.grid.np).unwrap_or(128), 8)?,
            p_max: positive("p_max", o.p_max.or(file.grid.p_max).unwrap_or(8.0))?,
            scan,
            logsob: !o.no_logsob && file.scan.logsob.unwrap_or(true),
            tmax,
            dt,
            sample_dt: positive(
                "sample_dt",
                o.sample_dt.or(file.time.sample_dt).unwrap_or(0.1),
            )?,
            scheme,
            initial: o
                .initial
                .clone()
                .or(file.initial.data)
                .unwrap_or_else(|| DEFAULT_INITIAL.into()),
            margin,
            alpha,
            certificate,
            report,
        })
    }

    /// The model at dimension `dim` (built-ins) or as written (files).
    pub fn model_at(&self, dim: usize) -> Result<ModelSpec, CliError> {
        match &self.model {
            ModelChoice::Classical => Ok(builtin_classical(dim)),
            ModelChoice::Relativistic => Ok(relativistic_with_dim(
                self.theta.expect("checked on load"),
                dim,
            )),
            ModelChoice::File(p) => {
                let m = load_model_file(p).map_err(|e| bad(e.to_string()))?;
                if m.dim() != dim {
                    return Err(bad(format!(
                        "model file {} has dimension {}, need {dim}",
                        p.display(),
                        m.dim()
                    )));
                }
                Ok(m)
            }
        }
    }

    /// Model for the assumption checks.
    pub fn check_model(&self) -> Result<ModelSpec, CliError> {
        match &self.model {
            ModelChoice::File(p) => load_model_file(p).map_err(|e| bad(e.to_string())),
            _ => self.model_at(self.dim),
        }
    }

    pub fn out(&self, name: &str) -> PathBuf {
        self.output_dir.join(name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn test_defaults() {
        let c = RunConfig::load(None, &Overrides::default()).unwrap();
        assert_eq!(c.model, ModelChoice::Classical);
        assert_eq!((c.nx, c.np, c.p_max, c.dim), (64, 128, 8.0, 3));
        assert_eq!(c.scan.seed, DEFAULT_SEED);
        assert_eq!(c.margin, DEFAULT_MARGIN);
    }

    #[test]
    fn test_file_then_flags() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.toml");
        std::fs::write(&p, "model = \"relativistic\"\ntheta = 4.0\n[grid]\nnx = 32\n[time]\nscheme = \"limited\"\n").unwrap();
        let o = Overrides {
            nx: Some(16),
            ..Default::default()
        };
        let c = RunConfig::load(Some(&p), &o).unwrap();
        assert_eq!(c.model, ModelChoice::Relativistic);
        assert_eq!(c.nx, 16);
        assert_eq!(c.scheme, TransportScheme::Limited);
    }

    #[test]
    fn test_rejections() {
        let o = Overrides {
            model: Some("relativistic".into()),
            ..Default::default()
        };
        assert!(matches!(
            RunConfig::load(None, &o),
            Err(CliError::Config(_))
        ));
        let o = Overrides {
            nx: Some(4),
            ..Default::default()
        };
        assert!(RunConfig::load(None, &o).is_err());
        let o = Overrides {
            model: Some("no/such/model.toml".into()),
            ..Default::default()
        };
        assert!(RunConfig::load(None, &o).is_err());
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.toml");
        std::fs::write(&p, "[grid]\nnz = 3\n").unwrap();
        assert!(RunConfig::load(Some(&p), &Overrides::default()).is_err());
    }
}
