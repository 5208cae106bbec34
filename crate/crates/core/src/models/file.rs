//! Model files.
//!
//! ```toml
//! name = "isotropic"
//! dim = 2
//! theta = 1.5            # optional; substituted wherever `theta` appears
//!
//! [metric]               # g_ij for i <= j; omitted off-diagonals are 0
//! g11 = "1 + p1^2 + p2^2"
//! g22 = "1 + p1^2 + p2^2"
//!
//! [velocity]
//! v1 = "p1"
//! v2 = "p2"
//!
//! [energy]
//! E = "theta*(p1^2 + p2^2)/2"
//! ```

use super::{ModelBuildError, ModelExpressions, ModelKind, ModelSpec};
use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("cannot read model file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed model file: {0}")]
    Format(String),
    #[error("unknown key `{key}` in [{section}]")]
    UnknownKey { section: &'static str, key: String },
    #[error("both g{i}{j} and g{j}{i} are given")]
    DuplicateEntry { i: usize, j: usize },
    #[error(transparent)]
    Build(#[from] ModelBuildError),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    name: Option<String>,
    dim: usize,
    theta: Option<f64>,
    metric: BTreeMap<String, String>,
    velocity: BTreeMap<String, String>,
    energy: RawEnergy,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnergy {
    #[serde(rename = "E")]
    e: String,
}

/// Parse a `g<i><j>` key (single-digit indices, one-based).
fn metric_index(key: &str, dim: usize) -> Option<(usize, usize)> {
    let rest = key.strip_prefix('g')?;
    let digits: Vec<usize> = rest
        .chars()
        .map(|c| c.to_digit(10).map(|d| d as usize))
        .collect::<Option<_>>()?;
    match digits.as_slice() {
        [i, j] if (1..=dim).contains(i) && (1..=dim).contains(j) => Some((i - 1, j - 1)),
        _ => None,
    }
}

pub fn parse_model_file(text: &str) -> Result<ModelSpec, ModelFileError> {
    let raw: RawModel = toml::from_str(text).map_err(|e| ModelFileError::Format(e.to_string()))?;
    let m = raw.dim;
    let mut entries: BTreeMap<(usize, usize), String> = BTreeMap::new();
    for (key, src) in &raw.metric {
        let (i, j) = metric_index(key, m).ok_or_else(|| ModelFileError::UnknownKey {
            section: "metric",
            key: key.clone(),
        })?;
        let slot = (i.min(j), i.max(j));
        if entries.insert(slot, src.clone()).is_some() {
            return Err(ModelFileError::DuplicateEntry {
                i: slot.0 + 1,
                j: slot.1 + 1,
            });
        }
    }
    let mut velocity = vec![None; m];
    for (key, src) in &raw.velocity {
        let idx = key
            .strip_prefix('v')
            .and_then(|d| d.parse::<usize>().ok())
            .filter(|i| (1..=m).contains(i))
            .ok_or_else(|| ModelFileError::UnknownKey {
                section: "velocity",
                key: key.clone(),
            })?;
        velocity[idx - 1] = Some(src.clone());
    }
    let found = velocity.iter().filter(|v| v.is_some()).count();
    if found != m {
        return Err(ModelBuildError::VelocityCount { expected: m, found }.into());
    }
    let def = ModelExpressions {
        name: raw.name.unwrap_or_else(|| "user".to_string()),
        dim: m,
        metric: entries.into_iter().map(|((i, j), s)| (i, j, s)).collect(),
        velocity: velocity.into_iter().map(|v| v.unwrap()).collect(),
        energy: raw.energy.e,
        theta: raw.theta,
    };
    Ok(ModelSpec::from_expressions(&def, ModelKind::User)?)
}

pub fn load_model_file(path: &Path) -> Result<ModelSpec, ModelFileError> {
    let text = std::fs::read_to_string(path).map_err(|source| ModelFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_model_file(&text)
}
