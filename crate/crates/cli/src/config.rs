use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::io;

/// Defaults read from `--config`; command-line flags take precedence.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub level: Option<f64>,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    pub grid: Option<usize>,
    pub depth: Option<usize>,
    pub steps: Option<usize>,
    pub replicas: Option<usize>,
    pub rounds: Option<usize>,
    pub gap: Option<String>,
    pub cantor_depth: Option<u32>,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = io::read(path)?;
        serde_json::from_str(&text).map_err(|e| {
            dcs::Error::Parse { line: e.line(), msg: format!("{}: {e}", path.display()) }.into()
        })
    }
}
