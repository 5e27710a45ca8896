//! JSON config file with flat keys named after the command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub out: Option<PathBuf>,
    pub n: Option<usize>,
    pub n_list: Option<Vec<usize>>,
    pub m: Option<usize>,
    pub k: Option<u32>,
    pub schedule: Option<Vec<usize>>,
    pub phase: Option<String>,
    pub horizon: Option<u64>,
    pub overlay: Option<PathBuf>,
    pub ops: Option<usize>,
    pub script: Option<PathBuf>,
    pub q: Option<f64>,
    pub psi: Option<f64>,
    pub epsilon: Option<f64>,
    pub t: Option<usize>,
    pub t_values: Option<Vec<usize>>,
    pub profile: Option<String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_owned(), source })?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}
