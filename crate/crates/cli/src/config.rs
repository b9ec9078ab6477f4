//! JSON configuration file. Every key is optional; a flag given on the
//! command line wins over the same key in the file.

use std::path::{Path, PathBuf};

use localreg::simulate::{HurstSpec, NoiseSpec};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub setting: Option<String>,
    pub hurst: Option<HurstSpec>,
    pub n0: Option<usize>,
    pub n1: Option<usize>,
    pub mu: Option<f64>,
    pub sampling: Option<String>,
    pub sigma2: Option<NoiseSpec>,
    pub grid_n: Option<usize>,
    pub seed: Option<u64>,
    pub t0: Option<Vec<f64>>,
    pub max_degree: Option<usize>,
    pub known_sigma2: Option<f64>,
    pub sigma2_mode: Option<String>,
    pub k0_rule: Option<String>,
    pub degree: Option<usize>,
    pub kernel: Option<String>,
    pub no_trim: Option<bool>,
    pub grid_size: Option<usize>,
    pub replications: Option<usize>,
    pub with_cv: Option<bool>,
    pub learning: Option<PathBuf>,
    pub online: Option<PathBuf>,
    pub estimate: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config `{}`: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config `{}`: {e}", path.display())))
    }
}
