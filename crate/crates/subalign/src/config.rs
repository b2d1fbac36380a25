//! Key-value run configuration. Keys mirror the command-line flags; flags win.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use subalign_core::linkops::SymmetrizationMethod;

use crate::formats::CorpusMarkup;
use crate::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out_dir: Option<PathBuf>,

    pub source: Option<PathBuf>,
    pub target: Option<PathBuf>,
    pub eval_source: Option<PathBuf>,
    pub eval_target: Option<PathBuf>,
    pub gold: Option<PathBuf>,
    pub markup: Option<CorpusMarkup>,
    pub zero_based: Option<bool>,
    pub subsample: Option<usize>,

    pub source_merges: Option<PathBuf>,
    pub target_merges: Option<PathBuf>,
    pub max_merges: Option<u32>,

    pub model1_iterations: Option<u32>,
    pub model2_iterations: Option<u32>,
    pub null_probability: Option<f64>,
    pub diagonal_tension: Option<f64>,
    pub tension_updates: Option<u32>,
    pub smoothing_alpha: Option<f64>,
    pub aligner_command: Option<String>,
    pub method: Option<SymmetrizationMethod>,

    pub budget: Option<usize>,
    pub random_init: Option<usize>,
    pub early_stop: Option<usize>,
    pub max_iterations: Option<usize>,
    pub lambda_min: Option<f64>,
    pub lambda_max: Option<f64>,
    pub source_min: Option<u32>,
    pub source_max: Option<u32>,
    pub target_min: Option<u32>,
    pub target_max: Option<u32>,
    pub exclude_word: Option<bool>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Usage(format!("config: {e}")))
    }

    /// Reads a config file. Relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text).map_err(|e| Error::Usage(format!("{}: {e}", path.display())))?;
        if let Some(base) = path.parent() {
            for p in [
                &mut cfg.out_dir,
                &mut cfg.source,
                &mut cfg.target,
                &mut cfg.eval_source,
                &mut cfg.eval_target,
                &mut cfg.gold,
                &mut cfg.source_merges,
                &mut cfg.target_merges,
            ]
            .into_iter()
            .flatten()
            {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(cfg)
    }
}
