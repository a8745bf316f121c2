use std::path::Path;

use brats_core::{LabelCoding, SpecialCasePolicy};
use serde::Deserialize;

use crate::error::{Category, CliError, CliResult};

pub const CONFIG_ENV: &str = "BRATS_EVAL_CONFIG";

/// Optional JSON configuration; command line flags take precedence.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub coding: LabelCoding,
    pub policy: SpecialCasePolicy,
    /// Probability threshold for label reconstruction.
    pub probability_threshold: f64,
    /// ET volume below which enhancing tumor is relabeled as necrosis.
    pub et_threshold_mm3: Option<f64>,
    pub threshold_candidates: Option<Vec<f64>>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            coding: LabelCoding::default(),
            policy: SpecialCasePolicy::default(),
            probability_threshold: 0.5,
            et_threshold_mm3: None,
            threshold_candidates: None,
        }
    }
}

impl Config {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let config: Config = serde_json::from_str(&text)
            .map_err(|e| CliError::new(Category::Config, format!("{}: {e}", path.display())))?;
        config
            .coding
            .validate()
            .map_err(|e| CliError::new(Category::Config, format!("{}: {e}", path.display())))?;
        Ok(config)
    }
}
