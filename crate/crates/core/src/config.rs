//! Tool configuration, read from and written to TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureSpec;
use crate::gmm::TrainingConfig;
use crate::segmentation::SegmenterConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: toml::de::Error,
    },
    #[error("serialising config: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionConfig {
    /// Per-species Λ thresholds in species order; empty means all zero.
    pub thresholds: Vec<f64>,
    /// False-positive ceiling used when choosing thresholds from ROC curves.
    pub max_fpr: f64,
    /// Window length for recordings without cue points, in seconds.
    pub default_window_seconds: f64,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            thresholds: Vec::new(),
            max_fpr: 0.05,
            default_window_seconds: 600.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub budget_seconds: f64,
    pub folds: usize,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            budget_seconds: 12.0,
            folds: 10,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub model_store: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToolConfig {
    /// Species order for every vector and report column.
    pub species: Vec<String>,
    pub segmenter: SegmenterConfig,
    pub features: FeatureSpec,
    pub training: TrainingConfig,
    pub detection: DetectionConfig,
    pub evaluation: EvaluationConfig,
    pub paths: PathsConfig,
}

impl ToolConfig {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string(self)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let cfg = Self::from_toml(&text).map_err(|source| ConfigError::Parse {
            path: path.display().to_string(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if !self.detection.thresholds.is_empty()
            && !self.species.is_empty()
            && self.detection.thresholds.len() != self.species.len()
        {
            return bad(format!(
                "{} thresholds for {} species",
                self.detection.thresholds.len(),
                self.species.len()
            ));
        }
        if !(0.0..=1.0).contains(&self.detection.max_fpr) {
            return bad("detection.max_fpr must lie in [0, 1]".into());
        }
        if !(self.detection.default_window_seconds > 0.0) {
            return bad("detection.default_window_seconds must be positive".into());
        }
        if self.evaluation.folds == 0 || !(self.evaluation.budget_seconds > 0.0) {
            return bad("evaluation needs folds >= 1 and a positive budget".into());
        }
        Ok(())
    }

    /// Thresholds for `n` species, zero-filled when none are configured.
    pub fn thresholds_for(&self, n: usize) -> Vec<f64> {
        if self.detection.thresholds.is_empty() {
            vec![0.0; n]
        } else {
            self.detection.thresholds.clone()
        }
    }
}
