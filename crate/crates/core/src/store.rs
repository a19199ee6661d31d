//! On-disk model store: one JSON document per species plus a manifest.
//!
//! ```text
//! models/
//!   manifest.json   species order, feature settings and their fingerprint
//!   f01.json        weights, means, variances, training metadata
//!   f02.json
//! ```
//!
//! Numbers are written in shortest round-trip form, so `f64` parameters
//! reload bit-exactly.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureSpec;
use crate::gmm::{GmmError, GmmModel, TrainingStats};
use crate::scalar::Real;

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{0}")]
    Format(String),
    #[error("{path}: {source}")]
    Model {
        path: String,
        #[source]
        source: GmmError,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub format_version: u32,
    pub species_code: String,
    pub num_components: usize,
    pub dim: usize,
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
    pub feature_spec_fingerprint: String,
    pub training_seconds: f64,
    #[serde(default)]
    pub training: Option<TrainingStats>,
}

impl ModelDocument {
    pub fn from_model<T: Real>(model: &GmmModel<T>) -> Self {
        let rows = |flat: &[T]| -> Vec<Vec<f64>> {
            flat.chunks_exact(model.dim())
                .map(|r| r.iter().map(|v| v.as_f64()).collect())
                .collect()
        };
        Self {
            format_version: FORMAT_VERSION,
            species_code: model.species_code.clone(),
            num_components: model.num_components(),
            dim: model.dim(),
            weights: model.weights().iter().map(|v| v.as_f64()).collect(),
            means: rows(model.means()),
            variances: rows(model.variances()),
            feature_spec_fingerprint: model.feature_spec_fingerprint.clone(),
            training_seconds: model.training_seconds,
            training: model.stats.clone(),
        }
    }

    pub fn to_model<T: Real>(&self) -> Result<GmmModel<T>, StoreError> {
        if self.format_version != FORMAT_VERSION {
            return Err(StoreError::Format(format!(
                "model {} has format version {}, expected {FORMAT_VERSION}",
                self.species_code, self.format_version
            )));
        }
        let shape_ok = self.weights.len() == self.num_components
            && self.means.len() == self.num_components
            && self.variances.len() == self.num_components
            && self
                .means
                .iter()
                .chain(&self.variances)
                .all(|r| r.len() == self.dim);
        if !shape_ok {
            return Err(StoreError::Format(format!(
                "model {} does not match its declared {}×{} shape",
                self.species_code, self.num_components, self.dim
            )));
        }
        let flat = |rows: &[Vec<f64>]| rows.iter().flatten().map(|&v| T::of(v)).collect();
        let mut model = GmmModel::new(
            self.weights.iter().map(|&v| T::of(v)).collect(),
            flat(&self.means),
            flat(&self.variances),
            self.dim,
        )
        .map_err(|source| StoreError::Model {
            path: self.species_code.clone(),
            source,
        })?;
        model.species_code = self.species_code.clone();
        model.feature_spec_fingerprint = self.feature_spec_fingerprint.clone();
        model.training_seconds = self.training_seconds;
        model.stats = self.training.clone();
        Ok(model)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: u32,
    /// Species order of every presence vector and report.
    pub species: Vec<String>,
    pub feature_spec_fingerprint: String,
    pub feature_spec: FeatureSpec,
    pub dim: usize,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn json_err(path: &Path) -> impl FnOnce(serde_json::Error) -> StoreError + '_ {
    move |source| StoreError::Json {
        path: path.display().to_string(),
        source,
    }
}

fn model_path(dir: &Path, code: &str) -> PathBuf {
    dir.join(format!("{code}.json"))
}

/// Writes every model and the manifest. Models must share `spec`'s fingerprint.
pub fn save_model_store<T: Real>(
    dir: &Path,
    models: &[GmmModel<T>],
    spec: &FeatureSpec,
) -> Result<(), StoreError> {
    let fingerprint = spec.fingerprint();
    if let Some(m) = models
        .iter()
        .find(|m| m.feature_spec_fingerprint != fingerprint)
    {
        return Err(StoreError::Format(format!(
            "model {} fingerprint {} differs from feature settings {fingerprint}",
            m.species_code, m.feature_spec_fingerprint
        )));
    }
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for m in models {
        let path = model_path(dir, &m.species_code);
        let text =
            serde_json::to_string_pretty(&ModelDocument::from_model(m)).map_err(json_err(&path))?;
        fs::write(&path, text + "\n").map_err(io_err(&path))?;
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        species: models.iter().map(|m| m.species_code.clone()).collect(),
        feature_spec_fingerprint: fingerprint,
        feature_spec: spec.clone(),
        dim: models.first().map_or(spec.num_coeffs, GmmModel::dim),
    };
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).map_err(json_err(&path))?;
    fs::write(&path, text + "\n").map_err(io_err(&path))
}

pub fn load_manifest(dir: &Path) -> Result<Manifest, StoreError> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(json_err(&path))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(StoreError::Format(format!(
            "manifest format version {} (expected {FORMAT_VERSION})",
            manifest.format_version
        )));
    }
    if manifest.feature_spec.fingerprint() != manifest.feature_spec_fingerprint {
        return Err(StoreError::Format(
            "manifest fingerprint does not match its feature settings".into(),
        ));
    }
    Ok(manifest)
}

/// Loads models in manifest order. Never writes to `dir`.
pub fn load_model_store<T: Real>(dir: &Path) -> Result<(Manifest, Vec<GmmModel<T>>), StoreError> {
    let manifest = load_manifest(dir)?;
    let mut models = Vec::with_capacity(manifest.species.len());
    for code in &manifest.species {
        let path = model_path(dir, code);
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let doc: ModelDocument = serde_json::from_str(&text).map_err(json_err(&path))?;
        if doc.species_code != *code {
            return Err(StoreError::Format(format!(
                "{} holds species {}, manifest expects {code}",
                path.display(),
                doc.species_code
            )));
        }
        if doc.feature_spec_fingerprint != manifest.feature_spec_fingerprint {
            return Err(StoreError::Format(format!(
                "{} fingerprint {} differs from manifest {}",
                path.display(),
                doc.feature_spec_fingerprint,
                manifest.feature_spec_fingerprint
            )));
        }
        models.push(doc.to_model()?);
    }
    Ok((manifest, models))
}
