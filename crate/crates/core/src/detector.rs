//! Species identification, likelihood-ratio verification and
//! presence-absence aggregation.

use log::warn;
use rayon::prelude::*;
use thiserror::Error;

use crate::audio::{AudioClip, SampleWindow};
use crate::features::{FeatureError, FeatureExtractor, FeatureMatrix};
use crate::gmm::{GmmError, GmmModel};
use crate::scalar::Real;
use crate::segmentation::{segment_audio, Segment, SegmentationError, SegmenterConfig};

#[derive(Debug, Error, PartialEq)]
pub enum DetectorError {
    #[error("model set needs at least 2 models, got {0}")]
    TooFewModels(usize),
    #[error("duplicate species code {0}")]
    DuplicateCode(String),
    #[error("model {code} has dimension {got}, expected {expected}")]
    MixedDimensions {
        code: String,
        expected: usize,
        got: usize,
    },
    #[error("model {0} was trained with a different feature configuration")]
    MixedFingerprints(String),
    #[error("{got} thresholds for {expected} models")]
    ThresholdCount { expected: usize, got: usize },
    #[error("feature fingerprint mismatch: models {models}, features {features}")]
    FingerprintMismatch { models: String, features: String },
    #[error(transparent)]
    Gmm(#[from] GmmError),
    #[error(transparent)]
    Segmentation(#[from] SegmentationError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

/// Ordered species models with their acceptance thresholds. The order
/// defines the positions of presence vectors and report columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeciesModelSet<T> {
    models: Vec<GmmModel<T>>,
    thresholds: Vec<f64>,
}

impl<T: Real> SpeciesModelSet<T> {
    pub fn new(models: Vec<GmmModel<T>>, thresholds: Vec<f64>) -> Result<Self, DetectorError> {
        if models.len() < 2 {
            return Err(DetectorError::TooFewModels(models.len()));
        }
        if thresholds.len() != models.len() {
            return Err(DetectorError::ThresholdCount {
                expected: models.len(),
                got: thresholds.len(),
            });
        }
        let dim = models[0].dim();
        let fingerprint = &models[0].feature_spec_fingerprint;
        for (i, m) in models.iter().enumerate() {
            if m.dim() != dim {
                return Err(DetectorError::MixedDimensions {
                    code: m.species_code.clone(),
                    expected: dim,
                    got: m.dim(),
                });
            }
            if &m.feature_spec_fingerprint != fingerprint {
                return Err(DetectorError::MixedFingerprints(m.species_code.clone()));
            }
            if models[..i].iter().any(|o| o.species_code == m.species_code) {
                return Err(DetectorError::DuplicateCode(m.species_code.clone()));
            }
        }
        Ok(Self { models, thresholds })
    }

    /// Same models, new thresholds.
    pub fn with_thresholds(&self, thresholds: Vec<f64>) -> Result<Self, DetectorError> {
        Self::new(self.models.clone(), thresholds)
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn models(&self) -> &[GmmModel<T>] {
        &self.models
    }

    pub fn codes(&self) -> Vec<String> {
        self.models.iter().map(|m| m.species_code.clone()).collect()
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn dim(&self) -> usize {
        self.models[0].dim()
    }

    pub fn fingerprint(&self) -> &str {
        &self.models[0].feature_spec_fingerprint
    }

    /// Average log-likelihood of `features` under every model.
    pub fn scores(&self, features: &FeatureMatrix<T>) -> Result<Vec<T>, DetectorError> {
        self.models
            .iter()
            .map(|m| m.avg_log_likelihood(features).map_err(DetectorError::from))
            .collect()
    }
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax<T: Real>(scores: &[T]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Median with the even-count convention of averaging the two middle values.
pub fn median<T: Real>(values: &[T]) -> T {
    assert!(!values.is_empty(), "median of empty set");
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / T::of(2.0)
    }
}

pub fn classify_segment<T: Real>(
    set: &SpeciesModelSet<T>,
    features: &FeatureMatrix<T>,
) -> Result<(usize, Vec<T>), DetectorError> {
    let scores = set.scores(features)?;
    Ok((argmax(&scores), scores))
}

/// `Λ = score[hyp] - median(score[k] for k ≠ hyp)`.
///
/// Scores are log-likelihoods; the median is order-based, so taking it in
/// the log domain equals the log of the median likelihood.
pub fn likelihood_ratio<T: Real>(per_model_scores: &[T], hyp_index: usize) -> T {
    assert!(
        per_model_scores.len() >= 2,
        "likelihood ratio needs an alternative model"
    );
    let others: Vec<T> = per_model_scores
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != hyp_index)
        .map(|(_, &s)| s)
        .collect();
    per_model_scores[hyp_index] - median(&others)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionEvent<T> {
    pub segment: Option<Segment>,
    pub species_index: usize,
    pub species_code: String,
    /// Likelihood-ratio score Λ.
    pub score: T,
    pub accepted: bool,
    pub per_model_scores: Vec<T>,
}

impl<T: Real> DetectionEvent<T> {
    /// Λ of every species hypothesis for this segment, not just the winner.
    pub fn ratios(&self) -> Vec<T> {
        (0..self.per_model_scores.len())
            .map(|k| likelihood_ratio(&self.per_model_scores, k))
            .collect()
    }
}

/// Scores from which a detection decision is made.
pub fn decide<T: Real>(
    set: &SpeciesModelSet<T>,
    per_model_scores: Vec<T>,
    segment: Option<Segment>,
) -> DetectionEvent<T> {
    let species_index = argmax(&per_model_scores);
    let score = likelihood_ratio(&per_model_scores, species_index);
    DetectionEvent {
        segment,
        species_index,
        species_code: set.models[species_index].species_code.clone(),
        score,
        accepted: score.as_f64() >= set.thresholds[species_index],
        per_model_scores,
    }
}

pub fn detect<T: Real>(
    set: &SpeciesModelSet<T>,
    features: &FeatureMatrix<T>,
) -> Result<DetectionEvent<T>, DetectorError> {
    let scores = set.scores(features)?;
    Ok(decide(set, scores, features.segment))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PresenceVector {
    pub window: SampleWindow,
    pub bits: Vec<bool>,
    pub detection_counts: Vec<usize>,
}

impl PresenceVector {
    pub fn from_events<T: Real>(
        window: SampleWindow,
        species: usize,
        events: &[DetectionEvent<T>],
    ) -> Self {
        let mut detection_counts = vec![0; species];
        for e in events.iter().filter(|e| e.accepted) {
            detection_counts[e.species_index] += 1;
        }
        let bits = detection_counts.iter().map(|&c| c >= 1).collect();
        Self {
            window,
            bits,
            detection_counts,
        }
    }

    /// Species whose presence rests on exactly one accepted segment.
    pub fn single_detections(&self) -> Vec<usize> {
        self.detection_counts
            .iter()
            .enumerate()
            .filter(|&(_, &c)| c == 1)
            .map(|(k, _)| k)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowScan<T> {
    pub presence: PresenceVector,
    /// Ordered by segment start.
    pub events: Vec<DetectionEvent<T>>,
    /// Segments shorter than one feature frame.
    pub skipped_segments: usize,
}

/// Segments a sample window, scores every segment and aggregates the
/// accepted detections. Segments are scored on the rayon pool the caller
/// runs in; results keep segment order.
pub fn scan_window<T: Real>(
    clip: &AudioClip<T>,
    window: &SampleWindow,
    set: &SpeciesModelSet<T>,
    seg_cfg: &SegmenterConfig,
    extractor: &FeatureExtractor<T>,
) -> Result<WindowScan<T>, DetectorError> {
    let fingerprint = extractor.spec().fingerprint();
    if fingerprint != set.fingerprint() {
        return Err(DetectorError::FingerprintMismatch {
            models: set.fingerprint().to_string(),
            features: fingerprint,
        });
    }
    let segments = segment_audio(clip, window, seg_cfg)?;
    let results: Vec<Option<DetectionEvent<T>>> = segments
        .par_iter()
        .map(|seg| match extractor.extract_segment(clip, seg) {
            Ok(features) => detect(set, &features).map(Some),
            Err(FeatureError::SegmentTooShort { .. }) => Ok(None),
            Err(e) => Err(e.into()),
        })
        .collect::<Result<_, DetectorError>>()?;
    let skipped_segments = results.iter().filter(|r| r.is_none()).count();
    if skipped_segments > 0 {
        warn!(
            "{}: skipped {skipped_segments} segment(s) shorter than one feature frame",
            clip.source_path()
        );
    }
    let events: Vec<DetectionEvent<T>> = results.into_iter().flatten().collect();
    let presence = PresenceVector::from_events(window.clone(), set.len(), &events);
    Ok(WindowScan {
        presence,
        events,
        skipped_segments,
    })
}
