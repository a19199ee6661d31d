//! Frog-call detection and presence-absence estimation for long field
//! recordings.
//!
//! The pipeline: band-pass short-time-energy segmentation of candidate
//! calls, filterbank cepstral features on the unfiltered audio, one
//! diagonal-covariance GMM per species, maximum-likelihood classification
//! verified by a likelihood ratio against the median competing model, and
//! per-class thresholds chosen from one-vs-all ROC curves.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the `*F64`/`*F32`
//! aliases below name the concrete instantiations.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audio;
pub mod config;
pub mod detector;
pub mod evaluation;
pub mod features;
pub mod filter;
pub mod fixtures;
pub mod gmm;
pub mod report;
pub mod scalar;
pub mod segmentation;
pub mod store;

pub use scalar::Real;

pub type AudioClipF64 = audio::AudioClip<f64>;
pub type AudioClipF32 = audio::AudioClip<f32>;
pub type FeatureMatrixF64 = features::FeatureMatrix<f64>;
pub type FeatureMatrixF32 = features::FeatureMatrix<f32>;
pub type GmmModelF64 = gmm::GmmModel<f64>;
pub type GmmModelF32 = gmm::GmmModel<f32>;
pub type SpeciesModelSetF64 = detector::SpeciesModelSet<f64>;
pub type SpeciesModelSetF32 = detector::SpeciesModelSet<f32>;
