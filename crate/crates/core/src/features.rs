//! Filterbank cepstral features.
//!
//! Per frame: pre-emphasis, Hamming window, power spectrum, triangular
//! filterbank energies, natural log (floored), orthonormal DCT-II, first
//! `num_coeffs` coefficients (coefficient 0 included).
//!
//! Two filterbank layouts are provided. `ModifiedLinear` spaces the filter
//! edges uniformly in Hz, which gives the mid and high frequencies where frog
//! calls live the same resolution as the low end; `Mel` is the usual
//! speech-oriented baseline.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::audio::AudioClip;
use crate::filter::hamming;
use crate::scalar::Real;
use crate::segmentation::Segment;

/// Floor applied to filter energies before the log.
pub const LOG_FLOOR: f64 = 1e-12;

/// Frequency configuration is in Hz and clips are never resampled.
pub const SAMPLE_RATE_POLICY: &str = "hz-domain-no-resampling";

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("segment of {len} samples is shorter than one {frame}-sample frame")]
    SegmentTooShort { len: usize, frame: usize },
    #[error("degenerate filterbank: {0}")]
    DegenerateBand(String),
    #[error("invalid feature config: {0}")]
    InvalidConfig(String),
    #[error("segment [{start}, {end}) outside clip of {len} samples")]
    SegmentOutOfRange {
        start: usize,
        end: usize,
        len: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrameConfig {
    /// Frame length in seconds.
    pub frame_length: f64,
    pub overlap_fraction: f64,
    pub preemphasis_coeff: f64,
    /// FFT length; `None` picks the next power of two above the frame.
    pub fft_size: Option<usize>,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self {
            frame_length: 0.020,
            overlap_fraction: 0.75,
            preemphasis_coeff: 0.99,
            fft_size: None,
        }
    }
}

impl FrameConfig {
    pub fn frame_samples(&self, sample_rate: u32) -> usize {
        ((self.frame_length * sample_rate as f64).round() as usize).max(1)
    }

    pub fn hop_samples(&self, sample_rate: u32) -> usize {
        ((self.frame_samples(sample_rate) as f64 * (1.0 - self.overlap_fraction)).round() as usize)
            .max(1)
    }

    pub fn fft_len(&self, sample_rate: u32) -> usize {
        self.fft_size
            .unwrap_or_else(|| self.frame_samples(sample_rate).next_power_of_two())
    }

    pub fn validate(&self, sample_rate: u32) -> Result<(), FeatureError> {
        let bad = |m: String| Err(FeatureError::InvalidConfig(m));
        if !(self.frame_length > 0.0) {
            return bad("frame_length must be positive".into());
        }
        if !(0.0..1.0).contains(&self.overlap_fraction) {
            return bad("overlap_fraction must lie in [0, 1)".into());
        }
        let frame = self.frame_samples(sample_rate);
        let fft = self.fft_len(sample_rate);
        if !fft.is_power_of_two() || fft < frame {
            return bad(format!(
                "fft_size {fft} must be a power of two >= frame ({frame})"
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterbankLayout {
    ModifiedLinear,
    Mel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterNormalization {
    PeakUnity,
    UnitArea,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterbankSpec {
    pub layout: FilterbankLayout,
    pub num_filters: usize,
    pub f_low: f64,
    pub f_high: f64,
    pub normalization: FilterNormalization,
}

impl Default for FilterbankSpec {
    fn default() -> Self {
        Self {
            layout: FilterbankLayout::ModifiedLinear,
            num_filters: 40,
            f_low: 200.0,
            f_high: 8000.0,
            normalization: FilterNormalization::PeakUnity,
        }
    }
}

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

impl FilterbankSpec {
    /// The `num_filters + 2` edge frequencies in Hz.
    pub fn edges(&self) -> Vec<f64> {
        let n = self.num_filters + 1;
        match self.layout {
            FilterbankLayout::ModifiedLinear => (0..=n)
                .map(|i| self.f_low + (self.f_high - self.f_low) * i as f64 / n as f64)
                .collect(),
            FilterbankLayout::Mel => {
                let (lo, hi) = (hz_to_mel(self.f_low), hz_to_mel(self.f_high));
                (0..=n)
                    .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / n as f64))
                    .collect()
            }
        }
    }

    /// Peak frequencies of the filters.
    pub fn centers(&self) -> Vec<f64> {
        let e = self.edges();
        e[1..e.len() - 1].to_vec()
    }
}

/// Everything that determines the feature vectors of a segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSpec {
    pub frames: FrameConfig,
    pub filterbank: FilterbankSpec,
    pub num_coeffs: usize,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        Self {
            frames: FrameConfig::default(),
            filterbank: FilterbankSpec::default(),
            num_coeffs: 20,
        }
    }
}

impl FeatureSpec {
    pub fn with_layout(mut self, layout: FilterbankLayout) -> Self {
        self.filterbank.layout = layout;
        self
    }

    /// Stable hex digest of the feature settings. Models trained under one
    /// fingerprint are only scored against features with the same one.
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::json!({
            "frames": self.frames,
            "filterbank": self.filterbank,
            "num_coeffs": self.num_coeffs,
            "sample_rate_policy": SAMPLE_RATE_POLICY,
        });
        let digest = Sha256::digest(canonical.to_string().as_bytes());
        hex::encode(&digest[..16])
    }
}

/// `T` frames by `D` coefficients, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<T> {
    rows: usize,
    cols: usize,
    values: Vec<T>,
    pub segment: Option<Segment>,
}

impl<T: Real> FeatureMatrix<T> {
    pub fn new(rows: usize, cols: usize, values: Vec<T>) -> Self {
        assert_eq!(values.len(), rows * cols, "matrix shape mismatch");
        Self {
            rows,
            cols,
            values,
            segment: None,
        }
    }

    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.as_ref().len(), cols, "ragged rows");
            values.extend_from_slice(r.as_ref());
        }
        Self::new(rows.len(), cols, values)
    }

    /// Concatenates matrices of equal width.
    pub fn stack<'a>(parts: impl IntoIterator<Item = &'a FeatureMatrix<T>>) -> Self {
        let mut rows = 0;
        let mut cols = None;
        let mut values = Vec::new();
        for p in parts {
            let c = *cols.get_or_insert(p.cols);
            assert_eq!(c, p.cols, "cannot stack matrices of different width");
            rows += p.rows;
            values.extend_from_slice(&p.values);
        }
        Self::new(rows, cols.unwrap_or(0), values)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[T]> {
        self.values.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// `y[0] = x[0]`, `y[n] = x[n] - coeff·x[n-1]`.
pub fn pre_emphasize<T: Real>(samples: &[T], coeff: f64) -> Vec<T> {
    let c = T::of(coeff);
    let mut out = Vec::with_capacity(samples.len());
    let mut prev = None;
    for &x in samples {
        out.push(match prev {
            None => x,
            Some(p) => x - c * p,
        });
        prev = Some(x);
    }
    out
}

/// Start offsets of the full frames that fit in `len` samples.
pub fn frame_starts(len: usize, frame: usize, hop: usize) -> Vec<usize> {
    if len < frame {
        return Vec::new();
    }
    (0..=(len - frame) / hop).map(|i| i * hop).collect()
}

/// Hamming-windowed overlapping frames. Frames that would run past the end
/// are dropped.
pub fn frame_signal<T: Real>(
    samples: &[T],
    cfg: &FrameConfig,
    sample_rate: u32,
) -> Result<Vec<Vec<T>>, FeatureError> {
    let frame = cfg.frame_samples(sample_rate);
    let hop = cfg.hop_samples(sample_rate);
    if samples.len() < frame {
        return Err(FeatureError::SegmentTooShort {
            len: samples.len(),
            frame,
        });
    }
    let window: Vec<T> = hamming(frame).into_iter().map(T::of).collect();
    Ok(frame_starts(samples.len(), frame, hop)
        .into_iter()
        .map(|s| {
            samples[s..s + frame]
                .iter()
                .zip(&window)
                .map(|(&x, &w)| x * w)
                .collect()
        })
        .collect())
}

/// Squared magnitude of bins `0..=fft_size/2` of the zero-padded frame.
pub fn power_spectrum<T: Real>(frame: &[T], fft_size: usize) -> Vec<T> {
    assert!(fft_size >= frame.len(), "fft_size shorter than frame");
    let fft = FftPlanner::<T>::new().plan_fft_forward(fft_size);
    let mut buf = vec![Complex::new(T::zero(), T::zero()); fft_size];
    power_spectrum_with(fft.as_ref(), frame, &mut buf)
}

fn power_spectrum_with<T: Real>(fft: &dyn Fft<T>, frame: &[T], buf: &mut [Complex<T>]) -> Vec<T> {
    for b in buf.iter_mut() {
        *b = Complex::new(T::zero(), T::zero());
    }
    for (b, &x) in buf.iter_mut().zip(frame) {
        b.re = x;
    }
    fft.process(buf);
    buf[..buf.len() / 2 + 1]
        .iter()
        .map(|c| c.norm_sqr())
        .collect()
}

/// Dense `num_filters × (fft_size/2 + 1)` triangular weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Filterbank<T> {
    weights: Vec<Vec<T>>,
    /// Non-zero bin range of each filter.
    support: Vec<(usize, usize)>,
    centers: Vec<f64>,
}

impl<T: Real> Filterbank<T> {
    pub fn num_filters(&self) -> usize {
        self.weights.len()
    }

    pub fn num_bins(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.weights[i]
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    /// Filter energies of a power spectrum.
    pub fn apply(&self, power: &[T]) -> Vec<T> {
        self.weights
            .iter()
            .zip(&self.support)
            .map(|(w, &(lo, hi))| (lo..hi).map(|k| w[k] * power[k]).sum())
            .collect()
    }
}

pub fn build_filterbank<T: Real>(
    spec: &FilterbankSpec,
    fft_size: usize,
    sample_rate: u32,
) -> Result<Filterbank<T>, FeatureError> {
    let nyquist = sample_rate as f64 / 2.0;
    if spec.num_filters < 2 {
        return Err(FeatureError::InvalidConfig(
            "need at least 2 filters".into(),
        ));
    }
    if !(spec.f_low >= 0.0 && spec.f_low < spec.f_high && spec.f_high <= nyquist) {
        return Err(FeatureError::InvalidConfig(format!(
            "filterbank band [{}, {}] Hz invalid for Nyquist {nyquist} Hz",
            spec.f_low, spec.f_high
        )));
    }
    let bins = fft_size / 2 + 1;
    if bins < spec.num_filters {
        return Err(FeatureError::DegenerateBand(format!(
            "{bins} FFT bins for {} filters",
            spec.num_filters
        )));
    }
    let edges = spec.edges();
    let bin_hz = sample_rate as f64 / fft_size as f64;
    let mut weights = Vec::with_capacity(spec.num_filters);
    let mut support = Vec::with_capacity(spec.num_filters);
    for i in 0..spec.num_filters {
        let (lo, mid, hi) = (edges[i], edges[i + 1], edges[i + 2]);
        let mut row: Vec<f64> = (0..bins)
            .map(|k| {
                let f = k as f64 * bin_hz;
                if f <= lo || f >= hi {
                    0.0
                } else if f <= mid {
                    (f - lo) / (mid - lo)
                } else {
                    (hi - f) / (hi - mid)
                }
            })
            .collect();
        let norm = match spec.normalization {
            FilterNormalization::PeakUnity => row.iter().copied().fold(0.0, f64::max),
            FilterNormalization::UnitArea => row.iter().sum(),
        };
        if norm <= 0.0 {
            return Err(FeatureError::DegenerateBand(format!(
                "filter {i} ({lo:.1}-{hi:.1} Hz) covers no FFT bin of width {bin_hz:.2} Hz"
            )));
        }
        row.iter_mut().for_each(|w| *w /= norm);
        let first = row.iter().position(|&w| w > 0.0).unwrap_or(0);
        let last = row.iter().rposition(|&w| w > 0.0).map_or(0, |p| p + 1);
        support.push((first, last));
        weights.push(row.into_iter().map(T::of).collect());
    }
    Ok(Filterbank {
        weights,
        support,
        centers: spec.centers(),
    })
}

/// Orthonormal DCT-II truncated to the first `num_coeffs` outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Dct<T> {
    basis: Vec<Vec<T>>,
    input_len: usize,
}

impl<T: Real> Dct<T> {
    pub fn new(input_len: usize, num_coeffs: usize) -> Self {
        let n = input_len as f64;
        let basis = (0..num_coeffs)
            .map(|k| {
                let scale = if k == 0 {
                    (1.0 / n).sqrt()
                } else {
                    (2.0 / n).sqrt()
                };
                (0..input_len)
                    .map(|i| {
                        let arg =
                            std::f64::consts::PI * k as f64 * (2.0 * i as f64 + 1.0) / (2.0 * n);
                        T::of(scale * arg.cos())
                    })
                    .collect()
            })
            .collect();
        Self { basis, input_len }
    }

    pub fn forward(&self, x: &[T]) -> Vec<T> {
        self.basis
            .iter()
            .map(|b| b.iter().zip(x).map(|(&w, &v)| w * v).sum())
            .collect()
    }

    /// Transpose of the (truncated) forward transform; exact inverse when
    /// all coefficients are kept.
    pub fn inverse(&self, coeffs: &[T]) -> Vec<T> {
        (0..self.input_len)
            .map(|i| self.basis.iter().zip(coeffs).map(|(b, &c)| b[i] * c).sum())
            .collect()
    }
}

/// Precomputed feature pipeline for one sample rate.
#[derive(Clone)]
pub struct FeatureExtractor<T: Real> {
    spec: FeatureSpec,
    sample_rate: u32,
    frame_len: usize,
    hop: usize,
    window: Vec<T>,
    fft: Arc<dyn Fft<T>>,
    filterbank: Filterbank<T>,
    dct: Dct<T>,
}

impl<T: Real> std::fmt::Debug for FeatureExtractor<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FeatureExtractor")
            .field("spec", &self.spec)
            .field("sample_rate", &self.sample_rate)
            .finish()
    }
}

impl<T: Real> FeatureExtractor<T> {
    pub fn new(spec: &FeatureSpec, sample_rate: u32) -> Result<Self, FeatureError> {
        spec.frames.validate(sample_rate)?;
        if spec.num_coeffs == 0 || spec.num_coeffs > spec.filterbank.num_filters {
            return Err(FeatureError::InvalidConfig(format!(
                "num_coeffs {} must be in 1..={}",
                spec.num_coeffs, spec.filterbank.num_filters
            )));
        }
        let fft_len = spec.frames.fft_len(sample_rate);
        let frame_len = spec.frames.frame_samples(sample_rate);
        Ok(Self {
            spec: spec.clone(),
            sample_rate,
            frame_len,
            hop: spec.frames.hop_samples(sample_rate),
            window: hamming(frame_len).into_iter().map(T::of).collect(),
            fft: FftPlanner::<T>::new().plan_fft_forward(fft_len),
            filterbank: build_filterbank(&spec.filterbank, fft_len, sample_rate)?,
            dct: Dct::new(spec.filterbank.num_filters, spec.num_coeffs),
        })
    }

    pub fn spec(&self) -> &FeatureSpec {
        &self.spec
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    /// Features of a raw sample slice.
    pub fn extract(&self, samples: &[T]) -> Result<FeatureMatrix<T>, FeatureError> {
        if samples.len() < self.frame_len {
            return Err(FeatureError::SegmentTooShort {
                len: samples.len(),
                frame: self.frame_len,
            });
        }
        let starts = frame_starts(samples.len(), self.frame_len, self.hop);
        let cols = self.spec.num_coeffs;
        let mut values = Vec::with_capacity(starts.len() * cols);
        let mut buf = vec![Complex::new(T::zero(), T::zero()); self.fft.len()];
        let mut frame = vec![T::zero(); self.frame_len];
        let floor = T::of(LOG_FLOOR);
        for s in &starts {
            let emphasized = pre_emphasize(
                &samples[*s..*s + self.frame_len],
                self.spec.frames.preemphasis_coeff,
            );
            for ((f, e), w) in frame.iter_mut().zip(&emphasized).zip(&self.window) {
                *f = *e * *w;
            }
            let power = power_spectrum_with(self.fft.as_ref(), &frame, &mut buf);
            let log_energies: Vec<T> = self
                .filterbank
                .apply(&power)
                .into_iter()
                .map(|e| e.max(floor).ln())
                .collect();
            values.extend(self.dct.forward(&log_energies));
        }
        Ok(FeatureMatrix::new(starts.len(), cols, values))
    }

    /// Features of one segment of the unfiltered clip.
    pub fn extract_segment(
        &self,
        clip: &AudioClip<T>,
        segment: &Segment,
    ) -> Result<FeatureMatrix<T>, FeatureError> {
        if segment.start >= segment.end || segment.end > clip.len() {
            return Err(FeatureError::SegmentOutOfRange {
                start: segment.start,
                end: segment.end,
                len: clip.len(),
            });
        }
        let mut m = self.extract(&clip.samples()[segment.start..segment.end])?;
        m.segment = Some(*segment);
        Ok(m)
    }
}

pub fn extract_features<T: Real>(
    clip: &AudioClip<T>,
    segment: &Segment,
    spec: &FeatureSpec,
) -> Result<FeatureMatrix<T>, FeatureError> {
    FeatureExtractor::new(spec, clip.sample_rate())?.extract_segment(clip, segment)
}
