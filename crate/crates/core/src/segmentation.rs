//! Call segmentation by short-time energy.
//!
//! Each sample window is cut into consecutive analysis windows (30 s by
//! default). Per analysis window the band-passed signal is reduced to 10 ms
//! frame energies, smoothed with a causal moving average, converted to dB
//! and compared with an adaptive threshold
//! `mean + (max - mean) / C`. A start point needs `k` consecutive frames
//! above the threshold and an end point `k` consecutive frames below.
//! Endpoints found on the smoothed curve are then pulled in to the first and
//! last unsmoothed frame above the threshold, which removes the lag the
//! moving average adds on both edges.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{AudioClip, SampleWindow};
use crate::filter::FirFilter;
use crate::scalar::Real;

/// Floor applied before taking `10·log10`.
pub const ENERGY_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum SegmentationError {
    #[error("invalid band [{low}, {high}] Hz for Nyquist {nyquist} Hz")]
    InvalidBand { low: f64, high: f64, nyquist: f64 },
    #[error("FIR length must be odd and positive, got {0}")]
    InvalidTaps(usize),
    #[error("clip of {len} samples is shorter than one {frame}-sample frame")]
    ClipTooShort { len: usize, frame: usize },
    #[error("empty energy sequence")]
    EmptySequence,
    #[error("invalid segmenter config: {0}")]
    InvalidConfig(String),
    #[error("window [{start}, {end}) outside clip of {len} samples")]
    WindowOutOfRange {
        start: usize,
        end: usize,
        len: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmenterConfig {
    /// Band-pass edges in Hz.
    pub band_low: f64,
    pub band_high: f64,
    /// Analysis window length in seconds; the threshold is recomputed per window.
    pub analysis_window: f64,
    /// Energy frame length in seconds.
    pub ste_frame: f64,
    /// Moving-average length in frames.
    pub ma_length: usize,
    /// Divisor `C` of the adaptive threshold.
    pub threshold_divisor: f64,
    pub consecutive_frames: usize,
    pub fir_taps: usize,
    /// Windows whose smoothed `max - mean` dB spread is below this are treated
    /// as call-free. Zero disables the check.
    pub min_contrast_db: f64,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        Self {
            band_low: 430.0,
            band_high: 7500.0,
            analysis_window: 30.0,
            ste_frame: 0.010,
            ma_length: 12,
            threshold_divisor: 3.0,
            consecutive_frames: 3,
            fir_taps: 513,
            min_contrast_db: 3.0,
        }
    }
}

impl SegmenterConfig {
    pub fn with_band(mut self, low: f64, high: f64) -> Self {
        self.band_low = low;
        self.band_high = high;
        self
    }

    pub fn validate(&self, sample_rate: u32) -> Result<(), SegmentationError> {
        check_band(self.band_low, self.band_high, sample_rate)?;
        if self.fir_taps == 0 || self.fir_taps.is_multiple_of(2) {
            return Err(SegmentationError::InvalidTaps(self.fir_taps));
        }
        let bad = |m: &str| Err(SegmentationError::InvalidConfig(m.into()));
        if self.ma_length == 0 {
            return bad("ma_length must be at least 1");
        }
        if self.consecutive_frames == 0 {
            return bad("consecutive_frames must be at least 1");
        }
        if !(self.threshold_divisor > 0.0) {
            return bad("threshold_divisor must be positive");
        }
        if !(self.ste_frame > 0.0) || !(self.analysis_window >= self.ste_frame) {
            return bad("need 0 < ste_frame <= analysis_window");
        }
        if !(self.min_contrast_db >= 0.0) {
            return bad("min_contrast_db must be non-negative");
        }
        Ok(())
    }
}

fn check_band(low: f64, high: f64, sample_rate: u32) -> Result<(), SegmentationError> {
    let nyquist = sample_rate as f64 / 2.0;
    if !(low >= 0.0 && low < high && high <= nyquist) {
        return Err(SegmentationError::InvalidBand { low, high, nyquist });
    }
    Ok(())
}

/// Per-frame energies (linear or dB) for consecutive non-overlapping frames.
#[derive(Debug, Clone, PartialEq)]
pub struct SteSequence<T> {
    pub values: Vec<T>,
    /// Frame length in samples.
    pub frame_len: usize,
    pub frame_duration: f64,
    /// Absolute sample index of frame 0.
    pub origin: usize,
}

impl<T> SteSequence<T> {
    fn map_values(&self, values: Vec<T>) -> Self {
        Self {
            values,
            frame_len: self.frame_len,
            frame_duration: self.frame_duration,
            origin: self.origin,
        }
    }

    pub fn frame_to_sample(&self, frame: usize) -> usize {
        self.origin + frame * self.frame_len
    }
}

/// Candidate call `[start, end)` in absolute sample indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
    /// Index of the analysis window that produced the segment.
    pub window_id: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn duration_seconds(&self, sample_rate: u32) -> f64 {
        self.len() as f64 / sample_rate as f64
    }
}

/// Band-passes a clip with a Hamming-windowed sinc FIR, group delay removed.
/// The result is meant for segmentation only; features use the raw clip.
pub fn bandpass_fir<T: Real>(
    clip: &AudioClip<T>,
    band_low: f64,
    band_high: f64,
    taps: usize,
) -> Result<AudioClip<T>, SegmentationError> {
    check_band(band_low, band_high, clip.sample_rate())?;
    if taps == 0 || taps.is_multiple_of(2) {
        return Err(SegmentationError::InvalidTaps(taps));
    }
    let filter = FirFilter::<T>::bandpass(band_low, band_high, taps, clip.sample_rate() as f64);
    Ok(AudioClip::derived(filter.apply(clip.samples()), clip))
}

fn frame_samples(frame: f64, sample_rate: u32) -> usize {
    ((frame * sample_rate as f64).round() as usize).max(1)
}

/// Energy of non-overlapping frames of `frame_len` samples; the trailing
/// partial frame is dropped.
pub fn frame_energies<T: Real>(samples: &[T], frame_len: usize) -> Vec<T> {
    samples
        .chunks_exact(frame_len)
        .map(|f| f.iter().map(|&s| s * s).sum())
        .collect()
}

pub fn short_time_energy<T: Real>(
    clip: &AudioClip<T>,
    frame: f64,
) -> Result<SteSequence<T>, SegmentationError> {
    let frame_len = frame_samples(frame, clip.sample_rate());
    if clip.len() < frame_len {
        return Err(SegmentationError::ClipTooShort {
            len: clip.len(),
            frame: frame_len,
        });
    }
    Ok(SteSequence {
        values: frame_energies(clip.samples(), frame_len),
        frame_len,
        frame_duration: frame_len as f64 / clip.sample_rate() as f64,
        origin: 0,
    })
}

/// Causal mean over the last `length` values; the first `length - 1`
/// outputs average the available prefix.
pub fn moving_average<T: Real>(ste: &SteSequence<T>, length: usize) -> SteSequence<T> {
    let length = length.max(1);
    // direct window sums: a running sum would drift and break scale invariance
    let out = (0..ste.values.len())
        .map(|i| {
            let window = &ste.values[(i + 1).saturating_sub(length)..=i];
            window.iter().copied().sum::<T>() / T::of(window.len() as f64)
        })
        .collect();
    ste.map_values(out)
}

pub fn to_db<T: Real>(ste: &SteSequence<T>) -> SteSequence<T> {
    let floor = T::of(ENERGY_FLOOR);
    let ten = T::of(10.0);
    ste.map_values(
        ste.values
            .iter()
            .map(|&v| ten * v.max(floor).log10())
            .collect(),
    )
}

/// Adaptive threshold offset `(max - mean) / C` in dB.
pub fn compute_threshold<T: Real>(
    ste_db: &SteSequence<T>,
    divisor: f64,
) -> Result<T, SegmentationError> {
    let (max, mean) = max_and_mean(&ste_db.values)?;
    Ok((max - mean) / T::of(divisor))
}

fn max_and_mean<T: Real>(values: &[T]) -> Result<(T, T), SegmentationError> {
    if values.is_empty() {
        return Err(SegmentationError::EmptySequence);
    }
    let max = values.iter().copied().fold(T::neg_infinity(), T::max);
    let mean = values.iter().copied().sum::<T>() / T::of(values.len() as f64);
    Ok((max, mean))
}

/// Frame-level endpoint state machine. Returns half-open frame spans: the
/// start is the first frame of a `k`-run above `level`, the end the first
/// frame of the next `k`-run at or below it. A span still open at the end is
/// closed after the last frame.
pub fn endpoint_frames<T: Real>(values: &[T], level: T, k: usize) -> Vec<(usize, usize)> {
    let k = k.max(1);
    let mut spans = Vec::new();
    let mut open: Option<usize> = None;
    let mut run = 0usize;
    for (n, &v) in values.iter().enumerate() {
        match open {
            None => {
                run = if v > level { run + 1 } else { 0 };
                if run == k {
                    open = Some(n + 1 - k);
                    run = 0;
                }
            }
            Some(start) => {
                run = if v > level { 0 } else { run + 1 };
                if run == k {
                    spans.push((start, n + 1 - k));
                    open = None;
                    run = 0;
                }
            }
        }
    }
    if let Some(start) = open {
        spans.push((start, values.len()));
    }
    spans
}

pub fn detect_endpoints<T: Real>(
    ste_db: &SteSequence<T>,
    threshold_level: T,
    k: usize,
) -> Vec<Segment> {
    endpoint_frames(&ste_db.values, threshold_level, k)
        .into_iter()
        .map(|(s, e)| Segment {
            start: ste_db.frame_to_sample(s),
            end: ste_db.frame_to_sample(e),
            window_id: 0,
        })
        .collect()
}

/// Tightens smoothed-curve spans to the unsmoothed frames above `level`:
/// from the first frame of the first `k`-run above it to the last frame of
/// the last such run. Each span's search starts `lookback` frames early
/// (never before the previous span's end).
pub fn refine_endpoints<T: Real>(
    raw_db: &[T],
    spans: &[(usize, usize)],
    level: T,
    k: usize,
    lookback: usize,
) -> Vec<(usize, usize)> {
    let k = k.max(1);
    let mut out: Vec<(usize, usize)> = Vec::with_capacity(spans.len());
    for &(start, end) in spans {
        let floor = out.last().map_or(0, |&(_, e)| e);
        let lo = start.saturating_sub(lookback).max(floor);
        let hi = end.min(raw_db.len());
        let above = |i: usize| i + k <= hi && raw_db[i..i + k].iter().all(|&v| v > level);
        let first = (lo..hi).find(|&i| above(i));
        let last = (lo..hi).rev().find(|&i| above(i)).map(|i| i + k);
        match (first, last) {
            (Some(f), Some(l)) => out.push((f, l)),
            _ => out.push((start.max(floor), end)),
        }
    }
    out.retain(|(s, e)| s < e);
    out
}

/// Segments of one analysis window given its band-passed samples.
fn segment_analysis_window<T: Real>(
    filtered: &[T],
    origin: usize,
    window_id: usize,
    frame_len: usize,
    frame_duration: f64,
    cfg: &SegmenterConfig,
) -> Vec<Segment> {
    let raw = SteSequence {
        values: frame_energies(filtered, frame_len),
        frame_len,
        frame_duration,
        origin,
    };
    if raw.values.is_empty() {
        return Vec::new();
    }
    let smoothed_db = to_db(&moving_average(&raw, cfg.ma_length));
    let (max, mean) = match max_and_mean(&smoothed_db.values) {
        Ok(v) => v,
        Err(_) => return Vec::new(),
    };
    if (max - mean).as_f64() < cfg.min_contrast_db {
        return Vec::new();
    }
    let level = mean + (max - mean) / T::of(cfg.threshold_divisor);
    let spans = endpoint_frames(&smoothed_db.values, level, cfg.consecutive_frames);
    let raw_db = to_db(&raw);
    refine_endpoints(
        &raw_db.values,
        &spans,
        level,
        cfg.consecutive_frames,
        cfg.ma_length,
    )
    .into_iter()
    .map(|(s, e)| Segment {
        start: raw.frame_to_sample(s),
        end: raw.frame_to_sample(e),
        window_id,
    })
    .collect()
}

/// Full segmentation of one sample window. Segments carry absolute sample
/// indices and are sorted; analysis windows are numbered from 0 within the
/// sample window.
pub fn segment_audio<T: Real>(
    clip: &AudioClip<T>,
    window: &SampleWindow,
    cfg: &SegmenterConfig,
) -> Result<Vec<Segment>, SegmentationError> {
    cfg.validate(clip.sample_rate())?;
    if window.start >= window.end || window.end > clip.len() {
        return Err(SegmentationError::WindowOutOfRange {
            start: window.start,
            end: window.end,
            len: clip.len(),
        });
    }
    let rate = clip.sample_rate();
    let filter = FirFilter::<T>::bandpass(cfg.band_low, cfg.band_high, cfg.fir_taps, rate as f64);
    let frame_len = frame_samples(cfg.ste_frame, rate);
    let frame_duration = frame_len as f64 / rate as f64;
    let chunk_len = ((cfg.analysis_window * rate as f64).round() as usize).max(frame_len);
    let source = &clip.samples()[window.start..window.end];

    let mut segments: Vec<Segment> = Vec::new();
    let mut scratch: Vec<T> = Vec::new();
    for (window_id, chunk_start) in (0..source.len()).step_by(chunk_len).enumerate() {
        let chunk_end = (chunk_start + chunk_len).min(source.len());
        if chunk_end - chunk_start < frame_len {
            continue;
        }
        scratch.clear();
        scratch.resize(chunk_end - chunk_start, T::zero());
        filter.apply_into(source, chunk_start, &mut scratch);
        let boundary = window.start + chunk_start;
        for seg in segment_analysis_window(
            &scratch,
            boundary,
            window_id,
            frame_len,
            frame_duration,
            cfg,
        ) {
            // a call running across the chunk boundary stays one segment
            match segments.last_mut() {
                Some(prev) if chunk_start > 0 && prev.end == boundary && seg.start == boundary => {
                    prev.end = seg.end
                }
                _ => segments.push(seg),
            }
        }
    }
    Ok(segments)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(values: Vec<f64>) -> SteSequence<f64> {
        SteSequence {
            values,
            frame_len: 480,
            frame_duration: 0.01,
            origin: 0,
        }
    }

    fn tone(freq: f64, rate: u32, seconds: f64, amp: f64) -> Vec<f64> {
        let n = (seconds * rate as f64) as usize;
        (0..n)
            .map(|i| amp * (2.0 * std::f64::consts::PI * freq * i as f64 / rate as f64).sin())
            .collect()
    }

    fn rms(x: &[f64]) -> f64 {
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }

    #[test]
    fn bandpass_keeps_passband_and_rejects_stopband() {
        let rate = 48_000;
        let pass = AudioClip::new(tone(2000.0, rate, 1.0, 0.5), rate).unwrap();
        let out = bandpass_fir(&pass, 1500.0, 2500.0, 513).unwrap();
        let steady = 1000..47_000;
        let gain_db = 20.0
            * (rms(&out.samples()[steady.clone()]) / rms(&pass.samples()[steady.clone()])).log10();
        assert!(gain_db.abs() < 1.0, "passband gain {gain_db} dB");

        let stop = AudioClip::new(tone(100.0, rate, 1.0, 0.5), rate).unwrap();
        let out = bandpass_fir(&stop, 1500.0, 2500.0, 513).unwrap();
        let atten_db =
            20.0 * (rms(&out.samples()[steady.clone()]) / rms(&stop.samples()[steady])).log10();
        assert!(atten_db <= -40.0, "stopband {atten_db} dB");
    }

    #[test]
    fn bandpass_of_zero_is_zero_and_bad_bands_fail() {
        let clip = AudioClip::new(vec![0.0f64; 4800], 48_000).unwrap();
        let out = bandpass_fir(&clip, 1500.0, 2500.0, 513).unwrap();
        assert!(out.samples().iter().all(|&s| s == 0.0));
        assert!(matches!(
            bandpass_fir(&clip, 2500.0, 1500.0, 513),
            Err(SegmentationError::InvalidBand { .. })
        ));
        assert!(matches!(
            bandpass_fir(&clip, 100.0, 30_000.0, 513),
            Err(SegmentationError::InvalidBand { .. })
        ));
        assert!(matches!(
            bandpass_fir(&clip, 100.0, 1000.0, 512),
            Err(SegmentationError::InvalidTaps(512))
        ));
    }

    #[test]
    fn ste_of_constant_signal() {
        let clip = AudioClip::new(vec![0.999f64; 4800], 48_000).unwrap();
        let ste = short_time_energy(&clip, 0.010).unwrap();
        assert_eq!(ste.values.len(), 10);
        for v in &ste.values {
            assert!((v - 480.0 * 0.999 * 0.999).abs() < 1e-9);
        }
        // a full-scale constant of 1.0 is outside the PCM range, but the
        // frame arithmetic is the same
        assert_eq!(frame_energies(&vec![1.0f64; 960], 480), vec![480.0, 480.0]);
    }

    #[test]
    fn ste_single_sample_and_short_clip() {
        let mut s = vec![0.0f64; 4800 + 100];
        s[3 * 480 + 17] = 0.5;
        let clip = AudioClip::new(s, 48_000).unwrap();
        let ste = short_time_energy(&clip, 0.010).unwrap();
        let mut expected = vec![0.0; 10];
        expected[3] = 0.25;
        assert_eq!(ste.values, expected);

        let short = AudioClip::new(vec![0.0f64; 100], 48_000).unwrap();
        assert!(matches!(
            short_time_energy(&short, 0.010),
            Err(SegmentationError::ClipTooShort { .. })
        ));
    }

    #[test]
    fn moving_average_matches_convolution() {
        let mut impulse = vec![0.0; 30];
        impulse[0] = 1.0;
        let out = moving_average(&seq(impulse.clone()), 12);
        for (i, v) in out.values.iter().enumerate() {
            // causal convolution with a 12-tap box, prefix averaged over i+1 values
            let n = (i + 1).min(12) as f64;
            let window_sum: f64 = impulse[(i + 1).saturating_sub(12)..=i].iter().sum();
            assert!((v - window_sum / n).abs() < 1e-15);
        }
        for v in &out.values[11..12] {
            assert!((v - 1.0 / 12.0).abs() < 1e-15);
        }
        assert_eq!(out.values[12], 0.0);

        let c = moving_average(&seq(vec![2.5; 40]), 12);
        assert!(c.values.iter().all(|&v| (v - 2.5).abs() < 1e-15));
        let x = seq(vec![1.0, 5.0, 2.0]);
        assert_eq!(moving_average(&x, 1).values, x.values);
    }

    #[test]
    fn db_conversion() {
        let db = to_db(&seq(vec![1.0, 0.0, 480.0]));
        assert_eq!(db.values[0], 0.0);
        assert!((db.values[1] + 120.0).abs() < 1e-12);
        assert!((db.values[2] - 26.8124).abs() < 1e-4);
    }

    #[test]
    fn threshold_formula() {
        let z = compute_threshold(&seq(vec![-10.0, -40.0, -40.0, -70.0]), 3.0).unwrap();
        assert!((z - 10.0).abs() < 1e-12);
        let z = compute_threshold(&seq(vec![5.0, -55.0, -25.0]), 2.0).unwrap();
        assert!((z - 15.0).abs() < 1e-12);
        assert_eq!(compute_threshold(&seq(vec![3.0; 8]), 3.0).unwrap(), 0.0);
        assert_eq!(
            compute_threshold(&seq(vec![]), 3.0),
            Err(SegmentationError::EmptySequence)
        );
    }

    #[test]
    fn endpoints_follow_k_run_rule() {
        let mut v = vec![0.0; 60];
        for x in &mut v[10..=40] {
            *x = 10.0;
        }
        assert_eq!(endpoint_frames(&v, 5.0, 3), vec![(10, 41)]);
        let segs = detect_endpoints(&seq(v), 5.0, 3);
        assert_eq!(segs[0].start, 4800);
        assert_eq!(segs[0].end, 41 * 480);

        assert!(endpoint_frames(&vec![0.0; 50], 5.0, 3).is_empty());

        let mut short_runs = vec![0.0; 30];
        short_runs[5] = 10.0;
        short_runs[6] = 10.0;
        short_runs[15] = 10.0;
        short_runs[16] = 10.0;
        assert!(endpoint_frames(&short_runs, 5.0, 3).is_empty());
    }

    #[test]
    fn open_span_closes_at_sequence_end() {
        let mut v = vec![0.0; 20];
        for x in &mut v[15..] {
            *x = 1.0;
        }
        assert_eq!(endpoint_frames(&v, 0.5, 3), vec![(15, 20)]);
    }

    #[test]
    fn short_dips_do_not_end_a_span() {
        let mut v = vec![10.0; 20];
        v[0] = 0.0;
        v[8] = 0.0;
        v[9] = 0.0;
        assert_eq!(endpoint_frames(&v, 5.0, 3), vec![(1, 20)]);
    }

    #[test]
    fn refinement_pulls_edges_to_raw_frames() {
        let mut raw = vec![-40.0; 50];
        for x in &mut raw[10..20] {
            *x = 0.0;
        }
        // smoothed detection lags: frames 13..30
        raw[5] = 0.0;
        raw[24] = 0.0;
        // isolated spikes are not runs of 3
        let out = refine_endpoints(&raw, &[(13, 30)], -20.0, 3, 12);
        assert_eq!(out, vec![(10, 20)]);
    }

    #[test]
    fn call_across_chunk_boundary_is_one_segment() {
        let rate = 48_000;
        let mut samples = vec![0.0f64; rate as usize * 4];
        let mut rng = 12345u64;
        for (i, x) in samples.iter_mut().enumerate() {
            rng = rng
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            *x = ((rng >> 33) as f64 / (1u64 << 31) as f64 - 0.5) * 1e-3;
            if (88_000..104_000).contains(&i) {
                *x += 0.3 * (std::f64::consts::TAU * 2000.0 * i as f64 / rate as f64).sin();
            }
        }
        let clip = AudioClip::new(samples, rate).unwrap();
        let window = SampleWindow {
            start: 0,
            end: clip.len(),
            label: String::new(),
        };
        let cfg = SegmenterConfig {
            analysis_window: 2.0,
            ..SegmenterConfig::default()
        };
        let segs = segment_audio(&clip, &window, &cfg).unwrap();
        assert_eq!(segs.len(), 1, "{segs:?}");
        assert!(
            segs[0].start.abs_diff(88_000) <= 960 && segs[0].end.abs_diff(104_000) <= 960,
            "{segs:?}"
        );
    }

    #[test]
    fn silence_yields_no_segments() {
        let clip = AudioClip::new(vec![0.0f64; 48_000 * 3], 48_000).unwrap();
        let window = SampleWindow {
            start: 0,
            end: clip.len(),
            label: String::new(),
        };
        assert!(segment_audio(&clip, &window, &SegmenterConfig::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn continuous_tone_spans_window_when_contrast_check_disabled() {
        let rate = 48_000;
        let clip = AudioClip::new(tone(2000.0, rate, 30.0, 0.5), rate).unwrap();
        let window = SampleWindow {
            start: 0,
            end: clip.len(),
            label: String::new(),
        };
        let cfg = SegmenterConfig {
            min_contrast_db: 0.0,
            ..SegmenterConfig::default().with_band(1500.0, 2500.0)
        };
        let segs = segment_audio(&clip, &window, &cfg).unwrap();
        assert_eq!(segs.len(), 1);
        assert!(segs[0].len() as f64 > 0.99 * clip.len() as f64);
        // with the default contrast check a stationary window has no calls
        let segs = segment_audio(
            &clip,
            &window,
            &SegmenterConfig::default().with_band(1500.0, 2500.0),
        )
        .unwrap();
        assert!(segs.is_empty());
    }

    #[test]
    fn segments_are_sorted_disjoint_and_inside_window() {
        let rate = 48_000;
        let mut s = vec![0.0f64; rate as usize * 10];
        for burst in 0..4 {
            let start = (burst * 2 + 1) * rate as usize;
            for (i, x) in s[start..start + 14_400].iter_mut().enumerate() {
                *x = 0.3 * (2.0 * std::f64::consts::PI * 2000.0 * i as f64 / rate as f64).sin();
            }
        }
        for (i, x) in s.iter_mut().enumerate() {
            *x += 0.001 * (((i * 7919) % 1009) as f64 / 1009.0 - 0.5);
        }
        let clip = AudioClip::new(s, rate).unwrap();
        let window = SampleWindow {
            start: 24_000,
            end: clip.len() - 24_000,
            label: String::new(),
        };
        let cfg = SegmenterConfig::default().with_band(1500.0, 2500.0);
        let segs = segment_audio(&clip, &window, &cfg).unwrap();
        assert_eq!(segs.len(), 4);
        for pair in segs.windows(2) {
            assert!(pair[0].end <= pair[1].start);
        }
        for (i, seg) in segs.iter().enumerate() {
            assert!(seg.start >= window.start && seg.end <= window.end);
            let truth = (i * 2 + 1) * rate as usize;
            assert!((seg.start as f64 - truth as f64).abs() <= 0.03 * rate as f64);
            assert!((seg.end as f64 - (truth + 14_400) as f64).abs() <= 0.03 * rate as f64);
        }
    }
}
