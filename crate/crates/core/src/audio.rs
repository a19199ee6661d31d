//! RIFF/WAVE decoding, cue points and sample windows.
//!
//! Only 16-bit integer PCM is accepted. Samples are scaled by 1/32768 so the
//! decoded range is `[-1.0, 1.0)`, and multi-channel frames are averaged to
//! mono at load time.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use log::warn;
use thiserror::Error;

use crate::scalar::Real;

/// Rates the pipeline is tuned for. Other rates load with a warning flag.
pub const SUPPORTED_SAMPLE_RATES: [u32; 2] = [44_100, 48_000];

const PCM_SCALE: f64 = 32_768.0;
const FORMAT_PCM: u16 = 1;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("not a RIFF/WAVE file")]
    NotWav,
    #[error("unsupported encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("truncated file: {0}")]
    TruncatedFile(String),
    #[error("malformed cue chunk: {0}")]
    MalformedCueChunk(String),
    #[error("missing `{0}` chunk")]
    MissingChunk(&'static str),
    #[error("sample rate must be positive")]
    InvalidSampleRate,
    #[error("sample {index} = {value} outside [-1, 1)")]
    SampleOutOfRange { index: usize, value: f64 },
}

/// Decoded mono audio.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip<T> {
    samples: Vec<T>,
    sample_rate: u32,
    source_path: String,
    channel_count_original: u16,
}

impl<T: Real> AudioClip<T> {
    /// Builds a clip from mono samples, checking the `[-1, 1)` range.
    pub fn new(samples: Vec<T>, sample_rate: u32) -> Result<Self, AudioError> {
        if sample_rate == 0 {
            return Err(AudioError::InvalidSampleRate);
        }
        if let Some((index, value)) = samples
            .iter()
            .enumerate()
            .find(|(_, s)| !(s.as_f64() >= -1.0 && s.as_f64() < 1.0))
        {
            return Err(AudioError::SampleOutOfRange {
                index,
                value: value.as_f64(),
            });
        }
        Ok(Self {
            samples,
            sample_rate,
            source_path: String::new(),
            channel_count_original: 1,
        })
    }

    /// Derived signals (filter outputs) may overshoot the PCM range, so no
    /// range check is applied.
    pub(crate) fn derived(samples: Vec<T>, like: &AudioClip<T>) -> Self {
        Self {
            samples,
            sample_rate: like.sample_rate,
            source_path: like.source_path.clone(),
            channel_count_original: like.channel_count_original,
        }
    }

    pub fn with_source_path(mut self, path: impl Into<String>) -> Self {
        self.source_path = path.into();
        self
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<T> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn source_path(&self) -> &str {
        &self.source_path
    }

    pub fn channel_count_original(&self) -> u16 {
        self.channel_count_original
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Set when the rate is outside [`SUPPORTED_SAMPLE_RATES`].
    pub fn nonstandard_rate(&self) -> bool {
        !SUPPORTED_SAMPLE_RATES.contains(&self.sample_rate)
    }

    /// Same samples multiplied by `gain`, range-checked.
    pub fn scaled(&self, gain: T) -> Result<Self, AudioError> {
        let samples = self.samples.iter().map(|&s| s * gain).collect();
        Ok(Self::new(samples, self.sample_rate)?.with_source_path(self.source_path.clone()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CuePoint {
    pub label: String,
    pub position: usize,
}

/// Half-open sample range `[start, end)` analysed as one unit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleWindow {
    pub start: usize,
    pub end: usize,
    pub label: String,
}

impl SampleWindow {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

/// A parsed WAV file: the mono clip and its cue points.
#[derive(Debug, Clone)]
pub struct WavFile<T> {
    pub clip: AudioClip<T>,
    pub cues: Vec<CuePoint>,
}

struct FmtChunk {
    channels: u16,
    sample_rate: u32,
}

fn read_file(path: &Path) -> Result<Vec<u8>, AudioError> {
    fs::read(path).map_err(|source| AudioError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_wav<T: Real>(path: impl AsRef<Path>) -> Result<AudioClip<T>, AudioError> {
    Ok(read_wav(path)?.clip)
}

pub fn read_cue_points(path: impl AsRef<Path>) -> Result<Vec<CuePoint>, AudioError> {
    Ok(read_wav::<f32>(path)?.cues)
}

/// Loads the clip and cue points in one pass over the file.
pub fn read_wav<T: Real>(path: impl AsRef<Path>) -> Result<WavFile<T>, AudioError> {
    let path = path.as_ref();
    let bytes = read_file(path)?;
    let mut wav = parse_wav::<T>(&bytes)?;
    wav.clip.source_path = path.display().to_string();
    if wav.clip.nonstandard_rate() {
        warn!(
            "{}: sample rate {} Hz is outside the supported set {:?}",
            path.display(),
            wav.clip.sample_rate,
            SUPPORTED_SAMPLE_RATES
        );
    }
    Ok(wav)
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

/// Decodes an in-memory RIFF/WAVE image.
pub fn parse_wav<T: Real>(bytes: &[u8]) -> Result<WavFile<T>, AudioError> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(AudioError::NotWav);
    }

    let mut fmt: Option<FmtChunk> = None;
    let mut data: Option<&[u8]> = None;
    let mut cue_entries: Vec<(u32, usize)> = Vec::new();
    let mut labels: HashMap<u32, String> = HashMap::new();

    let mut at = 12;
    while at + 8 <= bytes.len() {
        let id = &bytes[at..at + 4];
        let size = u32_at(bytes, at + 4) as usize;
        let body_start = at + 8;
        let available = bytes.len() - body_start;
        match id {
            b"fmt " => {
                if size < 16 || available < 16 {
                    return Err(AudioError::TruncatedFile("fmt chunk".into()));
                }
                fmt = Some(parse_fmt(
                    &bytes[body_start..body_start + size.min(available)],
                )?);
            }
            b"data" => {
                if available < size {
                    return Err(AudioError::TruncatedFile(format!(
                        "data chunk declares {size} bytes, {available} present"
                    )));
                }
                data = Some(&bytes[body_start..body_start + size]);
            }
            b"cue " => {
                let body = &bytes[body_start..body_start + size.min(available)];
                cue_entries = parse_cue(body, size)?;
            }
            b"LIST" if available >= 4 && &bytes[body_start..body_start + 4] == b"adtl" => {
                let body = &bytes[body_start..body_start + size.min(available)];
                parse_adtl(body, &mut labels);
            }
            _ => {}
        }
        // chunks are word aligned
        at = body_start.saturating_add(size).saturating_add(size & 1);
    }

    let fmt = fmt.ok_or(AudioError::MissingChunk("fmt "))?;
    let data = data.ok_or(AudioError::MissingChunk("data"))?;
    let channels = fmt.channels as usize;
    let frame_bytes = 2 * channels;
    let frames = data.len() / frame_bytes;
    let inv = 1.0 / (PCM_SCALE * channels as f64);
    let samples: Vec<T> = data
        .chunks_exact(frame_bytes)
        .map(|frame| {
            let sum: i64 = frame
                .chunks_exact(2)
                .map(|s| i16::from_le_bytes([s[0], s[1]]) as i64)
                .sum();
            T::of(sum as f64 * inv)
        })
        .collect();
    debug_assert_eq!(samples.len(), frames);

    let mut cues: Vec<CuePoint> = Vec::with_capacity(cue_entries.len());
    for (id, position) in cue_entries {
        if position >= frames {
            warn!("cue {id} at sample {position} lies beyond the data ({frames} samples); ignored");
            continue;
        }
        let label = labels
            .get(&id)
            .cloned()
            .unwrap_or_else(|| format!("cue{id}"));
        cues.push(CuePoint { label, position });
    }
    cues.sort_by_key(|c| c.position);

    let clip = AudioClip {
        samples,
        sample_rate: fmt.sample_rate,
        source_path: String::new(),
        channel_count_original: fmt.channels,
    };
    Ok(WavFile { clip, cues })
}

fn parse_fmt(body: &[u8]) -> Result<FmtChunk, AudioError> {
    let mut format = u16_at(body, 0);
    let channels = u16_at(body, 2);
    let sample_rate = u32_at(body, 4);
    let bits = u16_at(body, 14);
    if format == FORMAT_EXTENSIBLE {
        // sub-format GUID starts at offset 24; its first two bytes hold the format tag
        if body.len() < 26 {
            return Err(AudioError::TruncatedFile("extensible fmt chunk".into()));
        }
        format = u16_at(body, 24);
    }
    if format != FORMAT_PCM {
        return Err(AudioError::UnsupportedEncoding(format!(
            "format tag {format:#06x} (only integer PCM)"
        )));
    }
    if bits != 16 {
        return Err(AudioError::UnsupportedEncoding(format!(
            "{bits}-bit samples (only 16-bit)"
        )));
    }
    if channels == 0 {
        return Err(AudioError::UnsupportedEncoding("zero channels".into()));
    }
    if sample_rate == 0 {
        return Err(AudioError::InvalidSampleRate);
    }
    Ok(FmtChunk {
        channels,
        sample_rate,
    })
}

fn parse_cue(body: &[u8], declared: usize) -> Result<Vec<(u32, usize)>, AudioError> {
    if body.len() < 4 {
        return Err(AudioError::MalformedCueChunk("missing entry count".into()));
    }
    let count = u32_at(body, 0) as usize;
    let expected = 4 + 24 * count;
    if declared != expected || body.len() < expected {
        return Err(AudioError::MalformedCueChunk(format!(
            "{count} entries need {expected} bytes, chunk has {declared}"
        )));
    }
    Ok((0..count)
        .map(|i| {
            let e = 4 + 24 * i;
            let id = u32_at(body, e);
            let sample_offset = u32_at(body, e + 20) as usize;
            (id, sample_offset)
        })
        .collect())
}

fn parse_adtl(body: &[u8], labels: &mut HashMap<u32, String>) {
    let mut at = 4;
    while at + 8 <= body.len() {
        let id = &body[at..at + 4];
        let size = u32_at(body, at + 4) as usize;
        let start = at + 8;
        let end = (start + size).min(body.len());
        if id == b"labl" && end >= start + 4 {
            let cue_id = u32_at(body, start);
            let text: Vec<u8> = body[start + 4..end]
                .iter()
                .copied()
                .take_while(|&b| b != 0)
                .collect();
            labels.insert(cue_id, String::from_utf8_lossy(&text).into_owned());
        }
        at = start + size + (size & 1);
    }
}

/// Encodes a mono clip as 16-bit PCM with an optional `cue ` chunk and
/// `LIST/adtl` labels.
pub fn encode_wav<T: Real>(clip: &AudioClip<T>, cues: &[CuePoint]) -> Vec<u8> {
    let data_len = clip.samples.len() * 2;
    let mut out = Vec::with_capacity(data_len + 256);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&0u32.to_le_bytes());
    out.extend_from_slice(b"WAVE");

    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&clip.sample_rate.to_le_bytes());
    out.extend_from_slice(&(clip.sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());

    if !cues.is_empty() {
        out.extend_from_slice(b"cue ");
        out.extend_from_slice(&((4 + 24 * cues.len()) as u32).to_le_bytes());
        out.extend_from_slice(&(cues.len() as u32).to_le_bytes());
        for (i, cue) in cues.iter().enumerate() {
            let pos = cue.position as u32;
            out.extend_from_slice(&(i as u32 + 1).to_le_bytes());
            out.extend_from_slice(&pos.to_le_bytes());
            out.extend_from_slice(b"data");
            out.extend_from_slice(&0u32.to_le_bytes());
            out.extend_from_slice(&0u32.to_le_bytes());
            out.extend_from_slice(&pos.to_le_bytes());
        }

        let mut adtl = Vec::new();
        adtl.extend_from_slice(b"adtl");
        for (i, cue) in cues.iter().enumerate() {
            let mut text = cue.label.as_bytes().to_vec();
            text.push(0);
            adtl.extend_from_slice(b"labl");
            adtl.extend_from_slice(&((4 + text.len()) as u32).to_le_bytes());
            adtl.extend_from_slice(&(i as u32 + 1).to_le_bytes());
            adtl.extend_from_slice(&text);
            if text.len() % 2 == 1 {
                adtl.push(0);
            }
        }
        out.extend_from_slice(b"LIST");
        out.extend_from_slice(&(adtl.len() as u32).to_le_bytes());
        out.extend_from_slice(&adtl);
    }

    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in &clip.samples {
        let q = (s.as_f64() * PCM_SCALE).round().clamp(-32_768.0, 32_767.0) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    let riff_len = (out.len() - 8) as u32;
    out[4..8].copy_from_slice(&riff_len.to_le_bytes());
    out
}

pub fn write_wav<T: Real>(
    path: impl AsRef<Path>,
    clip: &AudioClip<T>,
    cues: &[CuePoint],
) -> Result<(), AudioError> {
    let path = path.as_ref();
    fs::write(path, encode_wav(clip, cues)).map_err(|source| AudioError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Turns sorted cue points into analysis windows.
///
/// Consecutive cues delimit windows; the last cue opens a window of
/// `default_duration` seconds clamped to the clip. Without cues the whole
/// clip is one window.
pub fn windows_from_cues<T: Real>(
    clip: &AudioClip<T>,
    cues: &[CuePoint],
    default_duration: f64,
) -> Vec<SampleWindow> {
    let len = clip.len();
    if cues.is_empty() {
        if len == 0 {
            return Vec::new();
        }
        return vec![SampleWindow {
            start: 0,
            end: len,
            label: "whole".into(),
        }];
    }
    let default_len = (default_duration * clip.sample_rate as f64).round() as usize;
    let mut windows = Vec::with_capacity(cues.len());
    for (i, cue) in cues.iter().enumerate() {
        let start = cue.position.min(len);
        let end = match cues.get(i + 1) {
            Some(next) => next.position.min(len),
            None => start.saturating_add(default_len).min(len),
        };
        if start < end {
            windows.push(SampleWindow {
                start,
                end,
                label: cue.label.clone(),
            });
        }
    }
    windows
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent RIFF builder used as the reference writer.
    fn riff(chunks: &[(&[u8; 4], Vec<u8>)]) -> Vec<u8> {
        let mut body = b"WAVE".to_vec();
        for (id, data) in chunks {
            body.extend_from_slice(*id);
            body.extend_from_slice(&(data.len() as u32).to_le_bytes());
            body.extend_from_slice(data);
            if data.len() % 2 == 1 {
                body.push(0);
            }
        }
        let mut out = b"RIFF".to_vec();
        out.extend_from_slice(&(body.len() as u32).to_le_bytes());
        out.extend_from_slice(&body);
        out
    }

    fn fmt_chunk(format: u16, channels: u16, rate: u32, bits: u16) -> Vec<u8> {
        let mut f = Vec::new();
        f.extend_from_slice(&format.to_le_bytes());
        f.extend_from_slice(&channels.to_le_bytes());
        f.extend_from_slice(&rate.to_le_bytes());
        f.extend_from_slice(&(rate * channels as u32 * bits as u32 / 8).to_le_bytes());
        f.extend_from_slice(&(channels * bits / 8).to_le_bytes());
        f.extend_from_slice(&bits.to_le_bytes());
        f
    }

    fn pcm(values: &[i16]) -> Vec<u8> {
        values.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    fn cue_chunk(positions: &[u32]) -> Vec<u8> {
        let mut c = (positions.len() as u32).to_le_bytes().to_vec();
        for (i, &p) in positions.iter().enumerate() {
            c.extend_from_slice(&(i as u32 + 1).to_le_bytes());
            c.extend_from_slice(&p.to_le_bytes());
            c.extend_from_slice(b"data");
            c.extend_from_slice(&[0; 8]);
            c.extend_from_slice(&p.to_le_bytes());
        }
        c
    }

    #[test]
    fn silence_decodes_to_zeros() {
        let bytes = riff(&[
            (b"fmt ", fmt_chunk(1, 2, 48_000, 16)),
            (b"data", vec![0; 400]),
        ]);
        let wav = parse_wav::<f64>(&bytes).unwrap();
        assert_eq!(wav.clip.len(), 100);
        assert!(wav.clip.samples().iter().all(|&s| s == 0.0));
        assert_eq!(wav.clip.channel_count_original(), 2);
        assert!(wav.cues.is_empty());
    }

    #[test]
    fn scaling_uses_32768() {
        let bytes = riff(&[
            (b"fmt ", fmt_chunk(1, 1, 44_100, 16)),
            (b"data", pcm(&[-32768, 16384, 32767])),
        ]);
        let clip = parse_wav::<f64>(&bytes).unwrap().clip;
        assert_eq!(clip.samples()[0], -1.0);
        assert_eq!(clip.samples()[1], 0.5);
        assert!(clip.samples()[2] < 1.0);
        assert!(!clip.nonstandard_rate());
    }

    #[test]
    fn stereo_is_averaged() {
        let bytes = riff(&[
            (b"fmt ", fmt_chunk(1, 2, 48_000, 16)),
            (b"data", pcm(&[16384, -16384, 16384, 0])),
        ]);
        let clip = parse_wav::<f64>(&bytes).unwrap().clip;
        assert_eq!(clip.samples(), &[0.0, 0.25]);
    }

    #[test]
    fn rejects_bad_magic_and_encodings() {
        assert!(matches!(
            parse_wav::<f64>(b"RIFX....WAVE"),
            Err(AudioError::NotWav)
        ));
        let float = riff(&[
            (b"fmt ", fmt_chunk(3, 1, 48_000, 32)),
            (b"data", vec![0; 8]),
        ]);
        assert!(matches!(
            parse_wav::<f64>(&float),
            Err(AudioError::UnsupportedEncoding(_))
        ));
        let pcm24 = riff(&[
            (b"fmt ", fmt_chunk(1, 1, 48_000, 24)),
            (b"data", vec![0; 6]),
        ]);
        assert!(matches!(
            parse_wav::<f64>(&pcm24),
            Err(AudioError::UnsupportedEncoding(_))
        ));
    }

    #[test]
    fn truncated_data_is_detected() {
        let mut bytes = riff(&[
            (b"fmt ", fmt_chunk(1, 1, 48_000, 16)),
            (b"data", pcm(&[1, 2, 3, 4])),
        ]);
        bytes.truncate(bytes.len() - 3);
        assert!(matches!(
            parse_wav::<f64>(&bytes),
            Err(AudioError::TruncatedFile(_))
        ));
    }

    #[test]
    fn cue_points_are_sorted_and_unknown_chunks_skipped() {
        let bytes = riff(&[
            (b"fmt ", fmt_chunk(1, 1, 48_000, 16)),
            (b"junk", vec![1, 2, 3]),
            (b"cue ", cue_chunk(&[5000, 100])),
            (b"data", vec![0; 20_000]),
        ]);
        let cues = parse_wav::<f64>(&bytes).unwrap().cues;
        let positions: Vec<usize> = cues.iter().map(|c| c.position).collect();
        assert_eq!(positions, vec![100, 5000]);
    }

    #[test]
    fn cue_size_mismatch_is_malformed() {
        let mut cue = cue_chunk(&[10, 20]);
        cue.truncate(cue.len() - 24);
        let bytes = riff(&[
            (b"fmt ", fmt_chunk(1, 1, 48_000, 16)),
            (b"cue ", cue),
            (b"data", vec![0; 100]),
        ]);
        assert!(matches!(
            parse_wav::<f64>(&bytes),
            Err(AudioError::MalformedCueChunk(_))
        ));
    }

    #[test]
    fn encode_round_trips_samples_cues_and_labels() {
        let samples: Vec<f64> = (0..1000).map(|i| ((i as f64) * 0.01).sin() * 0.7).collect();
        let clip = AudioClip::new(samples.clone(), 48_000).unwrap();
        let cues = vec![
            CuePoint {
                label: "a".into(),
                position: 0,
            },
            CuePoint {
                label: "second".into(),
                position: 600,
            },
        ];
        let wav = parse_wav::<f64>(&encode_wav(&clip, &cues)).unwrap();
        assert_eq!(wav.cues, cues);
        for (a, b) in samples.iter().zip(wav.clip.samples()) {
            assert!((a - b).abs() <= 1.0 / 32768.0);
        }
    }

    fn clip_of_seconds(seconds: usize) -> AudioClip<f32> {
        AudioClip::new(vec![0.0; seconds * 100], 100).unwrap()
    }

    #[test]
    fn windows_without_cues_cover_clip() {
        let w = windows_from_cues(&clip_of_seconds(60), &[], 600.0);
        assert_eq!(w.len(), 1);
        assert_eq!((w[0].start, w[0].end), (0, 6000));
    }

    #[test]
    fn windows_from_cue_pairs_and_trailing_cue() {
        let clip = clip_of_seconds(1800);
        let cues = vec![
            CuePoint {
                label: "s1".into(),
                position: 0,
            },
            CuePoint {
                label: "s2".into(),
                position: 600 * 100,
            },
        ];
        let w = windows_from_cues(&clip, &cues, 600.0);
        let spans: Vec<(usize, usize)> = w.iter().map(|w| (w.start, w.end)).collect();
        assert_eq!(spans, vec![(0, 60_000), (60_000, 120_000)]);
    }

    #[test]
    fn trailing_window_is_clamped() {
        let clip = clip_of_seconds(100);
        let cues = vec![CuePoint {
            label: "x".into(),
            position: 1000,
        }];
        let w = windows_from_cues(&clip, &cues, 600.0);
        assert_eq!((w[0].start, w[0].end), (1000, 10_000));
    }
}
