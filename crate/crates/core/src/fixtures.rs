//! Deterministic synthetic recordings with known ground truth.
//!
//! Calls are frequency-modulated tones gated by a pulse pattern. Each event
//! is scaled so that its RMS inside the species band sits at the scripted
//! SNR above the in-band noise RMS over the same span.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{AudioClip, AudioError};
use crate::filter::FirFilter;
use crate::scalar::Real;

/// Largest sample value that survives 16-bit PCM quantisation.
pub const PCM_MAX: f64 = 32767.0 / 32768.0;

const RAMP_SECONDS: f64 = 0.005;
const MEASURE_TAPS: usize = 513;
const PINK_TAPS: usize = 1025;

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("unknown species code {0:?}")]
    UnknownSpecies(String),
    #[error("invalid species {code}: {reason}")]
    InvalidSpecies { code: String, reason: String },
    #[error("invalid script: {0}")]
    InvalidScript(String),
    #[error(transparent)]
    Audio(#[from] AudioError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpecies {
    pub code: String,
    pub carrier_hz: f64,
    pub fm_depth_hz: f64,
    pub fm_rate_hz: f64,
    /// (on seconds, off seconds) per pulse.
    pub pulse_pattern: Vec<(f64, f64)>,
    pub band: (f64, f64),
}

impl SyntheticSpecies {
    pub fn new(
        code: &str,
        carrier_hz: f64,
        fm_depth_hz: f64,
        fm_rate_hz: f64,
        pulses: &[(f64, f64)],
        band: (f64, f64),
    ) -> Self {
        Self {
            code: code.to_string(),
            carrier_hz,
            fm_depth_hz,
            fm_rate_hz,
            pulse_pattern: pulses.to_vec(),
            band,
        }
    }

    /// Seconds from the first pulse onset to the end of the last pulse.
    pub fn call_duration(&self) -> f64 {
        let n = self.pulse_pattern.len();
        self.pulse_pattern
            .iter()
            .enumerate()
            .map(|(i, &(on, off))| if i + 1 == n { on } else { on + off })
            .sum()
    }

    pub fn validate(&self) -> Result<(), FixtureError> {
        let bad = |reason: &str| {
            Err(FixtureError::InvalidSpecies {
                code: self.code.clone(),
                reason: reason.to_string(),
            })
        };
        let (lo, hi) = self.band;
        if !(200.0 <= lo && lo < hi && hi <= 8000.0) {
            return bad("band must lie within 200..8000 Hz");
        }
        if !(lo <= self.carrier_hz - self.fm_depth_hz && self.carrier_hz + self.fm_depth_hz <= hi) {
            return bad("carrier sweep leaves the band");
        }
        if self.pulse_pattern.is_empty()
            || self
                .pulse_pattern
                .iter()
                .any(|&(on, off)| !(on > 0.0) || off < 0.0)
        {
            return bad("pulse pattern needs positive on-times");
        }
        if self.call_duration() >= 2.0 {
            return bad("call must be shorter than 2 s");
        }
        Ok(())
    }

    /// Renders one call at unit peak amplitude with per-call jitter from `rng`.
    pub fn render_call(&self, sample_rate: u32, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let sr = sample_rate as f64;
        let phase0 = rng.random::<f64>() * std::f64::consts::TAU;
        let fm_phase = rng.random::<f64>() * std::f64::consts::TAU;
        let carrier = self.carrier_hz * (1.0 + 0.01 * (rng.random::<f64>() - 0.5));
        let total = (self.call_duration() * sr).round() as usize;
        let mut out = vec![0.0; total];
        let mut t0 = 0.0;
        for &(on, off) in &self.pulse_pattern {
            let start = (t0 * sr).round() as usize;
            let end = (((t0 + on) * sr).round() as usize).min(total);
            let ramp = ((RAMP_SECONDS * sr) as usize).min((end - start) / 2).max(1);
            for n in start..end {
                let t = n as f64 / sr;
                let mut phase = std::f64::consts::TAU * carrier * t + phase0;
                if self.fm_rate_hz > 0.0 {
                    let arg = std::f64::consts::TAU * self.fm_rate_hz * t + fm_phase;
                    phase += self.fm_depth_hz / self.fm_rate_hz * (fm_phase.cos() - arg.cos());
                }
                let edge = (n - start).min(end - 1 - n);
                let gain = if edge < ramp {
                    0.5 - 0.5 * (std::f64::consts::PI * edge as f64 / ramp as f64).cos()
                } else {
                    1.0
                };
                out[n] = gain * phase.sin();
            }
            t0 += on + off;
        }
        out
    }
}

/// Ten species spread over 600..7500 Hz with distinct pulse rhythms.
pub fn roster() -> Vec<SyntheticSpecies> {
    vec![
        SyntheticSpecies::new("s01", 900.0, 80.0, 6.0, &[(0.12, 0.06); 5], (600.0, 1300.0)),
        SyntheticSpecies::new(
            "s02",
            1800.0,
            200.0,
            3.0,
            &[(0.3, 0.1); 2],
            (1400.0, 2300.0),
        ),
        SyntheticSpecies::new(
            "s03",
            2700.0,
            150.0,
            10.0,
            &[(0.06, 0.04); 8],
            (2300.0, 3100.0),
        ),
        SyntheticSpecies::new("s04", 3800.0, 300.0, 4.0, &[(0.6, 0.0)], (3300.0, 4400.0)),
        SyntheticSpecies::new(
            "s05",
            5200.0,
            250.0,
            8.0,
            &[(0.08, 0.04); 6],
            (4700.0, 5800.0),
        ),
        SyntheticSpecies::new(
            "s06",
            6400.0,
            300.0,
            5.0,
            &[(0.2, 0.05); 3],
            (5900.0, 7000.0),
        ),
        SyntheticSpecies::new("s07", 7150.0, 150.0, 12.0, &[(0.4, 0.0)], (6900.0, 7450.0)),
        SyntheticSpecies::new(
            "s08",
            1200.0,
            150.0,
            2.0,
            &[(0.15, 0.15); 3],
            (900.0, 1500.0),
        ),
        SyntheticSpecies::new(
            "s09",
            3300.0,
            100.0,
            7.0,
            &[(0.05, 0.03); 10],
            (3000.0, 3600.0),
        ),
        SyntheticSpecies::new(
            "s10",
            4500.0,
            400.0,
            1.5,
            &[(0.7, 0.1), (0.3, 0.0)],
            (3900.0, 5100.0),
        ),
    ]
}

pub fn standard_five() -> Vec<SyntheticSpecies> {
    roster().into_iter().take(5).collect()
}

/// Five species with two shared bands: 1600..3200 Hz and 5400..6800 Hz.
pub fn overlapping_five() -> Vec<SyntheticSpecies> {
    vec![
        SyntheticSpecies::new("o01", 900.0, 80.0, 6.0, &[(0.12, 0.06); 5], (600.0, 1300.0)),
        SyntheticSpecies::new(
            "o02",
            2300.0,
            600.0,
            3.0,
            &[(0.3, 0.1); 2],
            (1600.0, 3200.0),
        ),
        SyntheticSpecies::new(
            "o03",
            2500.0,
            600.0,
            4.0,
            &[(0.06, 0.04); 8],
            (1600.0, 3200.0),
        ),
        SyntheticSpecies::new(
            "o04",
            6000.0,
            500.0,
            5.0,
            &[(0.2, 0.05); 3],
            (5400.0, 6800.0),
        ),
        SyntheticSpecies::new(
            "o05",
            6250.0,
            500.0,
            6.0,
            &[(0.08, 0.04); 6],
            (5400.0, 6800.0),
        ),
    ]
}

/// A steady 2 kHz tone burst for segmentation tests.
pub fn burst_species(seconds: f64) -> SyntheticSpecies {
    SyntheticSpecies::new("b2k", 2000.0, 0.0, 0.0, &[(seconds, 0.0)], (1800.0, 2200.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseKind {
    White,
    Pink,
    /// White noise band-limited by the segmentation filter design.
    Band {
        low_hz: f64,
        high_hz: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    #[serde(flatten)]
    pub kind: NoiseKind,
    /// Broadband RMS in dB relative to full scale.
    pub level_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptEvent {
    pub time: f64,
    pub species: String,
    pub snr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneScript {
    pub duration: f64,
    pub events: Vec<ScriptEvent>,
    pub noise: NoiseSpec,
    /// Species definitions; codes missing here are looked up in [`roster`].
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub species: Vec<SyntheticSpecies>,
}

impl SceneScript {
    pub fn lookup(&self, code: &str) -> Result<SyntheticSpecies, FixtureError> {
        self.species
            .iter()
            .find(|s| s.code == code)
            .cloned()
            .or_else(|| roster().into_iter().find(|s| s.code == code))
            .ok_or_else(|| FixtureError::UnknownSpecies(code.to_string()))
    }

    pub fn validate(&self) -> Result<(), FixtureError> {
        if !(self.duration > 0.0) {
            return Err(FixtureError::InvalidScript(
                "duration must be positive".into(),
            ));
        }
        if self.events.windows(2).any(|w| w[0].time > w[1].time) {
            return Err(FixtureError::InvalidScript(
                "events must be sorted by time".into(),
            ));
        }
        for e in &self.events {
            let sp = self.lookup(&e.species)?;
            sp.validate()?;
            if e.time < 0.0 || e.time + sp.call_duration() > self.duration {
                return Err(FixtureError::InvalidScript(format!(
                    "{} call at {:.3} s does not fit in the scene",
                    e.species, e.time
                )));
            }
        }
        Ok(())
    }
}

/// Scripted call placement in samples (half-open).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthEvent {
    pub species: String,
    pub start: usize,
    pub end: usize,
    pub snr_db: f64,
}

fn event_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Linear-phase FIR with a -3 dB/octave magnitude, unity gain at 1 kHz.
pub fn pink_fir(sample_rate: u32) -> Vec<f64> {
    let n = PINK_TAPS;
    let c = (n - 1) as f64 / 2.0;
    let sr = sample_rate as f64;
    let mag = |k: usize| {
        let f = (k as f64 * sr / n as f64).max(20.0);
        (1000.0 / f).sqrt()
    };
    let window = crate::filter::hamming(n);
    (0..n)
        .map(|i| {
            let x = i as f64 - c;
            let mut acc = mag(0);
            for k in 1..=(n - 1) / 2 {
                acc += 2.0 * mag(k) * (std::f64::consts::TAU * k as f64 * x / n as f64).cos();
            }
            acc / n as f64 * window[i]
        })
        .collect()
}

fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

/// Renders `len` samples of noise at the requested broadband RMS.
pub fn render_noise(
    spec: &NoiseSpec,
    len: usize,
    sample_rate: u32,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let white: Vec<f64> = (0..len)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    let shaped = match spec.kind {
        NoiseKind::White => white,
        NoiseKind::Pink => FirFilter::<f64>::new(&pink_fir(sample_rate)).apply(&white),
        NoiseKind::Band { low_hz, high_hz } => {
            FirFilter::<f64>::bandpass(low_hz, high_hz, MEASURE_TAPS, sample_rate as f64)
                .apply(&white)
        }
    };
    let target = 10f64.powf(spec.level_db / 20.0);
    let current = rms(&shaped);
    let gain = if current > 0.0 { target / current } else { 0.0 };
    shaped.into_iter().map(|v| v * gain).collect()
}

fn band_filter(band: (f64, f64), sample_rate: u32) -> FirFilter<f64> {
    FirFilter::bandpass(band.0, band.1, MEASURE_TAPS, sample_rate as f64)
}

/// Band-limited RMS of `signal[start..end]`, filtering with a margin of
/// context on each side.
pub fn band_rms(
    signal: &[f64],
    start: usize,
    end: usize,
    band: (f64, f64),
    sample_rate: u32,
) -> f64 {
    filtered_rms(&band_filter(band, sample_rate), signal, start, end)
}

fn filtered_rms(filter: &FirFilter<f64>, signal: &[f64], start: usize, end: usize) -> f64 {
    let mut out = vec![0.0; end - start];
    filter.apply_into(signal, start, &mut out);
    rms(&out)
}

/// Mixes one call into `mix` at `start` so that its in-band RMS is `snr_db`
/// above the in-band RMS of `noise` over the same span.
fn place_call(
    mix: &mut [f64],
    noise: &[f64],
    call: &[f64],
    start: usize,
    filter: &FirFilter<f64>,
    snr_db: f64,
) {
    let end = start + call.len();
    let noise_rms = filtered_rms(filter, noise, start, end);
    let call_rms = filtered_rms(filter, call, 0, call.len());
    let reference = if noise_rms > 0.0 { noise_rms } else { 1e-3 };
    let gain = if call_rms > 0.0 {
        reference * 10f64.powf(snr_db / 20.0) / call_rms
    } else {
        0.0
    };
    for (m, c) in mix[start..end].iter_mut().zip(call) {
        *m += gain * c;
    }
}

fn to_clip<T: Real>(mix: Vec<f64>, sample_rate: u32) -> Result<AudioClip<T>, FixtureError> {
    let samples = mix
        .into_iter()
        .map(|v| T::of(v.clamp(-1.0, PCM_MAX)))
        .collect();
    Ok(AudioClip::new(samples, sample_rate)?)
}

/// Renders a scripted scene. The same script, rate and seed always give the
/// same samples.
pub fn synthesize_scene<T: Real>(
    script: &SceneScript,
    sample_rate: u32,
    seed: u64,
) -> Result<(AudioClip<T>, Vec<TruthEvent>), FixtureError> {
    script.validate()?;
    let len = (script.duration * sample_rate as f64).round() as usize;
    let noise = render_noise(&script.noise, len, sample_rate, &mut event_rng(seed, 0));
    let mut mix = noise.clone();
    let mut truth = Vec::with_capacity(script.events.len());
    for (i, e) in script.events.iter().enumerate() {
        let sp = script.lookup(&e.species)?;
        let call = sp.render_call(sample_rate, &mut event_rng(seed, i as u64 + 1));
        let start = (e.time * sample_rate as f64).round() as usize;
        let call = &call[..call.len().min(len - start)];
        place_call(
            &mut mix,
            &noise,
            call,
            start,
            &band_filter(sp.band, sample_rate),
            e.snr_db,
        );
        truth.push(TruthEvent {
            species: sp.code.clone(),
            start,
            end: start + call.len(),
            snr_db: e.snr_db,
        });
    }
    Ok((to_clip(mix, sample_rate)?, truth))
}

/// A call rendered in its own short clip, with the call span marked.
#[derive(Debug, Clone)]
pub struct LabelledCall<T> {
    pub species: usize,
    pub clip: AudioClip<T>,
    pub start: usize,
    pub end: usize,
}

impl<T> LabelledCall<T> {
    pub fn duration_seconds(&self, sample_rate: u32) -> f64 {
        (self.end - self.start) as f64 / sample_rate as f64
    }
}

/// Calls of each species until `seconds_per_species` of call time is
/// reached (the last call may overshoot), each padded with `padding`
/// seconds of noise on both sides.
pub fn labelled_calls<T: Real>(
    species: &[SyntheticSpecies],
    seconds_per_species: f64,
    snr_db: f64,
    noise: &NoiseSpec,
    padding: f64,
    sample_rate: u32,
    seed: u64,
) -> Result<Vec<LabelledCall<T>>, FixtureError> {
    let pad = (padding * sample_rate as f64).round() as usize;
    let mut out = Vec::new();
    for (s, sp) in species.iter().enumerate() {
        sp.validate()?;
        let filter = band_filter(sp.band, sample_rate);
        let mut rng = event_rng(seed, s as u64 + 1);
        let call_len = (sp.call_duration() * sample_rate as f64).round() as usize;
        let count = (seconds_per_species * sample_rate as f64 / call_len as f64)
            .ceil()
            .max(1.0) as usize;
        let clip_len = call_len + 2 * pad;
        // one noise stream per species, cut into per-call backgrounds
        let noise_all = render_noise(noise, count * clip_len, sample_rate, &mut rng);
        for background in noise_all.chunks_exact(clip_len) {
            let call = sp.render_call(sample_rate, &mut rng);
            let mut mix = background.to_vec();
            place_call(&mut mix, background, &call, pad, &filter, snr_db);
            out.push(LabelledCall {
                species: s,
                clip: to_clip(mix, sample_rate)?,
                start: pad,
                end: pad + call.len(),
            });
        }
    }
    Ok(out)
}
