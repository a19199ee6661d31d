//! Linear-phase FIR design and FFT-based filtering.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::scalar::Real;

/// Symmetric Hamming window of length `n`.
pub fn hamming(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let denom = (n - 1) as f64;
    (0..n)
        .map(|i| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * i as f64 / denom).cos())
        .collect()
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Hamming-windowed sinc band-pass taps. Edges are in Hz; `low = 0` gives a
/// low-pass and `high = rate/2` a high-pass.
pub fn design_bandpass(low: f64, high: f64, taps: usize, sample_rate: f64) -> Vec<f64> {
    let f1 = low / sample_rate;
    let f2 = high / sample_rate;
    let centre = (taps - 1) as f64 / 2.0;
    hamming(taps)
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let m = i as f64 - centre;
            w * (2.0 * f2 * sinc(2.0 * f2 * m) - 2.0 * f1 * sinc(2.0 * f1 * m))
        })
        .collect()
}

/// FIR filter applied by overlap-add FFT convolution with its group delay
/// removed: output sample `n` lines up with input sample `n`.
#[derive(Clone)]
pub struct FirFilter<T: Real> {
    taps: Vec<T>,
    block: usize,
    spectrum: Vec<Complex<T>>,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Real> std::fmt::Debug for FirFilter<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FirFilter")
            .field("taps", &self.taps.len())
            .field("block", &self.block)
            .finish()
    }
}

impl<T: Real> FirFilter<T> {
    pub fn new(taps: &[f64]) -> Self {
        assert!(!taps.is_empty(), "filter needs at least one tap");
        let fft_len = (4 * taps.len()).next_power_of_two().max(4096);
        let mut planner = FftPlanner::<T>::new();
        let forward = planner.plan_fft_forward(fft_len);
        let inverse = planner.plan_fft_inverse(fft_len);
        let mut spectrum = vec![Complex::new(T::zero(), T::zero()); fft_len];
        for (s, &h) in spectrum.iter_mut().zip(taps) {
            s.re = T::of(h);
        }
        forward.process(&mut spectrum);
        // fold the inverse FFT normalisation into the kernel
        let norm = T::of(1.0 / fft_len as f64);
        for s in &mut spectrum {
            *s = *s * norm;
        }
        Self {
            taps: taps.iter().map(|&h| T::of(h)).collect(),
            block: fft_len - taps.len() + 1,
            spectrum,
            forward,
            inverse,
        }
    }

    pub fn bandpass(low: f64, high: f64, taps: usize, sample_rate: f64) -> Self {
        Self::new(&design_bandpass(low, high, taps, sample_rate))
    }

    pub fn taps(&self) -> &[T] {
        &self.taps
    }

    pub fn delay(&self) -> usize {
        (self.taps.len() - 1) / 2
    }

    /// Filters `input` treating samples outside it as zero.
    pub fn apply(&self, input: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); input.len()];
        self.apply_into(input, 0, &mut out);
        out
    }

    /// Computes filtered samples for positions `offset .. offset + out.len()`
    /// of `input` (zero outside `input`), group-delay compensated.
    pub fn apply_into(&self, input: &[T], offset: usize, out: &mut [T]) {
        if out.is_empty() {
            return;
        }
        let delay = self.delay();
        let ntaps = self.taps.len();
        let fft_len = self.spectrum.len();
        // full-convolution index k = n + delay; input needed: [k - ntaps + 1, k]
        let first_k = offset + delay;
        let last_k = offset + out.len() - 1 + delay;
        let in_lo = (first_k + 1).saturating_sub(ntaps);
        let in_hi = (last_k + 1).min(input.len());
        let mut buf = vec![Complex::new(T::zero(), T::zero()); fft_len];
        let mut block_start = in_lo;
        while block_start < in_hi {
            let block_end = (block_start + self.block).min(in_hi);
            for (b, &x) in buf.iter_mut().zip(&input[block_start..block_end]) {
                *b = Complex::new(x, T::zero());
            }
            for b in buf.iter_mut().skip(block_end - block_start) {
                *b = Complex::new(T::zero(), T::zero());
            }
            self.forward.process(&mut buf);
            for (b, h) in buf.iter_mut().zip(&self.spectrum) {
                *b = *b * *h;
            }
            self.inverse.process(&mut buf);
            // block contributes to full-convolution indices block_start .. block_end + ntaps - 1
            let k_lo = block_start.max(first_k);
            let k_hi = (block_end + ntaps - 1).min(last_k + 1);
            for k in k_lo..k_hi {
                out[k - first_k] = out[k - first_k] + buf[k - block_start].re;
            }
            block_start = block_end;
        }
    }
}
