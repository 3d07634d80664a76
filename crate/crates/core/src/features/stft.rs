//! Hann-windowed short-time Fourier transform.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::{Error, Result};

/// Magnitude spectrogram: `frames[t][b]` for bins `0..=window_len/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub window_len: usize,
    pub hop: usize,
    pub frames: Vec<Vec<f64>>,
}

impl Spectrogram {
    pub fn bins(&self) -> usize {
        self.window_len / 2 + 1
    }

    /// Frequency of bin `b` in Hz.
    pub fn bin_frequency(&self, b: usize, sample_rate_hz: f64) -> f64 {
        b as f64 * sample_rate_hz / self.window_len as f64
    }

    /// Magnitude spectrum averaged over frames.
    pub fn mean_spectrum(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.bins()];
        for frame in &self.frames {
            for (m, v) in mean.iter_mut().zip(frame) {
                *m += v;
            }
        }
        let n = self.frames.len().max(1) as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        mean
    }
}

/// Periodic Hann window.
pub fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / len as f64).cos())
        .collect()
}

pub fn stft(samples: &[f64], window_len: usize, hop: usize) -> Result<Spectrogram> {
    if window_len == 0 || !window_len.is_power_of_two() {
        return Err(Error::Argument(format!(
            "STFT window {window_len} is not a power of two"
        )));
    }
    if window_len > samples.len() {
        return Err(Error::Argument(format!(
            "STFT window {window_len} is longer than the signal ({} samples)",
            samples.len()
        )));
    }
    if hop == 0 || hop > window_len {
        return Err(Error::Argument(format!(
            "STFT hop {hop} must be in 1..={window_len}"
        )));
    }
    let window = hann(window_len);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(window_len);
    let count = 1 + (samples.len() - window_len) / hop;
    let mut buffer = vec![Complex::new(0.0, 0.0); window_len];
    let mut frames = Vec::with_capacity(count);
    for t in 0..count {
        let start = t * hop;
        for (i, slot) in buffer.iter_mut().enumerate() {
            *slot = Complex::new(samples[start + i] * window[i], 0.0);
        }
        fft.process(&mut buffer);
        frames.push(buffer[..=window_len / 2].iter().map(|c| c.norm()).collect());
    }
    Ok(Spectrogram {
        window_len,
        hop,
        frames,
    })
}

/// Largest power of two not exceeding `n` (0 for `n == 0`).
pub fn prev_power_of_two(n: usize) -> usize {
    if n == 0 {
        0
    } else {
        1 << (usize::BITS - 1 - n.leading_zeros())
    }
}
