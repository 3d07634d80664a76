//! Scalar summaries used by the level-1 catalog.

use serde::{Deserialize, Serialize};

use super::lineage::Statistic;
use super::stft::Spectrogram;

/// Statistics applied to the time series, each DWT band and (at level 2)
/// the difference signals, in column order.
pub const STATISTICAL: [Statistic; 15] = [
    Statistic::Mean,
    Statistic::Std,
    Statistic::Variance,
    Statistic::Skewness,
    Statistic::Kurtosis,
    Statistic::Rms,
    Statistic::Min,
    Statistic::Max,
    Statistic::Range,
    Statistic::Median,
    Statistic::Iqr,
    Statistic::Mad,
    Statistic::Zcr,
    Statistic::LineLength,
    Statistic::HistEntropy,
];

/// Spectral statistics of the STFT; all but `FluxMean` use the mean spectrum.
pub const SPECTRAL: [Statistic; 10] = [
    Statistic::Centroid,
    Statistic::Spread,
    Statistic::Rolloff85,
    Statistic::Flatness,
    Statistic::SpectralEntropy,
    Statistic::FluxMean,
    Statistic::BandEnergyRatio(0),
    Statistic::BandEnergyRatio(1),
    Statistic::BandEnergyRatio(2),
    Statistic::BandEnergyRatio(3),
];

pub const PEAK_TROUGH: [Statistic; 7] = [
    Statistic::PeakCount,
    Statistic::TroughCount,
    Statistic::PeakAmpMean,
    Statistic::PeakAmpStd,
    Statistic::IpiMean,
    Statistic::IpiStd,
    Statistic::PeakTroughAmpMean,
];

const HIST_BINS: usize = 16;
const ROLLOFF_FRACTION: f64 = 0.85;

pub fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Shannon entropy (natural log) of the normalized energy distribution
/// `p_i = x_i^2 / sum x^2`; 0 for an all-zero input.
pub fn energy_entropy(x: &[f64]) -> f64 {
    let e = energy(x);
    if e <= 0.0 {
        return 0.0;
    }
    shannon(x.iter().map(|v| v * v / e))
}

fn shannon(p: impl Iterator<Item = f64>) -> f64 {
    (-p.filter(|&p| p > 0.0).map(|p| p * p.ln()).sum::<f64>()).max(0.0)
}

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        0.0
    } else {
        x.iter().sum::<f64>() / x.len() as f64
    }
}

/// Population variance.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    mean_of(x, |v| (v - m).powi(2))
}

fn mean_of(x: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    if x.is_empty() {
        0.0
    } else {
        x.iter().map(|&v| f(v)).sum::<f64>() / x.len() as f64
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Evaluates [`STATISTICAL`] on `x`, in order.
pub fn statistical(x: &[f64]) -> [f64; 15] {
    if x.is_empty() {
        return [0.0; 15];
    }
    let n = x.len() as f64;
    let m = mean(x);
    let m2 = mean_of(x, |v| (v - m).powi(2));
    let std = m2.sqrt();
    let degenerate = m2 <= 1e-24 * (1.0 + m * m);
    let (skew, kurt) = if degenerate {
        (0.0, 0.0)
    } else {
        let m3 = mean_of(x, |v| (v - m).powi(3));
        let m4 = mean_of(x, |v| (v - m).powi(4));
        (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
    };
    let rms = mean_of(x, |v| v * v).sqrt();
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
    let median = quantile(&sorted, 0.5);
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let mad = mean_of(x, |v| (v - m).abs());
    let zcr = if x.len() < 2 {
        0.0
    } else {
        x.windows(2).filter(|w| w[0] * w[1] < 0.0).count() as f64 / (n - 1.0)
    };
    let line_length: f64 = x.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    let hist_entropy = histogram_entropy(x, min, max);
    [
        m,
        std,
        m2,
        skew,
        kurt,
        rms,
        min,
        max,
        max - min,
        median,
        iqr,
        mad,
        zcr,
        line_length,
        hist_entropy,
    ]
}

fn histogram_entropy(x: &[f64], min: f64, max: f64) -> f64 {
    let range = max - min;
    if !(range > 0.0) {
        return 0.0;
    }
    let mut counts = [0usize; HIST_BINS];
    for &v in x {
        let bin = (((v - min) / range) * HIST_BINS as f64) as usize;
        counts[bin.min(HIST_BINS - 1)] += 1;
    }
    let n = x.len() as f64;
    shannon(counts.iter().map(|&c| c as f64 / n))
}

/// Frequency (Hz) of the strongest non-DC bin of the mean spectrum; 0 for a
/// silent signal.
pub fn dominant_frequency(spec: &Spectrogram, rate: f64) -> f64 {
    let mean = spec.mean_spectrum();
    if mean.len() < 2 {
        return 0.0;
    }
    let best = (1..mean.len()).fold(1, |best, b| if mean[b] > mean[best] { b } else { best });
    if mean[best] > 0.0 {
        spec.bin_frequency(best, rate)
    } else {
        0.0
    }
}

/// Evaluates [`SPECTRAL`] on a spectrogram, in order.
pub fn spectral(spec: &Spectrogram, rate: f64) -> [f64; 10] {
    let mean = spec.mean_spectrum();
    let freqs: Vec<f64> = (0..mean.len()).map(|b| spec.bin_frequency(b, rate)).collect();
    let total: f64 = mean.iter().sum();
    let mut out = [0.0; 10];
    if total > 0.0 {
        let centroid = freqs.iter().zip(&mean).map(|(f, m)| f * m).sum::<f64>() / total;
        let spread = (freqs
            .iter()
            .zip(&mean)
            .map(|(f, m)| (f - centroid).powi(2) * m)
            .sum::<f64>()
            / total)
            .sqrt();
        let mut cumulative = 0.0;
        let mut rolloff = freqs[freqs.len() - 1];
        for (f, m) in freqs.iter().zip(&mean) {
            cumulative += m;
            if cumulative >= ROLLOFF_FRACTION * total {
                rolloff = *f;
                break;
            }
        }
        let log_mean = mean.iter().map(|m| m.max(1e-12).ln()).sum::<f64>() / mean.len() as f64;
        let flatness = log_mean.exp() / (total / mean.len() as f64);
        let power: f64 = mean.iter().map(|m| m * m).sum();
        let entropy = shannon(mean.iter().map(|m| m * m / power));
        out[..5].copy_from_slice(&[centroid, spread, rolloff, flatness, entropy]);
        out[6..].copy_from_slice(&band_energy_ratios(&mean, &freqs, rate));
    }
    out[5] = spectral_flux(spec);
    out
}

fn spectral_flux(spec: &Spectrogram) -> f64 {
    if spec.frames.len() < 2 {
        return 0.0;
    }
    let flux: f64 = spec
        .frames
        .windows(2)
        .map(|w| {
            w[0].iter()
                .zip(&w[1])
                .map(|(a, b)| (b - a).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .sum();
    flux / (spec.frames.len() - 1) as f64
}

/// Share of non-DC spectral power in four log-spaced bands between the
/// first bin frequency and Nyquist.
fn band_energy_ratios(mean: &[f64], freqs: &[f64], rate: f64) -> [f64; 4] {
    let mut out = [0.0; 4];
    if mean.len() < 2 {
        return out;
    }
    let lo = freqs[1];
    let hi = rate / 2.0;
    let edges: Vec<f64> = (0..=4).map(|i| lo * (hi / lo).powf(i as f64 / 4.0)).collect();
    let mut total = 0.0;
    for (f, m) in freqs.iter().zip(mean).skip(1) {
        let p = m * m;
        total += p;
        let band = (0..4).find(|&i| *f < edges[i + 1]).unwrap_or(3);
        out[band] += p;
    }
    if total > 0.0 {
        out.iter_mut().for_each(|v| *v /= total);
    }
    out
}

/// Peak detection parameters, as fractions of the signal's range and length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakConfig {
    pub prominence_frac: f64,
    pub min_separation_frac: f64,
}

impl Default for PeakConfig {
    fn default() -> Self {
        Self {
            prominence_frac: 0.1,
            min_separation_frac: 0.05,
        }
    }
}

fn local_maxima(x: &[f64]) -> Vec<usize> {
    let mut peaks = Vec::new();
    let n = x.len();
    let mut i = 1;
    while i + 1 < n {
        if x[i - 1] < x[i] {
            let mut ahead = i + 1;
            while ahead + 1 < n && x[ahead] == x[i] {
                ahead += 1;
            }
            if x[ahead] < x[i] {
                peaks.push((i + ahead - 1) / 2);
                i = ahead;
                continue;
            }
        }
        i += 1;
    }
    peaks
}

fn prominence(x: &[f64], peak: usize) -> f64 {
    let h = x[peak];
    let mut left_min = h;
    for i in (0..peak).rev() {
        if x[i] > h {
            break;
        }
        left_min = left_min.min(x[i]);
    }
    let mut right_min = h;
    for &v in &x[peak + 1..] {
        if v > h {
            break;
        }
        right_min = right_min.min(v);
    }
    h - left_min.max(right_min)
}

/// Indices of prominent local maxima, at least the configured distance apart.
pub fn find_peaks(x: &[f64], config: &PeakConfig) -> Vec<usize> {
    if x.len() < 3 {
        return Vec::new();
    }
    let (min, max) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = max - min;
    if !(range > 0.0) {
        return Vec::new();
    }
    let threshold = config.prominence_frac * range;
    let candidates: Vec<usize> = local_maxima(x)
        .into_iter()
        .filter(|&p| {
            let prom = prominence(x, p);
            prom > 0.0 && prom >= threshold
        })
        .collect();
    let distance = ((config.min_separation_frac * x.len() as f64).ceil() as usize).max(1);
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| x[candidates[b]].total_cmp(&x[candidates[a]]).then(a.cmp(&b)));
    let mut keep = vec![true; candidates.len()];
    for &i in &order {
        if !keep[i] {
            continue;
        }
        for j in 0..candidates.len() {
            if j != i && keep[j] && candidates[i].abs_diff(candidates[j]) < distance {
                keep[j] = false;
            }
        }
    }
    candidates
        .into_iter()
        .zip(keep)
        .filter_map(|(p, k)| k.then_some(p))
        .collect()
}

/// Evaluates [`PEAK_TROUGH`] on the time series, in order.
pub fn peak_trough(x: &[f64], rate: f64, config: &PeakConfig) -> [f64; 7] {
    let peaks = find_peaks(x, config);
    let negated: Vec<f64> = x.iter().map(|v| -v).collect();
    let troughs = find_peaks(&negated, config);
    let amps: Vec<f64> = peaks.iter().map(|&p| x[p]).collect();
    let intervals: Vec<f64> = peaks
        .windows(2)
        .map(|w| (w[1] - w[0]) as f64 / rate)
        .collect();
    let drops: Vec<f64> = peaks
        .iter()
        .filter_map(|&p| troughs.iter().find(|&&t| t > p).map(|&t| x[p] - x[t]))
        .collect();
    [
        peaks.len() as f64,
        troughs.len() as f64,
        mean(&amps),
        variance(&amps).sqrt(),
        mean(&intervals),
        variance(&intervals).sqrt(),
        mean(&drops),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::stft::stft;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};
    use std::f64::consts::PI;

    fn stat(x: &[f64], s: Statistic) -> f64 {
        statistical(x)[STATISTICAL.iter().position(|&t| t == s).unwrap()]
    }

    #[test]
    fn gaussian_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let x: Vec<f64> = (0..10_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        // direct moment oracle
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let c2 = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
        let c3 = x.iter().map(|v| (v - m).powi(3)).sum::<f64>() / n;
        let c4 = x.iter().map(|v| (v - m).powi(4)).sum::<f64>() / n;
        let skew = stat(&x, Statistic::Skewness);
        let kurt = stat(&x, Statistic::Kurtosis);
        assert!((skew - c3 / c2.powf(1.5)).abs() < 1e-12);
        assert!((kurt - (c4 / (c2 * c2) - 3.0)).abs() < 1e-12);
        assert!(skew.abs() < 0.1);
        assert!(kurt.abs() < 0.2);
    }

    #[test]
    fn constant_signal() {
        let x = [3.0; 64];
        let s = statistical(&x);
        assert_eq!(stat(&x, Statistic::Std), 0.0);
        assert_eq!(stat(&x, Statistic::Zcr), 0.0);
        assert_eq!(stat(&x, Statistic::Skewness), 0.0);
        assert_eq!(stat(&x, Statistic::HistEntropy), 0.0);
        assert!(s.iter().all(|v| v.is_finite()));
        assert_eq!(peak_trough(&x, 100.0, &PeakConfig::default())[0], 0.0);
    }

    #[test]
    fn sine_rms() {
        let a = 2.5;
        let x: Vec<f64> = (0..1000).map(|i| a * (2.0 * PI * 7.0 * i as f64 / 1000.0).sin()).collect();
        assert!((stat(&x, Statistic::Rms) - a / 2f64.sqrt()).abs() < 1e-3);
    }

    #[test]
    fn quantiles_and_mad() {
        let x = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(stat(&x, Statistic::Median), 2.5);
        assert_eq!(stat(&x, Statistic::Iqr), 1.5);
        assert_eq!(stat(&x, Statistic::Mad), 1.0);
        assert_eq!(stat(&x, Statistic::LineLength), 3.0 + 2.0 + 1.0);
        assert_eq!(stat(&[1.0, -1.0, 1.0, 1.0], Statistic::Zcr), 2.0 / 3.0);
    }

    #[test]
    fn uniform_histogram_entropy_is_log16() {
        let x: Vec<f64> = (0..1600).map(|i| i as f64).collect();
        assert!((stat(&x, Statistic::HistEntropy) - 16f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn sine_spectrum() {
        let rate = 1000.0;
        let x: Vec<f64> = (0..4096).map(|i| (2.0 * PI * 125.0 * i as f64 / rate).sin()).collect();
        let spec = stft(&x, 256, 128).unwrap();
        assert!((dominant_frequency(&spec, rate) - 125.0).abs() < 1e-9);
        let s = spectral(&spec, rate);
        assert!((s[0] - 125.0).abs() < 5.0, "centroid {}", s[0]);
        assert!((s[2] - 125.0).abs() < 4.0, "rolloff {}", s[2]);
        let ratios: f64 = s[6..].iter().sum();
        assert!((ratios - 1.0).abs() < 1e-12);
        assert!(s.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn silent_spectrum_is_zero() {
        let spec = stft(&[0.0; 512], 128, 64).unwrap();
        assert_eq!(spectral(&spec, 100.0), [0.0; 10]);
        assert_eq!(dominant_frequency(&spec, 100.0), 0.0);
    }

    #[test]
    fn peaks_of_sine() {
        let rate = 100.0;
        let x: Vec<f64> = (0..500).map(|i| (2.0 * PI * 2.0 * i as f64 / rate).sin()).collect();
        let p = peak_trough(&x, rate, &PeakConfig::default());
        assert_eq!(p[0], 10.0);
        assert_eq!(p[1], 10.0);
        assert!((p[2] - 1.0).abs() < 5e-3);
        assert!((p[4] - 0.5).abs() < 0.011);
        assert!(p[5] < 0.011);
        assert!((p[6] - 2.0).abs() < 1e-2);
    }

    #[test]
    fn ripple_is_not_a_peak() {
        let mut x: Vec<f64> = (0..200).map(|i| (2.0 * PI * i as f64 / 200.0).sin()).collect();
        x[20] += 0.01;
        assert_eq!(find_peaks(&x, &PeakConfig::default()).len(), 1);
    }
}
