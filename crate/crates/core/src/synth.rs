//! Seeded synthetic datasets used by tests, acceptance runs and demos.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::SignalRecord;
use crate::features::FeatureMatrix;
use crate::Result;

fn gaussian(rng: &mut ChaCha8Rng, n: usize, std: f64) -> Vec<f64> {
    let normal = Normal::new(0.0, std).expect("std is finite and >= 0");
    (0..n).map(|_| normal.sample(rng)).collect()
}

fn build<F>(n_per_class: usize, rate: f64, prefix: &str, seed: u64, mut gen: F) -> Result<Vec<SignalRecord>>
where
    F: FnMut(usize, &mut ChaCha8Rng) -> Vec<f64>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..2 * n_per_class)
        .map(|i| {
            let label = i % 2;
            let samples = gen(label, &mut rng);
            SignalRecord::new(format!("{prefix}{i:04}"), samples, rate, label)
        })
        .collect()
}

/// Unit sinusoids at `freqs[label]` with random phase plus white noise at
/// `snr_db`.
pub fn sinusoid_classes(
    n_per_class: usize,
    freqs: [f64; 2],
    rate: f64,
    len: usize,
    snr_db: f64,
    seed: u64,
) -> Result<Vec<SignalRecord>> {
    // Unit-amplitude sine has power 1/2.
    let noise_std = (0.5 / 10f64.powf(snr_db / 10.0)).sqrt();
    build(n_per_class, rate, "sin", seed, |label, rng| {
        let phase = rng.random_range(0.0..TAU);
        let noise = gaussian(rng, len, noise_std);
        (0..len)
            .map(|t| (TAU * freqs[label] * t as f64 / rate + phase).sin() + noise[t])
            .collect()
    })
}

/// Same waveform family for both classes, scaled by `amps[label]`; the
/// classes differ in total energy.
pub fn amplitude_classes(
    n_per_class: usize,
    amps: [f64; 2],
    rate: f64,
    len: usize,
    seed: u64,
) -> Result<Vec<SignalRecord>> {
    build(n_per_class, rate, "amp", seed, |label, rng| {
        let f = rng.random_range(8.0..12.0);
        let phase = rng.random_range(0.0..TAU);
        let noise = gaussian(rng, len, 0.1);
        (0..len)
            .map(|t| amps[label] * ((TAU * f * t as f64 / rate + phase).sin() + noise[t]))
            .collect()
    })
}

/// Spike trains with noise; class 1 is the sign-inverted version of a class
/// 0 draw. Energies, spectra and wavelet band energies have the same
/// distribution in both classes, so only sign-aware statistics (skewness,
/// extremes) separate them.
pub fn mirrored_pulse_classes(n_per_class: usize, rate: f64, len: usize, seed: u64) -> Result<Vec<SignalRecord>> {
    build(n_per_class, rate, "pulse", seed, |label, rng| {
        let period = rng.random_range(18..30usize);
        let offset = rng.random_range(0..period);
        let height = rng.random_range(0.8..1.2);
        let noise = gaussian(rng, len, 0.05);
        let sign = if label == 1 { -1.0 } else { 1.0 };
        (0..len)
            .map(|t| {
                let pulse = if (t + period - offset) % period < 2 { height } else { 0.0 };
                sign * (pulse + noise[t])
            })
            .collect()
    })
}

/// One informative column (class means `gap` standard deviations apart)
/// followed by `n_noise` pure-noise columns.
pub fn noise_augmented_matrix(
    n_rows: usize,
    n_noise: usize,
    gap: f64,
    seed: u64,
) -> Result<(FeatureMatrix, Vec<usize>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let labels: Vec<usize> = (0..n_rows).map(|i| i % 2).collect();
    let rows: Vec<Vec<f64>> = labels
        .iter()
        .map(|&l| {
            let mut row = vec![gap * l as f64 + normal.sample(&mut rng)];
            row.extend((0..n_noise).map(|_| normal.sample(&mut rng)));
            row
        })
        .collect();
    Ok((FeatureMatrix::from_rows(&rows)?, labels))
}
