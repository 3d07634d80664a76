//! Hierarchical feature bank.
//!
//! Level 0 summarizes three representations of each record: the raw time
//! series, its STFT magnitude spectrogram and its DWT bands under a mother
//! wavelet chosen by energy-to-entropy ratio. Level 1 applies statistical,
//! spectral and peak-trough summaries to those representations. Level 2
//! adds guarded ratios of level-0/1 values and the statistical catalog
//! recomputed on the first and second differences of the signal.

pub mod lineage;
pub mod stats;
pub mod stft;
pub mod wavelet;

mod matrix;

use std::collections::HashMap;

use log::debug;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::SignalRecord;
use crate::{Error, Result};

pub use lineage::{Band, FeaturePath, Lineage, Statistic, Transform};
pub use matrix::{DescriptorSidecar, FeatureDescriptor, FeatureMatrix};
pub use stats::PeakConfig;
pub use stft::{stft, Spectrogram};
pub use wavelet::{
    decompose, dwt_decompose, select_mother_wavelet, Decomposition, Extension, Wavelet,
    WaveletBank, WaveletChoice,
};

/// Denominators smaller than this in magnitude yield a guarded 0.
pub const RATIO_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StftConfig {
    pub window: usize,
    pub hop: usize,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            window: 256,
            hop: 128,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DwtConfig {
    pub bank: Vec<String>,
    pub depth: usize,
    pub extension: Extension,
}

impl Default for DwtConfig {
    fn default() -> Self {
        Self {
            bank: wavelet::BUILTIN_WAVELETS.iter().map(|s| s.to_string()).collect(),
            depth: 4,
            extension: Extension::Symmetric,
        }
    }
}

/// Extraction settings; the JSON form mirrors the field names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractionConfig {
    pub stft: StftConfig,
    pub dwt: DwtConfig,
    pub peaks: PeakConfig,
    pub max_level: u8,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        Self {
            stft: StftConfig::default(),
            dwt: DwtConfig::default(),
            peaks: PeakConfig::default(),
            max_level: 2,
        }
    }
}

impl ExtractionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_level > 2 {
            return Err(Error::Config(format!(
                "max_level {} outside 0..=2",
                self.max_level
            )));
        }
        if !self.stft.window.is_power_of_two() {
            return Err(Error::Config(format!(
                "stft.window {} is not a power of two",
                self.stft.window
            )));
        }
        if self.stft.hop == 0 || self.stft.hop > self.stft.window {
            return Err(Error::Config(format!(
                "stft.hop {} must be in 1..={}",
                self.stft.hop, self.stft.window
            )));
        }
        if self.dwt.depth == 0 {
            return Err(Error::Config("dwt.depth must be >= 1".into()));
        }
        if !(self.peaks.prominence_frac >= 0.0 && self.peaks.min_separation_frac >= 0.0) {
            return Err(Error::Config("peak fractions must be non-negative".into()));
        }
        WaveletBank::from_names(&self.dwt.bank).map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }
}

/// Feature values for one record, with their lineage, in column order.
#[derive(Debug, Clone, PartialEq)]
pub struct Fragment {
    pub entries: Vec<(Lineage, f64)>,
    /// Offsets into `entries` whose ratio denominator was guarded.
    pub guarded: Vec<usize>,
}

impl Fragment {
    fn new() -> Self {
        Self {
            entries: Vec::new(),
            guarded: Vec::new(),
        }
    }

    fn push(&mut self, path: FeaturePath, value: f64) {
        self.entries.push((Lineage::single(path), value));
    }

    fn extend(&mut self, other: Fragment) {
        let offset = self.entries.len();
        self.entries.extend(other.entries);
        self.guarded.extend(other.guarded.into_iter().map(|g| g + offset));
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|(_, v)| *v)
    }

    fn lookup(&self) -> HashMap<&FeaturePath, f64> {
        self.entries
            .iter()
            .filter(|(l, _)| l.denominator.is_none())
            .map(|(l, v)| (&l.path, *v))
            .collect()
    }
}

/// Level-0 representations of a record and their scalar summaries.
#[derive(Debug, Clone)]
pub struct Level0 {
    pub time: Vec<f64>,
    pub sample_rate_hz: f64,
    pub spectrogram: Spectrogram,
    pub decomposition: Decomposition,
    pub fragment: Fragment,
}

/// Dataset-level extraction parameters fitted from a set of records.
///
/// The mother wavelet, DWT depth and STFT window are fixed here so that
/// every record yields the same descriptor set.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    pub config: ExtractionConfig,
    pub wavelet: Wavelet,
    /// Per-record wavelet wins, in bank order.
    pub wavelet_votes: Vec<(String, usize)>,
    pub dwt_depth: usize,
    pub stft_window: usize,
    pub stft_hop: usize,
    pub sample_rate_hz: f64,
}

impl FeatureExtractor {
    /// Fits extraction parameters.
    ///
    /// STFT window and DWT depth are clamped to the shortest record. The
    /// mother wavelet is the majority vote of per-record selections over
    /// `reference` (all records when `None`); ties go to bank order and
    /// records with all-zero detail energy abstain.
    pub fn fit(
        records: &[SignalRecord],
        reference: Option<&[usize]>,
        config: &ExtractionConfig,
    ) -> Result<Self> {
        config.validate()?;
        let first = records
            .first()
            .ok_or_else(|| Error::Argument("no records to extract from".into()))?;
        let rate = first.sample_rate_hz;
        if let Some(other) = records.iter().find(|r| r.sample_rate_hz != rate) {
            return Err(Error::Config(format!(
                "mixed sample rates: `{}` at {} Hz, `{}` at {} Hz",
                first.id, rate, other.id, other.sample_rate_hz
            )));
        }
        let min_len = records.iter().map(SignalRecord::len).min().unwrap_or(0);
        let window = config.stft.window.min(stft::prev_power_of_two(min_len));
        let hop = if window < config.stft.window {
            (window / 2).max(1)
        } else {
            config.stft.hop
        };

        let bank = WaveletBank::from_names(&config.dwt.bank)?;
        let reference: Vec<usize> = match reference {
            Some(r) => r.to_vec(),
            None => (0..records.len()).collect(),
        };
        let choices = reference
            .par_iter()
            .map(|&i| {
                let record = records.get(i).ok_or_else(|| {
                    Error::Argument(format!("reference index {i} out of range"))
                })?;
                let depth = config.dwt.depth.min(wavelet::max_depth(record.len(), 1));
                match select_mother_wavelet(&record.samples, &bank, depth.max(1)) {
                    Ok(choice) => Ok(Some(choice.wavelet_name)),
                    Err(Error::Degenerate(_)) => Ok(None),
                    Err(e) => Err(e),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let mut votes: Vec<(String, usize)> =
            bank.iter().map(|w| (w.name().to_string(), 0)).collect();
        for name in choices.into_iter().flatten() {
            if let Some(slot) = votes.iter_mut().find(|(n, _)| *n == name) {
                slot.1 += 1;
            }
        }
        let winner = votes
            .iter()
            .enumerate()
            .fold(0, |best, (i, v)| if v.1 > votes[best].1 { i } else { best });
        let wavelet = bank
            .get(&votes[winner].0)
            .cloned()
            .expect("vote names come from the bank");
        if min_len < wavelet.filter_len() {
            return Err(Error::Argument(format!(
                "shortest record has {min_len} samples, fewer than the {} filter length",
                wavelet.name()
            )));
        }
        let dwt_depth = config
            .dwt
            .depth
            .min(wavelet::max_depth(min_len, wavelet.filter_len()))
            .max(1);
        debug!(
            "fitted extractor: wavelet {} depth {dwt_depth}, stft {window}/{hop}",
            wavelet.name()
        );
        Ok(Self {
            config: config.clone(),
            wavelet,
            wavelet_votes: votes,
            dwt_depth,
            stft_window: window,
            stft_hop: hop,
            sample_rate_hz: rate,
        })
    }

    fn dwt_transform(&self) -> Transform {
        Transform::Dwt(self.wavelet.name().to_string())
    }

    fn dwt_bands(&self, dec: &Decomposition) -> Vec<(Band, Vec<f64>)> {
        let mut bands: Vec<(Band, Vec<f64>)> = dec
            .details
            .iter()
            .enumerate()
            .map(|(l, d)| (Band::Detail(l + 1), d.clone()))
            .collect();
        bands.push((Band::Approx(dec.depth()), dec.approx.clone()));
        bands
    }

    /// Level-0 representations and scalar features: total energy, per-band
    /// energy, relative energy and entropy, and dominant STFT frequency.
    pub fn extract_level0(&self, record: &SignalRecord) -> Result<Level0> {
        if record.sample_rate_hz != self.sample_rate_hz {
            return Err(Error::Config(format!(
                "record `{}` sampled at {} Hz, extractor fitted at {} Hz",
                record.id, record.sample_rate_hz, self.sample_rate_hz
            )));
        }
        let x = &record.samples;
        let rate = record.sample_rate_hz;
        let spectrogram = stft(x, self.stft_window, self.stft_hop).map_err(|e| {
            Error::Validation {
                id: record.id.clone(),
                reason: e.to_string(),
            }
        })?;
        let decomposition = decompose(x, &self.wavelet, self.dwt_depth, self.config.dwt.extension)?;

        let mut fragment = Fragment::new();
        fragment.push(
            FeaturePath::new(Transform::Time, None, Statistic::Energy),
            stats::energy(x),
        );
        let bands = self.dwt_bands(&decomposition);
        let energies: Vec<f64> = bands.iter().map(|(_, c)| stats::energy(c)).collect();
        let total: f64 = energies.iter().sum();
        for ((band, coeffs), e) in bands.iter().zip(&energies) {
            let dwt = self.dwt_transform();
            let relative = if total > 0.0 { e / total } else { 0.0 };
            fragment.push(FeaturePath::new(dwt.clone(), Some(*band), Statistic::Energy), *e);
            fragment.push(
                FeaturePath::new(dwt.clone(), Some(*band), Statistic::RelativeEnergy),
                relative,
            );
            fragment.push(
                FeaturePath::new(dwt, Some(*band), Statistic::Entropy),
                stats::energy_entropy(coeffs),
            );
        }
        fragment.push(
            FeaturePath::new(Transform::Stft, Some(Band::MeanSpectrum), Statistic::DominantFrequency),
            stats::dominant_frequency(&spectrogram, rate),
        );
        Ok(Level0 {
            time: x.clone(),
            sample_rate_hz: rate,
            spectrogram,
            decomposition,
            fragment,
        })
    }

    /// Statistical catalog on the time series and each DWT band, spectral
    /// features of the STFT, and peak-trough features of the time series.
    pub fn extract_level1(&self, level0: &Level0) -> Fragment {
        let mut fragment = Fragment::new();
        push_statistical(&mut fragment, Transform::Time, None, None, &level0.time);
        for (band, coeffs) in self.dwt_bands(&level0.decomposition) {
            push_statistical(&mut fragment, self.dwt_transform(), None, Some(band), &coeffs);
        }
        let spectral = stats::spectral(&level0.spectrogram, level0.sample_rate_hz);
        for (stat, value) in stats::SPECTRAL.iter().zip(spectral) {
            let band = if *stat == Statistic::FluxMean {
                Band::Frames
            } else {
                Band::MeanSpectrum
            };
            fragment.push(FeaturePath::new(Transform::Stft, Some(band), *stat), value);
        }
        let peaks = stats::peak_trough(&level0.time, level0.sample_rate_hz, &self.config.peaks);
        for (stat, value) in stats::PEAK_TROUGH.iter().zip(peaks) {
            fragment.push(FeaturePath::new(Transform::Time, None, *stat), value);
        }
        fragment
    }

    /// The declared ratio pairs, numerator first.
    pub fn ratio_pairs(&self) -> Vec<(FeaturePath, FeaturePath)> {
        let spec = |s| FeaturePath::new(Transform::Stft, Some(Band::MeanSpectrum), s);
        let time = |s| FeaturePath::new(Transform::Time, None, s);
        let mut pairs = vec![
            (spec(Statistic::Centroid), spec(Statistic::Spread)),
            (spec(Statistic::Rolloff85), spec(Statistic::Centroid)),
            (time(Statistic::Rms), time(Statistic::Range)),
            (time(Statistic::PeakCount), time(Statistic::TroughCount)),
            (time(Statistic::Iqr), time(Statistic::Std)),
        ];
        let energy = |b| FeaturePath::new(self.dwt_transform(), Some(b), Statistic::Energy);
        for l in 1..self.dwt_depth {
            pairs.push((energy(Band::Detail(l)), energy(Band::Detail(l + 1))));
        }
        pairs.push((
            energy(Band::Detail(self.dwt_depth)),
            energy(Band::Approx(self.dwt_depth)),
        ));
        pairs
    }

    /// Guarded ratios of level-0/1 values and the statistical catalog on the
    /// first and second differences of the time series.
    pub fn extract_level2(&self, level0: &Level0, level1: &Fragment) -> Fragment {
        let mut fragment = Fragment::new();
        let (lookup0, lookup1) = (level0.fragment.lookup(), level1.lookup());
        let value = |p: &FeaturePath| {
            lookup0
                .get(p)
                .or_else(|| lookup1.get(p))
                .copied()
                .expect("ratio operands are part of levels 0 and 1")
        };
        for (num, den) in self.ratio_pairs() {
            let d = value(&den);
            let (v, guarded) = if d.abs() < RATIO_GUARD {
                (0.0, true)
            } else {
                (value(&num) / d, false)
            };
            if guarded {
                fragment.guarded.push(fragment.entries.len());
            }
            fragment.entries.push((Lineage::ratio(num, den), v));
        }
        let d1: Vec<f64> = level0.time.windows(2).map(|w| w[1] - w[0]).collect();
        let d2: Vec<f64> = d1.windows(2).map(|w| w[1] - w[0]).collect();
        push_statistical(&mut fragment, Transform::Time, Some(1), None, &d1);
        push_statistical(&mut fragment, Transform::Time, Some(2), None, &d2);
        fragment
    }

    /// All features of one record up to `max_level`, in column order.
    pub fn extract_record(&self, record: &SignalRecord, max_level: u8) -> Result<Fragment> {
        let level0 = self.extract_level0(record)?;
        let mut fragment = level0.fragment.clone();
        if max_level >= 1 {
            let level1 = self.extract_level1(&level0);
            if max_level >= 2 {
                let level2 = self.extract_level2(&level0, &level1);
                fragment.extend(level1);
                fragment.extend(level2);
            } else {
                fragment.extend(level1);
            }
        }
        Ok(fragment)
    }

    /// Extracts every record into a matrix; rows follow `records` order.
    pub fn build(&self, records: &[SignalRecord], max_level: u8) -> Result<FeatureMatrix> {
        if max_level > 2 {
            return Err(Error::Config(format!("max_level {max_level} outside 0..=2")));
        }
        if records.is_empty() {
            return Err(Error::Argument("no records to extract from".into()));
        }
        let fragments = records
            .par_iter()
            .map(|r| self.extract_record(r, max_level))
            .collect::<Result<Vec<_>>>()?;
        let descriptors: Vec<FeatureDescriptor> = fragments[0]
            .entries
            .iter()
            .enumerate()
            .map(|(id, (lineage, _))| FeatureDescriptor::new(id, lineage.clone()))
            .collect();
        let n_cols = descriptors.len();
        let mut values = Vec::with_capacity(records.len() * n_cols);
        let mut guarded = Vec::new();
        for (row, fragment) in fragments.iter().enumerate() {
            debug_assert!(fragment
                .entries
                .iter()
                .zip(&descriptors)
                .all(|((l, _), d)| *l == d.lineage));
            if fragment.entries.len() != n_cols {
                return Err(Error::Run(format!(
                    "record `{}` produced {} features, expected {n_cols}",
                    records[row].id,
                    fragment.entries.len()
                )));
            }
            values.extend(fragment.values());
            guarded.extend(fragment.guarded.iter().map(|&c| (row, c)));
        }
        FeatureMatrix::new(
            values,
            descriptors,
            records.iter().map(|r| r.id.clone()).collect(),
            guarded,
        )
    }
}

fn push_statistical(
    fragment: &mut Fragment,
    transform: Transform,
    derivative: Option<u8>,
    band: Option<Band>,
    x: &[f64],
) {
    for (stat, value) in stats::STATISTICAL.iter().zip(stats::statistical(x)) {
        let mut path = FeaturePath::new(transform.clone(), band, *stat);
        path.derivative = derivative;
        fragment.push(path, value);
    }
}

/// Fits an extractor on all records and builds their feature matrix.
pub fn build_feature_matrix(
    records: &[SignalRecord],
    config: &ExtractionConfig,
    max_level: u8,
) -> Result<FeatureMatrix> {
    FeatureExtractor::fit(records, None, config)?.build(records, max_level)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn record(id: &str, samples: Vec<f64>, rate: f64) -> SignalRecord {
        SignalRecord::new(id, samples, rate, 0).unwrap()
    }

    fn sine(f: f64, rate: f64, n: usize, amp: f64) -> Vec<f64> {
        (0..n).map(|i| amp * (2.0 * PI * f * i as f64 / rate).sin()).collect()
    }

    fn value(m: &FeatureMatrix, row: usize, path: &str) -> f64 {
        let col = m
            .descriptors
            .iter()
            .position(|d| d.name == path)
            .unwrap_or_else(|| panic!("no column {path}"));
        m.get(row, col)
    }

    #[test]
    fn constant_signal_energy_and_finiteness() {
        let c = 0.75;
        let n = 300;
        let recs = vec![record("c", vec![c; n], 100.0)];
        let m = build_feature_matrix(&recs, &ExtractionConfig::default(), 2).unwrap();
        assert!((value(&m, 0, "time/energy") - n as f64 * c * c).abs() < 1e-9);
        assert!(m.values().iter().all(|v| v.is_finite()));
        assert_eq!(value(&m, 0, "time/std"), 0.0);
        assert_eq!(value(&m, 0, "time/zcr"), 0.0);
        assert_eq!(value(&m, 0, "time/peak_count"), 0.0);
    }

    #[test]
    fn dominant_frequency_of_ten_hz() {
        let config = ExtractionConfig {
            stft: StftConfig { window: 64, hop: 32 },
            ..Default::default()
        };
        let recs = vec![record("s", sine(10.0, 100.0, 400, 1.0), 100.0)];
        let m = build_feature_matrix(&recs, &config, 0).unwrap();
        let f = value(&m, 0, "stft/mean_spectrum/dominant_frequency");
        assert!((f - 10.0).abs() <= 100.0 / 64.0, "{f}");
    }

    #[test]
    fn relative_band_energies_sum_to_one() {
        let x: Vec<f64> = (0..512).map(|i| ((i * 7919) % 101) as f64 / 50.0 - 1.0).collect();
        let recs = vec![record("r", x, 250.0)];
        let m = build_feature_matrix(&recs, &ExtractionConfig::default(), 0).unwrap();
        let sum: f64 = m
            .descriptors
            .iter()
            .filter(|d| d.lineage.path.statistic == Statistic::RelativeEnergy)
            .map(|d| m.get(0, d.id))
            .sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn ramp_derivatives() {
        let recs = vec![record("ramp", (0..200).map(|t| t as f64).collect(), 50.0)];
        let m = build_feature_matrix(&recs, &ExtractionConfig::default(), 2).unwrap();
        assert_eq!(value(&m, 0, "time/d1/std"), 0.0);
        assert_eq!(value(&m, 0, "time/d1/mean"), 1.0);
        assert_eq!(value(&m, 0, "time/d2/rms"), 0.0);
    }

    #[test]
    fn zero_denominator_is_guarded() {
        // constant signal: peaks and troughs are both absent
        let recs = vec![record("flat", vec![1.0; 128], 100.0)];
        let m = build_feature_matrix(&recs, &ExtractionConfig::default(), 2).unwrap();
        let name = "time/peak_count÷time/trough_count";
        let col = m.descriptors.iter().position(|d| d.name == name).unwrap();
        assert_eq!(m.get(0, col), 0.0);
        assert!(m.is_guarded(0, col));
        assert_eq!(m.descriptors[col].level, 2);
    }

    #[test]
    fn derivative_gain_of_sine() {
        let (f, rate) = (10.0, 1000.0);
        let recs = vec![record("s", sine(f, rate, 2000, 1.0), rate)];
        let m = build_feature_matrix(&recs, &ExtractionConfig::default(), 2).unwrap();
        let gain = value(&m, 0, "time/d1/rms") / value(&m, 0, "time/rms");
        assert!((gain - 2.0 * PI * f / rate).abs() < 1e-2);
    }

    #[test]
    fn hierarchy_is_prefix_and_levels_gate() {
        let recs = vec![
            record("a", sine(5.0, 100.0, 256, 1.0), 100.0),
            record("b", sine(5.0, 100.0, 256, 1.0), 100.0),
        ];
        let ex = FeatureExtractor::fit(&recs, None, &ExtractionConfig::default()).unwrap();
        let m0 = ex.build(&recs, 0).unwrap();
        let m1 = ex.build(&recs, 1).unwrap();
        let m2 = ex.build(&recs, 2).unwrap();
        assert!(m0.descriptors.iter().all(|d| d.level == 0));
        assert!(m0.n_cols() < m1.n_cols() && m1.n_cols() < m2.n_cols());
        for (small, big) in [(&m0, &m1), (&m1, &m2)] {
            for (a, b) in small.descriptors.iter().zip(&big.descriptors) {
                assert_eq!(a, b);
            }
        }
        let counts = m2.level_counts();
        assert_eq!(counts[0], m0.n_cols());
        assert_eq!(counts[0] + counts[1], m1.n_cols());
        assert_eq!(counts.iter().sum::<usize>(), m2.n_cols());
        assert_eq!(m2.row(0), m2.row(1));
    }

    #[test]
    fn lineage_complete_and_parseable() {
        let recs = vec![record("a", sine(3.0, 64.0, 512, 1.0), 64.0)];
        let m = build_feature_matrix(&recs, &ExtractionConfig::default(), 2).unwrap();
        for d in &m.descriptors {
            let parsed: Lineage = d.name.parse().unwrap();
            assert_eq!(parsed, d.lineage);
            assert_eq!(parsed.level(), d.level);
            let root = &d.lineage.stages()[0];
            assert!(root == "time" || root == "stft" || root.starts_with("dwt("));
        }
    }

    #[test]
    fn mixed_rates_rejected() {
        let recs = vec![
            record("a", vec![0.1; 64], 100.0),
            record("b", vec![0.2; 64], 200.0),
        ];
        assert!(matches!(
            build_feature_matrix(&recs, &ExtractionConfig::default(), 0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn short_records_clamp_window_and_depth() {
        let recs = vec![record("short", sine(2.0, 32.0, 40, 1.0), 32.0)];
        let ex = FeatureExtractor::fit(&recs, None, &ExtractionConfig::default()).unwrap();
        assert_eq!(ex.stft_window, 32);
        assert_eq!(ex.stft_hop, 16);
        assert!(ex.dwt_depth >= 1);
        let m = ex.build(&recs, 2).unwrap();
        assert!(m.values().iter().all(|v| v.is_finite()));
    }
}
