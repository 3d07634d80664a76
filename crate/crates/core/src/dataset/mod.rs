//! Signal ingestion and fold planning.

mod folds;

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use folds::{make_folds, make_folds_from_labels, FoldPlan, FoldRoles, FoldScheme};

/// Shortest signal accepted by [`SignalRecord::new`].
pub const MIN_SAMPLES: usize = 16;

/// One labeled recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalRecord {
    pub id: String,
    pub samples: Vec<f64>,
    pub sample_rate_hz: f64,
    pub label: usize,
}

impl SignalRecord {
    pub fn new(
        id: impl Into<String>,
        samples: Vec<f64>,
        sample_rate_hz: f64,
        label: usize,
    ) -> Result<Self> {
        let record = Self {
            id: id.into(),
            samples,
            sample_rate_hz,
            label,
        };
        record.validate()?;
        Ok(record)
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |reason: String| Error::Validation {
            id: self.id.clone(),
            reason,
        };
        if self.samples.len() < MIN_SAMPLES {
            return Err(invalid(format!(
                "{} samples, at least {MIN_SAMPLES} required",
                self.samples.len()
            )));
        }
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(invalid(format!(
                "sample rate {} Hz is not positive",
                self.sample_rate_hz
            )));
        }
        if let Some(pos) = self.samples.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("sample {pos} is not finite")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalFormat {
    /// One amplitude value per line, optional one-line header.
    CsvColumn,
    /// PCM WAV; channel 0 is used, integer samples are scaled to [-1, 1].
    Wav,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub label: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
}

/// Dataset description read from a JSON manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: SignalFormat,
    pub class_names: Vec<String>,
    /// Required for `csv_column` files; WAV files carry their own rate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_rate_hz: Option<f64>,
    pub records: Vec<ManifestEntry>,
    /// Directory that relative record paths are resolved against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl DatasetManifest {
    /// Reads a manifest file; relative record paths resolve against its directory.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::load(path, e))?;
        let mut manifest: DatasetManifest =
            serde_json::from_str(&text).map_err(|e| Error::load(path, e))?;
        manifest.base_dir = path.parent().map(Path::to_path_buf);
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<()> {
        if self.records.is_empty() {
            return Err(Error::Config("manifest lists no records".into()));
        }
        if let Some(bad) = self
            .records
            .iter()
            .find(|r| r.label >= self.class_names.len())
        {
            return Err(Error::Validation {
                id: self.entry_id(bad),
                reason: format!(
                    "label {} has no entry in class_names (len {})",
                    bad.label,
                    self.class_names.len()
                ),
            });
        }
        let labels: BTreeSet<usize> = self.records.iter().map(|r| r.label).collect();
        if labels.len() < 2 {
            return Err(Error::Config(format!(
                "manifest has {} distinct label(s), at least 2 required",
                labels.len()
            )));
        }
        if self.format == SignalFormat::CsvColumn && self.sample_rate_hz.is_none() {
            return Err(Error::Config(
                "csv_column manifests must set sample_rate_hz".into(),
            ));
        }
        Ok(())
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        match &self.base_dir {
            Some(base) if entry.path.is_relative() => base.join(&entry.path),
            _ => entry.path.clone(),
        }
    }

    fn entry_id(&self, entry: &ManifestEntry) -> String {
        entry.id.clone().unwrap_or_else(|| {
            entry
                .path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| entry.path.display().to_string())
        })
    }
}

/// Loads every record listed in the manifest, in manifest order.
///
/// Files are read in parallel; the first failing entry in manifest order is
/// reported.
pub fn load_dataset(manifest: &DatasetManifest) -> Result<Vec<SignalRecord>> {
    manifest.validate()?;
    manifest
        .records
        .par_iter()
        .map(|entry| {
            let path = manifest.resolve(entry);
            let (samples, rate) = match manifest.format {
                SignalFormat::CsvColumn => {
                    let rate = manifest.sample_rate_hz.unwrap_or_default();
                    (read_csv_column(&path)?, rate)
                }
                SignalFormat::Wav => read_wav(&path)?,
            };
            SignalRecord::new(manifest.entry_id(entry), samples, rate, entry.label)
        })
        .collect()
}

/// Reads a single-column CSV file. A first line that does not parse as a
/// number is treated as a header.
pub fn read_csv_column(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::load(path, e))?;
    let mut samples = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let field = line.split(',').next().unwrap_or("").trim();
        if field.is_empty() {
            continue;
        }
        match field.parse::<f64>() {
            Ok(v) => samples.push(v),
            Err(_) if lineno == 0 => continue,
            Err(e) => {
                return Err(Error::load(
                    path,
                    format!("line {}: `{field}`: {e}", lineno + 1),
                ))
            }
        }
    }
    Ok(samples)
}

/// Reads channel 0 of a WAV file, returning samples and the sample rate.
pub fn read_wav(path: &Path) -> Result<(Vec<f64>, f64)> {
    let mut reader = hound::WavReader::open(path).map_err(|e| Error::load(path, e))?;
    let spec = reader.spec();
    let channels = spec.channels.max(1) as usize;
    let samples: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Int => {
            if !matches!(spec.bits_per_sample, 8 | 16 | 24 | 32) {
                return Err(Error::load(
                    path,
                    format!("unsupported bit depth {}", spec.bits_per_sample),
                ));
            }
            let scale = (1u64 << (spec.bits_per_sample - 1)) as f64;
            reader
                .samples::<i32>()
                .step_by(channels)
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<Result<_, _>>()
                .map_err(|e| Error::load(path, e))?
        }
        hound::SampleFormat::Float => reader
            .samples::<f32>()
            .step_by(channels)
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>()
            .map_err(|e| Error::load(path, e))?,
    };
    Ok((samples, spec.sample_rate as f64))
}

/// Distinct labels in ascending order.
pub fn class_labels(records: &[SignalRecord]) -> Vec<usize> {
    records
        .iter()
        .map(|r| r.label)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}
