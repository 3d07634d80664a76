//! Run directories, logging and the metrics schema shared by every method.

use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use widefe_core::eval::{FoldOutcome, Kernel, Metric, MetricReport};

pub const METRICS_FILE: &str = "metrics.json";

/// Creates `<out>/<timestamp>-s<seed>[-n]`, never reusing a name.
pub fn create_run_dir(out: &Path, command: &str, seed: Option<u64>) -> Result<(String, PathBuf)> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let stamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let seed = seed.map(|s| format!("-s{s}")).unwrap_or_default();
    let base = format!("{command}-{stamp}{seed}");
    let mut id = base.clone();
    let mut n = 1;
    loop {
        let dir = out.join(&id);
        match fs::create_dir(&dir) {
            Ok(()) => return Ok((id, dir)),
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => {
                n += 1;
                id = format!("{base}-{n}");
            }
            Err(e) => return Err(e).with_context(|| format!("creating {}", dir.display())),
        }
    }
}

#[derive(Clone)]
struct Tee {
    file: Arc<Mutex<File>>,
}

impl Write for Tee {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        io::stderr().write_all(buf)?;
        self.file.lock().expect("log file lock").write_all(buf)?;
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        io::stderr().flush()?;
        self.file.lock().expect("log file lock").flush()
    }
}

/// Logs to stderr, and to `run.log` when a run directory is given.
pub fn init_logging(run_dir: Option<&Path>) -> Result<()> {
    let mut builder =
        env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"));
    if let Some(dir) = run_dir {
        let file = File::create(dir.join("run.log"))?;
        builder.target(env_logger::Target::Pipe(Box::new(Tee {
            file: Arc::new(Mutex::new(file)),
        })));
    }
    // A second init in the same process is harmless.
    let _ = builder.try_init();
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanMetrics {
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub precision: f64,
    pub f_score: f64,
}

impl MeanMetrics {
    fn of(reports: &[MetricReport]) -> Option<Self> {
        if reports.is_empty() {
            return None;
        }
        let n = reports.len() as f64;
        let avg = |m: Metric| reports.iter().map(|r| r.get(m)).sum::<f64>() / n;
        Some(Self {
            accuracy: avg(Metric::Accuracy),
            sensitivity: avg(Metric::Sensitivity),
            specificity: avg(Metric::Specificity),
            precision: avg(Metric::Precision),
            f_score: avg(Metric::FScore),
        })
    }

    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Accuracy => self.accuracy,
            Metric::Sensitivity => self.sensitivity,
            Metric::Specificity => self.specificity,
            Metric::Precision => self.precision,
            Metric::FScore => self.f_score,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub test_fold: usize,
    pub eval_fold: usize,
    pub kernel: Option<Kernel>,
    pub c: Option<f64>,
    pub failure: Option<String>,
    pub eval: Option<MetricReport>,
    pub test: Option<MetricReport>,
}

/// Metrics for one feature set or component count; identical keys for the
/// recommendation and the PCA baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsBlock {
    pub name: String,
    pub feature_ids: Vec<usize>,
    pub feature_count: usize,
    pub level: u8,
    pub folds: Vec<FoldMetrics>,
    pub mean_eval: Option<MeanMetrics>,
    pub mean_test: Option<MeanMetrics>,
}

impl MetricsBlock {
    pub fn new(name: impl Into<String>, feature_ids: &[usize], level: u8, outcomes: &[FoldOutcome]) -> Self {
        let evals: Vec<MetricReport> = outcomes.iter().filter_map(|o| o.eval).collect();
        let tests: Vec<MetricReport> = outcomes.iter().filter_map(|o| o.test).collect();
        Self {
            name: name.into(),
            feature_ids: feature_ids.to_vec(),
            feature_count: feature_ids.len(),
            level,
            folds: outcomes
                .iter()
                .map(|o| FoldMetrics {
                    test_fold: o.test_fold,
                    eval_fold: o.eval_fold,
                    kernel: o.kernel,
                    c: o.c,
                    failure: o.failure.clone(),
                    eval: o.eval,
                    test: o.test,
                })
                .collect(),
            mean_eval: MeanMetrics::of(&evals),
            mean_test: MeanMetrics::of(&tests),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsArtifact {
    pub schema_version: u32,
    /// `wide` or `pca_svm`.
    pub method: String,
    pub metric: Metric,
    /// Name of the block the comparison report uses.
    pub headline: String,
    pub level_reached: u8,
    pub target_met: Option<bool>,
    pub blocks: Vec<MetricsBlock>,
}

impl MetricsArtifact {
    pub fn headline_block(&self) -> Option<&MetricsBlock> {
        self.blocks.iter().find(|b| b.name == self.headline)
    }
}
