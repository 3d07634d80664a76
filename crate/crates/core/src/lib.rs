//! Automated feature engineering for labeled 1-D sensor signals.
//!
//! The pipeline has three stages:
//!
//! 1. [`features`] extracts a hierarchical feature bank. Level 0 holds
//!    transform-domain summaries (time series, STFT, DWT under an
//!    automatically chosen mother wavelet). Level 1 holds statistical,
//!    spectral and peak-trough features. Level 2 holds ratios and
//!    derivative-signal features. Every column keeps its full lineage.
//! 2. [`selection`] ranks features with two greedy selectors, an
//!    F-statistic/correlation mRMR and a fuzzy-rough MRMS, and merges their
//!    picks into one candidate set.
//! 3. [`recommend`] drives the loop: escalate feature levels and subset
//!    sizes until an SVM evaluated over cross-validation folds
//!    ([`eval`]) reaches the target metric, then report the best-in-any-fold
//!    and most-consistent feature sets.
//!
//! [`dataset`] handles ingestion and stratified fold planning.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod recommend;
pub mod selection;
pub mod synth;

pub use error::{Error, Result};

/// Version tag written into every JSON artifact.
pub const SCHEMA_VERSION: u32 = 1;
