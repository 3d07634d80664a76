//! Feature lineage: which transform, band and statistic produced a column.
//!
//! Rendered form: `transform[/d1|/d2][/band]/statistic`, with ratio features
//! written as `numerator÷denominator`. Examples:
//!
//! ```text
//! time/rms
//! dwt(db4)/detail3/energy
//! stft/mean_spectrum/centroid
//! time/d1/std
//! stft/mean_spectrum/centroid÷stft/mean_spectrum/spread
//! ```

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result};

pub const RATIO_SEPARATOR: char = '÷';

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Transform {
    Time,
    Stft,
    Dwt(String),
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Transform::Time => f.write_str("time"),
            Transform::Stft => f.write_str("stft"),
            Transform::Dwt(w) => write!(f, "dwt({w})"),
        }
    }
}

impl FromStr for Transform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "time" => Ok(Transform::Time),
            "stft" => Ok(Transform::Stft),
            _ => s
                .strip_prefix("dwt(")
                .and_then(|r| r.strip_suffix(')'))
                .filter(|w| !w.is_empty())
                .map(|w| Transform::Dwt(w.to_string()))
                .ok_or_else(|| Error::Argument(format!("unknown transform `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Band {
    /// DWT approximation band at the given (deepest) level.
    Approx(usize),
    /// DWT detail band at the given level (1 = finest).
    Detail(usize),
    /// Frame-averaged STFT magnitude spectrum.
    MeanSpectrum,
    /// STFT frame sequence.
    Frames,
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Band::Approx(l) => write!(f, "approx{l}"),
            Band::Detail(l) => write!(f, "detail{l}"),
            Band::MeanSpectrum => f.write_str("mean_spectrum"),
            Band::Frames => f.write_str("frames"),
        }
    }
}

impl FromStr for Band {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let level = |rest: &str| rest.parse::<usize>().ok().filter(|&l| l >= 1);
        match s {
            "mean_spectrum" => Ok(Band::MeanSpectrum),
            "frames" => Ok(Band::Frames),
            _ => {
                if let Some(l) = s.strip_prefix("approx").and_then(level) {
                    Ok(Band::Approx(l))
                } else if let Some(l) = s.strip_prefix("detail").and_then(level) {
                    Ok(Band::Detail(l))
                } else {
                    Err(Error::Argument(format!("unknown band `{s}`")))
                }
            }
        }
    }
}

macro_rules! statistics {
    ($($variant:ident => $name:literal),* $(,)?) => {
        /// Scalar summary applied to a representation.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum Statistic {
            $($variant,)*
            /// Share of spectral energy in log-spaced band `i` (0..4).
            BandEnergyRatio(usize),
        }

        impl Statistic {
            pub fn name(&self) -> String {
                match self {
                    $(Statistic::$variant => $name.to_string(),)*
                    Statistic::BandEnergyRatio(i) => format!("band_energy_ratio{i}"),
                }
            }
        }

        impl FromStr for Statistic {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok(Statistic::$variant),)*
                    _ => s
                        .strip_prefix("band_energy_ratio")
                        .and_then(|i| i.parse().ok())
                        .map(Statistic::BandEnergyRatio)
                        .ok_or_else(|| Error::Argument(format!("unknown statistic `{s}`"))),
                }
            }
        }
    };
}

statistics! {
    Energy => "energy",
    RelativeEnergy => "relative_energy",
    Entropy => "entropy",
    DominantFrequency => "dominant_frequency",
    Mean => "mean",
    Std => "std",
    Variance => "variance",
    Skewness => "skewness",
    Kurtosis => "kurtosis",
    Rms => "rms",
    Min => "min",
    Max => "max",
    Range => "range",
    Median => "median",
    Iqr => "iqr",
    Mad => "mad",
    Zcr => "zcr",
    LineLength => "line_length",
    HistEntropy => "hist_entropy",
    Centroid => "centroid",
    Spread => "spread",
    Rolloff85 => "rolloff85",
    Flatness => "flatness",
    SpectralEntropy => "spectral_entropy",
    FluxMean => "flux_mean",
    PeakCount => "peak_count",
    TroughCount => "trough_count",
    PeakAmpMean => "peak_amp_mean",
    PeakAmpStd => "peak_amp_std",
    IpiMean => "ipi_mean",
    IpiStd => "ipi_std",
    PeakTroughAmpMean => "peak_trough_amp_mean",
}

impl Statistic {
    /// Raw transform-domain summaries that make up level 0.
    pub fn is_level0(&self) -> bool {
        matches!(
            self,
            Statistic::Energy
                | Statistic::RelativeEnergy
                | Statistic::Entropy
                | Statistic::DominantFrequency
        )
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// One transform → (derivative) → (band) → statistic chain.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FeaturePath {
    pub transform: Transform,
    /// Order of the signal difference taken before the statistic (1 or 2).
    pub derivative: Option<u8>,
    pub band: Option<Band>,
    pub statistic: Statistic,
}

impl FeaturePath {
    pub fn new(transform: Transform, band: Option<Band>, statistic: Statistic) -> Self {
        Self {
            transform,
            derivative: None,
            band,
            statistic,
        }
    }

    pub fn stages(&self) -> Vec<String> {
        let mut stages = vec![self.transform.to_string()];
        if let Some(d) = self.derivative {
            stages.push(format!("d{d}"));
        }
        if let Some(b) = self.band {
            stages.push(b.to_string());
        }
        stages.push(self.statistic.name());
        stages
    }
}

impl fmt::Display for FeaturePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.stages().join("/"))
    }
}

impl FromStr for FeaturePath {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split('/').collect();
        if parts.len() < 2 {
            return Err(Error::Argument(format!("lineage `{s}` is too short")));
        }
        let transform: Transform = parts[0].parse()?;
        let statistic: Statistic = parts[parts.len() - 1].parse()?;
        let mut middle = &parts[1..parts.len() - 1];
        let mut derivative = None;
        if let Some(first) = middle.first() {
            if let Some(d) = first.strip_prefix('d').and_then(|d| d.parse::<u8>().ok()) {
                if d == 1 || d == 2 {
                    derivative = Some(d);
                    middle = &middle[1..];
                }
            }
        }
        let band = match middle {
            [] => None,
            [b] => Some(b.parse()?),
            _ => return Err(Error::Argument(format!("lineage `{s}` has extra stages"))),
        };
        Ok(Self {
            transform,
            derivative,
            band,
            statistic,
        })
    }
}

/// Full lineage of a feature column.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Lineage {
    pub path: FeaturePath,
    /// Present for guarded ratio features: `path ÷ denominator`.
    pub denominator: Option<FeaturePath>,
}

impl Lineage {
    pub fn single(path: FeaturePath) -> Self {
        Self {
            path,
            denominator: None,
        }
    }

    pub fn ratio(numerator: FeaturePath, denominator: FeaturePath) -> Self {
        Self {
            path: numerator,
            denominator: Some(denominator),
        }
    }

    pub fn level(&self) -> u8 {
        if self.denominator.is_some() || self.path.derivative.is_some() {
            2
        } else if self.path.statistic.is_level0() {
            0
        } else {
            1
        }
    }

    /// True when any part of the lineage comes from the STFT.
    pub fn is_spectral(&self) -> bool {
        self.path.transform == Transform::Stft
            || self
                .denominator
                .as_ref()
                .is_some_and(|d| d.transform == Transform::Stft)
    }

    /// Ordered stage names; a ratio contributes a `÷` stage between paths.
    pub fn stages(&self) -> Vec<String> {
        let mut stages = self.path.stages();
        if let Some(den) = &self.denominator {
            stages.push(RATIO_SEPARATOR.to_string());
            stages.extend(den.stages());
        }
        stages
    }

    pub fn root(&self) -> &Transform {
        &self.path.transform
    }
}

impl fmt::Display for Lineage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.path)?;
        if let Some(den) = &self.denominator {
            write!(f, "{RATIO_SEPARATOR}{den}")?;
        }
        Ok(())
    }
}

impl FromStr for Lineage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(RATIO_SEPARATOR) {
            Some((num, den)) => Ok(Lineage::ratio(num.parse()?, den.parse()?)),
            None => Ok(Lineage::single(s.parse()?)),
        }
    }
}

impl Serialize for Lineage {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Lineage {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
