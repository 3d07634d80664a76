use serde::{Deserialize, Serialize};

use crate::features::{Band, FeatureDescriptor, FeaturePath, Lineage, Statistic, Transform};
use crate::{Error, Result};

/// Plain-language account of one recommended column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureNote {
    pub rank: usize,
    pub id: usize,
    pub level: u8,
    pub lineage: String,
    pub description: String,
}

fn statistic_phrase(stat: Statistic) -> String {
    let s = match stat {
        Statistic::Energy => "energy",
        Statistic::RelativeEnergy => "relative energy",
        Statistic::Entropy => "Shannon entropy",
        Statistic::DominantFrequency => "dominant frequency",
        Statistic::Mean => "mean",
        Statistic::Std => "standard deviation",
        Statistic::Variance => "variance",
        Statistic::Skewness => "skewness",
        Statistic::Kurtosis => "kurtosis",
        Statistic::Rms => "RMS",
        Statistic::Min => "minimum",
        Statistic::Max => "maximum",
        Statistic::Range => "range",
        Statistic::Median => "median",
        Statistic::Iqr => "interquartile range",
        Statistic::Mad => "mean absolute deviation",
        Statistic::Zcr => "zero-crossing rate",
        Statistic::LineLength => "line length",
        Statistic::HistEntropy => "histogram entropy",
        Statistic::Centroid => "spectral centroid",
        Statistic::Spread => "spectral spread",
        Statistic::Rolloff85 => "85% spectral roll-off",
        Statistic::Flatness => "spectral flatness",
        Statistic::SpectralEntropy => "spectral entropy",
        Statistic::FluxMean => "mean spectral flux",
        Statistic::BandEnergyRatio(i) => return format!("share of spectral power in log band {i}"),
        Statistic::PeakCount => "peak count",
        Statistic::TroughCount => "trough count",
        Statistic::PeakAmpMean => "mean peak amplitude",
        Statistic::PeakAmpStd => "peak amplitude spread",
        Statistic::IpiMean => "mean inter-peak interval",
        Statistic::IpiStd => "inter-peak interval spread",
        Statistic::PeakTroughAmpMean => "mean peak-to-trough amplitude",
    };
    s.to_string()
}

fn path_phrase(path: &FeaturePath) -> String {
    let stat = statistic_phrase(path.statistic);
    let derivative = match path.derivative {
        Some(1) => "the first derivative of ",
        Some(2) => "the second derivative of ",
        _ => "",
    };
    match (&path.transform, path.band) {
        (Transform::Dwt(w), Some(Band::Detail(l))) => format!("{stat} of DWT detail band {l} under {w}"),
        (Transform::Dwt(w), Some(Band::Approx(l))) => {
            format!("{stat} of DWT approximation band {l} under {w}")
        }
        (Transform::Dwt(w), _) => format!("{stat} of the DWT under {w}"),
        (Transform::Stft, Some(Band::Frames)) => format!("{stat} across STFT frames"),
        (Transform::Stft, _) => format!("{stat} of the mean STFT magnitude spectrum"),
        (Transform::Time, _) => format!("{stat} of {derivative}the time-domain signal"),
    }
}

/// One-line description of a lineage.
pub fn describe(lineage: &Lineage) -> String {
    match &lineage.denominator {
        Some(den) => format!(
            "ratio of {} to {}",
            path_phrase(&lineage.path),
            path_phrase(den)
        ),
        None => path_phrase(&lineage.path),
    }
}

/// Notes for `ids` in rank order.
pub fn interpret(ids: &[usize], descriptors: &[FeatureDescriptor]) -> Result<Vec<FeatureNote>> {
    ids.iter()
        .enumerate()
        .map(|(rank, &id)| {
            let d = descriptors.get(id).ok_or_else(|| {
                Error::Run(format!("recommended feature id {id} has no descriptor"))
            })?;
            Ok(FeatureNote {
                rank: rank + 1,
                id,
                level: d.level,
                lineage: d.name.clone(),
                description: describe(&d.lineage),
            })
        })
        .collect()
}

/// Text block listing one feature set.
pub fn render_notes(title: &str, notes: &[FeatureNote]) -> String {
    let mut out = format!("{title}\n");
    for n in notes {
        out.push_str(&format!(
            "  {:>2}. [L{}] {}\n      {}\n",
            n.rank, n.level, n.lineage, n.description
        ));
    }
    out
}
