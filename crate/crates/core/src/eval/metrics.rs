use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Confusion counts and the derived binary metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub precision: f64,
    pub f_score: f64,
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl MetricReport {
    pub fn from_counts(tp: usize, tn: usize, fp: usize, fn_: usize) -> Self {
        let sensitivity = ratio(tp, tp + fn_);
        let precision = ratio(tp, tp + fp);
        let f_score = if precision + sensitivity > 0.0 {
            2.0 * precision * sensitivity / (precision + sensitivity)
        } else {
            0.0
        };
        Self {
            accuracy: ratio(tp + tn, tp + tn + fp + fn_),
            sensitivity,
            specificity: ratio(tn, tn + fp),
            precision,
            f_score,
            tp,
            tn,
            fp,
            fn_,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
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

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Accuracy,
    Sensitivity,
    Specificity,
    Precision,
    #[serde(alias = "f1")]
    FScore,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::Accuracy,
        Metric::Sensitivity,
        Metric::Specificity,
        Metric::Precision,
        Metric::FScore,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::Sensitivity => "sensitivity",
            Metric::Specificity => "specificity",
            Metric::Precision => "precision",
            Metric::FScore => "f_score",
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "accuracy" | "acc" => Ok(Metric::Accuracy),
            "sensitivity" | "recall" => Ok(Metric::Sensitivity),
            "specificity" => Ok(Metric::Specificity),
            "precision" => Ok(Metric::Precision),
            "f_score" | "f1" | "fscore" | "f-score" => Ok(Metric::FScore),
            other => Err(Error::Argument(format!("unknown metric '{other}'"))),
        }
    }
}

/// Confusion-matrix metrics of `predicted` against `actual`.
pub fn compute_metrics(predicted: &[usize], actual: &[usize], positive_class: usize) -> Result<MetricReport> {
    if predicted.len() != actual.len() {
        return Err(Error::Argument(format!(
            "{} predictions for {} labels",
            predicted.len(),
            actual.len()
        )));
    }
    if actual.is_empty() {
        return Err(Error::Argument("metrics need at least one record".into()));
    }
    let (mut tp, mut tn, mut fp, mut fn_) = (0, 0, 0, 0);
    for (&p, &a) in predicted.iter().zip(actual) {
        match (p == positive_class, a == positive_class) {
            (true, true) => tp += 1,
            (false, false) => tn += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
        }
    }
    Ok(MetricReport::from_counts(tp, tn, fp, fn_))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn perfect() {
        let m = compute_metrics(&[1, 0, 1, 0], &[1, 0, 1, 0], 1).unwrap();
        for metric in Metric::ALL {
            assert_eq!(m.get(metric), 1.0, "{metric}");
        }
    }

    #[test]
    fn hand_counts() {
        let m = MetricReport::from_counts(8, 5, 5, 2);
        assert!(close(m.sensitivity, 0.8));
        assert!(close(m.specificity, 0.5));
        assert!(close(m.precision, 8.0 / 13.0));
        assert!(close(m.accuracy, 0.65));
        // 2 * (8/13) * 0.8 / (8/13 + 0.8) = 16/23
        assert!(close(m.f_score, 16.0 / 23.0));
        assert!((m.f_score - 0.6957).abs() < 1e-4);

        let mut predicted = vec![1; 8];
        predicted.extend([0; 2]);
        predicted.extend([0; 5]);
        predicted.extend([1; 5]);
        let mut actual = vec![1; 10];
        actual.extend([0; 10]);
        assert_eq!(compute_metrics(&predicted, &actual, 1).unwrap(), m);
    }

    #[test]
    fn guards() {
        let m = compute_metrics(&[0, 0, 0], &[0, 0, 0], 1).unwrap();
        assert_eq!((m.precision, m.sensitivity, m.f_score), (0.0, 0.0, 0.0));
        assert_eq!(m.specificity, 1.0);
        assert!(compute_metrics(&[0], &[0, 1], 1).is_err());
        assert!(compute_metrics(&[], &[], 1).is_err());
    }

    #[test]
    fn metric_names_parse() {
        for metric in Metric::ALL {
            assert_eq!(metric.name().parse::<Metric>().unwrap(), metric);
            let json = serde_json::to_string(&metric).unwrap();
            assert_eq!(json, format!("\"{}\"", metric.name()));
        }
        assert!("auc".parse::<Metric>().is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn identities(pairs in proptest::collection::vec((0usize..2, 0usize..2), 1..60)) {
                let (p, a): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
                let m = compute_metrics(&p, &a, 1).unwrap();
                let all = [m.accuracy, m.sensitivity, m.specificity, m.precision, m.f_score];
                prop_assert!(all.iter().all(|v| (0.0..=1.0).contains(v)));
                prop_assert!(close(m.accuracy, (m.tp + m.tn) as f64 / m.total() as f64));
                if m.tp + m.fn_ > 0 {
                    prop_assert!(close(m.sensitivity + m.fn_ as f64 / (m.tp + m.fn_) as f64, 1.0));
                }
                let flip = |v: &Vec<usize>| v.iter().map(|x| 1 - x).collect::<Vec<_>>();
                let swapped = compute_metrics(&flip(&p), &flip(&a), 0).unwrap();
                prop_assert!(close(swapped.accuracy, m.accuracy));
                prop_assert_eq!((swapped.tp, swapped.tn, swapped.fp, swapped.fn_), (m.tp, m.tn, m.fp, m.fn_));
            }
        }
    }
}
