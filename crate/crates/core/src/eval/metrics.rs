//! `metrics-v1`: three-class adjudication metrics.
//!
//! Undefined precision or recall (an empty denominator) counts as 0, and
//! macro averages are unweighted means over all three classes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::eval::EvalError;
use crate::graph::Verdict;

pub const METRICS_FORMAT: &str = "metrics-v1";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

/// Pooled action hit rates for overturned and upheld cases.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HitRates {
    pub overall: f64,
    pub overturn: f64,
    pub non_overturn: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub format: String,
    pub total: u64,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub macro_recall: f64,
    pub per_class: BTreeMap<String, ClassMetrics>,
    /// Rows are true labels, columns predictions, both in approve, reject,
    /// rmi order.
    pub confusion_matrix: [[u64; 3]; 3],
    #[serde(default)]
    pub cumulative_alignment: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action_hit_rate: Option<HitRates>,
}

impl MetricsReport {
    /// Deterministic sorted-key text.
    pub fn to_text(&self) -> String {
        crate::json::to_canonical_pretty(self).expect("metrics serialize")
    }

    pub fn from_text(text: &str) -> serde_json::Result<MetricsReport> {
        serde_json::from_str(text)
    }
}

fn class_index(v: Verdict) -> usize {
    Verdict::ALL.iter().position(|c| *c == v).expect("verdict is a class")
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn confusion(truth: &[Verdict], predicted: &[Verdict]) -> Result<[[u64; 3]; 3], EvalError> {
    if truth.len() != predicted.len() {
        return Err(EvalError::LabelMismatch(format!("{} labels, {} predictions", truth.len(), predicted.len())));
    }
    let mut m = [[0u64; 3]; 3];
    for (t, p) in truth.iter().zip(predicted) {
        m[class_index(*t)][class_index(*p)] += 1;
    }
    Ok(m)
}

pub fn metrics_from_confusion(m: [[u64; 3]; 3]) -> MetricsReport {
    let total: u64 = m.iter().flatten().sum();
    let diagonal: u64 = (0..3).map(|i| m[i][i]).sum();
    let mut per_class = BTreeMap::new();
    let (mut f1_sum, mut recall_sum) = (0.0, 0.0);
    for (i, class) in Verdict::ALL.iter().enumerate() {
        let tp = m[i][i];
        let support: u64 = m[i].iter().sum();
        let predicted: u64 = (0..3).map(|r| m[r][i]).sum();
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, support);
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        f1_sum += f1;
        recall_sum += recall;
        per_class.insert(class.as_str().to_string(), ClassMetrics { precision, recall, f1, support });
    }
    MetricsReport {
        format: METRICS_FORMAT.into(),
        total,
        accuracy: ratio(diagonal, total),
        macro_f1: f1_sum / 3.0,
        macro_recall: recall_sum / 3.0,
        per_class,
        confusion_matrix: m,
        cumulative_alignment: Vec::new(),
        action_hit_rate: None,
    }
}

pub fn metrics_from_labels(truth: &[Verdict], predicted: &[Verdict]) -> Result<MetricsReport, EvalError> {
    Ok(metrics_from_confusion(confusion(truth, predicted)?))
}

/// Metrics over textual labels; anything outside approve, reject and rmi is
/// a `LabelMismatch`.
pub fn metrics_from_label_text<S: AsRef<str>>(truth: &[S], predicted: &[S]) -> Result<MetricsReport, EvalError> {
    let parse = |labels: &[S]| {
        labels
            .iter()
            .map(|l| Verdict::parse(l.as_ref()).ok_or_else(|| EvalError::LabelMismatch(format!("unknown class `{}`", l.as_ref()))))
            .collect::<Result<Vec<_>, _>>()
    };
    metrics_from_labels(&parse(truth)?, &parse(predicted)?)
}

/// Prefix alignment rate of a (timestamp, correct) stream, taken in
/// timestamp order (stable for equal timestamps).
pub fn cumulative_alignment(stream: &[(u64, bool)]) -> Vec<f64> {
    let mut sorted = stream.to_vec();
    sorted.sort_by_key(|(t, _)| *t);
    let mut hits = 0usize;
    sorted
        .iter()
        .enumerate()
        .map(|(i, (_, ok))| {
            hits += usize::from(*ok);
            hits as f64 / (i + 1) as f64
        })
        .collect()
}

/// Share of predicted action keys that match some Checker-documented key.
pub fn action_hit_rate<S: AsRef<str>>(predicted: &[S], checker: &[S]) -> f64 {
    let (hits, total) = action_hits(predicted, checker);
    ratio(hits, total)
}

/// (hits, predicted) counts behind [`action_hit_rate`], for pooling.
pub fn action_hits<S: AsRef<str>>(predicted: &[S], checker: &[S]) -> (u64, u64) {
    let hits = predicted
        .iter()
        .filter(|p| checker.iter().any(|c| crate::text::canonical_key(c.as_ref()) == crate::text::canonical_key(p.as_ref())))
        .count();
    (hits as u64, predicted.len() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use Verdict::{Approve, Reject, Rmi};

    #[test]
    fn perfect_predictions() {
        let labels = [Approve, Reject, Rmi, Approve];
        let m = metrics_from_labels(&labels, &labels).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.macro_f1, 1.0);
    }

    #[test]
    fn unknown_class_is_rejected() {
        assert!(matches!(metrics_from_label_text(&["approve"], &["maybe"]), Err(EvalError::LabelMismatch(_))));
        assert!(matches!(metrics_from_labels(&[Approve], &[]), Err(EvalError::LabelMismatch(_))));
    }

    #[test]
    fn prefix_means() {
        let out = cumulative_alignment(&[(1, true), (2, true), (3, false), (4, true)]);
        assert_eq!(out.len(), 4);
        assert!((out[2] - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(out[3], 0.75);
        assert!(cumulative_alignment(&[]).is_empty());
    }

    #[test]
    fn hit_rate() {
        assert_eq!(action_hit_rate(&["a", "b"], &["b", "c"]), 0.5);
        assert_eq!(action_hit_rate::<&str>(&[], &["b"]), 0.0);
    }
}
