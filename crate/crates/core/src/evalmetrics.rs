//! Binary classification metrics: confusion matrices, per-class and
//! support-weighted precision/recall/F1, precision-recall curves with
//! step-wise average precision, and Cohen's kappa for two raters.
//!
//! Zero-denominator metrics are reported as `0.0` and the affected class is
//! listed in [`MetricsReport::degenerate`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("label vectors differ in length ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("label {value} at index {index} is not binary")]
    NonBinaryLabel { index: usize, value: u8 },
    #[error("no samples to evaluate")]
    EmptyInput,
    #[error("precision-recall curve needs at least one positive label")]
    NoPositives,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        Self { tp, fp, fn_, tn }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn accuracy(&self) -> Option<f64> {
        let total = self.total();
        (total > 0).then(|| (self.tp + self.tn) as f64 / total as f64)
    }
}

fn check_pair(y_true: &[u8], y_pred: &[u8]) -> Result<(), MetricsError> {
    if y_true.len() != y_pred.len() {
        return Err(MetricsError::LengthMismatch {
            left: y_true.len(),
            right: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    for labels in [y_true, y_pred] {
        if let Some((index, &value)) = labels.iter().enumerate().find(|(_, &v)| v > 1) {
            return Err(MetricsError::NonBinaryLabel { index, value });
        }
    }
    Ok(())
}

/// Counts the outcomes of `y_pred` against `y_true`, with `1` as the positive class.
pub fn confusion(y_true: &[u8], y_pred: &[u8]) -> Result<ConfusionMatrix, MetricsError> {
    check_pair(y_true, y_pred)?;
    let mut cm = ConfusionMatrix::default();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t, p) {
            (1, 1) => cm.tp += 1,
            (0, 1) => cm.fp += 1,
            (1, 0) => cm.fn_ += 1,
            _ => cm.tn += 1,
        }
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub confusion: ConfusionMatrix,
    /// Index 0 is the negative class, index 1 the positive class.
    pub per_class: [ClassMetrics; 2],
    pub weighted: Averages,
    pub macro_avg: Averages,
    pub accuracy: f64,
    /// Classes (0 or 1) for which some metric hit a zero denominator.
    pub degenerate: Vec<u8>,
}

fn ratio(num: u64, den: u64, degenerate: &mut bool) -> f64 {
    if den == 0 {
        *degenerate = true;
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn class_metrics(tp: u64, fp: u64, fn_: u64, degenerate: &mut bool) -> ClassMetrics {
    let precision = ratio(tp, tp + fp, degenerate);
    let recall = ratio(tp, tp + fn_, degenerate);
    let f1 = if precision + recall == 0.0 {
        *degenerate = true;
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    ClassMetrics {
        precision,
        recall,
        f1,
        support: tp + fn_,
    }
}

/// Per-class metrics (each class taken as positive in turn), their
/// support-weighted and unweighted means, and accuracy.
pub fn weighted_metrics(cm: &ConfusionMatrix) -> Result<MetricsReport, MetricsError> {
    let total = cm.total();
    if total == 0 {
        return Err(MetricsError::EmptyInput);
    }
    let mut degenerate = Vec::new();
    let mut neg_flag = false;
    let negative = class_metrics(cm.tn, cm.fn_, cm.fp, &mut neg_flag);
    if neg_flag {
        degenerate.push(0);
    }
    let mut pos_flag = false;
    let positive = class_metrics(cm.tp, cm.fp, cm.fn_, &mut pos_flag);
    if pos_flag {
        degenerate.push(1);
    }
    let per_class = [negative, positive];

    let t = total as f64;
    let weighted_mean = |f: fn(&ClassMetrics) -> f64| {
        per_class
            .iter()
            .map(|c| f(c) * c.support as f64)
            .sum::<f64>()
            / t
    };
    let plain_mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / 2.0;

    Ok(MetricsReport {
        confusion: *cm,
        per_class,
        weighted: Averages {
            precision: weighted_mean(|c| c.precision),
            recall: weighted_mean(|c| c.recall),
            f1: weighted_mean(|c| c.f1),
        },
        macro_avg: Averages {
            precision: plain_mean(|c| c.precision),
            recall: plain_mean(|c| c.recall),
            f1: plain_mean(|c| c.f1),
        },
        accuracy: (cm.tp + cm.tn) as f64 / t,
        degenerate,
    })
}

/// Convenience wrapper: [`confusion`] followed by [`weighted_metrics`].
pub fn weighted_metrics_from_labels(
    y_true: &[u8],
    y_pred: &[u8],
) -> Result<MetricsReport, MetricsError> {
    weighted_metrics(&confusion(y_true, y_pred)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub recall: f64,
    pub precision: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    /// One point per distinct score, highest threshold first.
    pub points: Vec<PrPoint>,
    pub average_precision: f64,
}

/// Precision-recall curve over descending score thresholds. Tied scores form
/// a single threshold. Average precision is the non-interpolated step sum
/// `Σ (R_n − R_{n−1}) · P_n` with `R_0 = 0`.
pub fn pr_curve(y_true: &[u8], scores: &[f64]) -> Result<PrCurve, MetricsError> {
    if y_true.len() != scores.len() {
        return Err(MetricsError::LengthMismatch {
            left: y_true.len(),
            right: scores.len(),
        });
    }
    if let Some((index, &value)) = y_true.iter().enumerate().find(|(_, &v)| v > 1) {
        return Err(MetricsError::NonBinaryLabel { index, value });
    }
    let positives = y_true.iter().filter(|&&y| y == 1).count() as u64;
    if positives == 0 {
        return Err(MetricsError::NoPositives);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = Vec::new();
    let (mut tp, mut seen) = (0u64, 0u64);
    let mut average_precision = 0.0;
    let mut prev_recall = 0.0;
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]].total_cmp(&threshold).is_eq() {
            tp += u64::from(y_true[order[i]]);
            seen += 1;
            i += 1;
        }
        let recall = tp as f64 / positives as f64;
        let precision = tp as f64 / seen as f64;
        average_precision += (recall - prev_recall) * precision;
        prev_recall = recall;
        points.push(PrPoint {
            threshold,
            recall,
            precision,
        });
    }
    Ok(PrCurve {
        points,
        average_precision,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaResult {
    pub kappa: f64,
    pub observed_agreement: f64,
    pub expected_agreement: f64,
}

/// Cohen's kappa for two raters over binary ratings.
///
/// When both raters use a single identical class throughout, expected
/// agreement is 1 and kappa is defined as 1.0.
pub fn cohen_kappa(ratings_a: &[u8], ratings_b: &[u8]) -> Result<KappaResult, MetricsError> {
    check_pair(ratings_a, ratings_b)?;
    let n = ratings_a.len() as f64;
    let agree = ratings_a
        .iter()
        .zip(ratings_b)
        .filter(|(a, b)| a == b)
        .count() as f64;
    let pos_a = ratings_a.iter().filter(|&&r| r == 1).count() as f64 / n;
    let pos_b = ratings_b.iter().filter(|&&r| r == 1).count() as f64 / n;
    let po = agree / n;
    let pe = pos_a * pos_b + (1.0 - pos_a) * (1.0 - pos_b);
    let kappa = if pe >= 1.0 { 1.0 } else { (po - pe) / (1.0 - pe) };
    Ok(KappaResult {
        kappa,
        observed_agreement: po,
        expected_agreement: pe,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn confusion_counts_hand_example() {
        let cm = confusion(&[1, 1, 0, 0], &[1, 0, 0, 0]).unwrap();
        assert_eq!(cm, ConfusionMatrix::new(1, 0, 1, 2));
    }

    #[test]
    fn confusion_identity_has_no_errors() {
        let y = [1, 0, 1, 1, 0];
        let cm = confusion(&y, &y).unwrap();
        assert_eq!((cm.fp, cm.fn_), (0, 0));
    }

    #[test]
    fn confusion_rejects_bad_input() {
        assert_eq!(
            confusion(&[1, 0], &[1]),
            Err(MetricsError::LengthMismatch { left: 2, right: 1 })
        );
        assert_eq!(
            confusion(&[1, 2], &[1, 0]),
            Err(MetricsError::NonBinaryLabel { index: 1, value: 2 })
        );
        assert_eq!(confusion(&[], &[]), Err(MetricsError::EmptyInput));
    }

    #[test]
    fn weighted_f1_hand_example() {
        let report = weighted_metrics(&ConfusionMatrix::new(1, 0, 1, 2)).unwrap();
        assert!(close(report.per_class[1].f1, 2.0 / 3.0));
        assert!(close(report.per_class[0].f1, 0.8));
        assert!(close(report.weighted.f1, (2.0 / 3.0 + 0.8) / 2.0));
        assert!(close(report.accuracy, 0.75));
        assert!(report.degenerate.is_empty());
    }

    #[test]
    fn accuracy_forced_by_published_counts() {
        for fp in 0..=40 {
            let cm = ConfusionMatrix::new(240, fp, 40 - fp, 244);
            let acc = weighted_metrics(&cm).unwrap().accuracy;
            assert!((acc - 484.0 / 524.0).abs() < 1e-9);
        }
    }

    #[test]
    fn perfect_predictions_score_one() {
        let report = weighted_metrics_from_labels(&[1, 0, 1, 0], &[1, 0, 1, 0]).unwrap();
        assert_eq!(report.weighted.f1, 1.0);
        assert_eq!(report.weighted.precision, 1.0);
        assert_eq!(report.weighted.recall, 1.0);
        assert_eq!(report.accuracy, 1.0);
    }

    #[test]
    fn zero_denominator_is_flagged() {
        // never predicts positive: positive-class precision is 0/0
        let report = weighted_metrics(&ConfusionMatrix::new(0, 0, 3, 5)).unwrap();
        assert_eq!(report.per_class[1].precision, 0.0);
        assert_eq!(report.degenerate, vec![1]);
        assert_eq!(
            weighted_metrics(&ConfusionMatrix::default()),
            Err(MetricsError::EmptyInput)
        );
    }

    #[test]
    fn average_precision_hand_example() {
        let curve = pr_curve(&[1, 0, 1, 0], &[0.9, 0.8, 0.7, 0.6]).unwrap();
        assert!(close(curve.average_precision, 0.5 + 0.5 * 2.0 / 3.0));
        assert_eq!(curve.points.len(), 4);
    }

    #[test]
    fn average_precision_perfect_and_tied() {
        let perfect = pr_curve(&[1, 1, 0, 0], &[0.9, 0.8, 0.2, 0.1]).unwrap();
        assert_eq!(perfect.average_precision, 1.0);
        let tied = pr_curve(&[1, 0, 1, 0], &[0.5; 4]).unwrap();
        assert_eq!(tied.points.len(), 1);
        assert!(close(tied.average_precision, 0.5));
        assert_eq!(pr_curve(&[0, 0], &[0.1, 0.2]), Err(MetricsError::NoPositives));
    }

    #[test]
    fn kappa_hand_examples() {
        let k = cohen_kappa(&[1, 1, 0, 0], &[1, 0, 0, 1]).unwrap();
        assert!(close(k.observed_agreement, 0.5));
        assert!(close(k.expected_agreement, 0.5));
        assert!(close(k.kappa, 0.0));

        let k = cohen_kappa(&[1, 1, 1, 0], &[1, 1, 0, 0]).unwrap();
        assert!(close(k.observed_agreement, 0.75));
        assert!(close(k.expected_agreement, 0.5));
        assert!(close(k.kappa, 0.5));
    }

    #[test]
    fn kappa_identity_and_constant_raters() {
        assert_eq!(cohen_kappa(&[1, 0, 1], &[1, 0, 1]).unwrap().kappa, 1.0);
        assert_eq!(cohen_kappa(&[1, 1], &[1, 1]).unwrap().kappa, 1.0);
        assert!(matches!(
            cohen_kappa(&[1], &[1, 0]),
            Err(MetricsError::LengthMismatch { .. })
        ));
    }
}
