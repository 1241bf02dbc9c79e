//! Frame-level classification metrics: confusion matrix, accuracy,
//! per-class and headline recall/precision/F1, and class-wise average
//! precision.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::detector::DetectionResult;
use crate::error::{Error, Result};
use crate::segment::FrameLabel;

/// Counts indexed `[true][predicted]` in `NS, NTSS, TSS` order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 3]; 3],
}

impl ConfusionMatrix {
    pub fn get(&self, truth: FrameLabel, predicted: FrameLabel) -> u64 {
        self.counts[truth.index()][predicted.index()]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..3).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sum(&self, class: FrameLabel) -> u64 {
        self.counts[class.index()].iter().sum()
    }

    pub fn col_sum(&self, class: FrameLabel) -> u64 {
        self.counts.iter().map(|r| r[class.index()]).sum()
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for (r, o) in self.counts.iter_mut().zip(&other.counts) {
            for (c, x) in r.iter_mut().zip(o) {
                *c += x;
            }
        }
    }
}

pub fn confusion(labels: &[FrameLabel], predictions: &[FrameLabel]) -> Result<ConfusionMatrix> {
    if labels.len() != predictions.len() {
        return Err(Error::LengthMismatch {
            left: labels.len(),
            right: predictions.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut cm = ConfusionMatrix::default();
    for (t, p) in labels.iter().zip(predictions) {
        cm.counts[t.index()][p.index()] += 1;
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    /// TSS-class recall.
    pub recall: f64,
    /// TSS-class precision.
    pub precision: f64,
    /// TSS-class F1.
    pub f1: f64,
    /// Indexed `NS, NTSS, TSS`.
    pub per_class: [ClassMetrics; 3],
    pub macro_recall: f64,
    pub macro_precision: f64,
    pub macro_f1: f64,
    /// Average precision per class; `None` when the class has no positives.
    pub per_class_ap: [Option<f64>; 3],
    pub confusion: ConfusionMatrix,
    pub frame_count: u64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Rates from a confusion matrix; AP fields are left empty.
pub fn summary(cm: &ConfusionMatrix) -> Result<MetricsReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::EmptyMatrix);
    }
    let per_class = FrameLabel::ALL.map(|c| {
        let tp = cm.get(c, c);
        let recall = ratio(tp, cm.row_sum(c));
        let precision = ratio(tp, cm.col_sum(c));
        ClassMetrics {
            recall,
            precision,
            f1: harmonic(precision, recall),
        }
    });
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / 3.0;
    let tss = per_class[FrameLabel::TargetSpeech.index()];
    Ok(MetricsReport {
        accuracy: ratio(cm.correct(), total),
        recall: tss.recall,
        precision: tss.precision,
        f1: tss.f1,
        per_class,
        macro_recall: mean(|m| m.recall),
        macro_precision: mean(|m| m.precision),
        macro_f1: mean(|m| m.f1),
        per_class_ap: [None; 3],
        confusion: *cm,
        frame_count: total,
    })
}

/// Non-interpolated average precision: the mean, over positive items, of
/// the precision at the rank of each positive. Items are ranked by score,
/// descending, with ties kept in input order.
pub fn average_precision(scores: &[f64], positives: &[bool]) -> Result<f64> {
    if scores.len() != positives.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: positives.len(),
        });
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFinite(format!("score[{i}] = {}", scores[i])));
    }
    let n_pos = positives.iter().filter(|&&p| p).count();
    if n_pos == 0 {
        return Err(Error::NoPositives);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(Ordering::Equal));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        if positives[i] {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(sum / n_pos as f64)
}

/// Per-class ranking scores derived from activity and similarity.
///
/// * NS: `1 - activity`
/// * NTSS: `activity * (1 - max(similarity, 0))`
/// * TSS: `similarity`
pub fn class_scores(activity: f64, similarity: f64) -> [f64; 3] {
    [
        1.0 - activity,
        activity * (1.0 - similarity.max(0.0)),
        similarity,
    ]
}

/// Human-readable description of [`class_scores`], echoed in reports.
pub const CLASS_SCORE_CONVENTION: &str =
    "NS: 1 - activity; NTSS: activity * (1 - max(similarity, 0)); TSS: similarity";

/// Full report for aligned ground truth, activity and detections.
pub fn evaluate(
    labels: &[FrameLabel],
    activity: &[f64],
    detection: &DetectionResult,
) -> Result<MetricsReport> {
    if activity.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: labels.len(),
            right: activity.len(),
        });
    }
    if detection.scores.len() != detection.decisions.len() {
        return Err(Error::LengthMismatch {
            left: detection.decisions.len(),
            right: detection.scores.len(),
        });
    }
    let cm = confusion(labels, &detection.decisions)?;
    let mut report = summary(&cm)?;
    let per_frame: Vec<[f64; 3]> = activity
        .iter()
        .zip(&detection.scores)
        .map(|(&a, &s)| class_scores(a, s))
        .collect();
    for class in FrameLabel::ALL {
        let k = class.index();
        let scores: Vec<f64> = per_frame.iter().map(|s| s[k]).collect();
        let positives: Vec<bool> = labels.iter().map(|&l| l == class).collect();
        report.per_class_ap[k] = match average_precision(&scores, &positives) {
            Ok(ap) => Some(ap),
            Err(Error::NoPositives) => None,
            Err(e) => return Err(e),
        };
    }
    Ok(report)
}
