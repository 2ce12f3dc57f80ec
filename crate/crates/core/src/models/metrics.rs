//! Classification metrics and mask-overlap measures.
//!
//! Class 1 (vessel) is the positive class. Every derived metric comes
//! from the four confusion counts alone; degenerate denominators yield
//! a 0 metric with an explicit flag rather than NaN.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::BinaryMask;

/// The four outcome counts, with class 1 = vessel = positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    #[serde(rename = "tp")]
    pub true_pos: u64,
    #[serde(rename = "tn")]
    pub true_neg: u64,
    #[serde(rename = "fp")]
    pub false_pos: u64,
    #[serde(rename = "fn")]
    pub false_neg: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.true_pos + self.true_neg + self.false_pos + self.false_neg
    }

    pub fn accuracy(&self) -> f64 {
        if self.total() == 0 {
            return 0.0;
        }
        (self.true_pos + self.true_neg) as f64 / self.total() as f64
    }
}

/// Precision/recall/F1 for one class treated as positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// True when any denominator was zero and the metric was forced
    /// to 0.
    pub degenerate: bool,
}

fn class_metrics(tp: u64, fp: u64, fn_: u64) -> ClassMetrics {
    let mut degenerate = false;
    let mut ratio = |num: u64, den: u64| -> f64 {
        if den == 0 {
            degenerate = true;
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        degenerate = true;
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    ClassMetrics {
        precision,
        recall,
        f1,
        degenerate,
    }
}

/// Confusion counts plus all §-style derived metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub class0: ClassMetrics,
    pub class1: ClassMetrics,
}

impl MetricsReport {
    /// Builds the full report from raw counts.
    pub fn from_confusion(confusion: ConfusionMatrix) -> Self {
        let ConfusionMatrix {
            true_pos,
            true_neg,
            false_pos,
            false_neg,
        } = confusion;
        Self {
            confusion,
            accuracy: confusion.accuracy(),
            // For class 0 the roles swap: its "true positives" are the
            // true negatives, a background pixel called vessel is its
            // false negative, and vice versa.
            class0: class_metrics(true_neg, false_neg, false_pos),
            class1: class_metrics(true_pos, false_pos, false_neg),
        }
    }

    /// Accuracy formatted as a percentage with two decimals.
    pub fn accuracy_percent(&self) -> String {
        format!("{:.2}%", 100.0 * self.accuracy)
    }

    /// Copy with every derived metric rounded to 6 decimal places, for
    /// the on-disk JSON report.
    pub fn rounded(&self) -> Self {
        let r6 = |x: f64| (x * 1e6).round() / 1e6;
        let rc = |c: ClassMetrics| ClassMetrics {
            precision: r6(c.precision),
            recall: r6(c.recall),
            f1: r6(c.f1),
            degenerate: c.degenerate,
        };
        Self {
            confusion: self.confusion,
            accuracy: r6(self.accuracy),
            class0: rc(self.class0),
            class1: rc(self.class1),
        }
    }
}

/// Counts outcomes and derives all metrics. Labels must be 0 or 1.
pub fn evaluate(truth: &[u8], predicted: &[u8]) -> Result<MetricsReport> {
    if truth.len() != predicted.len() {
        return Err(Error::LengthMismatch(format!(
            "{} truth labels vs {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    let mut m = ConfusionMatrix {
        true_pos: 0,
        true_neg: 0,
        false_pos: 0,
        false_neg: 0,
    };
    for (i, (&t, &p)) in truth.iter().zip(predicted).enumerate() {
        match (t, p) {
            (1, 1) => m.true_pos += 1,
            (0, 0) => m.true_neg += 1,
            (0, 1) => m.false_pos += 1,
            (1, 0) => m.false_neg += 1,
            _ => {
                return Err(Error::MalformedRecord(format!(
                    "label pair ({t},{p}) at index {i} is not binary"
                )))
            }
        }
    }
    Ok(MetricsReport::from_confusion(m))
}

/// Dice coefficient 2|A∩B| / (|A|+|B|); two empty masks count as a
/// perfect match.
pub fn dice(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    let mut inter = 0u64;
    let mut total = 0u64;
    for (&pa, &pb) in a.pixels().iter().zip(b.pixels()) {
        let fa = pa == 255;
        let fb = pb == 255;
        inter += (fa && fb) as u64;
        total += fa as u64 + fb as u64;
    }
    if total == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / total as f64)
}

/// Fraction of pixels on which two masks agree.
pub fn pixel_agreement(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    let equal = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .filter(|(x, y)| x == y)
        .count();
    Ok(equal as f64 / a.pixels().len() as f64)
}
