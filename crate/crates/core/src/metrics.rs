//! Classification metrics: confusion counts, precision/recall/F1 per class
//! and support-weighted, and ROC analysis of decision scores.

use serde::{Deserialize, Serialize};

use crate::boost::label_for_score;
use crate::error::{Error, Result};

/// Counts with `>50K` as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.total() as f64
    }

    /// Rows are actual classes (`>50K` first), columns predicted classes in
    /// the same order; each row is divided by its sum. Empty rows stay zero.
    pub fn normalized(&self) -> [[f64; 2]; 2] {
        let row = |a: u64, b: u64| {
            let s = a + b;
            if s == 0 {
                [0.0, 0.0]
            } else {
                [a as f64 / s as f64, b as f64 / s as f64]
            }
        };
        [row(self.tp, self.fn_), row(self.fp, self.tn)]
    }

    /// The same counts seen from the `<=50K` class.
    pub fn flipped(&self) -> ConfusionMatrix {
        ConfusionMatrix {
            tp: self.tn,
            fp: self.fn_,
            fn_: self.fp,
            tn: self.tp,
        }
    }
}

pub fn confusion(y_true: &[bool], y_pred: &[bool]) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::InvalidInput(format!(
            "{} labels but {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    let mut cm = ConfusionMatrix::default();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t, p) {
            (true, true) => cm.tp += 1,
            (false, true) => cm.fp += 1,
            (true, false) => cm.fn_ += 1,
            (false, false) => cm.tn += 1,
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
    /// Set when a metric had a zero denominator and was reported as 0.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub accuracy: f64,
    #[serde(rename = ">50K")]
    pub positive: ClassMetrics,
    #[serde(rename = "<=50K")]
    pub negative: ClassMetrics,
    pub weighted: WeightedMetrics,
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

fn class_metrics(cm: &ConfusionMatrix) -> ClassMetrics {
    let (precision, dp) = ratio(cm.tp, cm.tp + cm.fp);
    let (recall, dr) = ratio(cm.tp, cm.tp + cm.fn_);
    let (f1, df) = if precision + recall == 0.0 {
        (0.0, true)
    } else {
        (2.0 * precision * recall / (precision + recall), false)
    };
    ClassMetrics {
        precision,
        recall,
        f1,
        support: cm.tp + cm.fn_,
        degenerate: dp || dr || df,
    }
}

/// Per-class and support-weighted precision, recall and F1.
pub fn report(cm: &ConfusionMatrix) -> ClassificationReport {
    let positive = class_metrics(cm);
    let negative = class_metrics(&cm.flipped());
    let total = (positive.support + negative.support) as f64;
    let weigh = |a: f64, b: f64| {
        if total == 0.0 {
            0.0
        } else {
            (a * positive.support as f64 + b * negative.support as f64) / total
        }
    };
    ClassificationReport {
        accuracy: if cm.total() == 0 { 0.0 } else { cm.accuracy() },
        positive,
        negative,
        weighted: WeightedMetrics {
            precision: weigh(positive.precision, negative.precision),
            recall: weigh(positive.recall, negative.recall),
            f1: weigh(positive.f1, negative.f1),
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Scores at or above this value are called positive. `None` for the
    /// origin, where nothing is.
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

fn class_counts(y_true: &[bool], scores: &[f64]) -> Result<(u64, u64)> {
    if y_true.len() != scores.len() {
        return Err(Error::InvalidInput(format!(
            "{} labels but {} scores",
            y_true.len(),
            scores.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidInput("scores contain NaN".into()));
    }
    let pos = y_true.iter().filter(|&&t| t).count() as u64;
    let neg = y_true.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::InvalidInput("ROC analysis needs both classes".into()));
    }
    Ok((pos, neg))
}

/// Sweeps the threshold down through the distinct scores. Tied scores make
/// one step of the curve; the area is accumulated with the trapezoid rule in
/// integer counts and divided once at the end.
pub fn roc(y_true: &[bool], scores: &[f64]) -> Result<RocCurve> {
    let (pos, neg) = class_counts(y_true, scores)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: None,
    }];
    let (mut tp, mut fp) = (0u64, 0u64);
    // Twice the area in units of one positive-negative pair.
    let mut area2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && scores[order[i]] == s {
            if y_true[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        area2 += u128::from(fp - fp0) * u128::from(tp + tp0);
        points.push(RocPoint {
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
            threshold: Some(s),
        });
    }
    let auc = area2 as f64 / (2.0 * pos as f64 * neg as f64);
    Ok(RocCurve { points, auc })
}

/// AUC as the Mann-Whitney statistic from mid-ranks: the probability that a
/// random positive outscores a random negative, ties counting one half.
pub fn auc_mann_whitney(y_true: &[bool], scores: &[f64]) -> Result<f64> {
    let (pos, neg) = class_counts(y_true, scores)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // Ranks i+1..=j share their mean.
        let mid = (i + 1 + j) as f64 / 2.0;
        let hits = order[i..j].iter().filter(|&&k| y_true[k]).count();
        rank_sum += mid * hits as f64;
        i = j;
    }
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos as f64 * neg as f64))
}

pub const EVAL_SCHEMA_VERSION: u32 = 1;

/// Everything reported for one evaluated split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub split: String,
    pub n: usize,
    pub confusion: ConfusionMatrix,
    pub normalized_confusion: [[f64; 2]; 2],
    pub report: ClassificationReport,
    pub auc_pairwise: f64,
    pub roc: RocCurve,
}

/// Scores rows, thresholds at zero and collects every metric.
pub fn evaluate(split: &str, y_true: &[bool], scores: &[f64]) -> Result<EvalReport> {
    let preds: Vec<bool> = scores.iter().map(|&s| label_for_score(s).is_positive()).collect();
    let cm = confusion(y_true, &preds)?;
    Ok(EvalReport {
        schema_version: EVAL_SCHEMA_VERSION,
        split: split.to_owned(),
        n: y_true.len(),
        confusion: cm,
        normalized_confusion: cm.normalized(),
        report: report(&cm),
        auc_pairwise: auc_mann_whitney(y_true, scores)?,
        roc: roc(y_true, scores)?,
    })
}
