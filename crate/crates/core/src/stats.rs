//! Descriptive statistics: box-plot summaries and Pearson correlations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::{FeatureMatrix, LabelVector};

/// Box-and-whisker numbers for one column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiveNumberSummary {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outlier_count: usize,
}

/// Quantile of sorted data, interpolating at index `(n - 1) * p`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn five_number_summary(column: &[f64]) -> Result<FiveNumberSummary> {
    if column.is_empty() {
        return Err(Error::InvalidInput("cannot summarize an empty column".into()));
    }
    if column.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("column contains non-finite values".into()));
    }
    let mut sorted = column.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25);
    let median = quantile_sorted(&sorted, 0.5);
    let q3 = quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    let low_fence = q1 - 1.5 * iqr;
    let high_fence = q3 + 1.5 * iqr;
    // Whiskers reach the most extreme points inside the fences.
    let whisker_low = sorted
        .iter()
        .copied()
        .find(|&v| v >= low_fence)
        .unwrap_or(q1)
        .min(q1);
    let whisker_high = sorted
        .iter()
        .rev()
        .copied()
        .find(|&v| v <= high_fence)
        .unwrap_or(q3)
        .max(q3);
    let outlier_count = sorted
        .iter()
        .filter(|&&v| v < whisker_low || v > whisker_high)
        .count();
    Ok(FiveNumberSummary {
        min: sorted[0],
        q1,
        median,
        q3,
        max: sorted[sorted.len() - 1],
        whisker_low,
        whisker_high,
        outlier_count,
    })
}

/// Symmetric matrix of Pearson coefficients with named rows/columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl CorrelationMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.names.iter().position(|n| n == a)?;
        let j = self.names.iter().position(|n| n == b)?;
        Some(self.values[i][j])
    }
}

/// Pearson r with population normalization. Constant inputs give 0.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let dx = x - ma;
        let dy = y - mb;
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0)
}

/// Correlations over every matrix column plus the label (as 0/1) last.
pub fn pearson_matrix(m: &FeatureMatrix, labels: &LabelVector) -> Result<CorrelationMatrix> {
    if m.n_rows() < 2 {
        return Err(Error::InvalidInput("correlation needs at least two rows".into()));
    }
    if m.n_rows() != labels.len() {
        return Err(Error::InvalidInput("label count does not match rows".into()));
    }
    let mut names: Vec<String> = m.columns().iter().map(|c| c.name.clone()).collect();
    names.push("income".into());
    let mut cols: Vec<Vec<f64>> = (0..m.n_cols()).map(|j| m.column(j)).collect();
    cols.push(labels.as_01());
    let k = cols.len();
    let mut values = vec![vec![0.0; k]; k];
    for i in 0..k {
        values[i][i] = 1.0;
        for j in i + 1..k {
            let r = pearson(&cols[i], &cols[j]);
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    Ok(CorrelationMatrix { names, values })
}
