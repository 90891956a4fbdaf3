//! Grid search over logit boosting hyperparameters with k-fold
//! cross-validation.
//!
//! Boosting here is deterministic and has no subsampling, so the model with
//! `m` stages is exactly the first `m` stages of any longer run with the same
//! depth and learning rate. Cells that differ only in `n_estimators` are
//! therefore scored from one training run per fold, reading validation
//! accuracy off at each requested stage count.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::boost::{fit_logit_gbm_with, label_for_score, BoostParams};
use crate::error::{Error, Result};
use crate::preprocess::Dataset;
use crate::rng::{streams, DetRng};

pub const TUNE_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_FOLDS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid {
    pub n_estimators: Vec<usize>,
    pub max_depth: Vec<usize>,
    pub learning_rate: Vec<f64>,
}

impl Default for ParamGrid {
    fn default() -> Self {
        Self {
            n_estimators: vec![100, 150, 200, 250, 300],
            max_depth: vec![2, 3, 4, 5],
            learning_rate: vec![0.1],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
}

impl ParamGrid {
    pub fn validate(&self) -> Result<()> {
        if self.n_estimators.is_empty() || self.max_depth.is_empty() || self.learning_rate.is_empty() {
            return Err(Error::Config("every grid axis needs at least one value".into()));
        }
        if self.n_estimators.contains(&0) || self.max_depth.contains(&0) {
            return Err(Error::Config("grid values must be positive".into()));
        }
        if self.learning_rate.iter().any(|&v| !(v > 0.0 && v <= 1.0)) {
            return Err(Error::Config("learning rates must lie in (0, 1]".into()));
        }
        Ok(())
    }

    /// Cells in grid order: estimators outermost, learning rate innermost.
    pub fn cells(&self) -> Vec<GridCell> {
        let mut out = Vec::new();
        for &n_estimators in &self.n_estimators {
            for &max_depth in &self.max_depth {
                for &learning_rate in &self.learning_rate {
                    out.push(GridCell {
                        n_estimators,
                        max_depth,
                        learning_rate,
                    });
                }
            }
        }
        out
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let grid: ParamGrid = serde_json::from_str(text)?;
        grid.validate()?;
        Ok(grid)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// Seeded k-fold partition. Fold sizes differ by at most one, with the
/// larger folds first.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::Config(format!("k must be at least 2, got {k}")));
    }
    if k > n {
        return Err(Error::Config(format!("k = {k} exceeds the {n} available rows")));
    }
    let perm = DetRng::new(seed, streams::KFOLD).permutation(n);
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for i in 0..k {
        let size = base + usize::from(i < extra);
        let mut validation = perm[start..start + size].to_vec();
        let mut train: Vec<usize> = perm[..start].iter().chain(&perm[start + size..]).copied().collect();
        validation.sort_unstable();
        train.sort_unstable();
        folds.push(Fold { train, validation });
        start += size;
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    #[serde(flatten)]
    pub cell: GridCell,
    pub mean_accuracy: f64,
    pub fold_accuracies: Vec<f64>,
    /// Set when some fold could not be trained (single-class labels); such
    /// cells never become the best cell.
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneReport {
    pub schema_version: u32,
    pub seed: u64,
    pub folds: usize,
    /// Sorted by mean accuracy, best first; failed cells last.
    pub cells: Vec<CellResult>,
    pub best: Option<CellResult>,
}

impl TuneReport {
    pub fn find(&self, n_estimators: usize, max_depth: usize) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.cell.n_estimators == n_estimators && c.cell.max_depth == max_depth)
    }

    /// Plain-text table, best cell first.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:>4}  {:>12}  {:>9}  {:>13}  {:>13}  folds",
            "rank", "n_estimators", "max_depth", "learning_rate", "mean_accuracy"
        );
        for (i, c) in self.cells.iter().enumerate() {
            let folds: Vec<String> = c.fold_accuracies.iter().map(|a| format!("{a:.4}")).collect();
            let mean = if c.failed {
                "failed".to_owned()
            } else {
                format!("{:.5}", c.mean_accuracy)
            };
            let _ = writeln!(
                out,
                "{:>4}  {:>12}  {:>9}  {:>13}  {:>13}  {}",
                i + 1,
                c.cell.n_estimators,
                c.cell.max_depth,
                c.cell.learning_rate,
                mean,
                folds.join(" ")
            );
        }
        out
    }
}

/// Wall-clock spent per (depth, learning rate) group, kept apart from the
/// report so the report itself is reproducible byte for byte.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TuneTimings {
    pub groups: Vec<GroupTiming>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupTiming {
    pub max_depth: usize,
    pub learning_rate: f64,
    pub n_estimators: usize,
    pub fit_seconds: f64,
}

/// Orders best first: higher mean, then fewer estimators, then shallower,
/// then smaller learning rate.
fn rank(a: &CellResult, b: &CellResult) -> std::cmp::Ordering {
    a.failed
        .cmp(&b.failed)
        .then(b.mean_accuracy.total_cmp(&a.mean_accuracy))
        .then(a.cell.n_estimators.cmp(&b.cell.n_estimators))
        .then(a.cell.max_depth.cmp(&b.cell.max_depth))
        .then(a.cell.learning_rate.total_cmp(&b.cell.learning_rate))
}

pub fn grid_search(train: &Dataset, grid: &ParamGrid, k: usize, seed: u64) -> Result<TuneReport> {
    grid_search_timed(train, grid, k, seed).map(|(r, _)| r)
}

pub fn grid_search_timed(
    train: &Dataset,
    grid: &ParamGrid,
    k: usize,
    seed: u64,
) -> Result<(TuneReport, TuneTimings)> {
    grid.validate()?;
    let folds = kfold_indices(train.len(), k, seed)?;
    let cells = grid.cells();

    // (depth, learning-rate bits) -> requested stage counts
    let mut groups: BTreeMap<(usize, u64), Vec<usize>> = BTreeMap::new();
    for c in &cells {
        groups
            .entry((c.max_depth, c.learning_rate.to_bits()))
            .or_default()
            .push(c.n_estimators);
    }

    // accuracy[(depth, lr bits, n_estimators)][fold], None when the fold failed
    let mut accuracy: BTreeMap<(usize, u64, usize), Vec<Option<f64>>> = BTreeMap::new();
    let mut timings = TuneTimings::default();
    for (&(depth, lr_bits), wanted) in &groups {
        let learning_rate = f64::from_bits(lr_bits);
        let max_stages = *wanted.iter().max().expect("groups are non-empty");
        let started = Instant::now();
        for fold in &folds {
            let fold_train = train.select(&fold.train);
            let fold_val = train.select(&fold.validation);
            let params = BoostParams {
                n_estimators: max_stages,
                max_depth: depth,
                learning_rate,
                ..BoostParams::default()
            };
            let truth = fold_val.y.as_bools();
            let mut val_scores = vec![0.0; fold_val.len()];
            let mut at_stage: BTreeMap<usize, f64> = BTreeMap::new();
            let fit = fit_logit_gbm_with(&fold_train, &params, |p| {
                match p.stage {
                    None => val_scores.fill(p.initial_score),
                    Some(stage) => {
                        for (i, s) in val_scores.iter_mut().enumerate() {
                            *s += stage.alpha * stage.tree.predict_unchecked(fold_val.x.row(i));
                        }
                    }
                }
                if wanted.contains(&p.stages_done) {
                    let correct = val_scores
                        .iter()
                        .zip(truth)
                        .filter(|(&s, &t)| label_for_score(s).is_positive() == t)
                        .count();
                    at_stage.insert(p.stages_done, correct as f64 / truth.len() as f64);
                }
            });
            match fit {
                Ok(_) => {
                    for &m in wanted {
                        accuracy
                            .entry((depth, lr_bits, m))
                            .or_default()
                            .push(at_stage.get(&m).copied());
                    }
                }
                Err(Error::InvalidInput(_)) => {
                    for &m in wanted {
                        accuracy.entry((depth, lr_bits, m)).or_default().push(None);
                    }
                }
                Err(e) => return Err(e),
            }
        }
        timings.groups.push(GroupTiming {
            max_depth: depth,
            learning_rate,
            n_estimators: max_stages,
            fit_seconds: started.elapsed().as_secs_f64(),
        });
    }

    let mut results: Vec<CellResult> = cells
        .iter()
        .map(|c| {
            let per_fold = &accuracy[&(c.max_depth, c.learning_rate.to_bits(), c.n_estimators)];
            let failed = per_fold.iter().any(Option::is_none);
            let fold_accuracies: Vec<f64> = per_fold.iter().map(|a| a.unwrap_or(0.0)).collect();
            let mean_accuracy = if failed {
                0.0
            } else {
                fold_accuracies.iter().sum::<f64>() / fold_accuracies.len() as f64
            };
            CellResult {
                cell: *c,
                mean_accuracy,
                fold_accuracies,
                failed,
            }
        })
        .collect();
    results.sort_by(rank);
    let best = results.first().filter(|c| !c.failed).cloned();
    Ok((
        TuneReport {
            schema_version: TUNE_SCHEMA_VERSION,
            seed,
            folds: k,
            cells: results,
            best,
        },
        timings,
    ))
}
