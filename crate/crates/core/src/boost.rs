//! Boosted tree ensembles.
//!
//! Two training modes share one ensemble type:
//!
//! * [`BoostMode::Algorithm1`] reweights a sample distribution `D` after
//!   every round, `D'(i) = D(i) exp(-alpha y_i h(x_i)) / Z`, and weights each
//!   gini tree by `alpha = 0.5 ln((1 - eps) / eps)` where `eps` is the tree's
//!   weighted error under `D`. The score is `sum_t alpha_t h_t(x)` with
//!   `h_t(x)` in `{-1, +1}`.
//! * [`BoostMode::Logit`] is stagewise additive modelling of the binomial
//!   deviance: regression trees are fitted to the residuals `y - sigmoid(F)`
//!   and each leaf is replaced by a single Newton step before shrinkage.
//!   The score is `F0 + nu * sum_t tree_t(x)`.
//!
//! In both modes the score is positive for the `>50K` class.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Income;
use crate::preprocess::{Dataset, FeatureMatrix};
use crate::trees::{fit_tree_binned, BinnedMatrix, Criterion, DecisionTree, Node, TreeParams};

/// Weighted error assigned to a stage that classifies every row correctly.
/// Its alpha (about 11.5) stands in for the unbounded weight of a perfect
/// learner.
pub const PERFECT_STAGE_EPS: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoostMode {
    Algorithm1,
    Logit,
}

impl std::str::FromStr for BoostMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "algorithm1" => Ok(BoostMode::Algorithm1),
            "logit" => Ok(BoostMode::Logit),
            other => Err(Error::Config(format!(
                "unknown mode `{other}` (expected `logit` or `algorithm1`)"
            ))),
        }
    }
}

impl std::fmt::Display for BoostMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BoostMode::Algorithm1 => "algorithm1",
            BoostMode::Logit => "logit",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_split: usize,
}

impl Default for BoostParams {
    /// 250 trees of depth 4 with shrinkage 0.1.
    fn default() -> Self {
        Self {
            n_estimators: 250,
            max_depth: 4,
            learning_rate: 0.1,
            min_samples_split: 2,
        }
    }
}

impl BoostParams {
    fn validate(&self, mode: BoostMode) -> Result<()> {
        if self.n_estimators == 0 {
            return Err(Error::Config("at least one boosting stage is required".into()));
        }
        if self.max_depth == 0 {
            return Err(Error::Config("max_depth must be at least 1".into()));
        }
        if mode == BoostMode::Logit && !(0.0..=1.0).contains(&self.learning_rate) {
            return Err(Error::Config(format!(
                "learning rate must lie in [0, 1], got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Per-row sample distribution summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleWeights(Vec<f64>);

impl SampleWeights {
    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    /// Normalizes arbitrary non-negative weights.
    pub fn from_unnormalized(w: Vec<f64>) -> Result<Self> {
        let total: f64 = w.iter().sum();
        if total.is_nan() || total <= 0.0 || w.iter().any(|v| *v < 0.0 || !v.is_finite()) {
            return Err(Error::Numeric("weights must be non-negative with positive sum".into()));
        }
        Ok(Self(w.into_iter().map(|v| v / total).collect()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Total weight on rows where `preds` and `labels` disagree.
    pub fn weighted_error(&self, preds: &[f64], labels: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(preds.iter().zip(labels))
            .filter(|(_, (p, y))| p != y)
            .map(|(d, _)| d)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostStage {
    pub tree: DecisionTree,
    /// Stage weight: the computed alpha in algorithm1 mode, the shrinkage
    /// factor in logit mode.
    pub alpha: f64,
    /// Weighted training error of the stage (algorithm1 mode only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedEnsemble {
    pub mode: BoostMode,
    pub initial_score: f64,
    pub n_estimators: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub n_features: usize,
    pub stages: Vec<BoostStage>,
}

/// What happened at each stage while training.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FitTrace {
    /// Algorithm1: the normalizer `Z_t` of every reweighting.
    pub normalizers: Vec<f64>,
    /// Logit: mean training deviance after each stage, starting with the
    /// constant model.
    pub train_loss: Vec<f64>,
}

pub fn compute_alpha(eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("weighted error must lie in (0, 1), got {eps}")));
    }
    // Difference of logs keeps alpha(1 - eps) == -alpha(eps) bit for bit.
    Ok(0.5 * ((1.0 - eps).ln() - eps.ln()))
}

fn check_signed(values: &[f64], what: &str) -> Result<()> {
    if values.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::InvalidInput(format!("{what} must be -1 or +1")));
    }
    Ok(())
}

/// Exponential reweighting. Returns the new distribution and `Z`.
pub fn reweight(
    d: &SampleWeights,
    alpha: f64,
    preds: &[f64],
    labels: &[f64],
) -> Result<(SampleWeights, f64)> {
    if preds.len() != d.len() || labels.len() != d.len() {
        return Err(Error::InvalidInput("weights, predictions and labels differ in length".into()));
    }
    check_signed(preds, "predictions")?;
    check_signed(labels, "labels")?;
    let raw: Vec<f64> = d
        .0
        .iter()
        .zip(preds.iter().zip(labels))
        .map(|(w, (h, y))| w * (-alpha * y * h).exp())
        .collect();
    let z: f64 = raw.iter().sum();
    if z.is_nan() || z <= 0.0 || !z.is_finite() {
        return Err(Error::Numeric(format!("normalizer Z = {z}")));
    }
    Ok((SampleWeights(raw.into_iter().map(|v| v / z).collect()), z))
}

pub fn update_weights(d: &SampleWeights, alpha: f64, preds: &[f64], labels: &[f64]) -> Result<SampleWeights> {
    reweight(d, alpha, preds, labels).map(|(w, _)| w)
}

fn check_binary_dataset(train: &Dataset) -> Result<()> {
    if train.is_empty() {
        return Err(Error::InvalidInput("training set is empty".into()));
    }
    if train.x.n_rows() != train.y.len() {
        return Err(Error::InvalidInput("feature rows and labels differ in count".into()));
    }
    Ok(())
}

/// Exponential-reweighting boosting with computed stage weights.
pub fn fit_algorithm1(train: &Dataset, params: &BoostParams) -> Result<BoostedEnsemble> {
    fit_algorithm1_traced(train, params).map(|(e, _)| e)
}

pub fn fit_algorithm1_traced(train: &Dataset, params: &BoostParams) -> Result<(BoostedEnsemble, FitTrace)> {
    params.validate(BoostMode::Algorithm1)?;
    check_binary_dataset(train)?;
    let binned = BinnedMatrix::new(&train.x);
    let y01 = train.y.as_01();
    let signed = train.y.as_signed();
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_samples_split: params.min_samples_split,
        criterion: Criterion::Gini,
    };
    let mut d = SampleWeights::uniform(train.len());
    let mut stages = Vec::new();
    let mut trace = FitTrace::default();
    for _ in 0..params.n_estimators {
        let fitted = fit_tree_binned(&binned, &y01, d.as_slice(), &tree_params)?;
        let mut tree = fitted.tree;
        // Gini leaves are 0/1; the vote is -1/+1.
        for node in &mut tree.nodes {
            if let Node::Leaf { value } = node {
                *value = 2.0 * *value - 1.0;
            }
        }
        let preds: Vec<f64> = fitted
            .leaf_of_row
            .iter()
            .map(|&leaf| match tree.nodes[leaf as usize] {
                Node::Leaf { value } => value,
                Node::Split { .. } => unreachable!("rows end in leaves"),
            })
            .collect();
        let eps = d.weighted_error(&preds, &signed);
        if eps >= 0.5 {
            break;
        }
        if eps <= 0.0 {
            stages.push(BoostStage {
                tree,
                alpha: compute_alpha(PERFECT_STAGE_EPS)?,
                eps: Some(0.0),
            });
            break;
        }
        let alpha = compute_alpha(eps)?;
        let (next, z) = reweight(&d, alpha, &preds, &signed)?;
        trace.normalizers.push(z);
        d = next;
        stages.push(BoostStage {
            tree,
            alpha,
            eps: Some(eps),
        });
    }
    let ensemble = BoostedEnsemble {
        mode: BoostMode::Algorithm1,
        initial_score: 0.0,
        n_estimators: params.n_estimators,
        max_depth: params.max_depth,
        learning_rate: params.learning_rate,
        n_features: train.x.n_cols(),
        stages,
    };
    Ok((ensemble, trace))
}

/// Logistic function, split on sign so `exp` never overflows.
pub fn sigmoid(f: f64) -> f64 {
    if f >= 0.0 {
        1.0 / (1.0 + (-f).exp())
    } else {
        let e = f.exp();
        e / (1.0 + e)
    }
}

/// Mean binomial deviance `log(1 + e^F) - y F` over rows.
pub fn log_loss(y01: &[f64], scores: &[f64]) -> f64 {
    let total: f64 = y01
        .iter()
        .zip(scores)
        .map(|(&y, &f)| f.max(0.0) + (-f.abs()).exp().ln_1p() - y * f)
        .sum();
    total / y01.len() as f64
}

/// Gradient boosting on the binomial deviance with Newton leaf values.
pub fn fit_logit_gbm(train: &Dataset, params: &BoostParams) -> Result<BoostedEnsemble> {
    fit_logit_gbm_traced(train, params).map(|(e, _)| e)
}

pub fn fit_logit_gbm_traced(train: &Dataset, params: &BoostParams) -> Result<(BoostedEnsemble, FitTrace)> {
    let mut trace = FitTrace::default();
    let ensemble = fit_logit_gbm_with(train, params, |p| {
        trace.train_loss.push(log_loss(p.labels01, p.train_scores));
    })?;
    Ok((ensemble, trace))
}

/// Snapshot handed to the observer of [`fit_logit_gbm_with`].
pub struct LogitProgress<'a> {
    /// Number of stages fitted so far; 0 for the constant model.
    pub stages_done: usize,
    pub initial_score: f64,
    /// The stage just fitted, `None` for the constant model.
    pub stage: Option<&'a BoostStage>,
    pub train_scores: &'a [f64],
    pub labels01: &'a [f64],
}

/// Logit training loop that reports the constant model and then every
/// stage to `observe`.
pub fn fit_logit_gbm_with<F>(train: &Dataset, params: &BoostParams, mut observe: F) -> Result<BoostedEnsemble>
where
    F: FnMut(&LogitProgress<'_>),
{
    params.validate(BoostMode::Logit)?;
    check_binary_dataset(train)?;
    let n = train.len();
    let y01 = train.y.as_01();
    let positives = train.y.count_positive();
    if positives == 0 || positives == n {
        return Err(Error::InvalidInput(
            "training labels contain a single class; the initial log-odds is undefined".into(),
        ));
    }
    let base_rate = positives as f64 / n as f64;
    let f0 = (base_rate / (1.0 - base_rate)).ln();
    let mut scores = vec![f0; n];
    observe(&LogitProgress {
        stages_done: 0,
        initial_score: f0,
        stage: None,
        train_scores: &scores,
        labels01: &y01,
    });

    let binned = BinnedMatrix::new(&train.x);
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_samples_split: params.min_samples_split,
        criterion: Criterion::SquaredError,
    };
    let unit = vec![1.0; n];
    let mut residual = vec![0.0; n];
    let mut hessian = vec![0.0; n];
    let mut stages = Vec::with_capacity(params.n_estimators);
    for _ in 0..params.n_estimators {
        for i in 0..n {
            let p = sigmoid(scores[i]);
            residual[i] = y01[i] - p;
            hessian[i] = p * (1.0 - p);
        }
        let fitted = fit_tree_binned(&binned, &residual, &unit, &tree_params)?;
        let mut tree = fitted.tree;
        let mut num = vec![0.0; tree.nodes.len()];
        let mut den = vec![0.0; tree.nodes.len()];
        for (i, &leaf) in fitted.leaf_of_row.iter().enumerate() {
            num[leaf as usize] += residual[i];
            den[leaf as usize] += hessian[i];
        }
        for (k, node) in tree.nodes.iter_mut().enumerate() {
            if let Node::Leaf { value } = node {
                *value = if den[k].abs() < 1e-150 { 0.0 } else { num[k] / den[k] };
            }
        }
        for (i, &leaf) in fitted.leaf_of_row.iter().enumerate() {
            if let Node::Leaf { value } = tree.nodes[leaf as usize] {
                scores[i] += params.learning_rate * value;
            }
        }
        let stage = BoostStage {
            tree,
            alpha: params.learning_rate,
            eps: None,
        };
        observe(&LogitProgress {
            stages_done: stages.len() + 1,
            initial_score: f0,
            stage: Some(&stage),
            train_scores: &scores,
            labels01: &y01,
        });
        stages.push(stage);
    }
    Ok(BoostedEnsemble {
        mode: BoostMode::Logit,
        initial_score: f0,
        n_estimators: params.n_estimators,
        max_depth: params.max_depth,
        learning_rate: params.learning_rate,
        n_features: train.x.n_cols(),
        stages,
    })
}

impl BoostedEnsemble {
    pub fn decision_function(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(Error::Arity {
                expected: self.n_features,
                actual: x.len(),
            });
        }
        Ok(self.decision_unchecked(x))
    }

    fn decision_unchecked(&self, x: &[f64]) -> f64 {
        self.stages
            .iter()
            .fold(self.initial_score, |acc, s| acc + s.alpha * s.tree.predict_unchecked(x))
    }

    pub fn decision_matrix(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        if x.n_cols() != self.n_features {
            return Err(Error::Arity {
                expected: self.n_features,
                actual: x.n_cols(),
            });
        }
        Ok((0..x.n_rows()).map(|i| self.decision_unchecked(x.row(i))).collect())
    }

    pub fn predict(&self, x: &[f64]) -> Result<Income> {
        self.decision_function(x).map(label_for_score)
    }

    /// Structural checks for an ensemble read from disk.
    pub fn validate(&self) -> Result<()> {
        if self.stages.len() > self.n_estimators {
            return Err(Error::Format("more stages than n_estimators".into()));
        }
        if !self.initial_score.is_finite() {
            return Err(Error::Format("initial score is not finite".into()));
        }
        for (i, s) in self.stages.iter().enumerate() {
            s.tree.validate()?;
            if s.tree.n_features != self.n_features {
                return Err(Error::Format(format!("stage {i} has the wrong feature count")));
            }
            if s.tree.depth() > self.max_depth {
                return Err(Error::Format(format!("stage {i} exceeds max_depth")));
            }
            if !s.alpha.is_finite() {
                return Err(Error::Format(format!("stage {i} weight is not finite")));
            }
        }
        Ok(())
    }
}

pub fn decision_function(e: &BoostedEnsemble, x: &[f64]) -> Result<f64> {
    e.decision_function(x)
}

pub fn predict(e: &BoostedEnsemble, x: &[f64]) -> Result<Income> {
    e.predict(x)
}

/// Positive scores are `>50K`; zero and below are `<=50K`.
pub fn label_for_score(score: f64) -> Income {
    if score > 0.0 {
        Income::Above50K
    } else {
        Income::AtMost50K
    }
}
