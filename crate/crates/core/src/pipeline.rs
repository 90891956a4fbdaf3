//! End-to-end steps shared by the command-line tool and the tests: each
//! function takes a loaded `RecordSet` and returns plain data, leaving file
//! output to the caller.

use serde::{Deserialize, Serialize};

use crate::boost::{fit_algorithm1_traced, fit_logit_gbm_traced, BoostMode, BoostParams, FitTrace};
use crate::error::{Error, Result};
use crate::ingest::{profile, AttributeId, AttributeKind, RecordSet, SchemaReport};
use crate::metrics::{evaluate, EvalReport};
use crate::model::ModelFile;
use crate::preprocess::{
    apply_label_encoding, drop_features, fit_label_encoding, impute_missing, one_hot_expand,
    shuffle_split, Dataset, EncodingMap, FeatureMatrix, LabelVector, SplitIndex,
};
use crate::stats::{five_number_summary, pearson_matrix, CorrelationMatrix, FiveNumberSummary};
use crate::trees::{feature_importances, fit_extra_trees, ExtraTreesParams, ImportanceVector};
use crate::tune::{grid_search_timed, ParamGrid, TuneReport, TuneTimings};

/// Data after dropping, encoding and expansion, before the split.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub encoding: EncodingMap,
    pub kept: Vec<AttributeId>,
    pub dropped: Vec<AttributeId>,
    pub x: FeatureMatrix,
    pub y: LabelVector,
}

pub fn prepare(rs: RecordSet, dropped: &[AttributeId]) -> Result<Prepared> {
    let rs = drop_features(impute_missing(rs), dropped)?;
    let encoding = fit_label_encoding(&rs)?;
    let coded = apply_label_encoding(&rs, &encoding)?;
    let x = one_hot_expand(&coded, &encoding)?;
    Ok(Prepared {
        encoding,
        kept: rs.attributes.clone(),
        dropped: dropped.to_vec(),
        x,
        y: LabelVector::from_income(&rs.labels()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub mode: BoostMode,
    pub params: BoostParams,
    pub ratio: f64,
    pub seed: u64,
    pub dropped: Vec<AttributeId>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mode: BoostMode::Logit,
            params: BoostParams::default(),
            ratio: 0.8,
            seed: 0,
            dropped: crate::preprocess::DEFAULT_DROPPED.to_vec(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: ModelFile,
    pub split: SplitIndex,
    pub train_report: EvalReport,
    pub validation_report: EvalReport,
    pub trace: FitTrace,
}

pub fn split(prepared: &Prepared, ratio: f64, seed: u64) -> Result<(Dataset, Dataset, SplitIndex)> {
    shuffle_split(&prepared.x, &prepared.y, ratio, seed)
}

pub fn train(rs: RecordSet, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let prepared = prepare(rs, &cfg.dropped)?;
    let (train, test, split) = split(&prepared, cfg.ratio, cfg.seed)?;
    let (ensemble, trace) = match cfg.mode {
        BoostMode::Logit => fit_logit_gbm_traced(&train, &cfg.params)?,
        BoostMode::Algorithm1 => fit_algorithm1_traced(&train, &cfg.params)?,
    };
    let train_report = evaluate("train", train.y.as_bools(), &ensemble.decision_matrix(&train.x)?)?;
    let validation_report =
        evaluate("validation", test.y.as_bools(), &ensemble.decision_matrix(&test.x)?)?;
    let model = ModelFile::new(
        ensemble,
        prepared.encoding,
        prepared.kept,
        prepared.dropped,
        prepared.x.columns().to_vec(),
    );
    Ok(TrainOutcome {
        model,
        split,
        train_report,
        validation_report,
        trace,
    })
}

/// Re-creates the split a model was trained with and evaluates it on the
/// held-out side, encoding rows through the model's own map.
pub fn evaluate_model(model: &ModelFile, rs: RecordSet, ratio: f64, seed: u64) -> Result<EvalReport> {
    let prepared = prepare(rs.clone(), &model.dropped)?;
    let (_, test, split) = split(&prepared, ratio, seed)?;
    let mut scores = Vec::with_capacity(test.len());
    for &i in split.test_indices() {
        scores.push(model.score_row(&rs.rows[i].values)?.0);
    }
    evaluate("validation", test.y.as_bools(), &scores)
}

/// Label-encoded matrix over every attribute still present in `rs`.
pub fn label_encoded(rs: &RecordSet) -> Result<(FeatureMatrix, LabelVector)> {
    let map = fit_label_encoding(rs)?;
    let m = apply_label_encoding(rs, &map)?;
    Ok((m, LabelVector::from_income(&rs.labels())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileOutcome {
    pub schema: SchemaReport,
    pub summaries: Vec<(String, FiveNumberSummary)>,
    pub correlation: CorrelationMatrix,
}

pub fn profile_data(rs: &RecordSet) -> Result<ProfileOutcome> {
    if rs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let schema = profile(rs);
    let mut summaries = Vec::new();
    for &id in &rs.attributes {
        if id.kind() == AttributeKind::Continuous {
            let col = rs.numeric_column(id).expect("attribute is present");
            summaries.push((id.name().to_owned(), five_number_summary(&col)?));
        }
    }
    let (m, y) = label_encoded(rs)?;
    Ok(ProfileOutcome {
        schema,
        summaries,
        correlation: pearson_matrix(&m, &y)?,
    })
}

/// Extra-Trees importances over the label-encoded attributes.
pub fn importance(rs: &RecordSet, params: &ExtraTreesParams, seed: u64) -> Result<ImportanceVector> {
    let (m, y) = label_encoded(&impute_missing(rs.clone()))?;
    let model = fit_extra_trees(&m, &y, params, seed)?;
    Ok(feature_importances(&model))
}

/// Grid search on the training side of the usual split.
pub fn tune(
    rs: RecordSet,
    dropped: &[AttributeId],
    ratio: f64,
    grid: &ParamGrid,
    k: usize,
    seed: u64,
) -> Result<(TuneReport, TuneTimings)> {
    let prepared = prepare(rs, dropped)?;
    let (train, _, _) = split(&prepared, ratio, seed)?;
    grid_search_timed(&train, grid, k, seed)
}
