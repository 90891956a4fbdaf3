//! On-disk model format.
//!
//! A model file is one JSON object:
//!
//! | field              | meaning                                                   |
//! |--------------------|-----------------------------------------------------------|
//! | `schema_version`   | format version, currently 1                               |
//! | `kind`             | always `"censusboost-ensemble"`                           |
//! | `ensemble`         | mode, `initial_score`, `learning_rate`, sizes, `stages`   |
//! | `encoding`         | sorted category lists per categorical attribute           |
//! | `kept_attributes`  | attribute ids fed to the encoder, in column order         |
//! | `dropped`          | attribute ids removed before encoding                     |
//! | `columns`          | descriptor of each model input column                     |
//!
//! Each stage holds `alpha`, optional `eps`, and a `tree` with
//! `format_version`, `n_features`, `max_depth` and a `nodes` array whose
//! entries are either `{"kind":"split","feature","threshold","left","right"}`
//! or `{"kind":"leaf","value"}`; node 0 is the root.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::boost::{label_for_score, BoostedEnsemble};
use crate::error::{Error, Result};
use crate::ingest::{AttributeId, FieldValue, Income};
use crate::preprocess::{encode_row, Column, EncodingMap};

pub const MODEL_SCHEMA_VERSION: u32 = 1;
pub const MODEL_KIND: &str = "censusboost-ensemble";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    pub kind: String,
    pub ensemble: BoostedEnsemble,
    pub encoding: EncodingMap,
    pub kept_attributes: Vec<AttributeId>,
    pub dropped: Vec<AttributeId>,
    pub columns: Vec<Column>,
}

impl ModelFile {
    pub fn new(
        ensemble: BoostedEnsemble,
        encoding: EncodingMap,
        kept_attributes: Vec<AttributeId>,
        dropped: Vec<AttributeId>,
        columns: Vec<Column>,
    ) -> Self {
        Self {
            schema_version: MODEL_SCHEMA_VERSION,
            kind: MODEL_KIND.to_owned(),
            ensemble,
            encoding,
            kept_attributes,
            dropped,
            columns,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: ModelFile = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::Format(format!(
                "unsupported model schema version {}",
                self.schema_version
            )));
        }
        if self.kind != MODEL_KIND {
            return Err(Error::Format(format!("not a model file (kind `{}`)", self.kind)));
        }
        if self.columns.len() != self.ensemble.n_features {
            return Err(Error::Format("column list does not match the ensemble".into()));
        }
        self.ensemble.validate()
    }

    /// Encodes a raw fourteen-attribute row into model inputs.
    pub fn encode(&self, values: &[FieldValue]) -> Result<Vec<f64>> {
        let x = encode_row(&self.encoding, &self.kept_attributes, values)?;
        if x.len() != self.ensemble.n_features {
            return Err(Error::Arity {
                expected: self.ensemble.n_features,
                actual: x.len(),
            });
        }
        Ok(x)
    }

    /// Decision score and label for a raw row.
    pub fn score_row(&self, values: &[FieldValue]) -> Result<(f64, Income)> {
        let score = self.ensemble.decision_function(&self.encode(values)?)?;
        Ok((score, label_for_score(score)))
    }
}
