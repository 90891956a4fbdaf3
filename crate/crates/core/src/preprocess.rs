//! Turning parsed records into a numeric design matrix.
//!
//! The pipeline keeps `?` as an ordinary category, drops the eliminated
//! attributes, label-encodes categories in byte order, one-hot expands every
//! categorical attribute with more than two categories, and finally splits
//! rows with a seeded shuffle.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{AttributeId, AttributeKind, FieldValue, Income, RecordSet, MISSING};
use crate::rng::{streams, DetRng};

/// Attributes removed before training: race and native-country.
pub const DEFAULT_DROPPED: [AttributeId; 2] = [AttributeId::F9, AttributeId::F14];

/// Upper bound on reshuffles while searching for a split whose training side
/// contains every category.
pub const MAX_SPLIT_RETRIES: u64 = 100;

/// Sorted category list for one attribute; a category's code is its index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryCodes {
    pub attribute: AttributeId,
    pub categories: Vec<String>,
}

impl CategoryCodes {
    pub fn code(&self, category: &str) -> Option<usize> {
        // Categories are sorted byte-wise, which is exactly `str` ordering.
        self.categories.binary_search_by(|c| c.as_str().cmp(category)).ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodingMap {
    pub attributes: Vec<CategoryCodes>,
}

impl EncodingMap {
    pub fn get(&self, id: AttributeId) -> Option<&CategoryCodes> {
        self.attributes.iter().find(|c| c.attribute == id)
    }

    pub fn decode(&self, id: AttributeId, code: usize) -> Option<&str> {
        self.get(id)?.categories.get(code).map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnKind {
    /// Raw continuous value.
    Continuous,
    /// Integer category code.
    Code,
    /// Two-category attribute kept as one 0/1 column.
    Binary,
    /// One-hot indicator for a single category.
    Indicator { category: String },
}

impl ColumnKind {
    pub fn is_categorical(&self) -> bool {
        !matches!(self, ColumnKind::Continuous)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub attribute: AttributeId,
    pub name: String,
    #[serde(flatten)]
    pub kind: ColumnKind,
}

/// Dense row-major matrix of features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    n_rows: usize,
    columns: Vec<Column>,
    values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(n_rows: usize, columns: Vec<Column>, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_rows * columns.len() {
            return Err(Error::InvalidInput(format!(
                "{} values do not fill a {}x{} matrix",
                values.len(),
                n_rows,
                columns.len()
            )));
        }
        Ok(Self { n_rows, columns, values })
    }

    /// Builds a matrix of anonymous continuous columns, mostly for tests.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::InvalidInput("ragged rows".into()));
        }
        let columns = (0..p)
            .map(|j| Column {
                attribute: AttributeId::F1,
                name: format!("x{j}"),
                kind: ColumnKind::Continuous,
            })
            .collect();
        Self::new(rows.len(), columns, rows.concat())
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_cols();
        &self.values[i * p..(i + 1) * p]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_cols() + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.get(i, j)).collect()
    }

    pub fn select_rows(&self, idx: &[usize]) -> FeatureMatrix {
        let mut values = Vec::with_capacity(idx.len() * self.n_cols());
        for &i in idx {
            values.extend_from_slice(self.row(i));
        }
        FeatureMatrix {
            n_rows: idx.len(),
            columns: self.columns.clone(),
            values,
        }
    }

    /// CSV dump with a header of column names.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for i in 0..self.n_rows {
            for (j, v) in self.row(i).iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{v}");
            }
            out.push('\n');
        }
        out
    }
}

/// Binary labels; `true` is the `>50K` class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelVector {
    positive: Vec<bool>,
}

impl LabelVector {
    pub fn new(positive: Vec<bool>) -> Self {
        Self { positive }
    }

    pub fn from_income(labels: &[Income]) -> Self {
        Self::new(labels.iter().map(|l| l.is_positive()).collect())
    }

    pub fn len(&self) -> usize {
        self.positive.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positive.is_empty()
    }

    pub fn as_bools(&self) -> &[bool] {
        &self.positive
    }

    /// `>50K` = 1, `<=50K` = 0.
    pub fn as_01(&self) -> Vec<f64> {
        self.positive.iter().map(|&p| if p { 1.0 } else { 0.0 }).collect()
    }

    /// `>50K` = +1, `<=50K` = -1.
    pub fn as_signed(&self) -> Vec<f64> {
        self.positive.iter().map(|&p| if p { 1.0 } else { -1.0 }).collect()
    }

    pub fn select(&self, idx: &[usize]) -> LabelVector {
        LabelVector::new(idx.iter().map(|&i| self.positive[i]).collect())
    }

    pub fn count_positive(&self) -> usize {
        self.positive.iter().filter(|&&p| p).count()
    }
}

/// Features with aligned labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: FeatureMatrix,
    pub y: LabelVector,
}

impl Dataset {
    pub fn new(x: FeatureMatrix, y: LabelVector) -> Result<Self> {
        if x.n_rows() != y.len() {
            return Err(Error::InvalidInput(format!(
                "{} feature rows but {} labels",
                x.n_rows(),
                y.len()
            )));
        }
        Ok(Self { x, y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn select(&self, idx: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(idx),
            y: self.y.select(idx),
        }
    }
}

pub type TrainSet = Dataset;
pub type TestSet = Dataset;

/// How rows were assigned to the training and test sides.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndex {
    /// Seed the caller asked for.
    pub requested_seed: u64,
    /// Seed that produced `permutation` after any coverage retries.
    pub seed: u64,
    pub permutation: Vec<usize>,
    /// `permutation[..boundary]` is the training side.
    pub boundary: usize,
}

impl SplitIndex {
    pub fn train_indices(&self) -> &[usize] {
        &self.permutation[..self.boundary]
    }

    pub fn test_indices(&self) -> &[usize] {
        &self.permutation[self.boundary..]
    }
}

/// Normalizes missing categorical markers to `?`. Values are otherwise
/// untouched: a missing category stays a category of its own.
pub fn impute_missing(mut rs: RecordSet) -> RecordSet {
    for row in &mut rs.rows {
        for v in &mut row.values {
            if let FieldValue::Cat(s) = v {
                if s.trim() == MISSING && s != MISSING {
                    *s = MISSING.to_owned();
                }
            }
        }
    }
    rs
}

pub fn drop_features(rs: RecordSet, ids: &[AttributeId]) -> Result<RecordSet> {
    let mut positions = Vec::with_capacity(ids.len());
    for &id in ids {
        let pos = rs
            .position(id)
            .ok_or_else(|| Error::Config(format!("feature {id} ({}) is not present", id.name())))?;
        positions.push(pos);
    }
    if positions.is_empty() {
        return Ok(rs);
    }
    let keep: Vec<bool> = (0..rs.attributes.len()).map(|p| !positions.contains(&p)).collect();
    fn filter<T>(v: Vec<T>, keep: &[bool]) -> Vec<T> {
        v.into_iter()
            .zip(keep)
            .filter_map(|(x, &k)| k.then_some(x))
            .collect()
    }
    let RecordSet { attributes, rows } = rs;
    Ok(RecordSet {
        attributes: filter(attributes, &keep),
        rows: rows
            .into_iter()
            .map(|mut r| {
                r.values = filter(r.values, &keep);
                r
            })
            .collect(),
    })
}

pub fn fit_label_encoding(rs: &RecordSet) -> Result<EncodingMap> {
    if rs.is_empty() {
        return Err(Error::InvalidInput("cannot fit an encoding on zero rows".into()));
    }
    let attributes = rs
        .attributes
        .iter()
        .enumerate()
        .filter(|(_, id)| id.kind() == AttributeKind::Categorical)
        .map(|(pos, &id)| {
            let set: BTreeSet<&str> = rs.rows.iter().filter_map(|r| r.values[pos].as_cat()).collect();
            CategoryCodes {
                attribute: id,
                categories: set.into_iter().map(str::to_owned).collect(),
            }
        })
        .collect();
    Ok(EncodingMap { attributes })
}

fn code_column(id: AttributeId) -> Column {
    Column {
        attribute: id,
        name: id.name().to_owned(),
        kind: match id.kind() {
            AttributeKind::Continuous => ColumnKind::Continuous,
            AttributeKind::Categorical => ColumnKind::Code,
        },
    }
}

fn encode_value(map: &EncodingMap, id: AttributeId, value: &FieldValue) -> Result<f64> {
    match (id.kind(), value) {
        (AttributeKind::Continuous, FieldValue::Num(v)) => Ok(*v),
        (AttributeKind::Categorical, FieldValue::Cat(s)) => {
            let codes = map.get(id).ok_or_else(|| Error::Encoding {
                attribute: id.name().to_owned(),
                value: s.clone(),
            })?;
            codes.code(s).map(|c| c as f64).ok_or_else(|| Error::Encoding {
                attribute: id.name().to_owned(),
                value: s.clone(),
            })
        }
        _ => Err(Error::InvalidInput(format!("value of wrong kind for {}", id.name()))),
    }
}

/// One column per attribute: continuous values as-is, categories as codes.
pub fn apply_label_encoding(rs: &RecordSet, map: &EncodingMap) -> Result<FeatureMatrix> {
    let columns: Vec<Column> = rs.attributes.iter().map(|&id| code_column(id)).collect();
    let mut values = Vec::with_capacity(rs.len() * columns.len());
    for row in &rs.rows {
        for (&id, v) in rs.attributes.iter().zip(&row.values) {
            values.push(encode_value(map, id, v)?);
        }
    }
    FeatureMatrix::new(rs.len(), columns, values)
}

enum Expansion {
    Keep(Column),
    OneHot(Vec<Column>),
}

fn plan_expansion(m: &FeatureMatrix, map: &EncodingMap) -> Result<Vec<Expansion>> {
    m.columns()
        .iter()
        .map(|col| {
            if col.kind != ColumnKind::Code {
                return Ok(Expansion::Keep(col.clone()));
            }
            let codes = map
                .get(col.attribute)
                .ok_or_else(|| Error::Config(format!("no encoding for {}", col.name)))?;
            if codes.categories.len() <= 2 {
                Ok(Expansion::Keep(Column {
                    kind: ColumnKind::Binary,
                    ..col.clone()
                }))
            } else {
                Ok(Expansion::OneHot(
                    codes
                        .categories
                        .iter()
                        .map(|c| Column {
                            attribute: col.attribute,
                            name: format!("{}={}", col.name, c),
                            kind: ColumnKind::Indicator { category: c.clone() },
                        })
                        .collect(),
                ))
            }
        })
        .collect()
}

fn expand_row(plan: &[Expansion], row: &[f64], out: &mut Vec<f64>) {
    for (exp, &v) in plan.iter().zip(row) {
        match exp {
            Expansion::Keep(_) => out.push(v),
            Expansion::OneHot(cols) => {
                let hot = v as usize;
                out.extend((0..cols.len()).map(|k| if k == hot { 1.0 } else { 0.0 }));
            }
        }
    }
}

/// Expands label-coded columns with more than two categories into
/// indicator groups. Two-category attributes stay as one binary column.
pub fn one_hot_expand(m: &FeatureMatrix, map: &EncodingMap) -> Result<FeatureMatrix> {
    let plan = plan_expansion(m, map)?;
    let columns: Vec<Column> = plan
        .iter()
        .flat_map(|e| match e {
            Expansion::Keep(c) => vec![c.clone()],
            Expansion::OneHot(cs) => cs.clone(),
        })
        .collect();
    let mut values = Vec::with_capacity(m.n_rows() * columns.len());
    for i in 0..m.n_rows() {
        expand_row(&plan, m.row(i), &mut values);
    }
    FeatureMatrix::new(m.n_rows(), columns, values)
}

/// Encodes one raw row (all fourteen attributes) into the one-hot layout
/// produced by `apply_label_encoding` + `one_hot_expand` on the kept
/// attributes.
pub fn encode_row(
    map: &EncodingMap,
    kept: &[AttributeId],
    values: &[FieldValue],
) -> Result<Vec<f64>> {
    if values.len() != AttributeId::ALL.len() {
        return Err(Error::Arity {
            expected: AttributeId::ALL.len(),
            actual: values.len(),
        });
    }
    let mut coded = Vec::with_capacity(kept.len());
    for &id in kept {
        coded.push(encode_value(map, id, &values[id.index()])?);
    }
    let proto = FeatureMatrix::new(1, kept.iter().map(|&id| code_column(id)).collect(), coded)?;
    let plan = plan_expansion(&proto, map)?;
    let mut out = Vec::new();
    expand_row(&plan, proto.row(0), &mut out);
    Ok(out)
}

/// `round(ratio * n)` with halves rounded up.
pub fn split_boundary(n: usize, ratio: f64) -> usize {
    ((ratio * n as f64) + 0.5).floor() as usize
}

fn covers_all_categories(m: &FeatureMatrix, train: &[usize]) -> bool {
    for (j, col) in m.columns().iter().enumerate() {
        if !col.kind.is_categorical() {
            continue;
        }
        let all: BTreeSet<u64> = (0..m.n_rows()).map(|i| m.get(i, j).to_bits()).collect();
        let mut seen = BTreeSet::new();
        for &i in train {
            seen.insert(m.get(i, j).to_bits());
            if seen.len() == all.len() {
                break;
            }
        }
        if seen.len() != all.len() {
            return false;
        }
    }
    true
}

/// Seeded shuffle and split. The first `round(ratio * n)` rows of the
/// permutation train; if that side misses a category present in the data,
/// the seed is incremented and the shuffle repeated.
pub fn shuffle_split(
    m: &FeatureMatrix,
    labels: &LabelVector,
    ratio: f64,
    seed: u64,
) -> Result<(TrainSet, TestSet, SplitIndex)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Config(format!("split ratio must lie in (0, 1), got {ratio}")));
    }
    if m.n_rows() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} feature rows but {} labels",
            m.n_rows(),
            labels.len()
        )));
    }
    let n = m.n_rows();
    let boundary = split_boundary(n, ratio);
    for attempt in 0..=MAX_SPLIT_RETRIES {
        let s = seed.wrapping_add(attempt);
        let permutation = DetRng::new(s, streams::SHUFFLE).permutation(n);
        if !covers_all_categories(m, &permutation[..boundary]) {
            continue;
        }
        let index = SplitIndex {
            requested_seed: seed,
            seed: s,
            permutation,
            boundary,
        };
        let data = Dataset::new(m.clone(), labels.clone())?;
        let train = data.select(index.train_indices());
        let test = data.select(index.test_indices());
        return Ok((train, test, index));
    }
    Err(Error::Split(format!(
        "no shuffle in {} attempts put every category in the training side",
        MAX_SPLIT_RETRIES + 1
    )))
}
