//! Reading the UCI Adult census files.
//!
//! The files are comma-separated with a space after each comma, no quoting,
//! and `?` marking a missing categorical value. The test file starts with a
//! `|1x3 Cross validator` line and suffixes its labels with a period; both
//! quirks are normalized here so the two files can be concatenated.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Marker for a missing categorical value.
pub const MISSING: &str = "?";

/// The fourteen census attributes, in file column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AttributeId {
    F1,
    F2,
    F3,
    F4,
    F5,
    F6,
    F7,
    F8,
    F9,
    F10,
    F11,
    F12,
    F13,
    F14,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributeKind {
    Continuous,
    Categorical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttributeSpec {
    pub id: AttributeId,
    pub name: &'static str,
    pub kind: AttributeKind,
}

const fn spec(id: AttributeId, name: &'static str, kind: AttributeKind) -> AttributeSpec {
    AttributeSpec { id, name, kind }
}

use AttributeId::*;
use AttributeKind::{Categorical, Continuous};

/// Column layout of the census files.
pub const SCHEMA: [AttributeSpec; 14] = [
    spec(F1, "age", Continuous),
    spec(F2, "workclass", Categorical),
    spec(F3, "fnlwgt", Continuous),
    spec(F4, "education", Categorical),
    spec(F5, "education-num", Continuous),
    spec(F6, "marital-status", Categorical),
    spec(F7, "occupation", Categorical),
    spec(F8, "relationship", Categorical),
    spec(F9, "race", Categorical),
    spec(F10, "sex", Categorical),
    spec(F11, "capital-gain", Continuous),
    spec(F12, "capital-loss", Continuous),
    spec(F13, "hours-per-week", Continuous),
    spec(F14, "native-country", Categorical),
];

impl AttributeId {
    pub const ALL: [AttributeId; 14] = [F1, F2, F3, F4, F5, F6, F7, F8, F9, F10, F11, F12, F13, F14];

    pub fn spec(self) -> &'static AttributeSpec {
        &SCHEMA[self.index()]
    }

    /// Zero-based column position in the source files.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        self.spec().name
    }

    pub fn kind(self) -> AttributeKind {
        self.spec().kind
    }

    pub fn from_name(name: &str) -> Option<Self> {
        SCHEMA.iter().find(|s| s.name == name).map(|s| s.id)
    }
}

impl fmt::Display for AttributeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self)
    }
}

impl FromStr for AttributeId {
    type Err = Error;

    /// Accepts either the id (`F9`) or the attribute name (`race`).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(id) = AttributeId::from_name(s) {
            return Ok(id);
        }
        let n: usize = s
            .strip_prefix('F')
            .or_else(|| s.strip_prefix('f'))
            .and_then(|d| d.parse().ok())
            .ok_or_else(|| Error::Config(format!("unknown feature id `{s}`")))?;
        if (1..=14).contains(&n) {
            Ok(AttributeId::ALL[n - 1])
        } else {
            Err(Error::Config(format!("unknown feature id `{s}`")))
        }
    }
}

/// Binary income label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Income {
    #[serde(rename = "<=50K")]
    AtMost50K,
    #[serde(rename = ">50K")]
    Above50K,
}

impl Income {
    pub fn is_positive(self) -> bool {
        self == Income::Above50K
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Income::AtMost50K => "<=50K",
            Income::Above50K => ">50K",
        }
    }

    fn parse(raw: &str) -> Option<Self> {
        match raw.trim_end_matches('.') {
            "<=50K" => Some(Income::AtMost50K),
            ">50K" => Some(Income::Above50K),
            _ => None,
        }
    }
}

impl fmt::Display for Income {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldValue {
    Num(f64),
    Cat(String),
}

impl FieldValue {
    pub fn as_num(&self) -> Option<f64> {
        match self {
            FieldValue::Num(v) => Some(*v),
            FieldValue::Cat(_) => None,
        }
    }

    pub fn as_cat(&self) -> Option<&str> {
        match self {
            FieldValue::Cat(s) => Some(s),
            FieldValue::Num(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    /// One value per entry of the owning [`RecordSet::attributes`].
    pub values: Vec<FieldValue>,
    pub label: Income,
}

/// Parsed census rows. `attributes` lists which columns each record carries,
/// in order; it starts as all fourteen and shrinks when features are dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordSet {
    pub attributes: Vec<AttributeId>,
    pub rows: Vec<Record>,
}

impl RecordSet {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn position(&self, id: AttributeId) -> Option<usize> {
        self.attributes.iter().position(|&a| a == id)
    }

    /// Values of a continuous attribute, in row order.
    pub fn numeric_column(&self, id: AttributeId) -> Option<Vec<f64>> {
        let pos = self.position(id)?;
        self.rows.iter().map(|r| r.values[pos].as_num()).collect()
    }

    pub fn labels(&self) -> Vec<Income> {
        self.rows.iter().map(|r| r.label).collect()
    }
}

/// Splits one data line into trimmed fields and parses the fourteen
/// attributes. Returns the trailing label field, if any, unparsed.
fn parse_fields<'a>(
    line: &'a str,
    source_name: &str,
    line_no: usize,
    allow_unlabeled: bool,
) -> Result<(Vec<FieldValue>, Option<&'a str>)> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    let labeled = match fields.len() {
        15 => true,
        14 if allow_unlabeled => false,
        n => {
            return Err(Error::Parse {
                source_name: source_name.to_owned(),
                line: line_no,
                message: format!("expected 15 comma-separated fields, found {n}"),
            })
        }
    };
    let mut values = Vec::with_capacity(14);
    for (spec, raw) in SCHEMA.iter().zip(&fields) {
        let value = match spec.kind {
            AttributeKind::Continuous => {
                let v: f64 = raw.parse().map_err(|_| Error::Parse {
                    source_name: source_name.to_owned(),
                    line: line_no,
                    message: format!("{} is not a number: `{raw}`", spec.name),
                })?;
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::Parse {
                        source_name: source_name.to_owned(),
                        line: line_no,
                        message: format!("{} must be finite and non-negative: `{raw}`", spec.name),
                    });
                }
                FieldValue::Num(v)
            }
            AttributeKind::Categorical => {
                if raw.is_empty() {
                    return Err(Error::Parse {
                        source_name: source_name.to_owned(),
                        line: line_no,
                        message: format!("{} is empty", spec.name),
                    });
                }
                FieldValue::Cat((*raw).to_owned())
            }
        };
        values.push(value);
    }
    Ok((values, labeled.then(|| fields[14])))
}

fn is_skipped(line: &str) -> bool {
    let t = line.trim();
    t.is_empty() || t.starts_with('|')
}

/// Parses the text of one census file.
pub fn parse_records(source_name: &str, text: &str) -> Result<Vec<Record>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if is_skipped(line) {
            continue;
        }
        let line_no = i + 1;
        let (values, label) = parse_fields(line, source_name, line_no, false)?;
        let raw_label = label.unwrap_or_default();
        let label = Income::parse(raw_label).ok_or_else(|| Error::Parse {
            source_name: source_name.to_owned(),
            line: line_no,
            message: format!("unknown income label `{raw_label}`"),
        })?;
        rows.push(Record { values, label });
    }
    Ok(rows)
}

/// A row read for scoring: the label is optional.
#[derive(Debug, Clone, PartialEq)]
pub struct InputRow {
    pub line: usize,
    pub values: Vec<FieldValue>,
    pub label: Option<Income>,
}

/// Parses rows that may or may not carry a label. Each data line yields its
/// own result so one bad row does not abort the rest.
pub fn parse_input_rows(source_name: &str, text: &str) -> Vec<Result<InputRow>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !is_skipped(l))
        .map(|(i, line)| {
            let line_no = i + 1;
            let (values, label) = parse_fields(line, source_name, line_no, true)?;
            let label = match label {
                None => None,
                Some(raw) => Some(Income::parse(raw).ok_or_else(|| Error::Parse {
                    source_name: source_name.to_owned(),
                    line: line_no,
                    message: format!("unknown income label `{raw}`"),
                })?),
            };
            Ok(InputRow { line: line_no, values, label })
        })
        .collect()
}

/// Loads and concatenates census files in the given order.
pub fn load_dataset<P: AsRef<Path>>(paths: &[P]) -> Result<RecordSet> {
    if paths.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut rows = Vec::new();
    for path in paths {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        let text = String::from_utf8_lossy(&bytes);
        rows.extend(parse_records(&path.display().to_string(), &text)?);
    }
    Ok(RecordSet {
        attributes: AttributeId::ALL.to_vec(),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeProfile {
    pub id: AttributeId,
    pub name: String,
    pub kind: AttributeKind,
    /// Distinct categories, `?` included. `None` for continuous attributes.
    pub distinct: Option<usize>,
    pub missing: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaReport {
    pub row_count: usize,
    pub attributes: Vec<AttributeProfile>,
    pub label_counts: BTreeMap<String, usize>,
}

impl SchemaReport {
    pub fn attribute(&self, id: AttributeId) -> Option<&AttributeProfile> {
        self.attributes.iter().find(|a| a.id == id)
    }
}

pub fn profile(rs: &RecordSet) -> SchemaReport {
    let attributes = rs
        .attributes
        .iter()
        .enumerate()
        .map(|(pos, &id)| {
            let mut missing = 0;
            let distinct = match id.kind() {
                AttributeKind::Continuous => None,
                AttributeKind::Categorical => {
                    let mut seen = std::collections::BTreeSet::new();
                    for row in &rs.rows {
                        if let FieldValue::Cat(s) = &row.values[pos] {
                            if s == MISSING {
                                missing += 1;
                            }
                            seen.insert(s.as_str());
                        }
                    }
                    Some(seen.len())
                }
            };
            AttributeProfile {
                id,
                name: id.name().to_owned(),
                kind: id.kind(),
                distinct,
                missing,
            }
        })
        .collect();
    let mut label_counts = BTreeMap::new();
    for row in &rs.rows {
        *label_counts.entry(row.label.as_str().to_owned()).or_insert(0) += 1;
    }
    SchemaReport {
        row_count: rs.len(),
        attributes,
        label_counts,
    }
}
