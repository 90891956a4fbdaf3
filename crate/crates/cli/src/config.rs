//! Settings resolution: command-line flags win over the JSON config file,
//! which wins over the built-in defaults.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use censusboost::boost::{BoostMode, BoostParams};
use censusboost::preprocess::DEFAULT_DROPPED;
use censusboost::trees::ExtraTreesParams;
use censusboost::tune::{ParamGrid, DEFAULT_FOLDS};
use censusboost::AttributeId;
use serde::{Deserialize, Serialize};

pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_RATIO: f64 = 0.8;
pub const DEFAULT_ELIMINATE: usize = 2;

/// Contents of a `--config` file. Every field is optional.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub data: Option<Vec<PathBuf>>,
    pub seed: Option<u64>,
    pub mode: Option<String>,
    pub estimators: Option<usize>,
    pub depth: Option<usize>,
    pub lr: Option<f64>,
    pub ratio: Option<f64>,
    pub k: Option<usize>,
    pub eliminate: Option<usize>,
    pub trees: Option<usize>,
    pub grid: Option<ParamGrid>,
    pub drop: Option<Vec<String>>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("malformed config file {}", path.display()))
    }
}

/// Values given on the command line; `None` means "not given".
#[derive(Debug, Clone, Default)]
pub struct FlagValues {
    pub data: Vec<PathBuf>,
    pub seed: Option<u64>,
    pub mode: Option<String>,
    pub estimators: Option<usize>,
    pub depth: Option<usize>,
    pub lr: Option<f64>,
    pub ratio: Option<f64>,
    pub k: Option<usize>,
    pub eliminate: Option<usize>,
    pub trees: Option<usize>,
    pub grid: Option<PathBuf>,
}

/// Fully resolved settings; this is what the manifest records.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Settings {
    pub data: Vec<PathBuf>,
    pub seed: u64,
    pub mode: BoostMode,
    pub params: BoostParams,
    pub ratio: f64,
    pub k: usize,
    pub eliminate: usize,
    pub extra_trees: ExtraTreesParams,
    pub grid: ParamGrid,
    pub dropped: Vec<AttributeId>,
}

pub fn resolve(flags: FlagValues, file: FileConfig) -> anyhow::Result<Settings> {
    let defaults = BoostParams::default();
    let mode_name = flags.mode.or(file.mode);
    let mode = match mode_name {
        Some(m) => m.parse::<BoostMode>()?,
        None => BoostMode::Logit,
    };
    let grid = match flags.grid {
        Some(path) => {
            let text = std::fs::read_to_string(&path)
                .with_context(|| format!("cannot read grid file {}", path.display()))?;
            ParamGrid::from_json(&text).with_context(|| format!("malformed grid file {}", path.display()))?
        }
        None => file.grid.unwrap_or_default(),
    };
    let dropped = match file.drop {
        None => DEFAULT_DROPPED.to_vec(),
        Some(names) => names
            .iter()
            .map(|n| n.parse::<AttributeId>())
            .collect::<Result<Vec<_>, _>>()?,
    };
    let data = if !flags.data.is_empty() {
        flags.data
    } else {
        file.data.unwrap_or_else(|| vec![PathBuf::from("data")])
    };
    let settings = Settings {
        data,
        seed: flags.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
        mode,
        params: BoostParams {
            n_estimators: flags.estimators.or(file.estimators).unwrap_or(defaults.n_estimators),
            max_depth: flags.depth.or(file.depth).unwrap_or(defaults.max_depth),
            learning_rate: flags.lr.or(file.lr).unwrap_or(defaults.learning_rate),
            min_samples_split: defaults.min_samples_split,
        },
        ratio: flags.ratio.or(file.ratio).unwrap_or(DEFAULT_RATIO),
        k: flags.k.or(file.k).unwrap_or(DEFAULT_FOLDS),
        eliminate: flags.eliminate.or(file.eliminate).unwrap_or(DEFAULT_ELIMINATE),
        extra_trees: ExtraTreesParams {
            n_trees: flags.trees.or(file.trees).unwrap_or(ExtraTreesParams::default().n_trees),
            ..ExtraTreesParams::default()
        },
        grid,
        dropped,
    };
    if !(settings.ratio > 0.0 && settings.ratio < 1.0) {
        bail!(censusboost::Error::Config(format!(
            "ratio must lie in (0, 1), got {}",
            settings.ratio
        )));
    }
    if settings.k < 2 {
        bail!(censusboost::Error::Config(format!("k must be at least 2, got {}", settings.k)));
    }
    Ok(settings)
}

/// Expands directories into their `*.data` and `*.test` files, sorted by name.
pub fn expand_data_paths(paths: &[PathBuf]) -> anyhow::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .with_context(|| format!("cannot list {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| {
                    f.is_file()
                        && matches!(f.extension().and_then(|e| e.to_str()), Some("data" | "test"))
                })
                .collect();
            if found.is_empty() {
                bail!("directory {} contains no .data or .test files", p.display());
            }
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    if out.is_empty() {
        bail!(censusboost::Error::EmptyInput);
    }
    Ok(out)
}
