//! Command-line front end: argument parsing, settings resolution, artifact
//! output and exit-code policy.
//!
//! Exit codes: 0 on success, 1 when a run completes its checks and they fail
//! (an unreachable split, `--strict` prediction errors), 2 for usage and
//! input errors.

pub mod config;
pub mod manifest;

use std::path::{Path, PathBuf};

use anyhow::Context;
use censusboost::ingest::{load_dataset, parse_input_rows, RecordSet};
use censusboost::metrics::{EvalReport, EVAL_SCHEMA_VERSION};
use censusboost::model::{ModelFile, MODEL_SCHEMA_VERSION};
use censusboost::pipeline::{self, TrainConfig};
use censusboost::render;
use censusboost::tune::TUNE_SCHEMA_VERSION;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{expand_data_paths, resolve, FileConfig, FlagValues, Settings};
use crate::manifest::{sha256_hex, Run};

pub const ARTIFACT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "censusboost", version, about = "Boosted-tree income classifier for the UCI Adult census data")]
pub struct Cli {
    /// Census file or directory of `*.data`/`*.test` files (repeatable).
    #[arg(long, global = true, value_name = "PATH")]
    pub data: Vec<PathBuf>,

    /// Directory receiving artifacts and the run manifest.
    #[arg(long, global = true, default_value = "out", value_name = "DIR")]
    pub out: PathBuf,

    #[arg(long, global = true, env = "CENSUSBOOST_SEED")]
    pub seed: Option<u64>,

    /// JSON file with default settings; flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Attribute counts, box plots and the correlation heat-map.
    Profile,
    /// Extra-Trees feature importances with an elimination suggestion.
    Importance {
        /// How many of the weakest features to suggest dropping.
        #[arg(long)]
        eliminate: Option<usize>,
        #[arg(long)]
        trees: Option<usize>,
    },
    /// Cross-validated grid search on the training split.
    Tune {
        /// JSON grid: {"n_estimators": [...], "max_depth": [...], "learning_rate": [...]}.
        #[arg(long, value_name = "FILE")]
        grid: Option<PathBuf>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        ratio: Option<f64>,
    },
    /// Fit a model and report training and validation metrics.
    Train(TrainArgs),
    /// Score a saved model on the held-out split.
    Evaluate {
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        #[arg(long)]
        ratio: Option<f64>,
    },
    /// Label rows with a saved model.
    Predict {
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        /// Rows in census layout, with or without the income column.
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
        /// Fail (exit 1) when any row cannot be scored.
        #[arg(long)]
        strict: bool,
    },
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// `logit` or `algorithm1`.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub estimators: Option<usize>,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub ratio: Option<f64>,
}

/// A run that finished but did not pass its own checks.
#[derive(Debug)]
pub struct ValidationFailure(pub String);

impl std::fmt::Display for ValidationFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ValidationFailure {}

pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<ValidationFailure>().is_some() {
            return 1;
        }
        if let Some(censusboost::Error::Split(_)) = cause.downcast_ref::<censusboost::Error>() {
            return 1;
        }
    }
    2
}

#[derive(Serialize)]
struct Versioned<'a, T: Serialize> {
    schema_version: u32,
    #[serde(flatten)]
    inner: &'a T,
}

fn versioned<T: Serialize>(inner: &T) -> Versioned<'_, T> {
    Versioned {
        schema_version: ARTIFACT_SCHEMA_VERSION,
        inner,
    }
}

impl Cli {
    fn settings(&self) -> anyhow::Result<Settings> {
        let file = match &self.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let mut flags = FlagValues {
            data: self.data.clone(),
            seed: self.seed,
            ..FlagValues::default()
        };
        match &self.command {
            Command::Profile | Command::Predict { .. } => {}
            Command::Importance { eliminate, trees } => {
                flags.eliminate = *eliminate;
                flags.trees = *trees;
            }
            Command::Tune { grid, k, ratio } => {
                flags.grid = grid.clone();
                flags.k = *k;
                flags.ratio = *ratio;
            }
            Command::Train(a) => {
                flags.mode = a.mode.clone();
                flags.estimators = a.estimators;
                flags.depth = a.depth;
                flags.lr = a.lr;
                flags.ratio = a.ratio;
            }
            Command::Evaluate { ratio, .. } => flags.ratio = *ratio,
        }
        resolve(flags, file)
    }
}

fn load(settings: &Settings, run: &mut Run) -> anyhow::Result<RecordSet> {
    let paths = expand_data_paths(&settings.data)?;
    for p in &paths {
        run.input(p)?;
    }
    Ok(load_dataset(&paths)?)
}

fn write_eval(run: &mut Run, name: &str, report: &EvalReport) -> anyhow::Result<()> {
    run.write_json(&format!("{name}.json"), report)?;
    run.write(&format!("{name}_confusion.svg"), render::confusion_svg(&report.confusion).as_bytes())?;
    run.write(&format!("{name}_roc.svg"), render::roc_svg(&report.roc).as_bytes())?;
    Ok(())
}

fn print_eval(report: &EvalReport) {
    let r = &report.report;
    println!(
        "{:<10} n={:<6} accuracy={:.4} auc={:.4} precision={:.4} recall={:.4} f1={:.4}",
        report.split,
        report.n,
        r.accuracy,
        report.roc.auc,
        r.weighted.precision,
        r.weighted.recall,
        r.weighted.f1
    );
}

fn load_model(path: &Path) -> anyhow::Result<ModelFile> {
    ModelFile::load(path).with_context(|| format!("cannot load model {}", path.display()))
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let settings = cli.settings()?;
    let out = cli.out.as_path();
    match &cli.command {
        Command::Profile => {
            let mut run = Run::start("profile", out, &settings)?;
            let rs = load(&settings, &mut run)?;
            let p = pipeline::profile_data(&rs)?;
            run.version("profile", ARTIFACT_SCHEMA_VERSION);
            run.write_json("schema.json", &versioned(&p.schema))?;
            let summaries: Vec<_> = p
                .summaries
                .iter()
                .map(|(name, s)| serde_json::json!({ "attribute": name, "summary": s }))
                .collect();
            run.write_json("summaries.json", &versioned(&serde_json::json!({ "summaries": summaries })))?;
            for (name, s) in &p.summaries {
                run.write(&format!("boxplot_{name}.svg"), render::box_plot_svg(name, s).as_bytes())?;
            }
            run.write_json("correlation.json", &versioned(&p.correlation))?;
            run.write("correlation.svg", render::heatmap_svg(&p.correlation).as_bytes())?;
            println!("{} rows, {} attributes", p.schema.row_count, p.schema.attributes.len());
            run.finish()?;
        }
        Command::Importance { .. } => {
            let mut run = Run::start("importance", out, &settings)?;
            run.seed("extra_trees", settings.seed);
            let rs = load(&settings, &mut run)?;
            let imp = pipeline::importance(&rs, &settings.extra_trees, settings.seed)?;
            let order = imp.ascending();
            let features: Vec<_> = order
                .iter()
                .map(|&i| serde_json::json!({ "name": imp.names[i], "score": imp.scores[i] }))
                .collect();
            let eliminate: Vec<&str> = order
                .iter()
                .take(settings.eliminate)
                .map(|&i| imp.names[i].as_str())
                .collect();
            let doc = serde_json::json!({
                "seed": settings.seed,
                "n_trees": settings.extra_trees.n_trees,
                "features": features,
                "eliminate": eliminate,
            });
            run.version("importance", ARTIFACT_SCHEMA_VERSION);
            run.write_json("importance.json", &versioned(&doc))?;
            for &i in &order {
                println!("{:<16} {:.6}", imp.names[i], imp.scores[i]);
            }
            if !eliminate.is_empty() {
                println!("suggest eliminating: {}", eliminate.join(", "));
            }
            run.finish()?;
        }
        Command::Tune { .. } => {
            let mut run = Run::start("tune", out, &settings)?;
            run.seed("split", settings.seed);
            run.seed("kfold", settings.seed);
            let rs = load(&settings, &mut run)?;
            let (report, timings) = pipeline::tune(
                rs,
                &settings.dropped,
                settings.ratio,
                &settings.grid,
                settings.k,
                settings.seed,
            )?;
            run.version("tune", TUNE_SCHEMA_VERSION);
            run.timings(serde_json::to_value(&timings)?);
            run.write_json("tune.json", &report)?;
            print!("{}", report.to_table());
            run.finish()?;
        }
        Command::Train(_) => {
            let mut run = Run::start("train", out, &settings)?;
            let rs = load(&settings, &mut run)?;
            let cfg = TrainConfig {
                mode: settings.mode,
                params: settings.params,
                ratio: settings.ratio,
                seed: settings.seed,
                dropped: settings.dropped.clone(),
            };
            let outcome = pipeline::train(rs, &cfg)?;
            run.seed("requested", outcome.split.requested_seed);
            run.seed("split", outcome.split.seed);
            run.version("model", MODEL_SCHEMA_VERSION);
            run.version("eval", EVAL_SCHEMA_VERSION);
            run.write("model.json", outcome.model.to_json()?.as_bytes())?;
            run.write_json("trace.json", &versioned(&outcome.trace))?;
            let split = serde_json::json!({
                "requested_seed": outcome.split.requested_seed,
                "seed": outcome.split.seed,
                "ratio": settings.ratio,
                "n_train": outcome.split.boundary,
                "test_indices": outcome.split.test_indices(),
            });
            run.write_json("split.json", &versioned(&split))?;
            write_eval(&mut run, "train_report", &outcome.train_report)?;
            write_eval(&mut run, "validation_report", &outcome.validation_report)?;
            print_eval(&outcome.train_report);
            print_eval(&outcome.validation_report);
            run.finish()?;
        }
        Command::Evaluate { model, .. } => {
            let mut run = Run::start("evaluate", out, &settings)?;
            run.input(model)?;
            let m = load_model(model)?;
            let rs = load(&settings, &mut run)?;
            let report = pipeline::evaluate_model(&m, rs, settings.ratio, settings.seed)?;
            run.seed("split", settings.seed);
            run.version("eval", EVAL_SCHEMA_VERSION);
            write_eval(&mut run, "evaluation", &report)?;
            print_eval(&report);
            run.finish()?;
        }
        Command::Predict { model, input, strict } => {
            let mut run = Run::start("predict", out, &settings)?;
            run.input(model)?;
            run.input(input)?;
            let model_bytes = std::fs::read(model).with_context(|| format!("cannot read {}", model.display()))?;
            let m = load_model(model)?;
            let text = std::fs::read_to_string(input).with_context(|| format!("cannot read {}", input.display()))?;
            let source = input.display().to_string();
            let mut rows = Vec::new();
            let mut errors = 0usize;
            for (i, parsed) in parse_input_rows(&source, &text).into_iter().enumerate() {
                let scored = parsed.and_then(|r| m.score_row(&r.values).map(|s| (r.line, s)));
                rows.push(match scored {
                    Ok((line, (score, label))) => {
                        serde_json::json!({ "row": i, "line": line, "label": label.as_str(), "score": score })
                    }
                    Err(e) => {
                        errors += 1;
                        serde_json::json!({ "row": i, "error": e.to_string() })
                    }
                });
            }
            let n_rows = rows.len();
            let doc = serde_json::json!({
                "model_sha256": sha256_hex(&model_bytes),
                "n_rows": n_rows,
                "n_errors": errors,
                "rows": rows,
            });
            run.version("predictions", ARTIFACT_SCHEMA_VERSION);
            run.write_json("predictions.json", &versioned(&doc))?;
            println!("{} rows scored, {errors} errors", n_rows - errors);
            run.finish()?;
            if *strict && errors > 0 {
                return Err(ValidationFailure(format!("{errors} rows could not be scored")).into());
            }
        }
    }
    Ok(())
}
