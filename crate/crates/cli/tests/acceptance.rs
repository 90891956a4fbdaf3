//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria 1-7 run against the census files in `data/`; criterion 8 is a
//! set of property checks that need no data. The process exits non-zero
//! when the suite itself breaks (missing data, a panic) and, if
//! `CENSUSBOOST_ACCEPTANCE_STRICT=1`, also when any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use censusboost::boost::{
    compute_alpha, fit_logit_gbm_traced, update_weights, BoostParams, SampleWeights,
};
use censusboost::ingest::load_dataset;
use censusboost::metrics::{auc_mann_whitney, roc};
use censusboost::pipeline;
use censusboost::preprocess::DEFAULT_DROPPED;
use censusboost::rng::DetRng;
use censusboost::trees::{fit_tree, Criterion, ExtraTreesParams, TreeParams};
use censusboost::tune::{ParamGrid, DEFAULT_FOLDS};
use censusboost::{Dataset, FeatureMatrix, LabelVector, ModelFile};
use censusboost_cli::config::DEFAULT_SEED;
use censusboost_cli::Cli;
use clap::Parser;
use serde_json::Value;

type Property = fn() -> Result<String, String>;
type DataCriterion = fn(&mut Vec<Check>);

struct Check {
    id: &'static str,
    pass: bool,
    detail: String,
}

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn data_files() -> Vec<PathBuf> {
    vec![data_dir().join("adult.data"), data_dir().join("adult.test")]
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).expect("artifact exists")).expect("valid json")
}

fn check(id: &'static str, pass: bool, detail: String) -> Check {
    Check { id, pass, detail }
}

// ---- criteria 1-5: one default training run --------------------------------

fn default_train_run(out: &Path) -> (Value, Value, Value) {
    let data = data_dir();
    let cli = Cli::parse_from([
        "censusboost",
        "train",
        "--data",
        data.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    censusboost_cli::run(cli).expect("default train run succeeds");
    (
        read_json(&out.join("train_report.json")),
        read_json(&out.join("validation_report.json")),
        read_json(&out.join("split.json")),
    )
}

fn criteria_1_to_5(checks: &mut Vec<Check>) {
    let dir = tempfile::tempdir().unwrap();
    let (train, val, split) = default_train_run(dir.path());
    let acc = |r: &Value| r["report"]["accuracy"].as_f64().unwrap();
    let (ta, va) = (acc(&train), acc(&val));

    checks.push(check(
        "1 headline validation accuracy",
        (0.874..=0.889).contains(&va),
        format!("validation accuracy {va:.4}, band [0.874, 0.889], seed {DEFAULT_SEED}"),
    ));
    checks.push(check(
        "2 training accuracy and fit",
        (0.879..=0.895).contains(&ta) && ta >= va - 0.005,
        format!("training accuracy {ta:.4}, band [0.879, 0.895]; gap to validation {:+.4}", ta - va),
    ));

    let auc = val["roc"]["auc"].as_f64().unwrap();
    let pairs = val["auc_pairwise"].as_f64().unwrap();
    checks.push(check(
        "3 validation AUROC",
        (0.92..=0.94).contains(&auc) && (auc - pairs).abs() <= 1e-12,
        format!("trapezoid {auc:.6}, pair count {pairs:.6}, band [0.92, 0.94]"),
    ));

    let w = &val["report"]["weighted"];
    let (p, r, f) = (
        w["precision"].as_f64().unwrap(),
        w["recall"].as_f64().unwrap(),
        w["f1"].as_f64().unwrap(),
    );
    let near = |v: f64| (v - 0.88).abs() <= 0.01;
    checks.push(check(
        "4 weighted precision, recall, F1",
        near(p) && near(r) && near(f),
        format!("precision {p:.4}, recall {r:.4}, f1 {f:.4}, target 0.88 +/- 0.01"),
    ));

    let n_train = split["n_train"].as_u64().unwrap();
    let n_test = split["test_indices"].as_array().unwrap().len();
    checks.push(check(
        "5 split sizes",
        n_train == 39_074 && n_test == 9_768,
        format!("{n_train} train / {n_test} test"),
    ));
}

// ---- criterion 6 ------------------------------------------------------------

fn criterion_6(checks: &mut Vec<Check>) {
    let rs = load_dataset(&data_files()).unwrap();
    let mut hits = 0;
    let mut sums_ok = true;
    let mut lowest = Vec::new();
    for seed in 0..5u64 {
        let imp = pipeline::importance(&rs, &ExtraTreesParams::default(), seed).unwrap();
        let order = imp.ascending();
        let mut two = [imp.names[order[0]].as_str(), imp.names[order[1]].as_str()];
        two.sort();
        if two == ["native-country", "race"] {
            hits += 1;
        }
        sums_ok &= (imp.scores.iter().sum::<f64>() - 1.0).abs() <= 1e-9;
        lowest.push(format!("{}+{}", two[0], two[1]));
    }
    checks.push(check(
        "6 feature elimination",
        hits >= 4 && sums_ok,
        format!("race and native-country lowest in {hits}/5 seeds; sums within 1e-9: {sums_ok}; [{}]", lowest.join(", ")),
    ));
}

// ---- criterion 7 ------------------------------------------------------------

fn criterion_7(checks: &mut Vec<Check>) {
    let rs = load_dataset(&data_files()).unwrap();
    let (report, _) = pipeline::tune(
        rs,
        &DEFAULT_DROPPED,
        0.8,
        &ParamGrid::default(),
        DEFAULT_FOLDS,
        DEFAULT_SEED,
    )
    .unwrap();
    let best = report.best.clone().unwrap();
    let reference = report.find(250, 4).unwrap();
    let gap = best.mean_accuracy - reference.mean_accuracy;
    checks.push(check(
        "7 grid search",
        gap <= 0.002,
        format!(
            "best ({}, {}) {:.5}; (250, 4) {:.5}; gap {gap:.5}",
            best.cell.n_estimators, best.cell.max_depth, best.mean_accuracy, reference.mean_accuracy
        ),
    ));
}

// ---- criterion 8: properties without data -----------------------------------

fn random_matrix(rng: &mut DetRng, n: usize, p: usize, levels: u64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..p).map(|_| rng.below(levels) as f64).collect())
        .collect()
}

/// The stage just fitted scores exactly 1/2 under the reweighted distribution.
fn reweighting_identity() -> Result<String, String> {
    let mut rng = DetRng::new(8, 0);
    let mut done = 0;
    let mut worst: f64 = 0.0;
    while done < 100 {
        let n = 4 + rng.below(20) as usize;
        let x = random_matrix(&mut rng, n, 3, 4);
        let y: Vec<f64> = (0..n).map(|_| if rng.below(2) == 1 { 1.0 } else { -1.0 }).collect();
        let raw: Vec<f64> = (0..n).map(|_| 0.05 + rng.unit_f64()).collect();
        let d = SampleWeights::from_unnormalized(raw).map_err(|e| e.to_string())?;
        let y01: Vec<f64> = y.iter().map(|&v| if v > 0.0 { 1.0 } else { 0.0 }).collect();
        let params = TreeParams {
            max_depth: 1,
            min_samples_split: 2,
            criterion: Criterion::Gini,
        };
        let t = fit_tree(&FeatureMatrix::from_rows(&x).unwrap(), &y01, d.as_slice(), &params)
            .map_err(|e| e.to_string())?;
        let h: Vec<f64> = x
            .iter()
            .map(|r| if t.predict_unchecked(r) > 0.5 { 1.0 } else { -1.0 })
            .collect();
        let eps = d.weighted_error(&h, &y);
        if eps <= 0.0 || eps >= 0.5 {
            continue;
        }
        let alpha = compute_alpha(eps).map_err(|e| e.to_string())?;
        let next = update_weights(&d, alpha, &h, &y).map_err(|e| e.to_string())?;
        worst = worst.max((next.weighted_error(&h, &y) - 0.5).abs());
        done += 1;
    }
    if worst <= 1e-9 {
        Ok(format!("100 instances, max deviation {worst:.1e}"))
    } else {
        Err(format!("deviation {worst:e}"))
    }
}

fn update_weights_fixture() -> Result<String, String> {
    let d = SampleWeights::from_unnormalized(vec![0.5, 0.5]).map_err(|e| e.to_string())?;
    let next = update_weights(&d, 0.5 * 3f64.ln(), &[1.0, 1.0], &[1.0, -1.0]).map_err(|e| e.to_string())?;
    let w = next.as_slice();
    if (w[0] - 0.25).abs() <= 1e-12 && (w[1] - 0.75).abs() <= 1e-12 {
        Ok(format!("[{:.12}, {:.12}]", w[0], w[1]))
    } else {
        Err(format!("{w:?}"))
    }
}

fn alpha_symmetry() -> Result<String, String> {
    if compute_alpha(0.5).unwrap() != 0.0 {
        return Err("alpha(0.5) != 0".into());
    }
    let mut rng = DetRng::new(8, 1);
    for _ in 0..10_000 {
        let e = 1.0 - (1.0 - rng.unit_f64().clamp(1e-9, 1.0 - 1e-9));
        let (a, b) = (compute_alpha(e).unwrap(), compute_alpha(1.0 - e).unwrap());
        if a != -b {
            return Err(format!("alpha({e}) = {a}, alpha(1 - e) = {b}"));
        }
    }
    Ok("alpha(0.5) = 0; alpha(1 - e) = -alpha(e) on 10000 draws".into())
}

/// Textbook greedy gini tree on unit weights, compared with exact integer
/// arithmetic; ties keep the first (column, threshold).
mod oracle {
    pub enum Tree {
        Leaf(f64),
        Split(usize, Box<Tree>, Box<Tree>),
    }

    pub fn predict(t: &Tree, x: &[u8]) -> f64 {
        match t {
            Tree::Leaf(v) => *v,
            Tree::Split(f, l, r) => {
                if x[*f] == 0 {
                    predict(l, x)
                } else {
                    predict(r, x)
                }
            }
        }
    }

    /// Weighted gini impurity `n (1 - p^2 - q^2)` as a fraction `(num, n)`.
    fn impurity(rows: &[(&[u8], u8)]) -> (i64, i64) {
        let n = rows.len() as i64;
        let p = rows.iter().filter(|r| r.1 == 1).count() as i64;
        if n == 0 {
            return (0, 1);
        }
        (2 * p * (n - p), n)
    }

    pub fn grow(rows: &[(&[u8], u8)], depth: usize) -> Tree {
        let n = rows.len();
        let pos = rows.iter().filter(|r| r.1 == 1).count();
        let leaf = Tree::Leaf(if 2 * pos > n { 1.0 } else { 0.0 });
        if depth == 0 || n < 2 || pos == 0 || pos == n {
            return leaf;
        }
        let p = rows[0].0.len();
        let mut best: Option<((i64, i64), usize)> = None;
        for f in 0..p {
            let (l, r): (Vec<_>, Vec<_>) = rows.iter().partition(|row| row.0[f] == 0);
            if l.is_empty() || r.is_empty() {
                continue;
            }
            let (a, b) = (impurity(&l), impurity(&r));
            let cost = (a.0 * b.1 + b.0 * a.1, a.1 * b.1);
            let better = match best {
                None => true,
                Some((c, _)) => (cost.0 as i128) * (c.1 as i128) < (c.0 as i128) * (cost.1 as i128),
            };
            if better {
                best = Some((cost, f));
            }
        }
        match best {
            None => leaf,
            Some((_, f)) => {
                let (l, r): (Vec<_>, Vec<_>) = rows.iter().partition(|row| row.0[f] == 0);
                Tree::Split(f, Box::new(grow(&l, depth - 1)), Box::new(grow(&r, depth - 1)))
            }
        }
    }
}

/// Every multiset of `n` items drawn from `kinds` kinds, as count vectors.
fn multisets(kinds: usize, n: usize, f: &mut impl FnMut(&[usize])) {
    fn go(counts: &mut Vec<usize>, k: usize, left: usize, f: &mut impl FnMut(&[usize])) {
        if k + 1 == counts.len() {
            counts[k] = left;
            f(counts);
            return;
        }
        for c in 0..=left {
            counts[k] = c;
            go(counts, k + 1, left - c, f);
        }
        counts[k] = 0;
    }
    let mut counts = vec![0; kinds];
    go(&mut counts, 0, n, f);
}

/// Tree predictions depend only on the multiset of (row, label) pairs, so
/// enumerating multisets covers every dataset.
fn tree_oracle_equivalence() -> Result<String, String> {
    let mut checked = 0usize;
    for p in 1..=3usize {
        let patterns = 1usize << p;
        let kinds = patterns * 2;
        for n in 1..=8usize {
            let mut failure = None;
            multisets(kinds, n, &mut |counts| {
                if failure.is_some() {
                    return;
                }
                let mut xs: Vec<Vec<u8>> = Vec::with_capacity(n);
                let mut ys: Vec<u8> = Vec::with_capacity(n);
                for (kind, &c) in counts.iter().enumerate() {
                    let (pattern, label) = (kind / 2, (kind % 2) as u8);
                    for _ in 0..c {
                        xs.push((0..p).map(|b| ((pattern >> b) & 1) as u8).collect());
                        ys.push(label);
                    }
                }
                let rows_f: Vec<Vec<f64>> = xs.iter().map(|r| r.iter().map(|&v| f64::from(v)).collect()).collect();
                let m = FeatureMatrix::from_rows(&rows_f).unwrap();
                let yf: Vec<f64> = ys.iter().map(|&v| f64::from(v)).collect();
                let w = vec![1.0; n];
                let pairs: Vec<(&[u8], u8)> = xs.iter().map(|r| r.as_slice()).zip(ys.iter().copied()).collect();
                for depth in 0..=2 {
                    let params = TreeParams {
                        max_depth: depth,
                        min_samples_split: 2,
                        criterion: Criterion::Gini,
                    };
                    let t = fit_tree(&m, &yf, &w, &params).unwrap();
                    let o = oracle::grow(&pairs, depth);
                    let mut loss = 0;
                    let mut oracle_loss = 0;
                    for i in 0..n {
                        let a = t.predict_unchecked(&rows_f[i]);
                        let b = oracle::predict(&o, &xs[i]);
                        loss += usize::from(a != yf[i]);
                        oracle_loss += usize::from(b != yf[i]);
                    }
                    if loss != oracle_loss {
                        failure = Some(format!("p={p} counts={counts:?} depth={depth}: {loss} vs {oracle_loss}"));
                        return;
                    }
                    checked += 1;
                }
            });
            if let Some(f) = failure {
                return Err(f);
            }
        }
    }
    Ok(format!("{checked} (dataset, depth) pairs"))
}

fn brute_force_auc(y: &[bool], s: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..y.len() {
        for j in 0..y.len() {
            if y[i] && !y[j] {
                den += 1.0;
                num += if s[i] > s[j] {
                    1.0
                } else if s[i] == s[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    num / den
}

fn auc_agreement() -> Result<String, String> {
    let mut rng = DetRng::new(8, 2);
    let mut done = 0;
    let mut worst: f64 = 0.0;
    while done < 1000 {
        let n = 2 + rng.below(49) as usize;
        let y: Vec<bool> = (0..n).map(|_| rng.below(2) == 1).collect();
        if y.iter().all(|&v| v) || y.iter().all(|&v| !v) {
            continue;
        }
        // coarse levels force ties
        let s: Vec<f64> = (0..n).map(|_| rng.below(8) as f64 / 4.0 - 1.0).collect();
        let trap = roc(&y, &s).map_err(|e| e.to_string())?.auc;
        let mw = auc_mann_whitney(&y, &s).map_err(|e| e.to_string())?;
        let bf = brute_force_auc(&y, &s);
        worst = worst.max((trap - mw).abs()).max((trap - bf).abs());
        done += 1;
    }
    if worst <= 1e-12 {
        Ok(format!("1000 instances, max difference {worst:.1e}"))
    } else {
        Err(format!("difference {worst:e}"))
    }
}

fn synthetic_task(n: usize, seed: u64) -> Dataset {
    let mut rng = DetRng::new(seed, 3);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let a = rng.unit_f64();
        let b = rng.unit_f64();
        let c = rng.below(3) as f64;
        let noise = rng.unit_f64() < 0.1;
        labels.push((a + 0.5 * b > 0.8 + 0.1 * c) != noise);
        rows.push(vec![a, b, c]);
    }
    Dataset::new(FeatureMatrix::from_rows(&rows).unwrap(), LabelVector::new(labels)).unwrap()
}

fn logit_monotone() -> Result<String, String> {
    let data = synthetic_task(500, 1);
    let params = BoostParams {
        n_estimators: 100,
        max_depth: 3,
        ..BoostParams::default()
    };
    let (_, trace) = fit_logit_gbm_traced(&data, &params).map_err(|e| e.to_string())?;
    for (i, w) in trace.train_loss.windows(2).enumerate() {
        if w[1] > w[0] {
            return Err(format!("loss rose at stage {}: {} -> {}", i + 1, w[0], w[1]));
        }
    }
    Ok(format!(
        "{} stages, loss {:.4} -> {:.4}",
        trace.train_loss.len() - 1,
        trace.train_loss[0],
        trace.train_loss.last().unwrap()
    ))
}

fn serialization_round_trip() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    let mut rows_checked = 0;

    // synthetic ensembles in both modes, written to disk and read back
    let syn = synthetic_task(300, 2);
    let params = BoostParams {
        n_estimators: 40,
        ..BoostParams::default()
    };
    let fitted = [
        censusboost::boost::fit_logit_gbm(&syn, &params).map_err(|e| e.to_string())?,
        censusboost::boost::fit_algorithm1(&syn, &params).map_err(|e| e.to_string())?,
    ];
    for (i, e) in fitted.iter().enumerate() {
        let path = dir.path().join(format!("ensemble{i}.json"));
        std::fs::write(&path, serde_json::to_string_pretty(e).unwrap()).map_err(|e| e.to_string())?;
        let back: censusboost::BoostedEnsemble =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).map_err(|e| e.to_string())?;
        for r in 0..syn.len() {
            let x = syn.x.row(r);
            worst = worst.max((e.decision_function(x).unwrap() - back.decision_function(x).unwrap()).abs());
            rows_checked += 1;
        }
    }

    // a full model file trained on census rows, when they are available
    let data = data_dir().join("adult.data");
    if data.exists() {
        let cli = Cli::parse_from([
            "censusboost",
            "train",
            "--data",
            data.to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
            "--estimators",
            "30",
        ]);
        censusboost_cli::run(cli).map_err(|e| e.to_string())?;
        let model = ModelFile::load(&dir.path().join("model.json")).map_err(|e| e.to_string())?;
        let copy = dir.path().join("copy.json");
        model.save(&copy).map_err(|e| e.to_string())?;
        let back = ModelFile::load(&copy).map_err(|e| e.to_string())?;
        let rs = load_dataset(&[data]).map_err(|e| e.to_string())?;
        for r in rs.rows.iter().take(2000) {
            let (a, _) = model.score_row(&r.values).unwrap();
            let (b, _) = back.score_row(&r.values).unwrap();
            worst = worst.max((a - b).abs());
            rows_checked += 1;
        }
    }
    if worst <= 1e-12 {
        Ok(format!("{rows_checked} scored rows, max difference {worst:.1e}"))
    } else {
        Err(format!("difference {worst:e}"))
    }
}

fn criterion_8(checks: &mut Vec<Check>) {
    let parts: [(&'static str, Property); 7] = [
        ("8a reweighting identity", reweighting_identity),
        ("8b update_weights fixture", update_weights_fixture),
        ("8c alpha antisymmetry", alpha_symmetry),
        ("8d tree oracle equivalence", tree_oracle_equivalence),
        ("8e AUC trapezoid vs pair count", auc_agreement),
        ("8f logit loss monotone", logit_monotone),
        ("8g serialization round trip", serialization_round_trip),
    ];
    for (id, f) in parts {
        let (pass, detail) = match catch_unwind(f) {
            Ok(Ok(d)) => (true, d),
            Ok(Err(d)) => (false, d),
            Err(_) => (false, "panicked".into()),
        };
        checks.push(check(id, pass, detail));
    }
}

fn main() {
    // a stray seed in the environment would change the default run
    std::env::remove_var("CENSUSBOOST_SEED");
    let strict = std::env::var("CENSUSBOOST_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let have_data = data_files().iter().all(|p| p.exists());
    let mut checks = Vec::new();
    let mut broken = false;

    let data_criteria: [(&str, DataCriterion); 4] = [
        ("1-5", criteria_1_to_5),
        ("6", criterion_6),
        ("7", criterion_7),
        ("8", criterion_8),
    ];
    for (label, run) in data_criteria {
        if label != "8" && !have_data {
            println!("criterion {label}: SKIP (census files not found under {})", data_dir().display());
            broken = true;
            continue;
        }
        if catch_unwind(AssertUnwindSafe(|| run(&mut checks))).is_err() {
            println!("criterion {label}: FAIL (panicked)");
            broken = true;
        }
    }

    for c in &checks {
        println!("criterion {:<34} {}  {}", c.id, if c.pass { "PASS" } else { "FAIL" }, c.detail);
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    println!("acceptance: {} of {} criteria passed", checks.len() - failed, checks.len());
    if broken || (strict && failed > 0) {
        std::process::exit(1);
    }
}
