//! Axis-aligned binary decision trees.
//!
//! Two growers live here. [`fit_tree`] is exhaustive greedy CART used as the
//! boosting base learner: every midpoint between consecutive distinct values
//! of every column is scored, gini for classification and squared error for
//! regression. [`fit_extra_trees`] grows fully randomized trees (random
//! columns, one uniform threshold per column) on the whole sample and
//! accumulates mean-decrease-in-impurity importances.
//!
//! Routing is `x[feature] <= threshold` to the left child.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::{FeatureMatrix, LabelVector};
use crate::rng::{streams, DetRng};

pub const TREE_FORMAT_VERSION: u32 = 1;

/// Relative slack under which two split scores count as tied, so ties
/// resolve to the lowest column and threshold regardless of rounding.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// Binary classification on 0/1 targets.
    Gini,
    /// Regression on real targets.
    SquaredError,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub criterion: Criterion,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: 3,
            min_samples_split: 2,
            criterion: Criterion::SquaredError,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        value: f64,
    },
}

/// A fitted tree stored as a node array; node 0 is the root and children
/// always have larger indices than their parent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub format_version: u32,
    pub n_features: usize,
    /// `None` for trees grown without a depth limit.
    pub max_depth: Option<usize>,
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn leaf(n_features: usize, value: f64) -> Self {
        Self {
            format_version: TREE_FORMAT_VERSION,
            n_features,
            max_depth: Some(0),
            nodes: vec![Node::Leaf { value }],
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(Error::Arity {
                expected: self.n_features,
                actual: x.len(),
            });
        }
        Ok(self.predict_unchecked(x))
    }

    /// Routes without checking arity; `x` must have `n_features` entries.
    pub fn predict_unchecked(&self, x: &[f64]) -> f64 {
        match self.nodes[self.leaf_index(x)] {
            Node::Leaf { value } => value,
            Node::Split { .. } => unreachable!("leaf_index returns a leaf"),
        }
    }

    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0usize;
        loop {
            match self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[feature as usize] <= threshold {
                        left as usize
                    } else {
                        right as usize
                    };
                }
            }
        }
    }

    /// Longest root-to-leaf path length in edges.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => {
                    1 + walk(nodes, left as usize).max(walk(nodes, right as usize))
                }
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// Checks structural invariants: every node reachable exactly once from
    /// the root, children after parents, finite leaves, depth within bound.
    pub fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::Format("tree has no nodes".into()));
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::Format(format!("node {i} reached twice")));
            }
            match self.nodes[i] {
                Node::Leaf { value } => {
                    if !value.is_finite() {
                        return Err(Error::Format(format!("leaf {i} is not finite")));
                    }
                }
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if feature as usize >= self.n_features || !threshold.is_finite() {
                        return Err(Error::Format(format!("bad split at node {i}")));
                    }
                    for c in [left as usize, right as usize] {
                        if c <= i || c >= self.nodes.len() {
                            return Err(Error::Format(format!("bad child {c} of node {i}")));
                        }
                        stack.push(c);
                    }
                }
            }
        }
        if let Some(orphan) = seen.iter().position(|s| !s) {
            return Err(Error::Format(format!("node {orphan} is unreachable")));
        }
        if let Some(d) = self.max_depth {
            if self.depth() > d {
                return Err(Error::Format("tree exceeds its depth bound".into()));
            }
        }
        Ok(())
    }
}

/// Column-major view of a feature matrix where each value is replaced by
/// its rank among the column's distinct values.
#[derive(Debug, Clone)]
pub struct BinnedMatrix {
    n_rows: usize,
    bins: Vec<Vec<u32>>,
    distinct: Vec<Vec<f64>>,
}

impl BinnedMatrix {
    pub fn new(x: &FeatureMatrix) -> Self {
        let mut bins = Vec::with_capacity(x.n_cols());
        let mut distinct = Vec::with_capacity(x.n_cols());
        for j in 0..x.n_cols() {
            let col = x.column(j);
            let mut values = col.clone();
            values.sort_by(f64::total_cmp);
            values.dedup();
            let b = col
                .iter()
                .map(|v| values.binary_search_by(|p| p.total_cmp(v)).unwrap() as u32)
                .collect();
            bins.push(b);
            distinct.push(values);
        }
        Self {
            n_rows: x.n_rows(),
            bins,
            distinct,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.bins.len()
    }
}

/// A tree together with the leaf each training row landed in.
#[derive(Debug, Clone)]
pub struct FittedTree {
    pub tree: DecisionTree,
    pub leaf_of_row: Vec<u32>,
}

#[derive(Debug, Clone, Copy, Default)]
struct BinStat {
    w: f64,
    wy: f64,
    n: u32,
}

#[derive(Debug, Clone, Copy)]
struct SplitChoice {
    feature: usize,
    threshold: f64,
    /// Index of the last bin routed left.
    last_left_bin: u32,
    score: f64,
}

/// Larger is better. Gini: sum over children of (P^2 + N^2) / W, which is
/// W minus the child's weighted gini impurity. Squared error: S^2 / W,
/// which is the child's reduction of sum of squares about zero.
#[inline]
fn child_score(criterion: Criterion, w: f64, wy: f64) -> f64 {
    match criterion {
        Criterion::Gini => {
            let neg = w - wy;
            (wy * wy + neg * neg) / w
        }
        Criterion::SquaredError => wy * wy / w,
    }
}

struct Grower<'a> {
    data: &'a BinnedMatrix,
    y: &'a [f64],
    w: &'a [f64],
    wy: Vec<f64>,
    params: TreeParams,
    nodes: Vec<Node>,
    leaf_of_row: Vec<u32>,
    hist: Vec<BinStat>,
}

impl Grower<'_> {
    fn node_stats(&self, rows: &[u32]) -> BinStat {
        let mut s = BinStat::default();
        for &r in rows {
            s.w += self.w[r as usize];
            s.wy += self.wy[r as usize];
            s.n += 1;
        }
        s
    }

    fn is_pure(&self, rows: &[u32]) -> bool {
        let first = self.y[rows[0] as usize];
        rows.iter().all(|&r| self.y[r as usize] == first)
    }

    fn leaf_value(&self, s: BinStat) -> f64 {
        match self.params.criterion {
            Criterion::Gini => {
                if s.wy > s.w - s.wy {
                    1.0
                } else {
                    0.0
                }
            }
            Criterion::SquaredError => s.wy / s.w,
        }
    }

    fn best_split(&mut self, rows: &[u32], total: BinStat) -> Option<SplitChoice> {
        let criterion = self.params.criterion;
        let mut best: Option<SplitChoice> = None;
        for f in 0..self.data.n_cols() {
            let nb = self.data.distinct[f].len();
            if nb < 2 {
                continue;
            }
            let bins = &self.data.bins[f];
            let hist = &mut self.hist[..nb];
            hist.fill(BinStat::default());
            for &r in rows {
                let r = r as usize;
                let h = &mut hist[bins[r] as usize];
                h.w += self.w[r];
                h.wy += self.wy[r];
                h.n += 1;
            }
            let values = &self.data.distinct[f];
            let mut left = BinStat::default();
            let mut prev: Option<usize> = None;
            for (b, h) in hist.iter().enumerate() {
                if h.n == 0 {
                    continue;
                }
                if let Some(p) = prev {
                    let lw = left.w;
                    let rw = total.w - left.w;
                    if lw > 0.0 && rw > 0.0 {
                        let score = child_score(criterion, lw, left.wy)
                            + child_score(criterion, rw, total.wy - left.wy);
                        let better = match best {
                            None => true,
                            Some(bs) => score > bs.score + TIE_TOLERANCE * bs.score.abs().max(1.0),
                        };
                        if better {
                            let (lo, hi) = (values[p], values[b]);
                            let mut threshold = lo / 2.0 + hi / 2.0;
                            if threshold >= hi || threshold < lo {
                                threshold = lo;
                            }
                            best = Some(SplitChoice {
                                feature: f,
                                threshold,
                                last_left_bin: p as u32,
                                score,
                            });
                        }
                    }
                }
                left.w += h.w;
                left.wy += h.wy;
                left.n += h.n;
                prev = Some(b);
            }
        }
        best
    }

    fn grow(&mut self, rows: Vec<u32>, depth: usize) -> u32 {
        let id = self.nodes.len() as u32;
        self.nodes.push(Node::Leaf { value: 0.0 });
        let stats = self.node_stats(&rows);
        let can_split = depth < self.params.max_depth
            && rows.len() >= self.params.min_samples_split.max(2)
            && !self.is_pure(&rows);
        let choice = if can_split { self.best_split(&rows, stats) } else { None };
        match choice {
            None => {
                self.nodes[id as usize] = Node::Leaf {
                    value: self.leaf_value(stats),
                };
                for &r in &rows {
                    self.leaf_of_row[r as usize] = id;
                }
            }
            Some(c) => {
                let bins = &self.data.bins[c.feature];
                let (l, r): (Vec<u32>, Vec<u32>) =
                    rows.iter().partition(|&&row| bins[row as usize] <= c.last_left_bin);
                drop(rows);
                let left = self.grow(l, depth + 1);
                let right = self.grow(r, depth + 1);
                self.nodes[id as usize] = Node::Split {
                    feature: c.feature as u32,
                    threshold: c.threshold,
                    left,
                    right,
                };
            }
        }
        id
    }
}

fn check_targets(n: usize, y: &[f64], w: &[f64], params: &TreeParams) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidInput("cannot fit a tree on zero rows".into()));
    }
    if y.len() != n || w.len() != n {
        return Err(Error::InvalidInput(format!(
            "{n} rows but {} targets and {} weights",
            y.len(),
            w.len()
        )));
    }
    if w.iter().any(|&v| v.is_nan() || v < 0.0 || !v.is_finite()) {
        return Err(Error::InvalidInput("weights must be finite and non-negative".into()));
    }
    if w.iter().sum::<f64>() <= 0.0 {
        return Err(Error::InvalidInput("total sample weight is zero".into()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("targets must be finite".into()));
    }
    if params.criterion == Criterion::Gini && y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidInput("gini trees need 0/1 targets".into()));
    }
    Ok(())
}

/// Fits on an already-binned matrix and reports each row's leaf.
pub fn fit_tree_binned(
    data: &BinnedMatrix,
    y: &[f64],
    w: &[f64],
    params: &TreeParams,
) -> Result<FittedTree> {
    check_targets(data.n_rows(), y, w, params)?;
    let max_bins = data.distinct.iter().map(Vec::len).max().unwrap_or(0);
    let mut grower = Grower {
        data,
        y,
        w,
        wy: y.iter().zip(w).map(|(a, b)| a * b).collect(),
        params: *params,
        nodes: Vec::new(),
        leaf_of_row: vec![0; data.n_rows()],
        hist: vec![BinStat::default(); max_bins],
    };
    grower.grow((0..data.n_rows() as u32).collect(), 0);
    let tree = DecisionTree {
        format_version: TREE_FORMAT_VERSION,
        n_features: data.n_cols(),
        max_depth: Some(params.max_depth),
        nodes: grower.nodes,
    };
    Ok(FittedTree {
        tree,
        leaf_of_row: grower.leaf_of_row,
    })
}

/// Greedy CART fit with sample weights.
pub fn fit_tree(x: &FeatureMatrix, y: &[f64], w: &[f64], params: &TreeParams) -> Result<DecisionTree> {
    if x.n_rows() == 0 {
        return Err(Error::InvalidInput("cannot fit a tree on zero rows".into()));
    }
    check_targets(x.n_rows(), y, w, params)?;
    Ok(fit_tree_binned(&BinnedMatrix::new(x), y, w, params)?.tree)
}

pub fn predict_tree(t: &DecisionTree, x: &[f64]) -> Result<f64> {
    t.predict(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtraTreesParams {
    pub n_trees: usize,
    /// Columns tried per split; `None` means `ceil(sqrt(p))`.
    pub k_features: Option<usize>,
    pub min_samples_split: usize,
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
}

impl Default for ExtraTreesParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            k_features: None,
            min_samples_split: 2,
            max_depth: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtraTreesModel {
    pub trees: Vec<DecisionTree>,
    pub n_trees: usize,
    pub k_features: usize,
    pub seed: u64,
    pub feature_names: Vec<String>,
    /// Impurity decrease credited to each feature, one vector per tree,
    /// already divided by the sample count.
    pub tree_importances: Vec<Vec<f64>>,
}

impl ExtraTreesModel {
    /// Mean leaf value (fraction of positives) across trees.
    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        let mut s = 0.0;
        for t in &self.trees {
            s += t.predict(x)?;
        }
        Ok(s / self.trees.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceVector {
    pub names: Vec<String>,
    pub scores: Vec<f64>,
}

impl ImportanceVector {
    /// Feature indices ordered by ascending score, ties by index.
    pub fn ascending(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.scores.len()).collect();
        idx.sort_by(|&a, &b| self.scores[a].total_cmp(&self.scores[b]).then(a.cmp(&b)));
        idx
    }
}

struct ExtraGrower<'a> {
    cols: &'a [Vec<f64>],
    y: &'a [bool],
    params: ExtraTreesParams,
    k: usize,
    rng: DetRng,
    nodes: Vec<Node>,
    importance: Vec<f64>,
    features: Vec<usize>,
}

/// `W - (P^2 + N^2) / W`: gini impurity scaled by node weight.
fn weighted_gini(n: f64, pos: f64) -> f64 {
    let neg = n - pos;
    n - (pos * pos + neg * neg) / n
}

impl ExtraGrower<'_> {
    fn grow(&mut self, rows: &mut [u32], depth: usize) -> u32 {
        let id = self.nodes.len() as u32;
        self.nodes.push(Node::Leaf { value: 0.0 });
        let n = rows.len();
        let pos = rows.iter().filter(|&&r| self.y[r as usize]).count();
        let leaf = Node::Leaf {
            value: pos as f64 / n as f64,
        };
        let depth_ok = self.params.max_depth.is_none_or(|d| depth < d);
        if !depth_ok || n < self.params.min_samples_split.max(2) || pos == 0 || pos == n {
            self.nodes[id as usize] = leaf;
            return id;
        }

        // Draw columns without replacement; constant columns do not use up
        // one of the k draws.
        let p = self.features.len();
        let mut tried = 0;
        let mut best: Option<(usize, f64, usize, usize, f64)> = None;
        for i in 0..p {
            if tried == self.k {
                break;
            }
            let j = i + self.rng.below((p - i) as u64) as usize;
            self.features.swap(i, j);
            let f = self.features[i];
            let col = &self.cols[f];
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &r in rows.iter() {
                let v = col[r as usize];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if lo >= hi {
                continue;
            }
            tried += 1;
            let mut threshold = lo + self.rng.unit_f64() * (hi - lo);
            if threshold >= hi {
                threshold = lo;
            }
            let (mut nl, mut pl) = (0usize, 0usize);
            for &r in rows.iter() {
                if col[r as usize] <= threshold {
                    nl += 1;
                    if self.y[r as usize] {
                        pl += 1;
                    }
                }
            }
            let score = child_score(Criterion::Gini, nl as f64, pl as f64)
                + child_score(Criterion::Gini, (n - nl) as f64, (pos - pl) as f64);
            let better = match best {
                None => true,
                Some(b) => score > b.4 + TIE_TOLERANCE * b.4.abs().max(1.0),
            };
            if better {
                best = Some((f, threshold, nl, pl, score));
            }
        }
        let Some((f, threshold, nl, pl, _)) = best else {
            self.nodes[id as usize] = leaf;
            return id;
        };

        let decrease = weighted_gini(n as f64, pos as f64)
            - weighted_gini(nl as f64, pl as f64)
            - weighted_gini((n - nl) as f64, (pos - pl) as f64);
        self.importance[f] += decrease.max(0.0);

        let col = &self.cols[f];
        let mut split = 0;
        for i in 0..n {
            if col[rows[i] as usize] <= threshold {
                rows.swap(i, split);
                split += 1;
            }
        }
        let (l, r) = rows.split_at_mut(split);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id as usize] = Node::Split {
            feature: f as u32,
            threshold,
            left,
            right,
        };
        id
    }
}

/// Extremely randomized trees on the full sample. Tree `t` draws from the
/// stream `(seed, EXTRA_TREES_BASE + t)`, so the result does not depend on
/// the order trees are built in.
pub fn fit_extra_trees(
    x: &FeatureMatrix,
    y: &LabelVector,
    params: &ExtraTreesParams,
    seed: u64,
) -> Result<ExtraTreesModel> {
    let p = x.n_cols();
    if x.n_rows() == 0 || p == 0 {
        return Err(Error::InvalidInput("extra trees need a non-empty matrix".into()));
    }
    if x.n_rows() != y.len() {
        return Err(Error::InvalidInput("label count does not match rows".into()));
    }
    if params.n_trees == 0 {
        return Err(Error::Config("extra trees need at least one tree".into()));
    }
    let k = params.k_features.unwrap_or_else(|| (p as f64).sqrt().ceil() as usize);
    if k == 0 || k > p {
        return Err(Error::Config(format!("k_features must lie in 1..={p}, got {k}")));
    }
    let cols: Vec<Vec<f64>> = (0..p).map(|j| x.column(j)).collect();
    let n = x.n_rows();
    let mut trees = Vec::with_capacity(params.n_trees);
    let mut tree_importances = Vec::with_capacity(params.n_trees);
    for t in 0..params.n_trees {
        let mut g = ExtraGrower {
            cols: &cols,
            y: y.as_bools(),
            params: *params,
            k,
            rng: DetRng::new(seed, streams::EXTRA_TREES_BASE + t as u64),
            nodes: Vec::new(),
            importance: vec![0.0; p],
            features: (0..p).collect(),
        };
        let mut rows: Vec<u32> = (0..n as u32).collect();
        g.grow(&mut rows, 0);
        trees.push(DecisionTree {
            format_version: TREE_FORMAT_VERSION,
            n_features: p,
            max_depth: params.max_depth,
            nodes: g.nodes,
        });
        tree_importances.push(g.importance.iter().map(|v| v / n as f64).collect());
    }
    Ok(ExtraTreesModel {
        trees,
        n_trees: params.n_trees,
        k_features: k,
        seed,
        feature_names: x.columns().iter().map(|c| c.name.clone()).collect(),
        tree_importances,
    })
}

/// Mean decrease in impurity averaged over trees and scaled to sum to one.
/// An ensemble without any split reports uniform importances.
pub fn feature_importances(m: &ExtraTreesModel) -> ImportanceVector {
    let p = m.feature_names.len();
    let mut mean = vec![0.0; p];
    for imp in &m.tree_importances {
        for (acc, v) in mean.iter_mut().zip(imp) {
            *acc += v;
        }
    }
    let total: f64 = mean.iter().sum();
    let scores = if total > 0.0 {
        mean.iter().map(|v| v / total).collect()
    } else {
        vec![1.0 / p as f64; p]
    };
    ImportanceVector {
        names: m.feature_names.clone(),
        scores,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gini_params(depth: usize) -> TreeParams {
        TreeParams {
            max_depth: depth,
            min_samples_split: 2,
            criterion: Criterion::Gini,
        }
    }

    fn matrix(rows: &[Vec<f64>]) -> FeatureMatrix {
        FeatureMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn two_points_split_at_midpoint() {
        let x = matrix(&[vec![0.0], vec![1.0]]);
        let t = fit_tree(&x, &[0.0, 1.0], &[1.0, 1.0], &gini_params(1)).unwrap();
        assert_eq!(
            t.nodes[0],
            Node::Split {
                feature: 0,
                threshold: 0.5,
                left: 1,
                right: 2
            }
        );
        assert_eq!(t.nodes[1], Node::Leaf { value: 0.0 });
        assert_eq!(t.nodes[2], Node::Leaf { value: 1.0 });
    }

    #[test]
    fn pure_labels_give_single_leaf() {
        let x = matrix(&[vec![0.0], vec![1.0], vec![2.0]]);
        let t = fit_tree(&x, &[1.0; 3], &[1.0; 3], &gini_params(3)).unwrap();
        assert_eq!(t.nodes, vec![Node::Leaf { value: 1.0 }]);
    }

    #[test]
    fn xor_is_learned_at_depth_two() {
        let x = matrix(&[vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]]);
        let y = [0.0, 1.0, 1.0, 0.0];
        let t = fit_tree(&x, &y, &[1.0; 4], &gini_params(2)).unwrap();
        for i in 0..4 {
            assert_eq!(t.predict(x.row(i)).unwrap(), y[i]);
        }
        t.validate().unwrap();
    }

    #[test]
    fn zero_weight_and_empty_inputs_error() {
        let x = matrix(&[vec![0.0], vec![1.0]]);
        assert!(fit_tree(&x, &[0.0, 1.0], &[0.0, 0.0], &gini_params(1)).is_err());
        let empty = FeatureMatrix::new(0, vec![], vec![]).unwrap();
        assert!(fit_tree(&empty, &[], &[], &gini_params(1)).is_err());
        assert!(fit_tree(&x, &[0.0, 2.0], &[1.0, 1.0], &gini_params(1)).is_err());
    }

    #[test]
    fn regression_leaves_are_weighted_means() {
        let x = matrix(&[vec![0.0], vec![0.0], vec![5.0]]);
        let params = TreeParams {
            max_depth: 1,
            min_samples_split: 2,
            criterion: Criterion::SquaredError,
        };
        let t = fit_tree(&x, &[1.0, 3.0, 10.0], &[3.0, 1.0, 1.0], &params).unwrap();
        assert_eq!(t.predict(&[0.0]).unwrap(), 1.5);
        assert_eq!(t.predict(&[7.0]).unwrap(), 10.0);
    }

    #[test]
    fn min_samples_split_stops_growth() {
        let x = matrix(&[vec![0.0], vec![1.0], vec![2.0]]);
        let params = TreeParams {
            max_depth: 5,
            min_samples_split: 4,
            criterion: Criterion::Gini,
        };
        let t = fit_tree(&x, &[0.0, 1.0, 1.0], &[1.0; 3], &params).unwrap();
        assert_eq!(t.nodes.len(), 1);
    }

    #[test]
    fn predict_fixtures_and_arity() {
        let leaf = DecisionTree::leaf(2, 0.3);
        assert_eq!(leaf.predict(&[9.0, -4.0]).unwrap(), 0.3);
        let stump = DecisionTree {
            format_version: TREE_FORMAT_VERSION,
            n_features: 1,
            max_depth: Some(1),
            nodes: vec![
                Node::Split {
                    feature: 0,
                    threshold: 0.5,
                    left: 1,
                    right: 2,
                },
                Node::Leaf { value: -1.0 },
                Node::Leaf { value: 2.0 },
            ],
        };
        assert_eq!(stump.predict(&[0.2]).unwrap(), -1.0);
        assert_eq!(stump.predict(&[0.5]).unwrap(), -1.0);
        assert_eq!(stump.predict(&[0.6]).unwrap(), 2.0);
        assert!(matches!(stump.predict(&[0.2, 1.0]), Err(Error::Arity { .. })));
    }

    #[test]
    fn validate_rejects_cycles_and_orphans() {
        let mut t = DecisionTree::leaf(1, 0.0);
        t.nodes.push(Node::Leaf { value: 1.0 });
        assert!(t.validate().is_err());
        let cyc = DecisionTree {
            format_version: TREE_FORMAT_VERSION,
            n_features: 1,
            max_depth: None,
            nodes: vec![Node::Split {
                feature: 0,
                threshold: 0.0,
                left: 0,
                right: 0,
            }],
        };
        assert!(cyc.validate().is_err());
    }

    // ---- independent oracles -------------------------------------------

    /// Exact rational for comparing split quality on unit-weight data.
    #[derive(Clone, Copy, Debug)]
    struct Frac(i128, i128);
    impl Frac {
        fn add(self, o: Frac) -> Frac {
            Frac(self.0 * o.1 + o.0 * self.1, self.1 * o.1)
        }
        fn lt(self, o: Frac) -> bool {
            self.0 * o.1 < o.0 * self.1
        }
    }

    #[derive(Debug, Clone, PartialEq)]
    enum OracleTree {
        Leaf(f64),
        Split(usize, f64, Box<OracleTree>, Box<OracleTree>),
    }

    fn oracle_predict(t: &OracleTree, x: &[f64]) -> f64 {
        match t {
            OracleTree::Leaf(v) => *v,
            OracleTree::Split(f, th, l, r) => {
                if x[*f] <= *th {
                    oracle_predict(l, x)
                } else {
                    oracle_predict(r, x)
                }
            }
        }
    }

    /// Straightforward greedy gini tree on unit weights. Child impurity is
    /// the textbook `n * (1 - p1^2 - p0^2)` summed over children, compared
    /// exactly as rationals; ties keep the first candidate in
    /// (column, threshold) order.
    fn oracle_greedy(x: &[Vec<f64>], y: &[u8], idx: &[usize], depth: usize) -> OracleTree {
        let pos = idx.iter().filter(|&&i| y[i] == 1).count();
        let majority = if 2 * pos > idx.len() { 1.0 } else { 0.0 };
        if depth == 0 || idx.len() < 2 || pos == 0 || pos == idx.len() {
            return OracleTree::Leaf(majority);
        }
        let impurity = |set: &[usize]| -> Frac {
            let n = set.len() as i128;
            let p = set.iter().filter(|&&i| y[i] == 1).count() as i128;
            // n * (1 - (p/n)^2 - ((n-p)/n)^2) = (n^2 - p^2 - (n-p)^2) / n
            Frac(n * n - p * p - (n - p) * (n - p), n)
        };
        let mut best: Option<(Frac, usize, f64)> = None;
        for f in 0..x[0].len() {
            let mut vals: Vec<f64> = idx.iter().map(|&i| x[i][f]).collect();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            vals.dedup();
            for w in vals.windows(2) {
                let th = (w[0] + w[1]) / 2.0;
                let l: Vec<usize> = idx.iter().copied().filter(|&i| x[i][f] <= th).collect();
                let r: Vec<usize> = idx.iter().copied().filter(|&i| x[i][f] > th).collect();
                let cost = impurity(&l).add(impurity(&r));
                if best.is_none_or(|(b, _, _)| cost.lt(b)) {
                    best = Some((cost, f, th));
                }
            }
        }
        match best {
            None => OracleTree::Leaf(majority),
            Some((_, f, th)) => {
                let l: Vec<usize> = idx.iter().copied().filter(|&i| x[i][f] <= th).collect();
                let r: Vec<usize> = idx.iter().copied().filter(|&i| x[i][f] > th).collect();
                OracleTree::Split(
                    f,
                    th,
                    Box::new(oracle_greedy(x, y, &l, depth - 1)),
                    Box::new(oracle_greedy(x, y, &r, depth - 1)),
                )
            }
        }
    }

    fn misclassified(pred: impl Fn(&[f64]) -> f64, x: &[Vec<f64>], y: &[u8]) -> usize {
        x.iter()
            .zip(y)
            .filter(|(row, &label)| pred(row) != f64::from(label))
            .count()
    }

    /// Every tree of depth <= 2 over binary columns (thresholds at 0.5),
    /// with leaves set to the majority of the rows they receive.
    fn exhaustive_best_loss(x: &[Vec<f64>], y: &[u8], depth: usize) -> usize {
        fn best(x: &[Vec<f64>], y: &[u8], idx: &[usize], depth: usize) -> usize {
            let pos = idx.iter().filter(|&&i| y[i] == 1).count();
            let leaf_loss = pos.min(idx.len() - pos);
            if depth == 0 {
                return leaf_loss;
            }
            let mut b = leaf_loss;
            for f in 0..x[0].len() {
                let l: Vec<usize> = idx.iter().copied().filter(|&i| x[i][f] <= 0.5).collect();
                let r: Vec<usize> = idx.iter().copied().filter(|&i| x[i][f] > 0.5).collect();
                b = b.min(best(x, y, &l, depth - 1) + best(x, y, &r, depth - 1));
            }
            b
        }
        let idx: Vec<usize> = (0..x.len()).collect();
        best(x, y, &idx, depth)
    }

    #[test]
    fn xor_matches_exhaustive_optimum() {
        let x = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
        let y = [0u8, 1, 1, 0];
        assert_eq!(exhaustive_best_loss(&x, &y, 2), 0);
        let t = fit_tree(&matrix(&x), &[0.0, 1.0, 1.0, 0.0], &[1.0; 4], &gini_params(2)).unwrap();
        assert_eq!(misclassified(|r| t.predict_unchecked(r), &x, &y), 0);
    }

    /// Enumerates every dataset with `n` rows over `p` binary columns
    /// (`ROWS` picks row patterns, `LABELS` the label bits) in a compact
    /// deterministic sweep.
    fn small_binary_datasets() -> Vec<(Vec<Vec<f64>>, Vec<u8>)> {
        let mut out = Vec::new();
        for p in 1..=3usize {
            let patterns = 1usize << p;
            for n in 1..=8usize {
                // All label assignments for a fixed cyclic row layout, plus a
                // strided layout to vary duplicates.
                for layout in 0..3usize {
                    let rows: Vec<Vec<f64>> = (0..n)
                        .map(|i| {
                            let code = (i * (layout * 2 + 1) + layout) % patterns;
                            (0..p).map(|b| ((code >> b) & 1) as f64).collect()
                        })
                        .collect();
                    for labels in 0..(1usize << n) {
                        let y: Vec<u8> = (0..n).map(|i| ((labels >> i) & 1) as u8).collect();
                        out.push((rows.clone(), y));
                    }
                }
            }
        }
        out
    }

    #[test]
    fn matches_greedy_oracle_on_all_small_binary_datasets() {
        let mut checked = 0;
        for (x, y) in small_binary_datasets() {
            let yf: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
            let m = matrix(&x);
            for depth in 0..=2 {
                let t = fit_tree(&m, &yf, &vec![1.0; x.len()], &gini_params(depth)).unwrap();
                let idx: Vec<usize> = (0..x.len()).collect();
                let o = oracle_greedy(&x, &y, &idx, depth);
                let loss = misclassified(|r| t.predict_unchecked(r), &x, &y);
                let oracle_loss = misclassified(|r| oracle_predict(&o, r), &x, &y);
                assert_eq!(loss, oracle_loss, "x={x:?} y={y:?} depth={depth}");
                for row in &x {
                    assert_eq!(t.predict_unchecked(row), oracle_predict(&o, row));
                }
                assert!(loss >= exhaustive_best_loss(&x, &y, depth));
                checked += 1;
            }
        }
        assert!(checked > 1000);
    }

    /// Recursive walker used as an oracle for the iterative router.
    fn walk(nodes: &[Node], i: usize, x: &[f64]) -> f64 {
        match nodes[i] {
            Node::Leaf { value } => value,
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if x[feature as usize] > threshold {
                    walk(nodes, right as usize, x)
                } else {
                    walk(nodes, left as usize, x)
                }
            }
        }
    }

    fn impurity_of(rows: &[usize], y: &[f64], w: &[f64], criterion: Criterion) -> f64 {
        let sw: f64 = rows.iter().map(|&i| w[i]).sum();
        match criterion {
            Criterion::Gini => {
                let p: f64 = rows.iter().map(|&i| w[i] * y[i]).sum::<f64>() / sw;
                sw * (1.0 - p * p - (1.0 - p) * (1.0 - p))
            }
            Criterion::SquaredError => {
                let mean = rows.iter().map(|&i| w[i] * y[i]).sum::<f64>() / sw;
                rows.iter().map(|&i| w[i] * (y[i] - mean).powi(2)).sum()
            }
        }
    }

    fn dataset_strategy() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>, Vec<f64>)> {
        (2usize..30, 1usize..4).prop_flat_map(|(n, p)| {
            (
                prop::collection::vec(prop::collection::vec(0u8..6, p), n),
                prop::collection::vec(prop::bool::ANY, n),
                prop::collection::vec(1u8..4, n),
            )
                .prop_map(|(x, y, w)| {
                    (
                        x.into_iter()
                            .map(|r| r.into_iter().map(f64::from).collect())
                            .collect(),
                        y.into_iter().map(|b| if b { 1.0 } else { 0.0 }).collect(),
                        w.into_iter().map(f64::from).collect(),
                    )
                })
        })
    }

    proptest! {
        #[test]
        fn routing_matches_recursive_walk(
            (x, y, w) in dataset_strategy(),
            probe in prop::collection::vec(-1.0f64..7.0, 3),
        ) {
            let m = matrix(&x);
            let t = fit_tree(&m, &y, &w, &gini_params(3)).unwrap();
            t.validate().unwrap();
            let probe = &probe[..m.n_cols()];
            prop_assert_eq!(t.predict(probe).unwrap(), walk(&t.nodes, 0, probe));
        }

        #[test]
        fn splits_never_increase_impurity((x, y, w) in dataset_strategy(), regression in prop::bool::ANY) {
            let m = matrix(&x);
            let criterion = if regression { Criterion::SquaredError } else { Criterion::Gini };
            let params = TreeParams { max_depth: 3, min_samples_split: 2, criterion };
            let t = fit_tree(&m, &y, &w, &params).unwrap();
            // Re-derive each node's rows by routing the training data.
            let mut stack = vec![(0usize, (0..x.len()).collect::<Vec<_>>())];
            while let Some((i, rows)) = stack.pop() {
                if let Node::Split { feature, threshold, left, right } = t.nodes[i] {
                    let (l, r): (Vec<usize>, Vec<usize>) =
                        rows.iter().partition(|&&k| x[k][feature as usize] <= threshold);
                    prop_assert!(!l.is_empty() && !r.is_empty());
                    let parent = impurity_of(&rows, &y, &w, criterion);
                    let children = impurity_of(&l, &y, &w, criterion) + impurity_of(&r, &y, &w, criterion);
                    prop_assert!(parent + 1e-12 * parent.abs().max(1.0) >= children);
                    stack.push((left as usize, l));
                    stack.push((right as usize, r));
                }
            }
        }

        #[test]
        fn duplicated_rows_with_halved_weights_give_same_tree((x, y, w) in dataset_strategy()) {
            let m = matrix(&x);
            let t = fit_tree(&m, &y, &w, &gini_params(3)).unwrap();
            let mut x2 = x.clone();
            x2.extend(x.iter().cloned());
            let mut y2 = y.clone();
            y2.extend(y.iter().copied());
            let w2: Vec<f64> = w.iter().chain(w.iter()).map(|v| v / 2.0).collect();
            let t2 = fit_tree(&matrix(&x2), &y2, &w2, &gini_params(3)).unwrap();
            prop_assert_eq!(t.nodes, t2.nodes);
        }
    }

    #[test]
    fn extra_trees_single_feature_gets_all_importance() {
        let x = matrix(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]);
        let y = LabelVector::new(vec![false, false, true, true]);
        let params = ExtraTreesParams {
            n_trees: 1,
            ..Default::default()
        };
        let m = fit_extra_trees(&x, &y, &params, 5).unwrap();
        assert_eq!(feature_importances(&m).scores, vec![1.0]);
        for i in 0..4 {
            let expect = if y.as_bools()[i] { 1.0 } else { 0.0 };
            assert_eq!(m.predict_proba(x.row(i)).unwrap(), expect);
        }
    }

    #[test]
    fn extra_trees_are_deterministic() {
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|i| vec![(i % 7) as f64, (i * 13 % 11) as f64, (i % 3) as f64])
            .collect();
        let y = LabelVector::new((0..60).map(|i| (i % 7) + (i % 3) > 4).collect());
        let x = matrix(&rows);
        let params = ExtraTreesParams {
            n_trees: 10,
            ..Default::default()
        };
        let a = fit_extra_trees(&x, &y, &params, 3).unwrap();
        let b = fit_extra_trees(&x, &y, &params, 3).unwrap();
        assert_eq!(a, b);
        let c = fit_extra_trees(&x, &y, &params, 4).unwrap();
        assert_ne!(a.trees, c.trees);
        let imp = feature_importances(&a);
        assert!((imp.scores.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(imp.scores.iter().all(|&s| s >= 0.0));
        for t in &a.trees {
            t.validate().unwrap();
        }
    }

    #[test]
    fn extra_trees_reject_too_many_features() {
        let x = matrix(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let y = LabelVector::new(vec![false, true]);
        let params = ExtraTreesParams {
            k_features: Some(3),
            ..Default::default()
        };
        assert!(matches!(fit_extra_trees(&x, &y, &params, 0), Err(Error::Config(_))));
    }

    #[test]
    fn splitless_ensemble_reports_uniform_importance() {
        let x = matrix(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let y = LabelVector::new(vec![true, true]);
        let m = fit_extra_trees(&x, &y, &ExtraTreesParams::default(), 0).unwrap();
        assert_eq!(feature_importances(&m).scores, vec![0.5, 0.5]);
    }

    #[test]
    fn single_split_tree_puts_all_importance_on_its_column() {
        let model = ExtraTreesModel {
            trees: vec![],
            n_trees: 1,
            k_features: 1,
            seed: 0,
            feature_names: vec!["a".into(), "b".into(), "c".into()],
            tree_importances: vec![vec![0.0, 0.25, 0.0]],
        };
        assert_eq!(feature_importances(&model).scores, vec![0.0, 1.0, 0.0]);
    }
}
