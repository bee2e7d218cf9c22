//! Gradient-boosted regression trees on squared loss with exact splits.
//!
//! One engine serves both growth policies: depth-wise (level by level up
//! to `max_depth`) and leaf-wise (always split the leaf with the largest
//! available gain until `num_leaves`). Leaf values are L1 soft-thresholded
//! and L2 shrunk residual sums.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Growth {
    DepthWise,
    LeafWise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbdtParams {
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub growth: Growth,
    /// Depth limit for depth-wise growth.
    pub max_depth: usize,
    /// Leaf budget for leaf-wise growth.
    pub num_leaves: usize,
    pub min_samples_leaf: usize,
    /// L1 penalty on leaf residual sums.
    pub alpha: f64,
    /// L2 penalty in leaf values and split gains.
    pub lambda: f64,
    pub min_gain: f64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        GbdtParams {
            n_estimators: 1000,
            learning_rate: 0.1,
            growth: Growth::LeafWise,
            max_depth: 6,
            num_leaves: 31,
            min_samples_leaf: 20,
            alpha: 0.5,
            lambda: 1.0,
            min_gain: 0.0,
        }
    }
}

impl GbdtParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::invalid(format!("gbdt: {m}")));
        if self.n_estimators < 1 {
            return bad("n_estimators must be >= 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate must lie in (0, 1]");
        }
        if self.min_samples_leaf < 1 {
            return bad("min_samples_leaf must be >= 1");
        }
        if !(self.alpha >= 0.0 && self.lambda >= 0.0 && self.min_gain >= 0.0) {
            return bad("alpha, lambda and min_gain must be >= 0");
        }
        match self.growth {
            Growth::DepthWise if self.max_depth < 1 => bad("max_depth must be >= 1"),
            Growth::LeafWise if self.num_leaves < 2 => bad("num_leaves must be >= 2"),
            _ => Ok(()),
        }
    }
}

/// Internal nodes send `v <= threshold` left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        value: f64,
    },
}

impl TreeNode {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if row[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub base_score: f64,
    pub trees: Vec<TreeNode>,
    pub params: GbdtParams,
    /// Accumulated split gain per feature.
    pub feature_gain: Vec<f64>,
}

impl GbdtModel {
    pub fn n_features(&self) -> usize {
        self.feature_gain.len()
    }
}

/// Best split of one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

pub fn soft_threshold(s: f64, a: f64) -> f64 {
    s.signum() * (s.abs() - a).max(0.0)
}

pub fn leaf_value(sum: f64, n: usize, params: &GbdtParams) -> f64 {
    soft_threshold(sum, params.alpha) / (n as f64 + params.lambda)
}

#[inline]
fn score(sum: f64, n: usize, lambda: f64) -> f64 {
    let d = n as f64 + lambda;
    if d == 0.0 {
        0.0
    } else {
        sum * sum / d
    }
}

/// Each feature's distinct sorted values and every row's position among
/// them. The most frequent position (the mode) is not stored per row: a
/// node's mode bin is its total minus the other bins, which lets sparse
/// one-hot columns be scanned in time proportional to their non-mode rows.
pub(crate) struct Binned {
    n_rows: usize,
    values: Vec<Vec<f64>>,
    codes: Vec<Vec<u32>>,
    mode: Vec<u32>,
    /// Ascending rows whose code is not the mode.
    others: Vec<Vec<u32>>,
}

impl Binned {
    pub(crate) fn new(x: &DenseMatrix) -> Self {
        let (n, p) = (x.rows(), x.cols());
        let per_feature: Vec<(Vec<f64>, Vec<u32>, u32, Vec<u32>)> = (0..p)
            .into_par_iter()
            .map(|f| {
                // + 0.0 folds -0.0 into 0.0
                let mut col: Vec<f64> = (0..n).map(|i| x.get(i, f) + 0.0).collect();
                let raw = col.clone();
                col.sort_by(f64::total_cmp);
                col.dedup();
                let codes: Vec<u32> = raw
                    .iter()
                    .map(|v| col.partition_point(|u| u < v) as u32)
                    .collect();
                let mut counts = vec![0usize; col.len()];
                for &c in &codes {
                    counts[c as usize] += 1;
                }
                // first maximum keeps the choice deterministic
                let mode = counts
                    .iter()
                    .enumerate()
                    .fold((0usize, 0usize), |best, (i, &c)| if c > best.1 { (i, c) } else { best })
                    .0 as u32;
                let others = (0..n as u32).filter(|&r| codes[r as usize] != mode).collect();
                (col, codes, mode, others)
            })
            .collect();
        let mut b = Binned {
            n_rows: n,
            values: Vec::with_capacity(p),
            codes: Vec::with_capacity(p),
            mode: Vec::with_capacity(p),
            others: Vec::with_capacity(p),
        };
        for (v, c, m, o) in per_feature {
            b.values.push(v);
            b.codes.push(c);
            b.mode.push(m);
            b.others.push(o);
        }
        b
    }

    fn n_features(&self) -> usize {
        self.values.len()
    }

    fn histogram(&self, f: usize, rows: &[usize], in_node: &[bool], residuals: &[f64], total: f64) -> Vec<(f64, usize)> {
        let codes = &self.codes[f];
        let mode = self.mode[f] as usize;
        let mut hist = vec![(0.0f64, 0usize); self.values[f].len()];
        // Both branches visit non-mode rows in ascending order, so the
        // sums are identical whichever is taken.
        if self.others[f].len() < rows.len() {
            for &r in &self.others[f] {
                let r = r as usize;
                if in_node[r] {
                    let h = &mut hist[codes[r] as usize];
                    h.0 += residuals[r];
                    h.1 += 1;
                }
            }
        } else {
            for &r in rows {
                let c = codes[r] as usize;
                if c != mode {
                    hist[c].0 += residuals[r];
                    hist[c].1 += 1;
                }
            }
        }
        let (s_other, n_other) = hist.iter().fold((0.0, 0), |a, h| (a.0 + h.0, a.1 + h.1));
        hist[mode] = (total - s_other, rows.len() - n_other);
        hist
    }

    fn best_for_feature(
        &self,
        f: usize,
        rows: &[usize],
        in_node: &[bool],
        residuals: &[f64],
        total: f64,
        params: &GbdtParams,
    ) -> Option<Split> {
        let values = &self.values[f];
        if values.len() < 2 {
            return None;
        }
        let hist = self.histogram(f, rows, in_node, residuals, total);
        let n = rows.len();
        let parent = score(total, n, params.lambda);
        let msl = params.min_samples_leaf;
        let mut best: Option<Split> = None;
        let mut best_gain = params.min_gain;
        let (mut left_sum, mut left_n) = (0.0, 0usize);
        let mut prev: Option<usize> = None;
        for (b, &(s, c)) in hist.iter().enumerate() {
            if c == 0 {
                continue;
            }
            if let Some(p) = prev {
                let right_n = n - left_n;
                if left_n >= msl && right_n >= msl {
                    let right_sum = total - left_sum;
                    let gain = score(left_sum, left_n, params.lambda)
                        + score(right_sum, right_n, params.lambda)
                        - parent;
                    if gain > best_gain {
                        best_gain = gain;
                        best = Some(Split {
                            feature: f,
                            threshold: (values[p] + values[b]) / 2.0,
                            gain,
                        });
                    }
                }
            }
            left_sum += s;
            left_n += c;
            prev = Some(b);
            if n - left_n < msl {
                break;
            }
        }
        best
    }

    /// Exhaustive scan over every feature and midpoint. Ties keep the lower
    /// feature index, then the lower threshold.
    pub(crate) fn best_split(&self, rows: &[usize], residuals: &[f64], params: &GbdtParams) -> Option<Split> {
        if rows.len() < 2 * params.min_samples_leaf {
            return None;
        }
        let total: f64 = rows.iter().map(|&r| residuals[r]).sum();
        let mut in_node = vec![false; self.n_rows];
        for &r in rows {
            in_node[r] = true;
        }
        let per_feature: Vec<Option<Split>> = (0..self.n_features())
            .into_par_iter()
            .map(|f| self.best_for_feature(f, rows, &in_node, residuals, total, params))
            .collect();
        let mut best: Option<Split> = None;
        for s in per_feature.into_iter().flatten() {
            if best.is_none_or(|b| s.gain > b.gain) {
                best = Some(s);
            }
        }
        best
    }
}

/// Best split for the node holding `node_rows`, or `None` when no
/// candidate satisfies `min_samples_leaf` and beats `min_gain`.
pub fn find_best_split(
    node_rows: &[usize],
    x: &DenseMatrix,
    residuals: &[f64],
    params: &GbdtParams,
) -> Option<Split> {
    let mut rows = node_rows.to_vec();
    rows.sort_unstable();
    rows.dedup();
    Binned::new(x).best_split(&rows, residuals, params)
}

enum ArenaNode {
    Leaf { rows: Vec<usize> },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

struct TreeBuilder<'a> {
    x: &'a DenseMatrix,
    binned: &'a Binned,
    residuals: &'a [f64],
    params: &'a GbdtParams,
    arena: Vec<ArenaNode>,
    gains: &'a mut [f64],
}

impl TreeBuilder<'_> {
    fn split_node(&mut self, idx: usize, split: Split) -> (usize, usize) {
        let ArenaNode::Leaf { rows } = std::mem::replace(
            &mut self.arena[idx],
            ArenaNode::Leaf { rows: Vec::new() },
        ) else {
            unreachable!("only leaves are split");
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows
            .into_iter()
            .partition(|&i| self.x.get(i, split.feature) <= split.threshold);
        let left = self.arena.len();
        self.arena.push(ArenaNode::Leaf { rows: l });
        let right = self.arena.len();
        self.arena.push(ArenaNode::Leaf { rows: r });
        self.arena[idx] = ArenaNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        self.gains[split.feature] += split.gain;
        (left, right)
    }

    fn candidate(&self, idx: usize) -> Option<Split> {
        match &self.arena[idx] {
            ArenaNode::Leaf { rows } => self.binned.best_split(rows, self.residuals, self.params),
            ArenaNode::Split { .. } => None,
        }
    }

    fn grow_depth_wise(&mut self) {
        let mut level = vec![0usize];
        for _ in 0..self.params.max_depth {
            let mut next = Vec::new();
            for idx in level {
                if let Some(s) = self.candidate(idx) {
                    let (l, r) = self.split_node(idx, s);
                    next.push(l);
                    next.push(r);
                }
            }
            if next.is_empty() {
                break;
            }
            level = next;
        }
    }

    fn grow_leaf_wise(&mut self) {
        let mut frontier: Vec<(usize, Option<Split>)> = vec![(0, self.candidate(0))];
        let mut leaves = 1;
        while leaves < self.params.num_leaves {
            let mut pick: Option<(usize, Split)> = None;
            for (pos, (_, c)) in frontier.iter().enumerate() {
                if let Some(s) = c {
                    if pick.is_none_or(|(_, b)| s.gain > b.gain) {
                        pick = Some((pos, *s));
                    }
                }
            }
            let Some((pos, split)) = pick else { break };
            let (idx, _) = frontier.remove(pos);
            let (l, r) = self.split_node(idx, split);
            let cl = self.candidate(l);
            let cr = self.candidate(r);
            frontier.push((l, cl));
            frontier.push((r, cr));
            leaves += 1;
        }
    }

    fn finish(&self, idx: usize, out_leaf: &mut [f64]) -> TreeNode {
        match &self.arena[idx] {
            ArenaNode::Leaf { rows } => {
                let sum: f64 = rows.iter().map(|&r| self.residuals[r]).sum();
                let value = leaf_value(sum, rows.len(), self.params);
                for &r in rows {
                    out_leaf[r] = value;
                }
                TreeNode::Leaf { value }
            }
            ArenaNode::Split {
                feature,
                threshold,
                left,
                right,
            } => TreeNode::Split {
                feature: *feature,
                threshold: *threshold,
                left: Box::new(self.finish(*left, out_leaf)),
                right: Box::new(self.finish(*right, out_leaf)),
            },
        }
    }
}

/// Fits one tree to `residuals`. Returns the tree and each row's leaf value.
fn fit_tree(
    x: &DenseMatrix,
    binned: &Binned,
    residuals: &[f64],
    params: &GbdtParams,
    gains: &mut [f64],
) -> (TreeNode, Vec<f64>) {
    let mut b = TreeBuilder {
        x,
        binned,
        residuals,
        params,
        arena: vec![ArenaNode::Leaf {
            rows: (0..x.rows()).collect(),
        }],
        gains,
    };
    match params.growth {
        Growth::DepthWise => b.grow_depth_wise(),
        Growth::LeafWise => b.grow_leaf_wise(),
    }
    let mut leaf_of_row = vec![0.0; x.rows()];
    let tree = b.finish(0, &mut leaf_of_row);
    (tree, leaf_of_row)
}

fn mse(y: &[f64], pred: &[f64]) -> f64 {
    y.iter().zip(pred).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64
}

/// Like [`gbdt_fit`], also returning the training MSE before the first
/// tree and after every round.
pub fn gbdt_fit_with_history(x: &DenseMatrix, y: &[f64], params: &GbdtParams) -> Result<(GbdtModel, Vec<f64>)> {
    params.validate()?;
    if x.rows() == 0 || x.rows() != y.len() {
        return Err(Error::invalid(format!(
            "gbdt needs matching non-empty inputs ({} rows, {} targets)",
            x.rows(),
            y.len()
        )));
    }
    let base_score = y.iter().sum::<f64>() / y.len() as f64;
    let binned = Binned::new(x);
    let mut gains = vec![0.0; x.cols()];
    let mut pred = vec![base_score; y.len()];
    let mut history = vec![mse(y, &pred)];
    let mut trees = Vec::with_capacity(params.n_estimators);
    let mut residuals = vec![0.0; y.len()];
    for _ in 0..params.n_estimators {
        for ((r, t), p) in residuals.iter_mut().zip(y).zip(&pred) {
            *r = t - p;
        }
        let (tree, leaf_of_row) = fit_tree(x, &binned, &residuals, params, &mut gains);
        for (p, v) in pred.iter_mut().zip(&leaf_of_row) {
            *p += params.learning_rate * v;
        }
        history.push(mse(y, &pred));
        trees.push(tree);
    }
    Ok((
        GbdtModel {
            base_score,
            trees,
            params: params.clone(),
            feature_gain: gains,
        },
        history,
    ))
}

pub fn gbdt_fit(x: &DenseMatrix, y: &[f64], params: &GbdtParams) -> Result<GbdtModel> {
    gbdt_fit_with_history(x, y, params).map(|(m, _)| m)
}

/// `base_score + learning_rate × Σ tree outputs` for every row.
pub fn gbdt_predict(model: &GbdtModel, x: &DenseMatrix) -> Result<Vec<f64>> {
    if x.cols() != model.n_features() {
        return Err(Error::Dimension {
            expected: model.n_features(),
            got: x.cols(),
        });
    }
    let lr = model.params.learning_rate;
    Ok((0..x.rows())
        .into_par_iter()
        .map(|i| {
            let row = x.row(i);
            let sum: f64 = model.trees.iter().map(|t| t.predict(row)).sum();
            model.base_score + lr * sum
        })
        .collect())
}
