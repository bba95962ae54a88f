//! Gradient-boosted trees with a softmax objective.
//!
//! One regression tree per class per round, fit to first/second-order
//! gradients of the multiclass log-loss. Split search is exact greedy over
//! midpoints of consecutive distinct feature values; rows with a missing
//! split feature follow a per-node default direction learned by trying both
//! sides and keeping the better gain.

use serde::{Deserialize, Serialize};

use crate::dataset::is_missing;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Boosting hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GBTParams {
    pub n_rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub min_child_weight: f64,
}

impl Default for GBTParams {
    fn default() -> Self {
        GBTParams {
            n_rounds: 30,
            max_depth: 6,
            learning_rate: 0.3,
            lambda: 1.0,
            gamma: 0.0,
            min_child_weight: 1.0,
        }
    }
}

impl GBTParams {
    fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 || !self.learning_rate.is_finite() {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        if self.lambda < 0.0 || self.gamma < 0.0 || self.min_child_weight < 0.0 {
            return Err(Error::invalid("lambda, gamma, min_child_weight must be >= 0"));
        }
        Ok(())
    }
}

/// Side that rows with a missing split feature are sent to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Left,
    Right,
}

/// Result of a split search over one column (or, via [`best_split`], a whole
/// table — then `feature` is the winning column).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitDecision {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
    /// Where rows with a missing value go.
    pub missing: Direction,
}

/// One node of a regression tree. Rows with `value < threshold` go left,
/// `value >= threshold` right, missing values follow `default_direction`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        default_direction: Direction,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        leaf_weight: f64,
    },
}

impl TreeNode {
    /// Weight of the leaf this row falls into.
    pub fn score(&self, row: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { leaf_weight } => return *leaf_weight,
                TreeNode::Split { feature, threshold, default_direction, left, right } => {
                    let v = row[*feature];
                    let go_left = if is_missing(v) {
                        *default_direction == Direction::Left
                    } else {
                        v < *threshold
                    };
                    node = if go_left { left } else { right };
                }
            }
        }
    }
}

/// A fitted multiclass boosted-tree model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GBTModel {
    pub n_classes: usize,
    pub n_features: usize,
    /// Initial logit for every class.
    pub base_score: f64,
    pub params: GBTParams,
    /// `trees[round][class]`.
    pub trees: Vec<Vec<TreeNode>>,
}

/// Numerically-stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / sum).collect()
}

/// Exact greedy split search over one feature column.
///
/// Threshold candidates are the midpoints of consecutive distinct non-missing
/// values, plus — when missing rows exist — one candidate at `max + 1` that
/// separates every observed value from the missing block. For each candidate
/// the missing rows are tried on both sides and the better assignment kept
/// (ties prefer left). Candidates leaving a child empty or under
/// `min_child_weight` hessian mass are discarded. Returns `None` when the
/// best gain does not exceed `gamma`.
///
/// The returned decision has `feature = 0`; callers searching several columns
/// fill in the real index (see [`best_split`]).
pub fn find_split(
    values: &[f64],
    grads: &[f64],
    hess: &[f64],
    params: &GBTParams,
) -> Option<SplitDecision> {
    debug_assert_eq!(values.len(), grads.len());
    debug_assert_eq!(values.len(), hess.len());
    if values.len() < 2 {
        return None;
    }

    let mut present: Vec<(f64, f64, f64)> = Vec::with_capacity(values.len());
    let (mut g_miss, mut h_miss, mut n_miss) = (0.0, 0.0, 0usize);
    for i in 0..values.len() {
        if is_missing(values[i]) {
            g_miss += grads[i];
            h_miss += hess[i];
            n_miss += 1;
        } else {
            present.push((values[i], grads[i], hess[i]));
        }
    }
    if present.is_empty() {
        return None;
    }
    present.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("non-NaN values"));

    let g_total: f64 = present.iter().map(|p| p.1).sum::<f64>() + g_miss;
    let h_total: f64 = present.iter().map(|p| p.2).sum::<f64>() + h_miss;
    let parent_score = score(g_total, h_total, params.lambda);

    let mut best: Option<SplitDecision> = None;
    let consider = |threshold: f64,
                        g_left_present: f64,
                        h_left_present: f64,
                        n_left_present: usize,
                        best: &mut Option<SplitDecision>| {
        for missing in [Direction::Left, Direction::Right] {
            let miss_left = missing == Direction::Left;
            let g_l = g_left_present + if miss_left { g_miss } else { 0.0 };
            let h_l = h_left_present + if miss_left { h_miss } else { 0.0 };
            let g_r = g_total - g_l;
            let h_r = h_total - h_l;
            let n_l = n_left_present + if miss_left { n_miss } else { 0 };
            let n_r = present.len() + n_miss - n_l;
            if n_l == 0 || n_r == 0 {
                continue;
            }
            if h_l < params.min_child_weight || h_r < params.min_child_weight {
                continue;
            }
            let gain =
                0.5 * (score(g_l, h_l, params.lambda) + score(g_r, h_r, params.lambda) - parent_score);
            if !gain.is_finite() {
                continue;
            }
            let better = match best {
                None => true,
                Some(b) => gain > b.gain,
            };
            if better {
                *best = Some(SplitDecision { feature: 0, threshold, gain, missing });
            }
        }
    };

    let (mut g_cum, mut h_cum) = (0.0, 0.0);
    for i in 0..present.len() {
        if i > 0 && present[i].0 > present[i - 1].0 {
            let threshold = (present[i - 1].0 + present[i].0) / 2.0;
            consider(threshold, g_cum, h_cum, i, &mut best);
        }
        g_cum += present[i].1;
        h_cum += present[i].2;
    }
    if n_miss > 0 {
        // Candidate separating all observed values from the missing block.
        let max_value = present.last().expect("non-empty").0;
        consider(max_value + 1.0, g_cum, h_cum, present.len(), &mut best);
    }

    best.filter(|b| b.gain > params.gamma)
}

#[inline]
fn score(g: f64, h: f64, lambda: f64) -> f64 {
    let denom = h + lambda;
    if denom <= 0.0 {
        0.0
    } else {
        g * g / denom
    }
}

/// Best split across all columns of `table` restricted to `rows`. Equal gains
/// prefer the lower feature index (then the per-column tie-breaks of
/// [`find_split`]). `grads`/`hess` are indexed like `rows`.
pub fn best_split(
    table: &Matrix,
    rows: &[usize],
    grads: &[f64],
    hess: &[f64],
    params: &GBTParams,
) -> Option<SplitDecision> {
    let mut best: Option<SplitDecision> = None;
    let mut column_buf = vec![0.0; rows.len()];
    for feature in 0..table.n_cols() {
        let column = table.column(feature);
        for (slot, &r) in column_buf.iter_mut().zip(rows) {
            *slot = column[r];
        }
        if let Some(mut d) = find_split(&column_buf, grads, hess, params) {
            d.feature = feature;
            let better = match &best {
                None => true,
                Some(b) => d.gain > b.gain,
            };
            if better {
                best = Some(d);
            }
        }
    }
    best
}

fn leaf_weight(g: f64, h: f64, params: &GBTParams) -> f64 {
    let denom = h + params.lambda;
    if denom <= 0.0 {
        0.0
    } else {
        -g / denom * params.learning_rate
    }
}

fn build_tree(
    table: &Matrix,
    rows: &[usize],
    g: &[f64],
    h: &[f64],
    params: &GBTParams,
    depth: usize,
) -> TreeNode {
    let g_sum: f64 = rows.iter().map(|&r| g[r]).sum();
    let h_sum: f64 = rows.iter().map(|&r| h[r]).sum();
    if depth >= params.max_depth || rows.len() < 2 {
        return TreeNode::Leaf { leaf_weight: leaf_weight(g_sum, h_sum, params) };
    }

    let node_g: Vec<f64> = rows.iter().map(|&r| g[r]).collect();
    let node_h: Vec<f64> = rows.iter().map(|&r| h[r]).collect();
    let Some(split) = best_split(table, rows, &node_g, &node_h, params) else {
        return TreeNode::Leaf { leaf_weight: leaf_weight(g_sum, h_sum, params) };
    };

    let mut left_rows = Vec::new();
    let mut right_rows = Vec::new();
    for &r in rows {
        let v = table.get(r, split.feature);
        let go_left = if is_missing(v) {
            split.missing == Direction::Left
        } else {
            v < split.threshold
        };
        if go_left {
            left_rows.push(r);
        } else {
            right_rows.push(r);
        }
    }
    // Float midpoints can collapse onto a neighbor value in pathological
    // cases; refuse the degenerate partition rather than recurse on it.
    if left_rows.is_empty() || right_rows.is_empty() {
        return TreeNode::Leaf { leaf_weight: leaf_weight(g_sum, h_sum, params) };
    }

    TreeNode::Split {
        feature: split.feature,
        threshold: split.threshold,
        default_direction: split.missing,
        left: Box::new(build_tree(table, &left_rows, g, h, params, depth + 1)),
        right: Box::new(build_tree(table, &right_rows, g, h, params, depth + 1)),
    }
}

/// Fits a multiclass boosted-tree model.
///
/// `labels[i] < n_classes`; classes absent from `labels` are legal (callers
/// may train on subsamples of a larger problem). The fit is deterministic —
/// exact greedy search uses no randomness — so `_seed` only documents the
/// call site.
pub fn fit_gbt(
    table: &Matrix,
    labels: &[usize],
    n_classes: usize,
    params: &GBTParams,
    _seed: u64,
) -> Result<GBTModel> {
    let n = table.n_rows();
    if n == 0 {
        return Err(Error::invalid("cannot fit on an empty table"));
    }
    if labels.len() != n {
        return Err(Error::invalid(format!("{} labels for {n} rows", labels.len())));
    }
    if n_classes == 0 {
        return Err(Error::invalid("n_classes must be at least 1"));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(Error::invalid(format!("label {bad} out of range for {n_classes} classes")));
    }
    params.validate()?;

    let k = n_classes;
    let all_rows: Vec<usize> = (0..n).collect();
    let mut logits = vec![0.0f64; n * k];
    let mut trees: Vec<Vec<TreeNode>> = Vec::with_capacity(params.n_rounds);
    let mut g = vec![0.0f64; n];
    let mut h = vec![0.0f64; n];

    for _round in 0..params.n_rounds {
        let probs: Vec<Vec<f64>> = (0..n).map(|i| softmax(&logits[i * k..(i + 1) * k])).collect();
        let mut round_trees = Vec::with_capacity(k);
        for class in 0..k {
            for i in 0..n {
                let p = probs[i][class];
                let y = if labels[i] == class { 1.0 } else { 0.0 };
                g[i] = p - y;
                h[i] = p * (1.0 - p);
            }
            let tree = build_tree(table, &all_rows, &g, &h, params, 0);
            round_trees.push(tree);
        }
        for (class, tree) in round_trees.iter().enumerate() {
            for i in 0..n {
                logits[i * k + class] += tree.score(&table.row(i));
            }
        }
        trees.push(round_trees);
    }

    Ok(GBTModel {
        n_classes: k,
        n_features: table.n_cols(),
        base_score: 0.0,
        params: params.clone(),
        trees,
    })
}

impl GBTModel {
    /// Class probabilities for one row.
    pub fn predict_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.n_features {
            return Err(Error::dims(format!(
                "row has {} features, model expects {}",
                row.len(),
                self.n_features
            )));
        }
        let mut logits = vec![self.base_score; self.n_classes];
        for round in &self.trees {
            for (class, tree) in round.iter().enumerate() {
                logits[class] += tree.score(row);
            }
        }
        Ok(softmax(&logits))
    }

    /// Probability matrix (rows x classes) for a table.
    pub fn predict_proba(&self, table: &Matrix) -> Result<Matrix> {
        self.predict_proba_with_rounds(table, self.trees.len())
    }

    /// Like [`Self::predict_proba`] but using only the first `rounds` rounds;
    /// lets callers inspect the boosting trajectory.
    pub fn predict_proba_with_rounds(&self, table: &Matrix, rounds: usize) -> Result<Matrix> {
        if table.n_cols() != self.n_features {
            return Err(Error::dims(format!(
                "table has {} columns, model expects {}",
                table.n_cols(),
                self.n_features
            )));
        }
        if rounds > self.trees.len() {
            return Err(Error::invalid(format!(
                "{rounds} rounds requested but model has {}",
                self.trees.len()
            )));
        }
        let n = table.n_rows();
        let mut out = Matrix::zeros(n, self.n_classes);
        for i in 0..n {
            let row = table.row(i);
            let mut logits = vec![self.base_score; self.n_classes];
            for round in &self.trees[..rounds] {
                for (class, tree) in round.iter().enumerate() {
                    logits[class] += tree.score(&row);
                }
            }
            for (class, p) in softmax(&logits).into_iter().enumerate() {
                out.set(i, class, p);
            }
        }
        Ok(out)
    }
}
