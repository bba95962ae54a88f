//! Bagged cascade trees.
//!
//! Each tree of the ensemble is fit on a bootstrap sample. Every tree node
//! trains a boosted-tree classifier on its rows, appends that classifier's
//! class-probability columns to the data, and splits on the Gini-optimal
//! column of the widened table — so deeper nodes see the raw features plus
//! one probability block per ancestor. A row is answered by the deepest
//! classifier on its routing path; trees are averaged.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::is_missing;
use crate::error::{Error, Result};
use crate::gbt::{fit_gbt, Direction, GBTModel, GBTParams};
use crate::matrix::Matrix;

/// Ensemble hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LCEParams {
    pub n_trees: usize,
    /// Cascade depth: 0 keeps each tree a single classifier.
    pub max_depth: usize,
    pub gbt: GBTParams,
}

impl Default for LCEParams {
    fn default() -> Self {
        LCEParams { n_trees: 10, max_depth: 1, gbt: GBTParams::default() }
    }
}

/// One node of a cascade tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CascadeNode {
    /// All training rows shared this class; no classifier was trained.
    ClassLeaf { class: usize },
    /// Terminal classifier (depth stop, or no improving split existed).
    Terminal { model: GBTModel },
    /// Internal classifier plus a split over the widened column space
    /// (`feature` may index an appended probability column).
    Split {
        model: GBTModel,
        feature: usize,
        threshold: f64,
        default_direction: Direction,
        left: Box<CascadeNode>,
        right: Box<CascadeNode>,
    },
}

/// A fitted cascade tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeTree {
    pub root: CascadeNode,
    pub n_classes: usize,
    /// Width of the raw (unaugmented) input rows.
    pub input_width: usize,
}

/// A bagged forest of cascade trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LCEForest {
    pub trees: Vec<CascadeTree>,
    pub n_classes: usize,
}

/// Outcome of a Gini split search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GiniDecision {
    pub feature: usize,
    pub threshold: f64,
    /// Side receiving rows whose split feature is missing.
    pub missing: Direction,
    pub decrease: f64,
}

fn gini_impurity(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let mut sum_sq = 0.0;
    for &c in counts {
        let p = c as f64 / n as f64;
        sum_sq += p * p;
    }
    1.0 - sum_sq
}

/// Exhaustive Gini split search over every column of `table`.
///
/// Thresholds are midpoints of consecutive distinct non-missing values. For
/// each candidate, rows with a missing value are routed as a block to the
/// child where the two children's combined majority-class accuracy is higher
/// (ties prefer left); the impurity decrease is then computed with the block
/// in place. Returns `None` when no candidate decreases impurity. Equal
/// decreases prefer the lower feature index, then the lower threshold.
pub fn gini_split(table: &Matrix, labels: &[usize], n_classes: usize) -> Option<GiniDecision> {
    let n = table.n_rows();
    debug_assert_eq!(n, labels.len());
    if n < 2 {
        return None;
    }

    let mut parent_counts = vec![0usize; n_classes];
    for &l in labels {
        parent_counts[l] += 1;
    }
    let parent = gini_impurity(&parent_counts, n);

    let mut best: Option<GiniDecision> = None;
    for feature in 0..table.n_cols() {
        let column = table.column(feature);
        let mut present: Vec<(f64, usize)> = Vec::with_capacity(n);
        let mut miss_counts = vec![0usize; n_classes];
        let mut n_miss = 0usize;
        for (i, &v) in column.iter().enumerate() {
            if is_missing(v) {
                miss_counts[labels[i]] += 1;
                n_miss += 1;
            } else {
                present.push((v, labels[i]));
            }
        }
        if present.len() < 2 {
            continue;
        }
        present.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("non-NaN values"));

        let mut left_present = vec![0usize; n_classes];
        for i in 1..present.len() {
            left_present[present[i - 1].1] += 1;
            if present[i].0 <= present[i - 1].0 {
                continue;
            }
            let threshold = (present[i - 1].0 + present[i].0) / 2.0;

            let candidate = |missing: Direction| {
                let mut left = left_present.clone();
                if missing == Direction::Left {
                    for (slot, &m) in left.iter_mut().zip(&miss_counts) {
                        *slot += m;
                    }
                }
                let right: Vec<usize> =
                    parent_counts.iter().zip(&left).map(|(&t, &l)| t - l).collect();
                let n_l: usize = left.iter().sum();
                let n_r = n - n_l;
                let majority =
                    left.iter().max().copied().unwrap() + right.iter().max().copied().unwrap();
                (left, right, n_l, n_r, majority)
            };

            let left_choice = candidate(Direction::Left);
            let (left, right, n_l, n_r, missing) = if n_miss == 0 {
                let (l, r, nl, nr, _) = left_choice;
                (l, r, nl, nr, Direction::Left)
            } else {
                let right_choice = candidate(Direction::Right);
                if right_choice.4 > left_choice.4 {
                    let (l, r, nl, nr, _) = right_choice;
                    (l, r, nl, nr, Direction::Right)
                } else {
                    let (l, r, nl, nr, _) = left_choice;
                    (l, r, nl, nr, Direction::Left)
                }
            };

            let weighted = n_l as f64 / n as f64 * gini_impurity(&left, n_l)
                + n_r as f64 / n as f64 * gini_impurity(&right, n_r);
            let decrease = parent - weighted;
            let better = match &best {
                None => true,
                Some(b) => decrease > b.decrease,
            };
            if better {
                best = Some(GiniDecision { feature, threshold, missing, decrease });
            }
        }
    }
    best.filter(|b| b.decrease > 0.0)
}

/// Bootstrap row indices for one tree: `n` draws with replacement from a
/// stream seeded with `seed + tree_index`.
pub fn bootstrap_indices(n: usize, seed: u64, tree_index: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(tree_index as u64));
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

fn uniform_class(labels: &[usize]) -> Option<usize> {
    let first = *labels.first()?;
    labels.iter().all(|&l| l == first).then_some(first)
}

fn fit_cascade_node(
    table: Matrix,
    labels: Vec<usize>,
    n_classes: usize,
    params: &LCEParams,
    depth: usize,
    seed: u64,
) -> Result<CascadeNode> {
    if let Some(class) = uniform_class(&labels) {
        return Ok(CascadeNode::ClassLeaf { class });
    }
    let model = fit_gbt(&table, &labels, n_classes, &params.gbt, seed)?;
    if depth >= params.max_depth {
        return Ok(CascadeNode::Terminal { model });
    }

    let probs = model.predict_proba(&table)?;
    let mut widened = table;
    for class in 0..n_classes {
        widened.push_column(probs.column(class));
    }

    let Some(split) = gini_split(&widened, &labels, n_classes) else {
        return Ok(CascadeNode::Terminal { model });
    };
    let mut left_rows = Vec::new();
    let mut right_rows = Vec::new();
    for i in 0..widened.n_rows() {
        let v = widened.get(i, split.feature);
        let go_left =
            if is_missing(v) { split.missing == Direction::Left } else { v < split.threshold };
        if go_left {
            left_rows.push(i);
        } else {
            right_rows.push(i);
        }
    }
    if left_rows.is_empty() || right_rows.is_empty() {
        return Ok(CascadeNode::Terminal { model });
    }

    let pick_labels = |rows: &[usize]| rows.iter().map(|&i| labels[i]).collect::<Vec<_>>();
    let left = fit_cascade_node(
        widened.select_rows(&left_rows),
        pick_labels(&left_rows),
        n_classes,
        params,
        depth + 1,
        seed,
    )?;
    let right = fit_cascade_node(
        widened.select_rows(&right_rows),
        pick_labels(&right_rows),
        n_classes,
        params,
        depth + 1,
        seed,
    )?;
    Ok(CascadeNode::Split {
        model,
        feature: split.feature,
        threshold: split.threshold,
        default_direction: split.missing,
        left: Box::new(left),
        right: Box::new(right),
    })
}

/// Fits one cascade tree (no bootstrapping; [`fit_lce`] handles that).
pub fn fit_lce_tree(
    table: &Matrix,
    labels: &[usize],
    n_classes: usize,
    params: &LCEParams,
    seed: u64,
) -> Result<CascadeTree> {
    if table.n_rows() == 0 {
        return Err(Error::invalid("cannot fit on an empty table"));
    }
    if labels.len() != table.n_rows() {
        return Err(Error::invalid(format!(
            "{} labels for {} rows",
            labels.len(),
            table.n_rows()
        )));
    }
    let root = fit_cascade_node(table.clone(), labels.to_vec(), n_classes, params, 0, seed)?;
    Ok(CascadeTree { root, n_classes, input_width: table.n_cols() })
}

/// Fits the bagged ensemble: `n_trees` cascade trees, each on its own
/// bootstrap sample of all rows. Deterministic per seed, including under
/// tree-parallel execution (trees are keyed by index, not completion order).
pub fn fit_lce(
    table: &Matrix,
    labels: &[usize],
    n_classes: usize,
    params: &LCEParams,
    seed: u64,
) -> Result<LCEForest> {
    let n = table.n_rows();
    if n == 0 {
        return Err(Error::invalid("cannot fit on an empty table"));
    }
    if labels.len() != n {
        return Err(Error::invalid(format!("{} labels for {n} rows", labels.len())));
    }
    if params.n_trees == 0 {
        return Err(Error::invalid("n_trees must be at least 1"));
    }
    if n_classes == 0 {
        return Err(Error::invalid("n_classes must be at least 1"));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(Error::invalid(format!("label {bad} out of range for {n_classes} classes")));
    }

    let trees: Vec<CascadeTree> = (0..params.n_trees)
        .into_par_iter()
        .map(|i| {
            let idx = bootstrap_indices(n, seed, i);
            let sample = table.select_rows(&idx);
            let sample_labels: Vec<usize> = idx.iter().map(|&r| labels[r]).collect();
            fit_lce_tree(
                &sample,
                &sample_labels,
                n_classes,
                params,
                seed.wrapping_add(i as u64),
            )
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(LCEForest { trees, n_classes })
}

impl CascadeTree {
    /// Class probabilities for one raw row: walks the cascade, widening the
    /// row with each node's probability block, and answers with the deepest
    /// classifier on the path (class leaves answer one-hot).
    pub fn predict_proba(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.input_width {
            return Err(Error::dims(format!(
                "row has {} features, tree expects {}",
                row.len(),
                self.input_width
            )));
        }
        let mut widened = row.to_vec();
        let mut node = &self.root;
        loop {
            match node {
                CascadeNode::ClassLeaf { class } => {
                    let mut out = vec![0.0; self.n_classes];
                    out[*class] = 1.0;
                    return Ok(out);
                }
                CascadeNode::Terminal { model } => return model.predict_row(&widened),
                CascadeNode::Split {
                    model,
                    feature,
                    threshold,
                    default_direction,
                    left,
                    right,
                } => {
                    let probs = model.predict_row(&widened)?;
                    widened.extend_from_slice(&probs);
                    let v = widened[*feature];
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

impl LCEForest {
    pub fn input_width(&self) -> usize {
        self.trees.first().map_or(0, |t| t.input_width)
    }

    /// Mean of the per-tree probability vectors for one row.
    pub fn predict_proba_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        let mut acc = vec![0.0; self.n_classes];
        for tree in &self.trees {
            let p = tree.predict_proba(row)?;
            for (slot, v) in acc.iter_mut().zip(p) {
                *slot += v;
            }
        }
        let scale = 1.0 / self.trees.len() as f64;
        for slot in &mut acc {
            *slot *= scale;
        }
        Ok(acc)
    }

    /// Probability matrix (rows x classes); row-parallel, output identical at
    /// any thread count.
    pub fn predict_proba(&self, table: &Matrix) -> Result<Matrix> {
        if table.n_cols() != self.input_width() {
            return Err(Error::dims(format!(
                "table has {} columns, forest expects {}",
                table.n_cols(),
                self.input_width()
            )));
        }
        let rows: Vec<Vec<f64>> = (0..table.n_rows())
            .into_par_iter()
            .map(|i| self.predict_proba_row(&table.row(i)))
            .collect::<Result<Vec<_>>>()?;
        let mut out = Matrix::zeros(table.n_rows(), self.n_classes);
        for (i, row) in rows.iter().enumerate() {
            for (c, &p) in row.iter().enumerate() {
                out.set(i, c, p);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::MISSING;
    use crate::gbt::TreeNode;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // ----- independent Gini oracle -----

    /// Brute force over every (feature, threshold) pair with both missing
    /// assignments scored naively.
    fn oracle_gini_split(
        rows: &[Vec<f64>],
        labels: &[usize],
        n_classes: usize,
    ) -> Option<GiniDecision> {
        let n = rows.len();
        if n < 2 {
            return None;
        }
        let mut parent_counts = vec![0usize; n_classes];
        for &l in labels {
            parent_counts[l] += 1;
        }
        let parent = gini_impurity(&parent_counts, n);

        let mut best: Option<GiniDecision> = None;
        for feature in 0..rows[0].len() {
            let mut present: Vec<f64> =
                rows.iter().map(|r| r[feature]).filter(|v| !is_missing(*v)).collect();
            present.sort_by(|a, b| a.partial_cmp(b).unwrap());
            present.dedup();
            for pair in present.windows(2) {
                let threshold = (pair[0] + pair[1]) / 2.0;
                let score_assignment = |missing: Direction| {
                    let mut left = vec![0usize; n_classes];
                    let mut right = vec![0usize; n_classes];
                    for (i, row) in rows.iter().enumerate() {
                        let v = row[feature];
                        let go_left = if is_missing(v) {
                            missing == Direction::Left
                        } else {
                            v < threshold
                        };
                        if go_left {
                            left[labels[i]] += 1;
                        } else {
                            right[labels[i]] += 1;
                        }
                    }
                    let majority = left.iter().max().copied().unwrap()
                        + right.iter().max().copied().unwrap();
                    (left, right, majority)
                };
                let l = score_assignment(Direction::Left);
                let r = score_assignment(Direction::Right);
                let (left, right, missing) =
                    if r.2 > l.2 { (r.0, r.1, Direction::Right) } else { (l.0, l.1, Direction::Left) };
                let n_l: usize = left.iter().sum();
                let n_r: usize = right.iter().sum();
                let weighted = n_l as f64 / n as f64 * gini_impurity(&left, n_l)
                    + n_r as f64 / n as f64 * gini_impurity(&right, n_r);
                let decrease = parent - weighted;
                let better = match &best {
                    None => true,
                    Some(b) => {
                        decrease > b.decrease
                            || (decrease == b.decrease
                                && (feature < b.feature
                                    || (feature == b.feature && threshold < b.threshold)))
                    }
                };
                if better {
                    best = Some(GiniDecision { feature, threshold, missing, decrease });
                }
            }
        }
        best.filter(|b| b.decrease > 0.0)
    }

    #[test]
    fn gini_split_matches_oracle_on_random_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let value_grid = [0.0, 0.5, 1.0, 1.5, 2.0];
        for case in 0..200 {
            let n = rng.random_range(2..=8);
            let m = rng.random_range(1..=3);
            let k = rng.random_range(2..=4);
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| {
                    (0..m)
                        .map(|_| {
                            if rng.random_range(0..5) == 0 {
                                MISSING
                            } else {
                                value_grid[rng.random_range(0..value_grid.len())]
                            }
                        })
                        .collect()
                })
                .collect();
            let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
            let table = Matrix::from_rows(&rows);
            let ours = gini_split(&table, &labels, k);
            let oracle = oracle_gini_split(&rows, &labels, k);
            match (ours, oracle) {
                (None, None) => {}
                (Some(a), Some(b)) => {
                    assert_eq!(a.feature, b.feature, "case {case}");
                    assert_eq!(a.threshold, b.threshold, "case {case}");
                    assert_eq!(a.missing, b.missing, "case {case}");
                    assert_eq!(a.decrease, b.decrease, "case {case}");
                }
                (a, b) => panic!("case {case}: implementation {a:?} vs oracle {b:?}"),
            }
        }
    }

    #[test]
    fn gini_split_hand_examples() {
        // Perfect split of [0,0,1,1] on [1,2,3,4]: parent impurity 0.5,
        // children pure.
        let table = Matrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0], vec![4.0]]);
        let d = gini_split(&table, &[0, 0, 1, 1], 2).unwrap();
        assert_eq!(d.feature, 0);
        assert_eq!(d.threshold, 2.5);
        assert_eq!(d.decrease, 0.5);

        // The missing row (label 0) joins the left/label-0 side: both
        // children stay pure and the full impurity drop is realized.
        let table = Matrix::from_rows(&[vec![1.0], vec![MISSING], vec![3.0], vec![4.0]]);
        let d = gini_split(&table, &[0, 0, 1, 1], 2).unwrap();
        assert_eq!(d.threshold, 2.0);
        assert_eq!(d.missing, Direction::Left);
        assert_eq!(d.decrease, 0.5);
    }

    #[test]
    fn gini_split_uniform_labels_gives_none() {
        let table = Matrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]);
        assert!(gini_split(&table, &[1, 1, 1], 2).is_none());
    }

    // ----- bootstrapping -----

    #[test]
    fn bootstrap_draws_are_reproducible_and_seed_keyed() {
        let a = bootstrap_indices(4, 9, 0);
        assert_eq!(a, bootstrap_indices(4, 9, 0));
        assert_eq!(a.len(), 4);
        assert!(a.iter().all(|&i| i < 4));
        // Tree index shifts the stream the same way a shifted seed does.
        assert_eq!(bootstrap_indices(4, 9, 2), bootstrap_indices(4, 11, 0));
        assert_ne!(bootstrap_indices(4, 9, 1), a);
    }

    #[test]
    fn bootstrap_fixture_is_frozen() {
        // Draws recorded once for n=4, seed=9, trees 0..3; any change here is
        // a compatibility break for persisted models.
        assert_eq!(bootstrap_indices(4, 9, 0), vec![2, 0, 3, 3]);
        assert_eq!(bootstrap_indices(4, 9, 1), vec![1, 2, 0, 0]);
        assert_eq!(bootstrap_indices(4, 9, 2), vec![1, 1, 3, 0]);
    }

    // ----- cascade structure -----

    fn xor_ish_table() -> (Matrix, Vec<usize>) {
        // Labels follow feature 0 except where feature 1 flips them; enough
        // structure for a cascade to use both levels.
        let rows: Vec<Vec<f64>> = (0..16)
            .map(|i| vec![(i % 4) as f64, (i / 4) as f64, (i % 3) as f64])
            .collect();
        let labels: Vec<usize> =
            (0..16).map(|i| usize::from((i % 4 >= 2) ^ (i / 4 >= 2))).collect();
        (Matrix::from_rows(&rows), labels)
    }

    #[test]
    fn uniform_labels_make_a_class_leaf() {
        let table = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]);
        let tree = fit_lce_tree(&table, &[1, 1, 1], 3, &LCEParams::default(), 0).unwrap();
        assert_eq!(tree.root, CascadeNode::ClassLeaf { class: 1 });
        assert_eq!(tree.predict_proba(&[5.0]).unwrap(), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn depth_zero_tree_is_a_single_terminal_classifier() {
        let (table, labels) = xor_ish_table();
        let params = LCEParams { max_depth: 0, ..LCEParams::default() };
        let tree = fit_lce_tree(&table, &labels, 2, &params, 0).unwrap();
        let CascadeNode::Terminal { model } = &tree.root else {
            panic!("expected a terminal root, got {:?}", tree.root);
        };
        for i in 0..table.n_rows() {
            let row = table.row(i);
            assert_eq!(tree.predict_proba(&row).unwrap(), model.predict_row(&row).unwrap());
        }
    }

    #[test]
    fn cascade_widths_follow_depth() {
        // Every classifier at depth q must expect input_width + q * K
        // columns.
        fn check(node: &CascadeNode, depth: usize, input_width: usize, k: usize) {
            match node {
                CascadeNode::ClassLeaf { .. } => {}
                CascadeNode::Terminal { model } => {
                    assert_eq!(model.n_features, input_width + depth * k);
                }
                CascadeNode::Split { model, feature, left, right, .. } => {
                    assert_eq!(model.n_features, input_width + depth * k);
                    assert!(*feature < input_width + (depth + 1) * k);
                    check(left, depth + 1, input_width, k);
                    check(right, depth + 1, input_width, k);
                }
            }
        }
        let (table, labels) = xor_ish_table();
        let params = LCEParams { max_depth: 2, ..LCEParams::default() };
        let forest = fit_lce(&table, &labels, 2, &params, 3).unwrap();
        for tree in &forest.trees {
            check(&tree.root, 0, 3, 2);
        }
    }

    #[test]
    fn noise_features_lose_the_split_to_a_probability_column() {
        // Raw features carry no signal, so the fitted classifier's training
        // probabilities (which overfit the labels) are the best Gini
        // splitter: the root split must point into the appended block.
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let rows: Vec<Vec<f64>> =
            (0..30).map(|_| (0..2).map(|_| rng.random::<f64>()).collect()).collect();
        let labels: Vec<usize> = (0..30).map(|i| i % 2).collect();
        let table = Matrix::from_rows(&rows);
        let tree = fit_lce_tree(&table, &labels, 2, &LCEParams::default(), 0).unwrap();
        let CascadeNode::Split { feature, .. } = &tree.root else {
            panic!("expected a split at the root, got a terminal");
        };
        assert!(*feature >= 2, "split on raw column {feature}");
    }

    #[test]
    fn deepest_classifier_answers() {
        // Root and child classifiers disagree in argmax; the child must win.
        let params = GBTParams { min_child_weight: 0.0, ..GBTParams::default() };
        let root_model = fit_gbt(
            &Matrix::from_rows(&[vec![0.0], vec![1.0]]),
            &[0, 1],
            2,
            &params,
            0,
        )
        .unwrap();
        let child_table = Matrix::from_rows(&[
            vec![0.0, 0.9, 0.1],
            vec![1.0, 0.1, 0.9],
        ]);
        let child_model = fit_gbt(&child_table, &[1, 0], 2, &params, 0).unwrap();
        let tree = CascadeTree {
            root: CascadeNode::Split {
                model: root_model.clone(),
                feature: 0,
                threshold: 0.5,
                default_direction: Direction::Left,
                left: Box::new(CascadeNode::Terminal { model: child_model.clone() }),
                right: Box::new(CascadeNode::Terminal { model: child_model.clone() }),
            },
            n_classes: 2,
            input_width: 1,
        };
        let out = tree.predict_proba(&[0.0]).unwrap();
        let mut widened = vec![0.0];
        widened.extend(root_model.predict_row(&[0.0]).unwrap());
        assert_eq!(out, child_model.predict_row(&widened).unwrap());
        // Root says class 0 for this row; the child was trained flipped.
        assert!(out[1] > out[0]);
    }

    #[test]
    fn missing_split_feature_follows_stored_direction() {
        let model = fit_gbt(
            &Matrix::from_rows(&[vec![0.0], vec![1.0]]),
            &[0, 1],
            2,
            &GBTParams::default(),
            0,
        )
        .unwrap();
        let tree = CascadeTree {
            root: CascadeNode::Split {
                model,
                feature: 0,
                threshold: 0.5,
                default_direction: Direction::Right,
                left: Box::new(CascadeNode::ClassLeaf { class: 0 }),
                right: Box::new(CascadeNode::ClassLeaf { class: 1 }),
            },
            n_classes: 2,
            input_width: 1,
        };
        assert_eq!(tree.predict_proba(&[MISSING]).unwrap(), vec![0.0, 1.0]);
    }

    // ----- forest behaviour -----

    /// A constant-output classifier: saturated leaf weights make softmax hit
    /// exactly 0 and 1.
    fn saturated_model(hot: usize) -> GBTModel {
        let mut round = Vec::new();
        for class in 0..2 {
            let w = if class == hot { 500.0 } else { -500.0 };
            round.push(TreeNode::Leaf { leaf_weight: w });
        }
        GBTModel {
            n_classes: 2,
            n_features: 1,
            base_score: 0.0,
            params: GBTParams::default(),
            trees: vec![round],
        }
    }

    #[test]
    fn forest_averages_tree_outputs() {
        let forest = LCEForest {
            trees: vec![
                CascadeTree {
                    root: CascadeNode::Terminal { model: saturated_model(0) },
                    n_classes: 2,
                    input_width: 1,
                },
                CascadeTree {
                    root: CascadeNode::Terminal { model: saturated_model(1) },
                    n_classes: 2,
                    input_width: 1,
                },
            ],
            n_classes: 2,
        };
        assert_eq!(forest.predict_proba_row(&[0.0]).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn single_tree_forest_equals_its_tree() {
        let (table, labels) = xor_ish_table();
        let params = LCEParams { n_trees: 1, ..LCEParams::default() };
        let forest = fit_lce(&table, &labels, 2, &params, 5).unwrap();
        let probs = forest.predict_proba(&table).unwrap();
        for i in 0..table.n_rows() {
            let tree_out = forest.trees[0].predict_proba(&table.row(i)).unwrap();
            for c in 0..2 {
                assert_eq!(probs.get(i, c), tree_out[c]);
            }
        }
    }

    #[test]
    fn equal_seeds_give_identical_forests() {
        let (table, labels) = xor_ish_table();
        let params = LCEParams { n_trees: 3, ..LCEParams::default() };
        let a = fit_lce(&table, &labels, 2, &params, 42).unwrap();
        let b = fit_lce(&table, &labels, 2, &params, 42).unwrap();
        assert_eq!(a, b);
        let c = fit_lce(&table, &labels, 2, &params, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn forest_outputs_are_normalized() {
        let (table, labels) = xor_ish_table();
        let params = LCEParams { n_trees: 4, max_depth: 2, ..LCEParams::default() };
        let forest = fit_lce(&table, &labels, 2, &params, 1).unwrap();
        let probs = forest.predict_proba(&table).unwrap();
        for i in 0..table.n_rows() {
            let sum: f64 = (0..2).map(|c| probs.get(i, c)).sum();
            assert!((sum - 1.0).abs() < 1e-9);
            assert!((0..2).all(|c| probs.get(i, c) >= 0.0));
        }
    }

    #[test]
    fn confident_trees_mean_argmax_matches_majority_vote() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n_trees = rng.random_range(1..=9);
            let votes: Vec<usize> = (0..n_trees).map(|_| rng.random_range(0..2)).collect();
            let trees: Vec<CascadeTree> = votes
                .iter()
                .map(|&v| CascadeTree {
                    root: CascadeNode::ClassLeaf { class: v },
                    n_classes: 2,
                    input_width: 1,
                })
                .collect();
            let forest = LCEForest { trees, n_classes: 2 };
            let mean = forest.predict_proba_row(&[0.0]).unwrap();
            let ones = votes.iter().filter(|&&v| v == 1).count();
            if ones * 2 != n_trees {
                let majority = usize::from(ones * 2 > n_trees);
                let argmax = usize::from(mean[1] > mean[0]);
                assert_eq!(argmax, majority);
            }
        }
    }

    #[test]
    fn fit_rejects_bad_inputs() {
        let table = Matrix::from_rows(&[vec![0.0], vec![1.0]]);
        assert!(fit_lce(&Matrix::from_rows(&[]), &[], 2, &LCEParams::default(), 0).is_err());
        assert!(fit_lce(&table, &[0], 2, &LCEParams::default(), 0).is_err());
        assert!(fit_lce(&table, &[0, 7], 2, &LCEParams::default(), 0).is_err());
        let bad = LCEParams { n_trees: 0, ..LCEParams::default() };
        assert!(fit_lce(&table, &[0, 1], 2, &bad, 0).is_err());
        let forest = fit_lce(&table, &[0, 1], 2, &LCEParams::default(), 0).unwrap();
        assert!(forest.predict_proba(&Matrix::from_rows(&[vec![0.0, 1.0]])).is_err());
        assert!(forest.trees[0].predict_proba(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn cascade_node_serializes_with_kind_tags() {
        let leaf = CascadeNode::ClassLeaf { class: 2 };
        let json = serde_json::to_string(&leaf).unwrap();
        assert_eq!(json, r#"{"kind":"class_leaf","class":2}"#);
        let back: CascadeNode = serde_json::from_str(&json).unwrap();
        assert_eq!(back, leaf);
    }
}
