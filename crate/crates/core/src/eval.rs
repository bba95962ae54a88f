//! Model selection and robustness measurement: stratified cross-validation,
//! grid search, accuracy and average-rank metrics, and the missing-data /
//! noise experiment drivers.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{inject_missing, inject_noise, znormalize, MTSDataset};
use crate::error::{Error, Result};
use crate::lce::LCEParams;
use crate::xem::{fit_xem, XEMModel, XEMParams};

/// Hyperparameter grid for [`grid_search`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub win_pct: Vec<f64>,
    pub n_trees: Vec<usize>,
    pub max_depth: Vec<usize>,
}

impl Default for Grid {
    /// The full search grid: window sizes 20–100%, 1–100 trees, cascade
    /// depths 0–2.
    fn default() -> Self {
        Grid {
            win_pct: vec![20.0, 40.0, 60.0, 80.0, 100.0],
            n_trees: vec![1, 5, 10, 20, 40, 60, 80, 100],
            max_depth: vec![0, 1, 2],
        }
    }
}

impl Grid {
    fn validate(&self) -> Result<()> {
        if self.win_pct.is_empty() || self.n_trees.is_empty() || self.max_depth.is_empty() {
            return Err(Error::invalid("every grid axis needs at least one value"));
        }
        Ok(())
    }
}

/// Cross-validation outcome for one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPointResult {
    pub win_pct: f64,
    pub n_trees: usize,
    pub max_depth: usize,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
}

/// Full grid-search outcome: every point's fold scores plus the winning
/// model refit on the whole training set.
#[derive(Debug, Clone)]
pub struct CVResult {
    pub points: Vec<GridPointResult>,
    pub best_index: usize,
    pub model: XEMModel,
}

impl CVResult {
    pub fn best(&self) -> &GridPointResult {
        &self.points[self.best_index]
    }
}

/// One row of the missing-data experiment table.
#[derive(Debug, Clone, PartialEq)]
pub struct MissingRow {
    pub fraction: f64,
    pub mean_error: f64,
    pub std_error: f64,
}

/// One row of the noise experiment table.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseRow {
    pub sigma: f64,
    pub error: f64,
}

/// Splits indices into `k` stratified folds: within each class the (seeded,
/// shuffled) members are dealt round-robin, with the dealing cursor carried
/// across classes so total fold sizes also differ by at most one.
pub fn stratified_kfold(labels: &[usize], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let n = labels.len();
    if k < 2 {
        return Err(Error::invalid(format!("need at least 2 folds, got {k}")));
    }
    if k > n {
        return Err(Error::invalid(format!("{k} folds for {n} samples")));
    }
    let n_classes = labels.iter().max().map_or(0, |&m| m + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut cursor = 0usize;
    for members in &mut by_class {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            folds[cursor % k].push(i);
            cursor += 1;
        }
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    Ok(folds)
}

/// Fraction of exact matches.
pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.is_empty() || pred.len() != truth.len() {
        return Err(Error::invalid(format!(
            "{} predictions against {} labels",
            pred.len(),
            truth.len()
        )));
    }
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / pred.len() as f64)
}

fn subset(data: &MTSDataset, idx: &[usize]) -> Result<MTSDataset> {
    MTSDataset::new(
        idx.iter().map(|&i| data.series[i].clone()).collect(),
        data.class_names.clone(),
        data.n_dims,
    )
}

fn predicted_classes(model: &XEMModel, data: &MTSDataset) -> Result<Vec<usize>> {
    Ok(model.predict(data)?.into_iter().map(|e| e.predicted_class).collect())
}

fn test_error(train: &MTSDataset, test: &MTSDataset, params: &XEMParams, seed: u64) -> Result<f64> {
    let model = fit_xem(train, params, seed)?;
    let pred = predicted_classes(&model, test)?;
    Ok(1.0 - accuracy(&pred, &test.labels()?)?)
}

/// Evaluates every grid point with k-fold cross-validation and refits the
/// winner on the full training set. Ties prefer the smaller window, then
/// fewer trees, then the shallower cascade.
pub fn grid_search(train: &MTSDataset, grid: &Grid, k: usize, seed: u64) -> Result<CVResult> {
    grid.validate()?;
    let labels = train.labels()?;
    let folds = stratified_kfold(&labels, k, seed)?;

    let mut axes = grid.clone();
    axes.win_pct.sort_by(|a, b| a.partial_cmp(b).expect("finite percentages"));
    axes.n_trees.sort_unstable();
    axes.max_depth.sort_unstable();

    let mut points = Vec::new();
    let mut best: Option<usize> = None;
    for &win_pct in &axes.win_pct {
        for &n_trees in &axes.n_trees {
            for &max_depth in &axes.max_depth {
                let params = XEMParams::new(
                    win_pct,
                    LCEParams { n_trees, max_depth, ..LCEParams::default() },
                );
                let mut fold_accuracies = Vec::with_capacity(folds.len());
                for fold in &folds {
                    let held_out: Vec<usize> = fold.clone();
                    let kept: Vec<usize> =
                        (0..train.series.len()).filter(|i| !held_out.contains(i)).collect();
                    let model = fit_xem(&subset(train, &kept)?, &params, seed)?;
                    let test = subset(train, &held_out)?;
                    let pred = predicted_classes(&model, &test)?;
                    fold_accuracies.push(accuracy(&pred, &test.labels()?)?);
                }
                let mean_accuracy =
                    fold_accuracies.iter().sum::<f64>() / fold_accuracies.len() as f64;
                points.push(GridPointResult {
                    win_pct,
                    n_trees,
                    max_depth,
                    fold_accuracies,
                    mean_accuracy,
                });
                // Sorted iteration order makes "first strict maximum" the
                // documented tie-break.
                let improved = match best {
                    None => true,
                    Some(b) => mean_accuracy > points[b].mean_accuracy,
                };
                if improved {
                    best = Some(points.len() - 1);
                }
            }
        }
    }

    let best_index = best.expect("grid validated non-empty");
    let winner = &points[best_index];
    let params = XEMParams::new(
        winner.win_pct,
        LCEParams { n_trees: winner.n_trees, max_depth: winner.max_depth, ..LCEParams::default() },
    );
    let model = fit_xem(train, &params, seed)?;
    Ok(CVResult { points, best_index, model })
}

/// Mean rank of each method across datasets. Rank 1 is the highest accuracy
/// in a column; equal values share the mean of their rank range; missing
/// cells rank below every value.
pub fn average_rank(table: &[Vec<Option<f64>>]) -> Result<Vec<f64>> {
    if table.is_empty() || table[0].is_empty() {
        return Err(Error::invalid("rank table needs at least one method and one dataset"));
    }
    let n_methods = table.len();
    let n_datasets = table[0].len();
    if table.iter().any(|row| row.len() != n_datasets) {
        return Err(Error::invalid("rank table rows have unequal lengths"));
    }

    let mut totals = vec![0.0f64; n_methods];
    for d in 0..n_datasets {
        let score = |m: usize| table[m][d].unwrap_or(f64::NEG_INFINITY);
        let mut order: Vec<usize> = (0..n_methods).collect();
        order.sort_by(|&a, &b| score(b).partial_cmp(&score(a)).expect("no NaN accuracies"));
        let mut i = 0;
        while i < n_methods {
            let mut j = i;
            while j + 1 < n_methods && score(order[j + 1]) == score(order[i]) {
                j += 1;
            }
            // Positions i..=j (0-based) share ranks i+1..=j+1.
            let shared = (i + j) as f64 / 2.0 + 1.0;
            for &m in &order[i..=j] {
                totals[m] += shared;
            }
            i = j + 1;
        }
    }
    Ok(totals.into_iter().map(|t| t / n_datasets as f64).collect())
}

/// Measures test error under increasing missing-value fractions.
///
/// For every fraction and replication `r`, both datasets get a fresh missing
/// mask and the model a fresh seed, all derived from `seed + r` (train and
/// test masks use the two halves of a doubled stream so they never collide).
/// Reports the mean error and its standard error across replications.
pub fn missing_data_experiment(
    train: &MTSDataset,
    test: &MTSDataset,
    params: &XEMParams,
    fractions: &[f64],
    replications: usize,
    seed: u64,
) -> Result<Vec<MissingRow>> {
    if replications == 0 {
        return Err(Error::invalid("need at least one replication"));
    }
    let mut rows = Vec::with_capacity(fractions.len());
    for &fraction in fractions {
        let mut errors = Vec::with_capacity(replications);
        for r in 0..replications {
            let rep_seed = seed.wrapping_add(r as u64);
            let train_m = inject_missing(train, fraction, rep_seed.wrapping_mul(2))?;
            let test_m = inject_missing(test, fraction, rep_seed.wrapping_mul(2).wrapping_add(1))?;
            errors.push(test_error(&train_m, &test_m, params, rep_seed)?);
        }
        let mean = errors.iter().sum::<f64>() / replications as f64;
        let std_error = if replications < 2 {
            0.0
        } else {
            let var = errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>()
                / (replications - 1) as f64;
            (var / replications as f64).sqrt()
        };
        rows.push(MissingRow { fraction, mean_error: mean, std_error });
    }
    Ok(rows)
}

/// Measures test error under increasing Gaussian noise. Both datasets are
/// z-normalized first, then noise of each standard deviation is injected
/// (one run per sigma, seeds derived as `seed + sigma index`).
pub fn noise_experiment(
    train: &MTSDataset,
    test: &MTSDataset,
    params: &XEMParams,
    sigmas: &[f64],
    seed: u64,
) -> Result<Vec<NoiseRow>> {
    let train_z = znormalize(train)?;
    let test_z = znormalize(test)?;
    let mut rows = Vec::with_capacity(sigmas.len());
    for (i, &sigma) in sigmas.iter().enumerate() {
        let run_seed = seed.wrapping_add(i as u64);
        let train_n = inject_noise(&train_z, sigma, run_seed.wrapping_mul(2))?;
        let test_n = inject_noise(&test_z, sigma, run_seed.wrapping_mul(2).wrapping_add(1))?;
        rows.push(NoiseRow { sigma, error: test_error(&train_n, &test_n, params, run_seed)? });
    }
    Ok(rows)
}
