//! The time-series classifier: window extraction, ensemble training,
//! max-confidence aggregation, and window-level explanations.
//!
//! A series is classified by scoring every sliding window with the ensemble
//! and taking the single most confident (window, class) cell; the winning
//! window is reported as the explanation for the prediction.

use serde::{Deserialize, Serialize};

use crate::dataset::{is_missing, transform_windows, MTSDataset, Series};
use crate::error::{Error, Result};
use crate::lce::{fit_lce, LCEForest, LCEParams};
use crate::matrix::Matrix;

/// Classifier hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XEMParams {
    /// Window size as a percentage of the longest training series.
    pub win_pct: f64,
    pub lce: LCEParams,
}

impl XEMParams {
    pub fn new(win_pct: f64, lce: LCEParams) -> Self {
        XEMParams { win_pct, lce }
    }

    fn validate(&self) -> Result<()> {
        if !(self.win_pct > 0.0 && self.win_pct <= 100.0) {
            return Err(Error::invalid(format!(
                "win_pct must be in (0, 100], got {}",
                self.win_pct
            )));
        }
        Ok(())
    }
}

/// A fitted classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XEMModel {
    pub forest: LCEForest,
    pub params: XEMParams,
    /// Absolute window length resolved at fit time.
    pub w: usize,
    pub n_dims: usize,
    pub class_names: Vec<String>,
    /// Longest training series; `w` was resolved against it.
    pub train_max_length: usize,
}

/// Why a series was classified the way it was: the winning window and the
/// full per-window probability table behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct Explanation {
    pub mts_id: i64,
    pub predicted_class: usize,
    /// Probability of the winning (window, class) cell.
    pub confidence: f64,
    pub window_start: usize,
    /// Exclusive; always `window_start + w`.
    pub window_end: usize,
    /// Start timestamps of all windows, aligned with `per_window_probs` rows.
    pub window_starts: Vec<usize>,
    /// All window scores (windows x classes), for audit.
    pub per_window_probs: Matrix,
    /// The winning window's values, one `Vec` of length `w` per dimension
    /// (zero-filled past the series end when the window was padded).
    pub window_values: Vec<Vec<f64>>,
}

/// Resolves a window percentage to an absolute length: `win_pct`% of
/// `t_max`, rounded half-up, at least 1.
pub fn window_length_from_pct(win_pct: f64, t_max: usize) -> usize {
    let w = (win_pct / 100.0 * t_max as f64).round() as usize;
    w.max(1)
}

/// Trains a classifier: resolves the window length against the longest
/// training series, slices every series into windows, and fits the ensemble
/// on the window rows with their inherited labels.
pub fn fit_xem(train: &MTSDataset, params: &XEMParams, seed: u64) -> Result<XEMModel> {
    params.validate()?;
    if train.series.is_empty() {
        return Err(Error::invalid("training dataset is empty"));
    }
    let train_max_length = train.max_length();
    let w = window_length_from_pct(params.win_pct, train_max_length);
    let windows = transform_windows(train, w)?;
    let labels = windows.labels_required()?;
    let forest = fit_lce(&windows.table, &labels, train.n_classes(), &params.lce, seed)?;
    Ok(XEMModel {
        forest,
        params: params.clone(),
        w,
        n_dims: train.n_dims,
        class_names: train.class_names.clone(),
        train_max_length,
    })
}

/// Reduces per-window scores to one `(class, confidence, window_start)` per
/// series: the cell of maximal probability, ties going to the earliest
/// window and then the lowest class index. Rows must be grouped by id (as
/// [`transform_windows`] emits them).
pub fn aggregate(
    window_probs: &Matrix,
    mts_ids: &[i64],
    window_starts: &[usize],
) -> Result<Vec<(i64, usize, f64, usize)>> {
    if window_probs.n_rows() != mts_ids.len() || mts_ids.len() != window_starts.len() {
        return Err(Error::invalid(format!(
            "{} probability rows, {} ids, {} window starts",
            window_probs.n_rows(),
            mts_ids.len(),
            window_starts.len()
        )));
    }
    let mut out: Vec<(i64, usize, f64, usize)> = Vec::new();
    for row in 0..window_probs.n_rows() {
        let id = mts_ids[row];
        if out.last().map(|&(last_id, ..)| last_id) != Some(id) {
            out.push((id, 0, f64::NEG_INFINITY, window_starts[row]));
        }
        let best = out.last_mut().expect("group opened above");
        for class in 0..window_probs.n_cols() {
            let p = window_probs.get(row, class);
            if p > best.2 {
                *best = (id, class, p, window_starts[row]);
            }
        }
    }
    Ok(out)
}

impl XEMModel {
    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Classifies every series and explains each prediction with its winning
    /// window. Series may be shorter or longer than the training series; the
    /// trained window length applies regardless (short series are scored as
    /// a single padded window).
    pub fn predict(&self, data: &MTSDataset) -> Result<Vec<Explanation>> {
        if data.n_dims != self.n_dims {
            return Err(Error::dims(format!(
                "data has {} dimensions, model was trained on {}",
                data.n_dims, self.n_dims
            )));
        }
        if data.series.is_empty() {
            return Ok(Vec::new());
        }
        let windows = transform_windows(data, self.w)?;
        let probs = self.forest.predict_proba(&windows.table)?;

        let mut by_id: Vec<&Series> = data.series.iter().collect();
        by_id.sort_by_key(|s| s.id);

        let mut out = Vec::with_capacity(by_id.len());
        let mut row = 0;
        for series in by_id {
            let n_windows = if series.len() >= self.w { series.len() - self.w + 1 } else { 1 };
            let rows = row..row + n_windows;
            debug_assert!(windows.mts_ids[rows.clone()].iter().all(|&id| id == series.id));

            let mut per_window = Matrix::zeros(n_windows, self.n_classes());
            for (local, global) in rows.clone().enumerate() {
                for class in 0..self.n_classes() {
                    per_window.set(local, class, probs.get(global, class));
                }
            }
            let starts = windows.window_starts[rows].to_vec();
            let winners = aggregate(&per_window, &vec![series.id; n_windows], &starts)?;
            let (_, predicted_class, confidence, window_start) = winners[0];

            let window_values = (0..self.n_dims)
                .map(|dim| {
                    (window_start..window_start + self.w)
                        .map(|t| series.values[dim].get(t).copied().unwrap_or(0.0))
                        .collect()
                })
                .collect();
            out.push(Explanation {
                mts_id: series.id,
                predicted_class,
                confidence,
                window_start,
                window_end: window_start + self.w,
                window_starts: starts,
                per_window_probs: per_window,
                window_values,
            });
            row += n_windows;
        }
        Ok(out)
    }
}

/// Renders an explanation as text: the verdict line plus a CSV block of the
/// winning window's values for external plotting.
pub fn explain_text(e: &Explanation, class_names: &[String]) -> String {
    let mut s = format!(
        "mts {}: class {} (confidence {:.3}), window [{}, {})\n",
        e.mts_id, class_names[e.predicted_class], e.confidence, e.window_start, e.window_end
    );
    s.push_str("timestamp");
    for dim in 0..e.window_values.len() {
        s.push_str(&format!(",dim_{}", dim + 1));
    }
    s.push('\n');
    for offset in 0..(e.window_end - e.window_start) {
        s.push_str(&(e.window_start + offset).to_string());
        for dim_values in &e.window_values {
            let v = dim_values[offset];
            if is_missing(v) {
                s.push(',');
            } else {
                s.push_str(&format!(",{v}"));
            }
        }
        s.push('\n');
    }
    s
}

/// Explanation CSV for one series: the whole timeline with the winning
/// window flagged, `timestamp,dim_1..dim_d,in_window`.
pub fn write_explanation_csv(e: &Explanation, series: &Series) -> String {
    let mut s = String::from("timestamp");
    for dim in 0..series.values.len() {
        s.push_str(&format!(",dim_{}", dim + 1));
    }
    s.push_str(",in_window\n");
    for t in 0..series.len() {
        s.push_str(&t.to_string());
        for dim_values in &series.values {
            let v = dim_values[t];
            if is_missing(v) {
                s.push(',');
            } else {
                s.push_str(&format!(",{v}"));
            }
        }
        let in_window = t >= e.window_start && t < e.window_end;
        s.push_str(if in_window { ",1\n" } else { ",0\n" });
    }
    s
}
