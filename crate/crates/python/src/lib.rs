//! Python bindings: dataset loading and synthesis, training, prediction with
//! window explanations, grid search, and the robustness experiments.
//!
//! Build with `cargo build -p xem-py --release --features extension-module`
//! and import the resulting `libxem_py.so` as `xem_py` (see
//! `python/smoke_test.py` for a loader that handles the rename).

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use xem_core::{
    accuracy, explain_text, fit_xem, generate_synthetic, grid_search, inject_missing,
    inject_noise, missing_data_experiment, noise_experiment, parse_long_csv, parse_ts,
    split_train_test, window_length_from_pct, write_long_csv, znormalize, Error, Grid, LCEParams,
    MTSDataset, ModelFile, SyntheticConfig, XEMModel, XEMParams,
};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn params_from(win_pct: f64, n_trees: usize, max_depth: usize) -> XEMParams {
    let lce = LCEParams { n_trees, max_depth, ..LCEParams::default() };
    XEMParams::new(win_pct, lce)
}

/// A labeled or unlabeled collection of multivariate time series.
#[pyclass(name = "Dataset", skip_from_py_object)]
#[derive(Clone)]
struct PyDataset {
    inner: MTSDataset,
}

#[pymethods]
impl PyDataset {
    /// Parses the long CSV layout (`mts_id,timestamp,dim_1..dim_d[,class]`).
    #[staticmethod]
    fn from_csv(text: &str) -> PyResult<Self> {
        Ok(PyDataset { inner: parse_long_csv(text).map_err(to_py)? })
    }

    /// Parses the `.ts` layout (`@problemName` ... `@data`).
    #[staticmethod]
    fn from_ts(text: &str) -> PyResult<Self> {
        Ok(PyDataset { inner: parse_ts(text).map_err(to_py)? })
    }

    /// Generates the two-class sine/square benchmark.
    #[staticmethod]
    #[pyo3(signature = (n_per_class, length, square_start, square_len, n_squares=1, second_square_start=None, seed=0))]
    fn synthetic(
        n_per_class: usize,
        length: usize,
        square_start: usize,
        square_len: usize,
        n_squares: usize,
        second_square_start: Option<usize>,
        seed: u64,
    ) -> PyResult<Self> {
        let cfg = SyntheticConfig::new(
            n_per_class,
            length,
            square_start,
            square_len,
            n_squares,
            second_square_start,
            seed,
        );
        Ok(PyDataset { inner: generate_synthetic(&cfg).map_err(to_py)? })
    }

    fn to_csv(&self) -> String {
        write_long_csv(&self.inner)
    }

    /// Even-index series to train, odd to test (stratified by construction
    /// for the synthetic sets, which interleave no class).
    fn split(&self) -> PyResult<(Self, Self)> {
        let (train, test) = split_train_test(&self.inner).map_err(to_py)?;
        Ok((PyDataset { inner: train }, PyDataset { inner: test }))
    }

    #[pyo3(signature = (fraction, seed=0))]
    fn inject_missing(&self, fraction: f64, seed: u64) -> PyResult<Self> {
        Ok(PyDataset { inner: inject_missing(&self.inner, fraction, seed).map_err(to_py)? })
    }

    #[pyo3(signature = (sigma, seed=0))]
    fn inject_noise(&self, sigma: f64, seed: u64) -> PyResult<Self> {
        Ok(PyDataset { inner: inject_noise(&self.inner, sigma, seed).map_err(to_py)? })
    }

    fn znormalize(&self) -> PyResult<Self> {
        Ok(PyDataset { inner: znormalize(&self.inner).map_err(to_py)? })
    }

    #[getter]
    fn n_series(&self) -> usize {
        self.inner.series.len()
    }

    #[getter]
    fn n_dims(&self) -> usize {
        self.inner.n_dims
    }

    #[getter]
    fn class_names(&self) -> Vec<String> {
        self.inner.class_names.clone()
    }

    #[getter]
    fn max_length(&self) -> usize {
        self.inner.max_length()
    }

    #[getter]
    fn ids(&self) -> Vec<i64> {
        self.inner.series.iter().map(|s| s.id).collect()
    }

    /// Per-series class name, `None` where unlabeled, in id order.
    #[getter]
    fn labels(&self) -> Vec<Option<String>> {
        self.inner
            .series
            .iter()
            .map(|s| s.label.map(|l| self.inner.class_names[l].clone()))
            .collect()
    }

    /// `values[dim][t]` of the series at `index`.
    fn series_values(&self, index: usize) -> PyResult<Vec<Vec<f64>>> {
        self.inner
            .series
            .get(index)
            .map(|s| s.values.clone())
            .ok_or_else(|| PyValueError::new_err(format!("no series at index {index}")))
    }

    fn __len__(&self) -> usize {
        self.inner.series.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(n_series={}, n_dims={}, classes={:?})",
            self.inner.series.len(),
            self.inner.n_dims,
            self.inner.class_names
        )
    }
}

/// Why a series was classified the way it was.
#[pyclass(name = "Explanation", skip_from_py_object)]
#[derive(Clone)]
struct PyExplanation {
    #[pyo3(get)]
    mts_id: i64,
    /// Predicted class name.
    #[pyo3(get)]
    predicted_class: String,
    #[pyo3(get)]
    predicted_index: usize,
    #[pyo3(get)]
    confidence: f64,
    #[pyo3(get)]
    window_start: usize,
    #[pyo3(get)]
    window_end: usize,
    #[pyo3(get)]
    window_starts: Vec<usize>,
    /// One probability row per window, aligned with `window_starts`.
    #[pyo3(get)]
    per_window_probs: Vec<Vec<f64>>,
    /// The winning window's values, one list of length `window_end -
    /// window_start` per dimension.
    #[pyo3(get)]
    window_values: Vec<Vec<f64>>,
    /// Human-readable report (summary line plus the window as CSV).
    #[pyo3(get)]
    text: String,
}

#[pymethods]
impl PyExplanation {
    fn __repr__(&self) -> String {
        format!(
            "Explanation(mts_id={}, predicted_class={:?}, confidence={:.3}, window=[{}, {}))",
            self.mts_id, self.predicted_class, self.confidence, self.window_start, self.window_end
        )
    }
}

/// Cross-validation outcome for one grid point.
#[pyclass(name = "GridPoint", skip_from_py_object)]
#[derive(Clone)]
struct PyGridPoint {
    #[pyo3(get)]
    win_pct: f64,
    #[pyo3(get)]
    n_trees: usize,
    #[pyo3(get)]
    max_depth: usize,
    #[pyo3(get)]
    fold_accuracies: Vec<f64>,
    #[pyo3(get)]
    mean_accuracy: f64,
}

#[pymethods]
impl PyGridPoint {
    fn __repr__(&self) -> String {
        format!(
            "GridPoint(win_pct={}, n_trees={}, max_depth={}, mean_accuracy={:.3})",
            self.win_pct, self.n_trees, self.max_depth, self.mean_accuracy
        )
    }
}

/// A fitted classifier.
#[pyclass(name = "Model")]
struct PyModel {
    inner: XEMModel,
    seed: u64,
}

#[pymethods]
impl PyModel {
    /// Trains on a labeled dataset.
    #[staticmethod]
    #[pyo3(signature = (train, win_pct=40.0, n_trees=10, max_depth=1, seed=0))]
    fn fit(
        train: &PyDataset,
        win_pct: f64,
        n_trees: usize,
        max_depth: usize,
        seed: u64,
    ) -> PyResult<Self> {
        let params = params_from(win_pct, n_trees, max_depth);
        let inner = fit_xem(&train.inner, &params, seed).map_err(to_py)?;
        Ok(PyModel { inner, seed })
    }

    /// Classifies every series and explains each prediction.
    fn predict(&self, data: &PyDataset) -> PyResult<Vec<PyExplanation>> {
        let explanations = self.inner.predict(&data.inner).map_err(to_py)?;
        Ok(explanations
            .into_iter()
            .map(|e| {
                let text = explain_text(&e, &self.inner.class_names);
                let probs = (0..e.per_window_probs.n_rows())
                    .map(|r| e.per_window_probs.row(r))
                    .collect();
                PyExplanation {
                    mts_id: e.mts_id,
                    predicted_class: self.inner.class_names[e.predicted_class].clone(),
                    predicted_index: e.predicted_class,
                    confidence: e.confidence,
                    window_start: e.window_start,
                    window_end: e.window_end,
                    window_starts: e.window_starts,
                    per_window_probs: probs,
                    window_values: e.window_values,
                    text,
                }
            })
            .collect())
    }

    /// Fraction of `data` whose predicted class matches its label.
    fn score(&self, data: &PyDataset) -> PyResult<f64> {
        let truth = data.inner.labels().map_err(to_py)?;
        let pred: Vec<usize> = self
            .inner
            .predict(&data.inner)
            .map_err(to_py)?
            .iter()
            .map(|e| e.predicted_class)
            .collect();
        accuracy(&pred, &truth).map_err(to_py)
    }

    /// Serializes to the versioned JSON model format.
    fn to_json(&self) -> PyResult<String> {
        ModelFile::new(&self.inner, self.seed, None).to_json().map_err(to_py)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let (inner, seed) = ModelFile::from_json(text).map_err(to_py)?.into_model();
        Ok(PyModel { inner, seed })
    }

    #[getter]
    fn window_length(&self) -> usize {
        self.inner.w
    }

    #[getter]
    fn win_pct(&self) -> f64 {
        self.inner.params.win_pct
    }

    #[getter]
    fn n_trees(&self) -> usize {
        self.inner.params.lce.n_trees
    }

    #[getter]
    fn max_depth(&self) -> usize {
        self.inner.params.lce.max_depth
    }

    #[getter]
    fn n_dims(&self) -> usize {
        self.inner.n_dims
    }

    #[getter]
    fn class_names(&self) -> Vec<String> {
        self.inner.class_names.clone()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.seed
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(win_pct={}, n_trees={}, max_depth={}, window_length={})",
            self.inner.params.win_pct,
            self.inner.params.lce.n_trees,
            self.inner.params.lce.max_depth,
            self.inner.w
        )
    }
}

/// Cross-validates every parameter combination and refits the best; returns
/// `(model, points, best_index)` with `points` in grid order.
#[pyfunction]
#[pyo3(name = "grid_search")]
#[pyo3(signature = (train, win_pcts=None, n_trees=None, max_depths=None, folds=3, seed=0))]
fn py_grid_search(
    train: &PyDataset,
    win_pcts: Option<Vec<f64>>,
    n_trees: Option<Vec<usize>>,
    max_depths: Option<Vec<usize>>,
    folds: usize,
    seed: u64,
) -> PyResult<(PyModel, Vec<PyGridPoint>, usize)> {
    let full = Grid::default();
    let grid = Grid {
        win_pct: win_pcts.unwrap_or(full.win_pct),
        n_trees: n_trees.unwrap_or(full.n_trees),
        max_depth: max_depths.unwrap_or(full.max_depth),
    };
    let cv = grid_search(&train.inner, &grid, folds, seed).map_err(to_py)?;
    let points = cv
        .points
        .into_iter()
        .map(|p| PyGridPoint {
            win_pct: p.win_pct,
            n_trees: p.n_trees,
            max_depth: p.max_depth,
            fold_accuracies: p.fold_accuracies,
            mean_accuracy: p.mean_accuracy,
        })
        .collect();
    Ok((PyModel { inner: cv.model, seed }, points, cv.best_index))
}

/// Test error under missing data; returns `(fraction, mean_error,
/// std_error)` rows.
#[pyfunction]
#[pyo3(signature = (train, test, fractions, win_pct=40.0, n_trees=10, max_depth=1, replications=10, seed=0))]
#[allow(clippy::too_many_arguments)]
fn missing_experiment(
    train: &PyDataset,
    test: &PyDataset,
    fractions: Vec<f64>,
    win_pct: f64,
    n_trees: usize,
    max_depth: usize,
    replications: usize,
    seed: u64,
) -> PyResult<Vec<(f64, f64, f64)>> {
    let params = params_from(win_pct, n_trees, max_depth);
    let rows = missing_data_experiment(&train.inner, &test.inner, &params, &fractions, replications, seed)
        .map_err(to_py)?;
    Ok(rows.into_iter().map(|r| (r.fraction, r.mean_error, r.std_error)).collect())
}

/// Test error under Gaussian noise on z-normalized data; returns `(sigma,
/// error)` rows.
#[pyfunction]
#[pyo3(name = "noise_experiment")]
#[pyo3(signature = (train, test, sigmas, win_pct=40.0, n_trees=10, max_depth=1, seed=0))]
fn py_noise_experiment(
    train: &PyDataset,
    test: &PyDataset,
    sigmas: Vec<f64>,
    win_pct: f64,
    n_trees: usize,
    max_depth: usize,
    seed: u64,
) -> PyResult<Vec<(f64, f64)>> {
    let params = params_from(win_pct, n_trees, max_depth);
    let rows =
        noise_experiment(&train.inner, &test.inner, &params, &sigmas, seed).map_err(to_py)?;
    Ok(rows.into_iter().map(|r| (r.sigma, r.error)).collect())
}

/// Resolves a window percentage to an absolute length.
#[pyfunction]
fn window_length(win_pct: f64, t_max: usize) -> usize {
    window_length_from_pct(win_pct, t_max)
}

#[pymodule]
fn xem_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyExplanation>()?;
    m.add_class::<PyGridPoint>()?;
    m.add_function(wrap_pyfunction!(py_grid_search, m)?)?;
    m.add_function(wrap_pyfunction!(missing_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(py_noise_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(window_length, m)?)?;
    Ok(())
}
