//! Explainable multivariate time-series classification.
//!
//! A series is sliced into sliding windows, a bagged ensemble of cascade
//! trees (every node a gradient-boosted classifier feeding class
//! probabilities to its children) scores each window, and the single most
//! confident (window, class) cell classifies the series — the winning window
//! doubles as the explanation for the prediction.
//!
//! The crate covers the full pipeline: dataset parsing (`.ts` and long CSV),
//! window extraction, the boosted-tree and cascade-ensemble learners, the
//! window-level classifier with explanations, cross-validated grid search,
//! robustness experiments (missing values, Gaussian noise), and byte-stable
//! model persistence.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod gbt;
pub mod lce;
pub mod matrix;
pub mod model;
pub mod xem;

pub use dataset::{
    generate_synthetic, inject_missing, inject_noise, is_missing, parse_long_csv, parse_ts,
    split_train_test, transform_windows, write_long_csv, znormalize, MTSDataset, Series,
    SyntheticConfig, WindowTable, MISSING,
};
pub use error::{Error, Result};
pub use eval::{
    accuracy, average_rank, grid_search, missing_data_experiment, noise_experiment,
    stratified_kfold, CVResult, Grid, GridPointResult, MissingRow, NoiseRow,
};
pub use gbt::{fit_gbt, find_split, softmax, Direction, GBTModel, GBTParams, SplitDecision};
pub use lce::{
    bootstrap_indices, fit_lce, fit_lce_tree, gini_split, CascadeNode, CascadeTree, GiniDecision,
    LCEForest, LCEParams,
};
pub use matrix::Matrix;
pub use model::{ModelFile, SCHEMA_VERSION};
pub use xem::{
    aggregate, explain_text, fit_xem, window_length_from_pct, write_explanation_csv, Explanation,
    XEMModel, XEMParams,
};
