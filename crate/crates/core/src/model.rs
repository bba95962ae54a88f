//! Model persistence: a versioned JSON envelope around a fitted classifier.
//!
//! Serialization is byte-stable — refitting with the same seed and saving
//! again produces the identical document — so model files can be diffed and
//! checked into experiment records. The optional `fitted_at` stamp is
//! caller-provided for exactly that reason.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lce::{LCEForest, LCEParams};
use crate::xem::{XEMModel, XEMParams};

pub const SCHEMA_VERSION: u32 = 1;

/// The on-disk model document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fitted_at: Option<String>,
    /// Seed the model was fitted with.
    pub seed: u64,
    pub class_names: Vec<String>,
    pub n_dims: usize,
    pub w: usize,
    pub win_pct: f64,
    pub train_max_length: usize,
    pub lce: LCEParams,
    pub forest: LCEForest,
}

impl ModelFile {
    pub fn new(model: &XEMModel, seed: u64, fitted_at: Option<String>) -> Self {
        ModelFile {
            schema_version: SCHEMA_VERSION,
            fitted_at,
            seed,
            class_names: model.class_names.clone(),
            n_dims: model.n_dims,
            w: model.w,
            win_pct: model.params.win_pct,
            train_max_length: model.train_max_length,
            lce: model.params.lce.clone(),
            forest: model.forest.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(json)?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(Error::invalid(format!(
                "model schema version {} not supported (expected {SCHEMA_VERSION})",
                file.schema_version
            )));
        }
        Ok(file)
    }

    /// Rebuilds the usable classifier (and its fit seed).
    pub fn into_model(self) -> (XEMModel, u64) {
        let model = XEMModel {
            forest: self.forest,
            params: XEMParams::new(self.win_pct, self.lce),
            w: self.w,
            n_dims: self.n_dims,
            class_names: self.class_names,
            train_max_length: self.train_max_length,
        };
        (model, self.seed)
    }
}
