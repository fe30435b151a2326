//! Experiment configuration, sweeps, grid search and result records.

pub mod config;
pub mod grid;
pub mod records;
pub mod sweep;

pub use config::{ExperimentConfig, GridTarget};
pub use grid::{grid_points, grid_search, grid_search_with, GridReport};
pub use records::{improvement_pct, mean_and_se, read_csv, to_csv_string, write_csv, ResultRecord};
pub use sweep::{
    sweep_f, sweep_train_size, test_subset, CellSummary, Progress, SweepFOutput, SweepSizeOutput,
    SIZE_SWEEP_FRACTIONS,
};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DecoderHead, EncoderStack};

/// Pretrained encoder and decoder head as stored on disk (JSON).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub encoder: EncoderStack,
    pub decoder: DecoderHead,
}

impl ModelFile {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Parses and re-checks that the layer shapes chain.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: ModelFile = serde_json::from_str(text)?;
        let encoder = EncoderStack::new(raw.encoder.layers().to_vec())?;
        let head = &raw.decoder.layer;
        for layer in encoder.layers().iter().chain([head]) {
            if layer.biases.len() != layer.fan_out() {
                return Err(Error::shape("layer biases", layer.fan_out(), layer.biases.len()));
            }
        }
        if head.fan_in() != encoder.output_dim() || head.fan_out() != encoder.input_dim() {
            return Err(Error::shape(
                "decoder head",
                format!("{}x{}", encoder.output_dim(), encoder.input_dim()),
                format!("{}x{}", head.fan_in(), head.fan_out()),
            ));
        }
        Ok(ModelFile {
            encoder,
            decoder: raw.decoder,
        })
    }
}
